#include "rankstab/workspace.hpp"

#include <algorithm>
#include <cctype>

#include "rankstab/error.hpp"

namespace rankstab {

std::string file_slug(std::string_view model) {
    std::string out;
    for (unsigned char c : model) {
        out += (std::isalnum(c) || c == '.' || c == '_' || c == '-') ? static_cast<char>(c) : '_';
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

namespace {

std::filesystem::path cell(const std::filesystem::path& root, const char* kind, Language lang, std::string_view model) {
    return root / kind / std::string(to_string(lang)) / (file_slug(model) + ".jsonl");
}

} // namespace

std::filesystem::path Workspace::dialogues(Language lang, std::string_view model) const {
    return cell(root_, "dialogues", lang, model);
}
std::filesystem::path Workspace::judge_scores(Language lang, std::string_view model) const {
    return cell(root_, "judge_scores", lang, model);
}
std::filesystem::path Workspace::lra(Language lang, std::string_view model) const {
    return cell(root_, "lra", lang, model);
}
std::filesystem::path Workspace::metrics(Language lang, std::string_view model) const {
    return cell(root_, "metrics", lang, model);
}

std::vector<std::pair<Language, std::filesystem::path>> Workspace::dialogue_files() const {
    std::vector<std::pair<Language, std::filesystem::path>> out;
    for (auto lang : kLanguages) {
        const auto dir = root_ / "dialogues" / std::string(to_string(lang));
        if (!std::filesystem::is_directory(dir)) continue;
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (auto& f : files) out.emplace_back(lang, std::move(f));
    }
    return out;
}

void reset_output(const std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    if (ec) throw DataError("cannot remove " + path.string() + ": " + ec.message());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create " + path.parent_path().string() + ": " + ec.message());
}

} // namespace rankstab
