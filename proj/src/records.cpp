#include "rankstab/records.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <fmt/format.h>

namespace rankstab {
namespace detail {

void append_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot open {} for append (0 records written)", path.string()));
    std::size_t written = 0;
    for (const auto& line : lines) {
        out << line << '\n';
        out.flush();
        if (!out) {
            throw DataError(fmt::format("write to {} failed after {} of {} records", path.string(),
                                        written, lines.size()));
        }
        ++written;
    }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace detail

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << doc.dump(2) << '\n';
    if (!out) throw DataError(fmt::format("write to {} failed", path.string()));
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

} // namespace rankstab
