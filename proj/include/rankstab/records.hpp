#pragma once

// Line-oriented record files: one JSON object per line, UTF-8, append-only.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankstab/error.hpp"

namespace rankstab {

struct LineError {
    std::size_t line = 0; // 1-based
    std::string message;
};

template <class T>
struct LoadResult {
    std::vector<T> records;
    std::vector<LineError> errors;
};

namespace detail {
/// Appends lines; on failure throws DataError naming how many lines made it.
void append_lines(const std::filesystem::path& path, std::span<const std::string> lines);
/// Reads all lines; missing file throws DataError.
std::vector<std::string> read_lines(const std::filesystem::path& path);
bool is_blank(const std::string& line);
} // namespace detail

template <class T>
std::size_t store_records(const std::filesystem::path& path, std::span<const T> records) {
    std::vector<std::string> lines;
    lines.reserve(records.size());
    for (const T& r : records) {
        nlohmann::json j = r;
        lines.push_back(j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
    }
    detail::append_lines(path, lines);
    return lines.size();
}

template <class T>
std::size_t store_records(const std::filesystem::path& path, const std::vector<T>& records) {
    return store_records(path, std::span<const T>(records));
}

template <class T>
LoadResult<T> load_records(const std::filesystem::path& path) {
    LoadResult<T> out;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        try {
            out.records.push_back(nlohmann::json::parse(lines[i]).get<T>());
        } catch (const std::exception& e) {
            out.errors.push_back({i + 1, e.what()});
        }
    }
    return out;
}

/// Overwrites `path` with a single pretty-printed JSON document.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace rankstab
