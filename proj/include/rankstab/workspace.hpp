#pragma once

// On-disk layout of a run:
//   dialogues/<lang>/<model>.jsonl      judge_scores/<lang>/<model>.jsonl
//   lra/<lang>/<model>.jsonl            metrics/<lang>/<model>.jsonl
//   judge_scores/summary.jsonl          lra/summary.jsonl
//   metrics/summary.jsonl               lra/judge_comparison.json
//   stability.jsonl                     calibration.json
//   simulate/power.csv                  report.md, plot_data/stability.csv

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rankstab/labels.hpp"

namespace rankstab {

/// File-name form of a model id: [A-Za-z0-9._-] kept, everything else '_'.
std::string file_slug(std::string_view model);

class Workspace {
public:
    explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path dialogues(Language lang, std::string_view model) const;
    std::filesystem::path judge_scores(Language lang, std::string_view model) const;
    std::filesystem::path lra(Language lang, std::string_view model) const;
    std::filesystem::path metrics(Language lang, std::string_view model) const;

    std::filesystem::path judge_summary() const { return root_ / "judge_scores" / "summary.jsonl"; }
    std::filesystem::path lra_summary() const { return root_ / "lra" / "summary.jsonl"; }
    std::filesystem::path metrics_summary() const { return root_ / "metrics" / "summary.jsonl"; }
    std::filesystem::path judge_comparison() const { return root_ / "lra" / "judge_comparison.json"; }
    std::filesystem::path stability() const { return root_ / "stability.jsonl"; }
    std::filesystem::path calibration() const { return root_ / "calibration.json"; }
    std::filesystem::path power() const { return root_ / "simulate" / "power.csv"; }
    std::filesystem::path report() const { return root_ / "report.md"; }
    std::filesystem::path plot_data() const { return root_ / "plot_data" / "stability.csv"; }

    /// Every dialogues/<lang>/*.jsonl file, sorted by path.
    std::vector<std::pair<Language, std::filesystem::path>> dialogue_files() const;

private:
    std::filesystem::path root_;
};

/// Removes `path` if present and creates its parent directory.
void reset_output(const std::filesystem::path& path);

} // namespace rankstab
