#pragma once

// Run configuration: a sectioned key = value file (generation, gateway,
// metrics, judge, stats, calibration, simulate). Relative paths resolve
// against the directory of the config file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rankstab/calibration.hpp"
#include "rankstab/genproto.hpp"
#include "rankstab/judge.hpp"
#include "rankstab/labels.hpp"
#include "rankstab/stability.hpp"
#include "rankstab/synthetic.hpp"

namespace rankstab {

enum class RunMode : std::uint8_t { live, replay };

struct RunConfig {
    RunMode mode = RunMode::live;

    // generation.*
    std::vector<std::string> models;
    std::vector<Language> languages{Language::et, Language::fi, Language::hu};
    std::size_t n_per_language = 100;
    SamplingPolicy policy;
    double temperature = 0.7;
    std::optional<int> max_tokens;
    int max_in_flight = 8;
    std::string created_at; // empty: wall clock

    // gateway.*
    std::optional<std::filesystem::path> fixture;
    int retries = 3;
    int backoff_ms = 500;
    double rate_per_min = 0.0;
    int timeout_s = 120;

    // metrics.*
    std::size_t window = 100;
    std::size_t max_pairs = 2000;
    std::uint64_t metrics_seed = 0;
    bool lemmatize_self_bleu = false;
    std::map<Language, std::filesystem::path> stopwords;
    std::map<Language, std::string> lemmatizers;
    std::string embedder = "hashing"; // hashing | http | none
    std::string embedding_model;
    std::string embedding_url;

    // judge.*
    JudgeConfig judge;
    std::optional<std::filesystem::path> templates_dir;
    std::vector<std::string> compare_judges;
    std::optional<Language> compare_language; // empty: first configured language

    // stats.*
    std::size_t n_bootstrap = 1500;
    std::size_t n_perm = 10000;
    std::uint64_t stats_seed = 0;
    double alpha = 0.05;
    std::vector<LanguagePair> pairs; // empty: every pair of languages with scores
    std::vector<ScoreMetric> stability_metrics{kScoreMetrics.begin(), kScoreMetrics.end()};

    // calibration.*
    std::optional<std::filesystem::path> annotations;
    Language calibration_language = Language::et;
    GateThresholds thresholds;

    // simulate.*
    std::size_t sim_models = 6;
    std::size_t sim_dialogues = 100;
    double sim_spacing = 0.3;
    bool sim_planted_reversal = true;
    std::vector<double> noise_grid{0.5, 1.0, 2.0, 4.0};
    std::size_t sim_reps = 200;
    std::uint64_t sim_seed = 0;
    ScoreMode sim_mode = ScoreMode::clip_round;
};

/// Throws ConfigError naming the offending key ("judge.sample_size: ...").
RunConfig load_config(const std::filesystem::path& path);

/// Applies --seed to every seeded section.
void override_seed(RunConfig& cfg, std::uint64_t seed);

std::optional<RunMode> parse_run_mode(std::string_view s);

} // namespace rankstab
