#pragma once

// LLM-as-a-judge: rubric scoring (G/R/C/F), label recovery (LRA) and
// multi-judge comparison.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rankstab/corpus.hpp"
#include "rankstab/gateway.hpp"

namespace rankstab {

enum class ScoreMetric : std::uint8_t { grammar, readability, coherence, fluency, lra };

inline constexpr std::array<ScoreMetric, 5> kScoreMetrics = {
    ScoreMetric::grammar, ScoreMetric::readability, ScoreMetric::coherence, ScoreMetric::fluency,
    ScoreMetric::lra};

std::string_view to_string(ScoreMetric m);     // "grammar", ...
std::string_view short_name(ScoreMetric m);    // "G", "R", "C", "F", "LRA"
std::string_view display_name(ScoreMetric m);  // "Grammar (G)", ...
std::optional<ScoreMetric> parse_score_metric(std::string_view s);

struct JudgeConfig {
    std::string judge_model;
    Language prompt_language = Language::en;
    std::size_t sample_size = 100;
    std::string rubric_template_id = "rubric";
    std::string lra_template_id = "lra";
    std::uint64_t seed = 0;
    double temperature = 0.0;
    int max_in_flight = 8;
};

/// Prompt templates keyed by (template id, language). English rubric and LRA
/// templates are built in; other languages must be supplied as vetted files
/// named `<template_id>.<lang>.txt`. In a file, a line `=== USER ===` separates
/// system text from user text.
class TemplateStore {
public:
    TemplateStore();

    /// Loads every `<id>.<lang>.txt` in `dir`; later loads override earlier ones.
    void load_directory(const std::filesystem::path& dir);
    void add(std::string template_id, Language language, std::string system_text, std::string user_text);

    struct Template {
        std::string system;
        std::string user;
    };
    /// Throws ConfigError when the template or its translation is missing.
    const Template& get(const std::string& template_id, Language language) const;

private:
    std::map<std::pair<std::string, Language>, Template> templates_;
    std::map<std::string, bool> known_ids_;
};

/// "AGENT (id): text" / "CUSTOMER: text" lines.
std::string serialize_conversation(const Dialogue& d);

std::string_view score_format_instruction();
std::string_view score_format_reminder();
std::string_view classification_format_instruction();

ChatRequest render_judge_prompt(const Dialogue& dialogue, const std::string& template_id,
                                Language prompt_language, const TemplateStore& templates,
                                const std::string& judge_model = {}, double temperature = 0.0);

ChatRequest render_lra_prompt(const Dialogue& dialogue, const std::string& template_id,
                              Language prompt_language, const TemplateStore& templates,
                              const std::string& judge_model = {}, double temperature = 0.0);

struct RubricScores {
    int grammar = 0;
    int readability = 0;
    int coherence = 0;
    int fluency = 0;
};

/// Either scores or a failure message; failures are data, never exceptions.
struct JudgeParse {
    std::optional<RubricScores> scores;
    std::string failure;
    std::string raw;
};

JudgeParse parse_judge_scores(std::string_view completion);

struct ClassificationParse {
    std::optional<std::map<Category, std::string>> labels; // matched or UNPARSEABLE
    std::string explanation;
    std::string failure;
};

/// Case-fold, punctuation to spaces, collapse and trim.
std::string normalize_label(std::string_view s);
/// Member of the category's closed set, or UNPARSEABLE.
std::string match_label(Category c, std::string_view prediction);

ClassificationParse parse_classification(std::string_view completion);

/// `sample_size` dialogues chosen by a seeded hash of their ids, so the choice
/// depends only on (seed, set of ids). Result is ordered by id.
std::vector<const Dialogue*> sample_dialogues(std::span<const Dialogue> dialogues, std::size_t sample_size,
                                              std::uint64_t seed);

struct MetricAggregate {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    std::vector<double> values; // per dialogue, for resampling
};

struct AggregateScores {
    std::string generator_model;
    Language language = Language::et;
    std::string judge_model;
    Language prompt_language = Language::en;
    std::map<ScoreMetric, MetricAggregate> metrics;
    std::size_t requested = 0;
    std::size_t failures = 0;
    bool unreliable = false; // more than 20% of requests failed
};

AggregateScores aggregate_scores(std::span<const JudgeScoreRecord> records);
MetricAggregate aggregate_values(std::vector<double> values);

struct JudgeRun {
    std::vector<JudgeScoreRecord> records;
    AggregateScores aggregate;
    std::vector<std::string> failures;
};

/// Dialogues must come from one (generator model, language) cell.
JudgeRun judge_corpus(std::span<const Dialogue> dialogues, const JudgeConfig& cfg,
                      const TemplateStore& templates, Gateway& gateway);

struct LRARun {
    std::vector<LRARecord> records;
    std::map<Category, double> accuracy;
    double overall = 0.0; // unweighted mean of the five category accuracies
    AggregateScores aggregate; // metric lra: per-dialogue fraction correct
    std::vector<std::string> failures;
};

/// Per-category accuracy and overall LRA of already-collected records.
void summarize_lra(LRARun& run);

LRARun run_lra(std::span<const Dialogue> dialogues, const JudgeConfig& cfg, const TemplateStore& templates,
               Gateway& gateway);

struct JudgeComparison {
    std::vector<std::string> judges;
    std::vector<std::string> cells; // "model/category" labels of the compared vector
    std::map<std::string, std::vector<double>> cell_accuracy; // per judge
    std::map<std::string, LRARun> runs;                        // per judge and model: key "judge|model"
    std::vector<std::vector<double>> rho;                      // pairwise Spearman
    double mean_rho = 0.0;                                     // over unordered pairs
};

/// Runs LRA for every judge over the same per-model samples and correlates
/// their (model, category) accuracy vectors.
JudgeComparison compare_judges(std::span<const std::string> judge_ids, std::span<const Dialogue> dialogues,
                               const JudgeConfig& cfg, const TemplateStore& templates, Gateway& gateway);

/// Spearman matrix from already-computed per-judge accuracy vectors.
void correlate_judges(JudgeComparison& cmp);

/// What gets persisted per LRA cell; per-dialogue values live in the aggregate.
struct LRASummary {
    AggregateScores aggregate;
    std::map<Category, double> accuracy;
    double overall = 0.0;
};

LRASummary summary_of(const LRARun& run);

void to_json(nlohmann::json& j, const AggregateScores& a);
void from_json(const nlohmann::json& j, AggregateScores& a);
void to_json(nlohmann::json& j, const LRASummary& s);
void from_json(const nlohmann::json& j, LRASummary& s);
/// Judges, cells, accuracy vectors, rho matrix and mean; runs are not stored.
void to_json(nlohmann::json& j, const JudgeComparison& c);
void from_json(const nlohmann::json& j, JudgeComparison& c);

} // namespace rankstab
