#pragma once

// Human annotations: ingestion, agreement, reference labels, judge-human
// alignment and the staged validity gate.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankstab/corpus.hpp"
#include "rankstab/descriptive.hpp"
#include "rankstab/records.hpp"
#include "rankstab/stability.hpp"
#include "rankstab/surface_metrics.hpp"

namespace rankstab {

struct KappaSummary {
    std::optional<double> kappa; // absent when undefined, see note
    std::optional<AgreementBand> band;
    std::size_t n_items = 0;
    int n_raters = 0;
    std::string note;
};

struct AnnotationSet {
    std::vector<AnnotationRecord> records;
    std::vector<LineError> errors;     // malformed or duplicate rows
    std::vector<std::string> excluded; // "<dialogue id>: <reason>"
    KappaSummary coherence;
    KappaSummary fluency;
};

/// Parses `dialogue_id,annotator_id,coherence,fluency[,feedback]` rows; an
/// optional header row is skipped. Quoted fields may contain commas.
LoadResult<AnnotationRecord> read_annotation_csv(const std::filesystem::path& path);

/// `.csv` files go through read_annotation_csv, anything else is read as
/// record lines. Missing file throws DataError.
AnnotationSet ingest_annotations(const std::filesystem::path& path);

/// Agreement over already-parsed records. Kappa uses the dialogues rated by
/// the most common rater count (>= 2); every other dialogue is excluded and
/// reported.
AnnotationSet summarize_annotations(std::vector<AnnotationRecord> records);

struct ReferenceLabel {
    std::string dialogue_id;
    std::optional<int> coherence_ref; // absent on a tied vote
    double fluency_ref = 0.0;         // lower median
    int n_raters = 0;
};

struct ReferenceSet {
    std::vector<ReferenceLabel> labels; // ordered by dialogue id
    std::vector<std::string> excluded;  // "<dialogue id>: <reason>"
    MeanSd coherence;                   // over labels with a coherence vote
    MeanSd fluency;
};

ReferenceSet reference_labels(std::span<const AnnotationRecord> records);

struct AlignmentResult {
    std::size_t n_overlap = 0;
    std::size_t n_coherence = 0; // overlap with a coherence reference
    double rho_coherence = 0.0;
    double rho_fluency = 0.0;
    std::size_t n_models = 0;
    std::optional<double> tau_coherence; // model level, only with >= 2 models
    std::optional<double> tau_fluency;
};

/// Judge records must come from one judge. `dialogue_model` maps dialogue ids
/// to generator models for the model-level comparison and may be empty.
/// Fewer than 10 overlapping dialogues throws DataError.
AlignmentResult judge_human_alignment(std::span<const JudgeScoreRecord> judge_scores,
                                      std::span<const ReferenceLabel> refs,
                                      const std::map<std::string, std::string>& dialogue_model = {});

struct GateThresholds {
    double max_similarity_delta = 0.03;
    double min_rho = 0.5;
};

struct GateVerdict {
    bool stage1_generation_ok = false;
    std::vector<std::string> stage1_evidence;
    std::size_t stage2_sample_size = 0;
    std::map<std::string, double> stage3_rho; // "coherence", "fluency"
    std::map<std::string, double> stage3_tau;
    bool stage3_alignment_ok = false;
    bool stage4_calibration_required = true;
    std::string narrative;

    friend bool operator==(const GateVerdict&, const GateVerdict&) = default;
};

/// Stage 1 compares, per generator model, the intra-model similarity means of
/// all languages; stage 3 needs every correlation at or above min_rho. A
/// missing alignment fails stage 3.
GateVerdict stability_gate(std::span<const CorpusMetrics> surface, const std::optional<AlignmentResult>& alignment,
                           const GateThresholds& thresholds = {});

void to_json(nlohmann::json& j, const KappaSummary& k);
void from_json(const nlohmann::json& j, KappaSummary& k);
void to_json(nlohmann::json& j, const ReferenceLabel& r);
void to_json(nlohmann::json& j, const AlignmentResult& a);
void from_json(const nlohmann::json& j, AlignmentResult& a);
void to_json(nlohmann::json& j, const GateVerdict& g);
void from_json(const nlohmann::json& j, GateVerdict& g);

} // namespace rankstab
