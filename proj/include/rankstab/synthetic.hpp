#pragma once

// Planted-structure score matrices for validating the statistics offline.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankstab/stability.hpp"

namespace rankstab {

enum class ScoreMode : std::uint8_t { clip_round, clip, raw };

struct PlantedWorld {
    std::vector<std::string> models; // ranking order of the output matrix
    std::map<std::string, double> true_quality;
    /// Keyed by (language, model); missing entries mean no bias.
    std::map<std::pair<std::string, std::string>, double> bias;
    double noise_sd = 0.0;
    std::size_t n_dialogues_per_cell = 100;
    double lo = 0.0;
    double hi = 3.0;
    ScoreMode mode = ScoreMode::clip_round;
    std::uint64_t seed = 0;
};

/// Throws ConfigError on fewer than two models, a model without quality,
/// negative noise, fewer than two dialogues per cell or lo >= hi.
void validate_world(const PlantedWorld& world);

/// Every cell draws from its own stream derived from (seed, model, language),
/// so adding a language never changes the others.
ScoreMatrix synth_matrix(const PlantedWorld& world, std::span<const std::string> languages,
                         std::string metric = "synthetic");

/// `n` models named m0..m{n-1} with evenly spaced qualities `spacing` apart,
/// best first, starting at `top`.
PlantedWorld evenly_spaced_world(std::size_t n, double top, double spacing);

/// Biases `language` so its order is the exact reverse of the planted one.
/// The weakest model is lifted above every true quality and the others are
/// pushed below the weakest one, so swapping any proper subset of models
/// between languages breaks the reversal. Throws ConfigError when the score
/// range leaves no room for that.
void plant_reversal(PlantedWorld& world, const std::string& language);

struct PowerOptions {
    std::vector<double> noise_grid;
    std::size_t n_reps = 200;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    LanguagePair pair{"A", "B"};
    PermutationOptions permutation; // seed is overridden per replicate
    std::size_t threads = 0;
};

struct PowerRow {
    double noise_sd = 0.0;
    std::size_t n_reps = 0;
    std::size_t detections = 0; // p < alpha
    double rate = 0.0;
    double mean_inversions = 0.0;
    std::vector<double> p_values; // per replicate
};

/// One row per noise level: the share of replicate worlds whose permutation
/// p-value falls below alpha. Replicate r at grid index g uses seed
/// derive_seed(derive_seed(seed, g), r).
std::vector<PowerRow> power_analysis(const PlantedWorld& world_template, const PowerOptions& options);

} // namespace rankstab
