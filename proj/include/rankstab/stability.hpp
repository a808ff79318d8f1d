#pragma once

// Cross-language ranking stability: rankings, Kendall tau-b, Spearman rho,
// inversion counts, bootstrap intervals, the per-model language-swap
// permutation test, and Fleiss' kappa.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rankstab {

struct Ranking {
    /// Models from best (highest mean) to worst.
    std::vector<std::string> order;
    /// 1-based rank per model; tied models share the average of their positions.
    std::map<std::string, double> rank;
    /// Groups of models with exactly equal means (only groups of size >= 2).
    std::vector<std::vector<std::string>> ties;

    bool has_ties() const { return !ties.empty(); }
};

/// Descending by mean. Fewer than two models or a NaN mean throws DataError.
Ranking rank_models(const std::map<std::string, double>& means);

/// Tau-b. Rankings must cover the same model set. A side that is entirely
/// tied carries no ordinal information and yields 0.
double kendall_tau(const Ranking& a, const Ranking& b);
double spearman_rho(const Ranking& a, const Ranking& b);
/// Unordered model pairs ordered strictly oppositely in the two rankings.
int count_inversions(const Ranking& a, const Ranking& b);

/// The same statistics on paired value vectors (higher value = better).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);
int inversions(std::span<const double> x, std::span<const double> y);

/// Linear-interpolation percentile of an ascending-sorted sample, q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);

/// Per-dialogue scores of one metric for every (model, language) cell.
struct ScoreMatrix {
    std::string metric;
    std::vector<std::string> models;
    std::vector<std::string> languages;
    std::map<std::pair<std::string, std::string>, std::vector<double>> cells;

    const std::vector<double>& cell(const std::string& model, const std::string& language) const;
    bool has_language(const std::string& language) const;
    /// Means of one language, keyed by model.
    std::map<std::string, double> means(const std::string& language) const;
};

struct LanguagePair {
    std::string first;
    std::string second;

    friend bool operator==(const LanguagePair&, const LanguagePair&) = default;
};

enum class PermutationMode : std::uint8_t { exhaustive, monte_carlo };
enum class PermutationRequest : std::uint8_t { automatic, exhaustive, monte_carlo };

std::string_view to_string(PermutationMode m);

struct StabilityResult {
    std::string metric;
    LanguagePair pair;
    std::size_t n_models = 0;
    double tau_point = 0.0;
    double tau_boot_mean = 0.0;
    std::pair<double, double> tau_ci{0.0, 0.0};
    double rho_point = 0.0;
    double rho_boot_mean = 0.0;
    std::pair<double, double> rho_ci{0.0, 0.0};
    int inversions = 0;
    int max_inversions = 0;
    double p_value = 1.0;
    std::size_t n_bootstrap = 0;
    PermutationMode permutation_mode = PermutationMode::exhaustive;
    std::size_t n_assignments = 0;

    friend bool operator==(const StabilityResult&, const StabilityResult&) = default;
};

struct BootstrapOptions {
    std::size_t n_boot = 1500;
    std::uint64_t seed = 0;
    std::size_t threads = 0; // 0: hardware concurrency
};

struct PermutationOptions {
    std::size_t n_perm = 10000;
    std::uint64_t seed = 0;
    PermutationRequest mode = PermutationRequest::automatic;
    std::size_t exhaustive_limit = 20; // automatic mode enumerates up to this many models
    std::size_t threads = 0;
};

struct PermutationOutcome {
    double p_value = 1.0;
    int observed = 0;
    PermutationMode mode = PermutationMode::exhaustive;
    std::size_t n_assignments = 0;
};

/// Checks both languages exist, every model has both cells, and cells hold
/// at least `min_cell` scores. Throws DataError otherwise.
void check_pair(const ScoreMatrix& matrix, const LanguagePair& pair, std::size_t min_cell = 1);

/// Point estimates only: tau, rho and inversions of the full-sample rankings.
StabilityResult point_stability(const ScoreMatrix& matrix, const LanguagePair& pair);

/// Point estimates plus bootstrap means and percentile 95% intervals of tau
/// and rho. Dialogues are resampled within every (model, language) cell;
/// replicate r draws from its own stream derived from (seed, r).
StabilityResult bootstrap_stability(const ScoreMatrix& matrix, const LanguagePair& pair,
                                    const BootstrapOptions& options = {});

/// One-sided test on the inversion count. The null swaps, per model, the two
/// language cells; the identity assignment is always counted.
PermutationOutcome permutation_test(const ScoreMatrix& matrix, const LanguagePair& pair,
                                    const PermutationOptions& options = {});

/// Inversion-count permutation test on cell means directly.
PermutationOutcome permutation_test_means(std::span<const double> first, std::span<const double> second,
                                          const PermutationOptions& options = {});

StabilityResult analyze_pair(const ScoreMatrix& matrix, const LanguagePair& pair,
                             const BootstrapOptions& bootstrap, const PermutationOptions& permutation);

/// Fleiss' kappa of an item x category count table; every row must sum to
/// n_raters (>= 2) and there must be at least two categories.
double fleiss_kappa(const std::vector<std::vector<int>>& table, int n_raters);

enum class AgreementBand : std::uint8_t { poor, fair, moderate, substantial, excellent };

AgreementBand classify_agreement(double kappa);
std::string_view to_string(AgreementBand b);

void to_json(nlohmann::json& j, const StabilityResult& r);
void from_json(const nlohmann::json& j, StabilityResult& r);

} // namespace rankstab
