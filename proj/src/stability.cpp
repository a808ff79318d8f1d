#include "rankstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "rankstab/error.hpp"
#include "rankstab/parallel.hpp"
#include "rankstab/random.hpp"

namespace rankstab {

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

/// Average 1-based ranks, ascending by value.
std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

void require_same_length(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("paired vectors differ in length");
    if (x.size() < 2) throw DataError("rank statistics need at least two items");
}

/// Values aligned on a's model order; higher = better.
std::pair<std::vector<double>, std::vector<double>> aligned(const Ranking& a, const Ranking& b) {
    if (a.rank.size() != b.rank.size()) throw DataError("rankings cover different model sets");
    std::vector<double> x, y;
    for (const auto& [model, ra] : a.rank) {
        auto it = b.rank.find(model);
        if (it == b.rank.end()) throw DataError(fmt::format("model '{}' missing from second ranking", model));
        x.push_back(-ra);
        y.push_back(-it->second);
    }
    return {x, y};
}

double mean_stable(std::span<const double> xs) {
    // Offset by the first element so identical replicates average exactly.
    const double base = xs.front();
    double acc = 0.0;
    for (double v : xs) acc += v - base;
    return base + acc / static_cast<double>(xs.size());
}

double cell_mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

std::string_view to_string(PermutationMode m) {
    return m == PermutationMode::exhaustive ? "exhaustive" : "monte_carlo";
}

Ranking rank_models(const std::map<std::string, double>& means) {
    if (means.size() < 2) throw DataError("ranking needs at least two models");
    for (const auto& [model, m] : means) {
        if (std::isnan(m)) throw DataError(fmt::format("mean of model '{}' is NaN", model));
    }
    std::vector<std::pair<std::string, double>> items(means.begin(), means.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Ranking r;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        while (j + 1 < items.size() && items[j + 1].second == items[i].second) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        std::vector<std::string> group;
        for (std::size_t k = i; k <= j; ++k) {
            r.order.push_back(items[k].first);
            r.rank[items[k].first] = avg;
            group.push_back(items[k].first);
        }
        if (group.size() > 1) r.ties.push_back(std::move(group));
        i = j + 1;
    }
    return r;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const int sx = sign(x[i] - x[j]);
            const int sy = sign(y[i] - y[j]);
            if (sx == 0) ++tied_x;
            if (sy == 0) ++tied_y;
            if (sx * sy > 0) ++concordant;
            if (sx * sy < 0) ++discordant;
        }
    }
    const long pairs = static_cast<long>(n * (n - 1) / 2);
    const double denom = std::sqrt(static_cast<double>(pairs - tied_x) * static_cast<double>(pairs - tied_y));
    if (denom == 0.0) return 0.0;
    return static_cast<double>(concordant - discordant) / denom;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

int inversions(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    int count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (sign(x[i] - x[j]) * sign(y[i] - y[j]) < 0) ++count;
        }
    }
    return count;
}

double kendall_tau(const Ranking& a, const Ranking& b) {
    const auto [x, y] = aligned(a, b);
    return kendall_tau_b(x, y);
}

double spearman_rho(const Ranking& a, const Ranking& b) {
    const auto [x, y] = aligned(a, b);
    return spearman(x, y);
}

int count_inversions(const Ranking& a, const Ranking& b) {
    const auto [x, y] = aligned(a, b);
    return inversions(x, y);
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DataError("percentile of an empty sample");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// ---------------------------------------------------------------- matrix

const std::vector<double>& ScoreMatrix::cell(const std::string& model, const std::string& language) const {
    auto it = cells.find({model, language});
    if (it == cells.end()) {
        throw DataError(fmt::format("{}: no scores for model '{}' in language '{}'", metric, model, language));
    }
    return it->second;
}

bool ScoreMatrix::has_language(const std::string& language) const {
    return std::find(languages.begin(), languages.end(), language) != languages.end();
}

std::map<std::string, double> ScoreMatrix::means(const std::string& language) const {
    std::map<std::string, double> out;
    for (const auto& m : models) {
        const auto& v = cell(m, language);
        if (v.empty()) throw DataError(fmt::format("{}: empty cell ({}, {})", metric, m, language));
        out[m] = cell_mean(v);
    }
    return out;
}

void check_pair(const ScoreMatrix& matrix, const LanguagePair& pair, std::size_t min_cell) {
    for (const auto* lang : {&pair.first, &pair.second}) {
        if (!matrix.has_language(*lang)) {
            throw DataError(fmt::format("{}: language '{}' absent, pair incomplete", matrix.metric, *lang));
        }
    }
    if (matrix.models.size() < 2) throw DataError("stability needs at least two models");
    for (const auto& m : matrix.models) {
        for (const auto* lang : {&pair.first, &pair.second}) {
            const auto& v = matrix.cell(m, *lang);
            if (v.size() < min_cell) {
                throw DataError(fmt::format("{}: cell ({}, {}) has {} scores, need {}", matrix.metric, m, *lang,
                                            v.size(), min_cell));
            }
        }
    }
}

namespace {

std::pair<std::vector<double>, std::vector<double>> pair_means(const ScoreMatrix& matrix, const LanguagePair& pair) {
    std::vector<double> a, b;
    for (const auto& m : matrix.models) {
        a.push_back(cell_mean(matrix.cell(m, pair.first)));
        b.push_back(cell_mean(matrix.cell(m, pair.second)));
    }
    return {a, b};
}

} // namespace

StabilityResult point_stability(const ScoreMatrix& matrix, const LanguagePair& pair) {
    check_pair(matrix, pair);
    const auto [a, b] = pair_means(matrix, pair);
    StabilityResult r;
    r.metric = matrix.metric;
    r.pair = pair;
    r.n_models = matrix.models.size();
    r.tau_point = kendall_tau_b(a, b);
    r.rho_point = spearman(a, b);
    r.inversions = inversions(a, b);
    r.max_inversions = static_cast<int>(r.n_models * (r.n_models - 1) / 2);
    r.tau_boot_mean = r.tau_point;
    r.rho_boot_mean = r.rho_point;
    r.tau_ci = {r.tau_point, r.tau_point};
    r.rho_ci = {r.rho_point, r.rho_point};
    return r;
}

StabilityResult bootstrap_stability(const ScoreMatrix& matrix, const LanguagePair& pair,
                                    const BootstrapOptions& options) {
    check_pair(matrix, pair, 2);
    if (options.n_boot == 0) throw DataError("bootstrap needs at least one replicate");
    StabilityResult r = point_stability(matrix, pair);
    r.n_bootstrap = options.n_boot;

    std::vector<const std::vector<double>*> first, second;
    for (const auto& m : matrix.models) {
        first.push_back(&matrix.cell(m, pair.first));
        second.push_back(&matrix.cell(m, pair.second));
    }
    const std::size_t n_models = matrix.models.size();
    std::vector<double> taus(options.n_boot), rhos(options.n_boot);

    parallel_for(options.n_boot, options.threads ? options.threads : hardware_threads(), [&](std::size_t rep) {
        Rng rng(derive_seed(options.seed, rep));
        auto resampled_mean = [&](const std::vector<double>& cell) {
            double sum = 0.0;
            for (std::size_t k = 0; k < cell.size(); ++k) sum += cell[rng.below(cell.size())];
            return sum / static_cast<double>(cell.size());
        };
        std::vector<double> a(n_models), b(n_models);
        for (std::size_t i = 0; i < n_models; ++i) {
            a[i] = resampled_mean(*first[i]);
            b[i] = resampled_mean(*second[i]);
        }
        taus[rep] = kendall_tau_b(a, b);
        rhos[rep] = spearman(a, b);
    });

    r.tau_boot_mean = mean_stable(taus);
    r.rho_boot_mean = mean_stable(rhos);
    std::sort(taus.begin(), taus.end());
    std::sort(rhos.begin(), rhos.end());
    r.tau_ci = {percentile_sorted(taus, 0.025), percentile_sorted(taus, 0.975)};
    r.rho_ci = {percentile_sorted(rhos, 0.025), percentile_sorted(rhos, 0.975)};
    return r;
}

PermutationOutcome permutation_test_means(std::span<const double> first, std::span<const double> second,
                                          const PermutationOptions& options) {
    require_same_length(first, second);
    const std::size_t n = first.size();
    PermutationOutcome out;
    out.observed = inversions(first, second);

    bool exhaustive = false;
    switch (options.mode) {
    case PermutationRequest::automatic: exhaustive = n <= options.exhaustive_limit; break;
    case PermutationRequest::exhaustive: exhaustive = true; break;
    case PermutationRequest::monte_carlo: exhaustive = false; break;
    }
    if (exhaustive && n > 30) throw DataError("exhaustive permutation over more than 30 models");
    const std::size_t threads = options.threads ? options.threads : hardware_threads();

    auto swapped_inversions = [&](auto&& swapped, std::vector<double>& a, std::vector<double>& b) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool s = swapped(i);
            a[i] = s ? second[i] : first[i];
            b[i] = s ? first[i] : second[i];
        }
        return inversions(a, b);
    };

    if (exhaustive) {
        const std::uint64_t total = std::uint64_t{1} << n;
        const std::uint64_t chunk = std::max<std::uint64_t>(1, total / 64);
        const std::size_t n_chunks = static_cast<std::size_t>((total + chunk - 1) / chunk);
        std::vector<std::uint64_t> hits(n_chunks, 0);
        parallel_for(n_chunks, threads, [&](std::size_t c) {
            std::vector<double> a(n), b(n);
            const std::uint64_t end = std::min(total, (c + 1) * chunk);
            for (std::uint64_t mask = c * chunk; mask < end; ++mask) {
                const int inv = swapped_inversions([&](std::size_t i) { return ((mask >> i) & 1U) != 0; }, a, b);
                if (inv >= out.observed) ++hits[c];
            }
        });
        const auto count = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
        out.mode = PermutationMode::exhaustive;
        out.n_assignments = static_cast<std::size_t>(total);
        out.p_value = static_cast<double>(count) / static_cast<double>(total);
        return out;
    }

    if (options.n_perm == 0) throw DataError("Monte Carlo permutation needs n_perm > 0");
    std::vector<unsigned char> hit(options.n_perm, 0);
    parallel_for(options.n_perm, threads, [&](std::size_t k) {
        const auto draw_seed = derive_seed(options.seed, k);
        std::vector<std::uint64_t> words((n + 63) / 64);
        for (std::size_t w = 0; w < words.size(); ++w) words[w] = splitmix64(draw_seed + w);
        std::vector<double> a(n), b(n);
        const int inv = swapped_inversions([&](std::size_t i) { return ((words[i / 64] >> (i % 64)) & 1U) != 0; }, a, b);
        hit[k] = inv >= out.observed;
    });
    const auto count = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
    out.mode = PermutationMode::monte_carlo;
    out.n_assignments = options.n_perm + 1;
    out.p_value = static_cast<double>(count + 1) / static_cast<double>(options.n_perm + 1);
    return out;
}

PermutationOutcome permutation_test(const ScoreMatrix& matrix, const LanguagePair& pair,
                                    const PermutationOptions& options) {
    check_pair(matrix, pair);
    const auto [a, b] = pair_means(matrix, pair);
    return permutation_test_means(a, b, options);
}

StabilityResult analyze_pair(const ScoreMatrix& matrix, const LanguagePair& pair, const BootstrapOptions& bootstrap,
                             const PermutationOptions& permutation) {
    StabilityResult r = bootstrap_stability(matrix, pair, bootstrap);
    const auto p = permutation_test(matrix, pair, permutation);
    r.p_value = p.p_value;
    r.permutation_mode = p.mode;
    r.n_assignments = p.n_assignments;
    return r;
}

// ---------------------------------------------------------------- kappa

double fleiss_kappa(const std::vector<std::vector<int>>& table, int n_raters) {
    if (table.empty()) throw DataError("Fleiss kappa of an empty table");
    if (n_raters < 2) throw DataError("Fleiss kappa needs at least two raters");
    const std::size_t k = table.front().size();
    if (k < 2) throw DataError("Fleiss kappa needs at least two categories");
    const double n = n_raters;
    std::vector<double> column(k, 0.0);
    double p_bar = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& row = table[i];
        if (row.size() != k) throw DataError("Fleiss kappa table rows differ in width");
        long sum = 0, sq = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw DataError("negative count in agreement table");
            sum += row[j];
            sq += static_cast<long>(row[j]) * row[j];
            column[j] += row[j];
        }
        if (sum != n_raters) {
            throw DataError(fmt::format("row {} sums to {}, expected {} raters", i, sum, n_raters));
        }
        p_bar += (static_cast<double>(sq) - n) / (n * (n - 1.0));
    }
    const double items = static_cast<double>(table.size());
    p_bar /= items;
    double p_e = 0.0;
    for (double c : column) {
        const double p = c / (items * n);
        p_e += p * p;
    }
    if (p_e >= 1.0) throw DataError("Fleiss kappa undefined: all ratings fall in one category");
    return (p_bar - p_e) / (1.0 - p_e);
}

AgreementBand classify_agreement(double kappa) {
    if (kappa <= 0.2) return AgreementBand::poor;
    if (kappa <= 0.4) return AgreementBand::fair;
    if (kappa <= 0.6) return AgreementBand::moderate;
    if (kappa <= 0.8) return AgreementBand::substantial;
    return AgreementBand::excellent;
}

std::string_view to_string(AgreementBand b) {
    switch (b) {
    case AgreementBand::poor: return "poor";
    case AgreementBand::fair: return "fair";
    case AgreementBand::moderate: return "moderate";
    case AgreementBand::substantial: return "substantial";
    case AgreementBand::excellent: return "excellent";
    }
    return "poor";
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const StabilityResult& r) {
    j = nlohmann::json{{"metric", r.metric},
                       {"pair", {r.pair.first, r.pair.second}},
                       {"n_models", r.n_models},
                       {"tau_point", r.tau_point},
                       {"tau_boot_mean", r.tau_boot_mean},
                       {"tau_ci", {r.tau_ci.first, r.tau_ci.second}},
                       {"rho_point", r.rho_point},
                       {"rho_boot_mean", r.rho_boot_mean},
                       {"rho_ci", {r.rho_ci.first, r.rho_ci.second}},
                       {"inversions", r.inversions},
                       {"max_inversions", r.max_inversions},
                       {"p_value", r.p_value},
                       {"n_bootstrap", r.n_bootstrap},
                       {"permutation_mode", to_string(r.permutation_mode)},
                       {"n_assignments", r.n_assignments}};
}

void from_json(const nlohmann::json& j, StabilityResult& r) {
    r.metric = j.at("metric").get<std::string>();
    r.pair = {j.at("pair").at(0).get<std::string>(), j.at("pair").at(1).get<std::string>()};
    r.n_models = j.at("n_models").get<std::size_t>();
    r.tau_point = j.at("tau_point").get<double>();
    r.tau_boot_mean = j.at("tau_boot_mean").get<double>();
    r.tau_ci = {j.at("tau_ci").at(0).get<double>(), j.at("tau_ci").at(1).get<double>()};
    r.rho_point = j.at("rho_point").get<double>();
    r.rho_boot_mean = j.at("rho_boot_mean").get<double>();
    r.rho_ci = {j.at("rho_ci").at(0).get<double>(), j.at("rho_ci").at(1).get<double>()};
    r.inversions = j.at("inversions").get<int>();
    r.max_inversions = j.at("max_inversions").get<int>();
    r.p_value = j.at("p_value").get<double>();
    r.n_bootstrap = j.at("n_bootstrap").get<std::size_t>();
    const auto mode = j.at("permutation_mode").get<std::string>();
    if (mode == "exhaustive") {
        r.permutation_mode = PermutationMode::exhaustive;
    } else if (mode == "monte_carlo") {
        r.permutation_mode = PermutationMode::monte_carlo;
    } else {
        throw DataError(fmt::format("unknown permutation mode '{}'", mode));
    }
    r.n_assignments = j.at("n_assignments").get<std::size_t>();
}

} // namespace rankstab
