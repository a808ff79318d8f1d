#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "../oracles/oracles.hpp"
#include "rankstab/error.hpp"
#include "rankstab/random.hpp"
#include "rankstab/stability.hpp"
#include "rankstab/synthetic.hpp"

using namespace rankstab;

namespace {

std::map<std::string, double> as_means(const std::vector<double>& v) {
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < v.size(); ++i) m["m" + std::to_string(i)] = v[i];
    return m;
}

ScoreMatrix two_language(const std::vector<std::vector<double>>& first, const std::vector<std::vector<double>>& second) {
    ScoreMatrix m;
    m.metric = "x";
    m.languages = {"a", "b"};
    for (std::size_t i = 0; i < first.size(); ++i) {
        const auto name = "m" + std::to_string(i);
        m.models.push_back(name);
        m.cells[{name, "a"}] = first[i];
        m.cells[{name, "b"}] = second[i];
    }
    return m;
}

} // namespace

TEST_CASE("rankings: descending order, average ranks, tie groups") {
    auto r = rank_models({{"a", 1.0}, {"b", 3.0}, {"c", 3.0}, {"d", 0.5}});
    CHECK(r.order.front() != "a");
    CHECK(r.rank.at("b") == 1.5);
    CHECK(r.rank.at("c") == 1.5);
    CHECK(r.rank.at("a") == 3.0);
    CHECK(r.rank.at("d") == 4.0);
    REQUIRE(r.ties.size() == 1);
    CHECK(r.ties[0] == std::vector<std::string>{"b", "c"});
    CHECK_THROWS_AS(rank_models({{"a", 1.0}}), DataError);
    CHECK_THROWS_AS(rank_models({{"a", 1.0}, {"b", std::nan("")}}), DataError);
}

TEST_CASE("kendall tau and inversions: identity, reversal, adjacent swap") {
    const std::vector<double> x{6, 5, 4, 3, 2, 1};
    std::vector<double> rev(x.rbegin(), x.rend());
    CHECK(kendall_tau_b(x, x) == 1.0);
    CHECK(kendall_tau_b(x, rev) == -1.0);
    CHECK(inversions(x, x) == 0);
    CHECK(inversions(x, rev) == 15);
    std::vector<double> swapped = x;
    std::swap(swapped[2], swapped[3]);
    CHECK(inversions(x, swapped) == 1);
    CHECK(kendall_tau_b(x, swapped) == doctest::Approx(1.0 - 2.0 / 15.0).epsilon(1e-15));
}

TEST_CASE("rank statistics match brute-force oracles on random tied data") {
    Rng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.below(9);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = double(rng.below(4));
        for (auto& v : y) v = double(rng.below(4));
        CHECK(inversions(x, y) == oracle::inversions(x, y));
        CHECK(kendall_tau_b(x, y) == doctest::Approx(oracle::tau_b(x, y)).epsilon(1e-12));
        const bool flat = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
                          std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
        if (!flat) CHECK(spearman(x, y) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("ranking overloads agree with the value overloads") {
    const std::vector<double> a{0.3, 0.9, 0.1, 0.5}, b{0.2, 0.4, 0.6, 0.8};
    const auto ra = rank_models(as_means(a)), rb = rank_models(as_means(b));
    CHECK(kendall_tau(ra, rb) == doctest::Approx(kendall_tau_b(a, b)));
    CHECK(spearman_rho(ra, rb) == doctest::Approx(spearman(a, b)));
    CHECK(count_inversions(ra, rb) == inversions(a, b));
}

TEST_CASE("property: symmetry and negation under reversal") {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> x(7), y(7);
        for (auto& v : x) v = rng.uniform();
        for (auto& v : y) v = rng.uniform();
        CHECK(kendall_tau_b(x, y) == doctest::Approx(kendall_tau_b(y, x)));
        std::vector<double> neg(y.size());
        std::transform(y.begin(), y.end(), neg.begin(), [](double v) { return -v; });
        CHECK(kendall_tau_b(x, neg) == doctest::Approx(-kendall_tau_b(x, y)));
        CHECK(inversions(x, y) + inversions(x, neg) == 21);
        const double tau = kendall_tau_b(x, y);
        CHECK(tau >= -1.0);
        CHECK(tau <= 1.0);
    }
}

TEST_CASE("fully tied side gives tau 0") {
    const std::vector<double> x{1, 2, 3}, flat{2, 2, 2};
    CHECK(kendall_tau_b(x, flat) == 0.0);
    CHECK(inversions(x, flat) == 0);
}

TEST_CASE("percentiles interpolate linearly") {
    const std::vector<double> v{1, 2, 3, 4, 10};
    CHECK(percentile_sorted(v, 0.0) == 1.0);
    CHECK(percentile_sorted(v, 1.0) == 10.0);
    CHECK(percentile_sorted(v, 0.5) == 3.0);
    CHECK(percentile_sorted(v, 0.9) == doctest::Approx(oracle::percentile(v, 0.9)));
    CHECK(percentile_sorted(v, 0.025) == doctest::Approx(oracle::percentile(v, 0.025)));
}

TEST_CASE("check_pair reports missing languages and thin cells") {
    auto m = two_language({{1, 2}, {3, 4}}, {{1, 2}, {3, 4}});
    CHECK_NOTHROW(check_pair(m, {"a", "b"}));
    CHECK_THROWS_WITH_AS(check_pair(m, {"a", "c"}), doctest::Contains("pair incomplete"), DataError);
    CHECK_THROWS_AS(check_pair(two_language({{1}, {3, 4}}, {{1, 2}, {3, 4}}), {"a", "b"}, 2), DataError);
    CHECK_THROWS_AS(bootstrap_stability(two_language({{1}, {3, 4}}, {{1, 2}, {3, 4}}), {"a", "b"}), DataError);
}

TEST_CASE("bootstrap: zero-variance cells collapse the interval onto the point") {
    auto m = two_language({{3, 3, 3}, {2, 2, 2}, {1, 1, 1}}, {{2, 2}, {3, 3}, {1, 1}});
    const auto r = bootstrap_stability(m, {"a", "b"}, {200, 1, 1});
    CHECK(r.tau_ci.first == r.tau_point);
    CHECK(r.tau_ci.second == r.tau_point);
    CHECK(r.tau_boot_mean == doctest::Approx(r.tau_point).epsilon(1e-15));
    CHECK(r.rho_ci.first == r.rho_point);
    CHECK(r.n_bootstrap == 200);
}

TEST_CASE("bootstrap: deterministic per seed, independent of thread count") {
    PlantedWorld w = evenly_spaced_world(5, 2.5, 0.3);
    w.noise_sd = 1.0;
    w.n_dialogues_per_cell = 20;
    w.seed = 8;
    const std::vector<std::string> langs{"a", "b"};
    const auto m = synth_matrix(w, langs);
    const auto r1 = bootstrap_stability(m, {"a", "b"}, {300, 42, 1});
    const auto r2 = bootstrap_stability(m, {"a", "b"}, {300, 42, 4});
    const auto r3 = bootstrap_stability(m, {"a", "b"}, {300, 43, 1});
    CHECK(r1 == r2);
    CHECK_FALSE(r1 == r3);
}

TEST_CASE("bootstrap mean and interval match a hand-rolled resampler with the same streams") {
    auto m = two_language({{1, 2, 3, 4}, {2, 3, 1, 0}, {0.5, 0.5, 4, 1}}, {{0, 1, 1, 2}, {3, 3, 3, 1}, {2, 2, 0, 1}});
    const std::size_t B = 100;
    const auto r = bootstrap_stability(m, {"a", "b"}, {B, 77, 1});
    // Same draw order as documented: per replicate stream, models in order, first then second language.
    std::vector<double> taus;
    for (std::size_t b = 0; b < B; ++b) {
        Rng rng(derive_seed(77, b));
        std::vector<double> ma, mb;
        for (const auto& model : m.models) {
            for (const auto* lang : {"a", "b"}) {
                const auto& cell = m.cells.at({model, lang});
                double s = 0;
                for (std::size_t k = 0; k < cell.size(); ++k) s += cell[rng.below(cell.size())];
                (std::string(lang) == "a" ? ma : mb).push_back(s / double(cell.size()));
            }
        }
        taus.push_back(oracle::tau_b(ma, mb));
    }
    CHECK(r.tau_boot_mean == doctest::Approx(std::accumulate(taus.begin(), taus.end(), 0.0) / double(B)));
    CHECK(r.tau_ci.first == doctest::Approx(oracle::percentile(taus, 0.025)));
    CHECK(r.tau_ci.second == doctest::Approx(oracle::percentile(taus, 0.975)));
}

TEST_CASE("permutation: identical languages give p = 1 over all 64 assignments") {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};
    const auto out = permutation_test_means(a, a, {});
    CHECK(out.mode == PermutationMode::exhaustive);
    CHECK(out.n_assignments == 64);
    CHECK(out.observed == 0);
    CHECK(out.p_value == 1.0);
}

TEST_CASE("permutation: exhaustive p equals the enumeration oracle") {
    Rng rng(3);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 3 + rng.below(6);
        std::vector<double> a(n), b(n);
        for (auto& v : a) v = double(rng.below(5));
        for (auto& v : b) v = double(rng.below(5));
        const auto out = permutation_test_means(a, b, {});
        CHECK(out.p_value == doctest::Approx(oracle::swap_test_p(a, b)).epsilon(1e-15));
        CHECK(out.observed == oracle::inversions(a, b));
    }
}

TEST_CASE("permutation: monte carlo tracks exhaustive and reports its draw count") {
    const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8}, b{2, 1, 4, 3, 8, 5, 7, 6};
    PermutationOptions mc;
    mc.mode = PermutationRequest::monte_carlo;
    mc.n_perm = 20000;
    mc.seed = 4;
    const auto x = permutation_test_means(a, b, {});
    const auto y = permutation_test_means(a, b, mc);
    CHECK(y.mode == PermutationMode::monte_carlo);
    CHECK(y.n_assignments == 20001);
    CHECK(std::abs(x.p_value - y.p_value) < 0.015);
    CHECK(y.p_value > 0.0);
    PermutationOptions ex;
    ex.mode = PermutationRequest::exhaustive;
    CHECK_THROWS_AS(permutation_test_means(std::vector<double>(31, 0.0), std::vector<double>(31, 0.0), ex), Error);
}

TEST_CASE("planted reversal: 15 inversions and p = 2/64 without noise") {
    PlantedWorld w = evenly_spaced_world(6, 2.25, 0.3);
    w.mode = ScoreMode::clip;
    w.n_dialogues_per_cell = 5;
    plant_reversal(w, "b");
    const std::vector<std::string> langs{"a", "b"};
    const auto m = synth_matrix(w, langs);
    const auto r = analyze_pair(m, {"a", "b"}, {50, 1, 1}, {});
    CHECK(r.inversions == 15);
    CHECK(r.max_inversions == 15);
    CHECK(r.tau_point == -1.0);
    CHECK(r.p_value == 2.0 / 64.0);
    CHECK(r.n_assignments == 64);
}

TEST_CASE("stability result survives a JSON round trip") {
    PlantedWorld w = evenly_spaced_world(4, 2.0, 0.4);
    w.noise_sd = 0.7;
    w.n_dialogues_per_cell = 10;
    const std::vector<std::string> langs{"a", "b"};
    const auto r = analyze_pair(synth_matrix(w, langs), {"a", "b"}, {50, 1, 1}, {});
    nlohmann::json j = r;
    CHECK(j.get<StabilityResult>() == r);
}

TEST_CASE("fleiss kappa: hand-computed tables and undefined input") {
    // P-bar = 2/3, category shares 1/2 and 1/2, so kappa = (2/3 - 1/2) / (1/2) = 1/3.
    CHECK(fleiss_kappa({{3, 0}, {2, 1}, {1, 2}, {0, 3}}, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // P-bar = 2/3, Pe = 77/225, kappa = 73/148.
    CHECK(fleiss_kappa({{2, 1, 0}, {0, 3, 0}, {1, 1, 1}, {0, 0, 3}, {3, 0, 0}}, 3) ==
          doctest::Approx(73.0 / 148.0).epsilon(1e-12));
    CHECK(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}, 3) == 1.0);
    CHECK_THROWS_AS(fleiss_kappa({{3, 0}, {3, 0}}, 3), DataError);
    CHECK_THROWS_AS(fleiss_kappa({{2, 0}, {3, 0}}, 3), DataError);
    CHECK_THROWS_AS(fleiss_kappa({{3}, {3}}, 3), DataError);
}

TEST_CASE("fleiss kappa agrees with the textbook oracle on random tables") {
    Rng rng(12);
    for (int t = 0; t < 200; ++t) {
        const int raters = 2 + int(rng.below(5));
        const std::size_t k = 2 + rng.below(3), items = 2 + rng.below(20);
        std::vector<std::vector<int>> table(items, std::vector<int>(k, 0));
        for (auto& row : table) {
            for (int r = 0; r < raters; ++r) row[rng.below(k)]++;
        }
        try {
            const double kappa = fleiss_kappa(table, raters);
            CHECK(kappa == doctest::Approx(oracle::fleiss(table, raters)).epsilon(1e-12));
            CHECK(kappa <= 1.0);
        } catch (const DataError&) {
        }
    }
}

TEST_CASE("agreement bands use inclusive upper bounds") {
    CHECK(classify_agreement(0.2) == AgreementBand::poor);
    CHECK(classify_agreement(0.2000001) == AgreementBand::fair);
    CHECK(classify_agreement(0.385) == AgreementBand::fair);
    CHECK(classify_agreement(0.321) == AgreementBand::fair);
    CHECK(classify_agreement(0.4) == AgreementBand::fair);
    CHECK(classify_agreement(0.6) == AgreementBand::moderate);
    CHECK(classify_agreement(0.8) == AgreementBand::substantial);
    CHECK(classify_agreement(0.81) == AgreementBand::excellent);
    CHECK(classify_agreement(-0.3) == AgreementBand::poor);
    CHECK(to_string(AgreementBand::substantial) == "substantial");
}
