// One PASS/FAIL line per acceptance criterion. Tolerances live next to each check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "../oracles/oracles.hpp"
#include "../unit/support.hpp"
#include "rankstab/calibration.hpp"
#include "rankstab/cli.hpp"
#include "rankstab/corpus.hpp"
#include "rankstab/genproto.hpp"
#include "rankstab/judge.hpp"
#include "rankstab/random.hpp"
#include "rankstab/stability.hpp"
#include "rankstab/surface_metrics.hpp"
#include "rankstab/synthetic.hpp"

using namespace rankstab;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Folds one named check into the verdict; the first failing one is reported.
void expect(Check& v, bool ok, const std::string& what) {
    if (!ok && v.pass) {
        v.pass = false;
        v.detail = "failed: " + what;
    }
}

const std::vector<std::string> kAB{"A", "B"};

TokenStream stream(std::vector<std::string> t) {
    TokenStream ts;
    ts.tokens = std::move(t);
    return ts;
}

std::vector<std::string> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(rng.below(vocab)));
    return out;
}

// 1 ------------------------------------------------------------------------

Check rank_statistics() {
    Check v;
    const auto t0 = Clock::now();
    const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
    double max_dev = 0;
    std::size_t checked = 0;

    auto check = [&](const std::vector<double>& x, const std::vector<double>& y) {
        const int inv = inversions(x, y);
        const int inv_oracle = oracle::inversions(x, y);
        const double tau = kendall_tau_b(x, y);
        const double closed = 1.0 - 2.0 * inv / 15.0;
        std::map<std::string, double> mx, my;
        for (std::size_t i = 0; i < 6; ++i) {
            mx[names[i]] = x[i];
            my[names[i]] = y[i];
        }
        const auto rx = rank_models(mx), ry = rank_models(my);
        expect(v, inv == inv_oracle, "inversions differ from the pair-enumeration oracle");
        expect(v, count_inversions(rx, ry) == inv_oracle, "ranking inversions differ from the oracle");
        expect(v, kendall_tau(rx, ry) == tau, "ranking and value tau disagree");
        expect(v, std::abs(tau - oracle::tau_b(x, y)) <= 1e-12, "tau differs from the oracle");
        max_dev = std::max(max_dev, std::abs(tau - closed));
        ++checked;
    };

    std::vector<int> perm{0, 1, 2, 3, 4, 5};
    const std::vector<double> identity{6, 5, 4, 3, 2, 1};
    do {
        std::vector<double> a(6);
        for (std::size_t i = 0; i < 6; ++i) a[i] = 6.0 - perm[i];
        check(a, identity);
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::mt19937_64 gen(1);
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> a{1, 2, 3, 4, 5, 6}, b{1, 2, 3, 4, 5, 6};
        std::shuffle(a.begin(), a.end(), gen);
        std::shuffle(b.begin(), b.end(), gen);
        check(a, b);
    }
    const double secs = seconds_since(t0);
    expect(v, checked == 1720, "expected 1720 pairs");
    expect(v, max_dev <= 1e-12, fmt::format("tau deviates from 1 - 2 inv/15 by {:.3g}", max_dev));
    expect(v, secs < 5.0, "runtime over 5 s");
    if (v.pass) v.detail = fmt::format("{} pairs, max |tau - (1 - 2 inv/15)| = {:.2g}, {:.2f} s", checked, max_dev, secs);
    return v;
}

// 2 ------------------------------------------------------------------------

Check permutation_exactness() {
    Check v;
    const auto t0 = Clock::now();
    PermutationOptions exhaustive;
    exhaustive.mode = PermutationRequest::exhaustive;

    auto world = evenly_spaced_world(6, 2.25, 0.3);
    world.n_dialogues_per_cell = 20;
    world.noise_sd = 0.7;
    world.seed = 5;
    auto same = synth_matrix(world, kAB);
    for (const auto& m : same.models) same.cells[{m, "B"}] = same.cells.at({m, "A"});
    const auto identical = permutation_test(same, {"A", "B"}, exhaustive);
    expect(v, identical.n_assignments == 64, "exhaustive mode did not enumerate 64 assignments");
    expect(v, identical.p_value == 1.0, "identical languages did not give p = 1");

    auto planted = evenly_spaced_world(6, 2.25, 0.3);
    planted.noise_sd = 0.0;
    planted.mode = ScoreMode::clip;
    plant_reversal(planted, "B");
    const auto rev = permutation_test(synth_matrix(planted, kAB), {"A", "B"}, exhaustive);
    expect(v, rev.observed == 15, "noise-free reversal does not invert every pair");
    expect(v, rev.p_value <= 2.0 / 64, fmt::format("noise-free reversal p = {}", rev.p_value));

    double max_gap = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto w = evenly_spaced_world(6, 2.25, 0.3);
        w.n_dialogues_per_cell = 20;
        w.noise_sd = 0.4 + 0.1 * double(s % 5);
        w.seed = 100 + s;
        if (s % 2 == 0) plant_reversal(w, "B");
        const auto m = synth_matrix(w, kAB);
        const auto ex = permutation_test(m, {"A", "B"}, exhaustive);
        PermutationOptions mc;
        mc.mode = PermutationRequest::monte_carlo;
        mc.n_perm = 10000;
        mc.seed = derive_seed(77, s);
        const auto approx = permutation_test(m, {"A", "B"}, mc);
        max_gap = std::max(max_gap, std::abs(ex.p_value - approx.p_value));
    }
    const double secs = seconds_since(t0);
    expect(v, max_gap <= 0.02, fmt::format("monte carlo deviates from exhaustive by {:.4f}", max_gap));
    expect(v, secs < 30.0, "runtime over 30 s");
    if (v.pass) {
        v.detail = fmt::format("64 assignments, identical p = 1, reversal p = {}/64, max |MC - exact| = {:.4f} over 20 worlds, {:.2f} s",
                               std::lround(rev.p_value * 64), max_gap, secs);
    }
    return v;
}

// 3 ------------------------------------------------------------------------

/// No language effect at all; `spacing` separates the true model qualities.
double null_rejection_rate(std::size_t n_models, double spacing, std::size_t n_worlds, PermutationRequest mode) {
    auto world = evenly_spaced_world(n_models, 1.5 + spacing * double(n_models - 1) / 2, spacing);
    world.n_dialogues_per_cell = 30;
    world.mode = ScoreMode::clip_round;
    PowerOptions o;
    o.noise_grid = {0.8};
    o.n_reps = n_worlds;
    o.seed = 7;
    o.permutation.mode = mode;
    o.permutation.n_perm = 10000;
    const auto row = power_analysis(world, o).at(0);
    const auto hits = std::count_if(row.p_values.begin(), row.p_values.end(), [](double p) { return p <= 0.05; });
    return double(hits) / double(row.p_values.size());
}

struct NullExtras {
    double six_models = 0;
    double spaced = 0;
};

Check null_calibration(NullExtras& extras) {
    Check v;
    const auto t0 = Clock::now();
    const double rate = null_rejection_rate(24, 0.0, 1000, PermutationRequest::monte_carlo);
    const double secs = seconds_since(t0);
    extras.six_models = null_rejection_rate(6, 0.0, 1000, PermutationRequest::exhaustive);
    extras.spaced = null_rejection_rate(24, 0.05, 1000, PermutationRequest::monte_carlo);
    expect(v, rate >= 0.03 && rate <= 0.07, fmt::format("P(p <= .05) = {:.3f} outside [.03, .07]", rate));
    expect(v, secs < 120.0, "runtime over 2 min");
    if (v.pass) v.detail = fmt::format("1000 null worlds, 24 equal models, P(p <= .05) = {:.3f}, {:.1f} s", rate, secs);
    return v;
}

// 4 ------------------------------------------------------------------------

Check bootstrap_contract() {
    Check v;
    const auto t0 = Clock::now();
    BootstrapOptions bo;
    bo.n_boot = 1500;
    bo.seed = 21;

    ScoreMatrix flat;
    flat.metric = "flat";
    flat.languages = kAB;
    for (int i = 0; i < 6; ++i) {
        const auto m = "m" + std::to_string(i);
        flat.models.push_back(m);
        flat.cells[{m, "A"}] = std::vector<double>(15, 3.0 - 0.5 * i);
        flat.cells[{m, "B"}] = std::vector<double>(15, i % 2 ? 3.0 - 0.5 * i : 0.2 * i);
    }
    const auto z = bootstrap_stability(flat, {"A", "B"}, bo);
    expect(v, z.n_bootstrap == 1500, "bootstrap did not run 1500 replicates");
    expect(v, z.tau_ci.first == z.tau_point && z.tau_ci.second == z.tau_point, "tau interval is not zero-width at the point");
    expect(v, z.rho_ci.first == z.rho_point && z.rho_ci.second == z.rho_point, "rho interval is not zero-width at the point");

    auto noisy = evenly_spaced_world(6, 2.25, 0.3);
    noisy.noise_sd = 1.0;
    noisy.seed = 4;
    const auto m = synth_matrix(noisy, kAB);
    PermutationOptions po;
    po.seed = 3;
    auto serial = bo, wide = bo;
    serial.threads = 1;
    wide.threads = 4;
    const auto r1 = analyze_pair(m, {"A", "B"}, serial, po);
    const auto r2 = analyze_pair(m, {"A", "B"}, serial, po);
    const auto r3 = analyze_pair(m, {"A", "B"}, wide, po);
    expect(v, r1 == r2 && r1 == r3, "identical seeds gave different results");

    int excluded = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto w = evenly_spaced_world(6, 2.25, 0.3);
        w.noise_sd = 1.0;
        w.n_dialogues_per_cell = 100;
        w.seed = 500 + s;
        BootstrapOptions b = bo;
        b.seed = derive_seed(9, s);
        const auto r = bootstrap_stability(synth_matrix(w, kAB), {"A", "B"}, b);
        if (r.tau_ci.first > 0.0) ++excluded;
    }
    expect(v, excluded >= 95, fmt::format("only {}/100 intervals exclude 0", excluded));
    if (v.pass) {
        v.detail = fmt::format("1500 replicates, zero-width flat intervals, bit-identical reruns, {}/100 planted tau = 1 intervals exclude 0, {:.1f} s",
                               excluded, seconds_since(t0));
    }
    return v;
}

// 5 ------------------------------------------------------------------------

Check metric_oracles() {
    Check v;
    Rng rng(2024);
    double mattr_dev = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t len = 1 + rng.below(400);
        const std::size_t window = 1 + rng.below(120);
        const auto tokens = random_tokens(rng, len, 5 + rng.below(60));
        mattr_dev = std::max(mattr_dev, std::abs(mattr(stream(tokens), window) - oracle::mattr(tokens, window)));
        if (len <= window) expect(v, mattr(stream(tokens), window) == ttr(stream(tokens)), "MATTR differs from TTR on a short stream");
        const auto shortish = random_tokens(rng, 1 + rng.below(30), 10);
        expect(v, mattr(stream(shortish), 30) == ttr(stream(shortish)), "MATTR differs from TTR when length <= window");
    }
    expect(v, mattr_dev <= 1e-12, fmt::format("MATTR deviates by {:.3g}", mattr_dev));

    double bleu_dev = 0;
    Rng brng(77);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n_docs = 2 + brng.below(5);
        std::vector<TokenStream> docs;
        std::vector<oracle::Doc> plain;
        for (std::size_t d = 0; d < n_docs; ++d) {
            auto tokens = random_tokens(brng, 1 + brng.below(14), 3 + brng.below(8));
            plain.push_back(tokens);
            docs.push_back(stream(tokens));
        }
        bleu_dev = std::max(bleu_dev, std::abs(self_bleu(docs, 1) - oracle::self_bleu(plain)));
    }
    expect(v, bleu_dev <= 1e-6, fmt::format("self-BLEU deviates by {:.3g}", bleu_dev));

    const std::vector<std::string> doc{"the", "parcel", "never", "arrived", "at", "my", "door"};
    const std::vector<TokenStream> twins{stream(doc), stream(doc)};
    const double same = self_bleu(twins);
    expect(v, std::abs(same - 1.0) <= 1e-12, fmt::format("identical documents give {}", same));
    if (v.pass) {
        v.detail = fmt::format("MATTR max dev {:.2g} on 100 streams, self-BLEU max dev {:.2g} on 50 corpora, identical docs {:.6f}",
                               mattr_dev, bleu_dev, same);
    }
    return v;
}

// 6 ------------------------------------------------------------------------

template <class Key>
double chi_square(const std::vector<GenerationParams>& ps, std::size_t k, Key key) {
    std::vector<double> counts(k, 0.0);
    for (const auto& p : ps) counts.at(key(p)) += 1.0;
    const double expected = double(ps.size()) / double(k);
    double x2 = 0;
    for (double c : counts) x2 += (c - expected) * (c - expected) / expected;
    return x2;
}

Check sampler_fidelity() {
    Check v;
    SamplingPolicy policy;
    policy.rng_seed = 99;
    const auto ps = sample_params(policy, 10000, Language::et);

    std::map<int, double> freq;
    for (const auto& p : ps) freq[p.n_messages] += 1.0 / double(ps.size());
    const std::map<int, double> target{{4, 0.4}, {8, 0.3}, {12, 0.2}, {16, 0.1}};
    double worst = 0;
    for (const auto& [n, f] : target) worst = std::max(worst, std::abs(freq[n] - f));
    expect(v, worst <= 0.02, fmt::format("n_messages frequency off by {:.4f}", worst));

    struct Field {
        const char* name;
        std::size_t k;
        std::function<std::size_t(const GenerationParams&)> key;
    };
    const std::vector<Field> fields{
        {"industry", Industry::cardinality(), [](const GenerationParams& p) { return std::size_t(p.industry.index()); }},
        {"problem", Problem::cardinality(), [](const GenerationParams& p) { return std::size_t(p.problem.index()); }},
        {"channel", 2, [](const GenerationParams& p) { return std::size_t(p.channel); }},
        {"agent_experience", 2, [](const GenerationParams& p) { return std::size_t(p.agent_experience); }},
        {"agent_type", 2, [](const GenerationParams& p) { return std::size_t(p.agent_type); }},
    };
    std::string chi_report;
    for (const auto& f : fields) {
        const double x2 = chi_square(ps, f.k, f.key);
        const boost::math::chi_squared dist(double(f.k - 1));
        const double critical = boost::math::quantile(boost::math::complement(dist, 0.01));
        expect(v, x2 <= critical, fmt::format("{} fails uniformity: chi2 {:.2f} > {:.2f}", f.name, x2, critical));
        chi_report += fmt::format(" {} {:.1f}/{:.1f}", f.name, x2, critical);
    }

    for (auto lang : {Language::fi, Language::hu, Language::en}) {
        auto other = sample_params(policy, 10000, lang);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            expect(v, other[i].language == lang, "language not applied");
            other[i].language = Language::et;
            if (!(other[i] == ps[i])) {
                expect(v, false, fmt::format("{} params differ at index {}", to_string(lang), i));
                break;
            }
        }
    }
    if (v.pass) v.detail = fmt::format("n_messages max dev {:.4f}; chi2/critical:{}; 4 languages share fields", worst, chi_report);
    return v;
}

// 7 ------------------------------------------------------------------------

Dialogue two_agent_transcript(const std::vector<int>& agents) {
    GenerationParams p;
    p.n_agents = 2;
    p.agent_emails = {"first@support.example", "second@support.example"};
    p.n_messages = 8;
    Dialogue d;
    d.id = "v";
    d.generator_model = "m";
    d.params = p;
    for (std::size_t k = 0; k < agents.size(); ++k) {
        if (k > 0) d.turns.push_back(Turn{int(d.turns.size()), Role::customer, std::nullopt, "and then?"});
        d.turns.push_back(Turn{int(d.turns.size()), Role::agent, p.agent_emails.at(agents[k]), "noted"});
    }
    return d;
}

bool collapsed_is_sequential(const std::vector<int>& agents) {
    std::vector<int> collapsed;
    for (int a : agents) {
        if (collapsed.empty() || collapsed.back() != a) collapsed.push_back(a);
    }
    std::set<int> seen(collapsed.begin(), collapsed.end());
    return seen.size() == collapsed.size();
}

Check dialogue_validation() {
    Check v;
    expect(v, validate_dialogue(two_agent_transcript({0, 0, 1, 1})).ok(), "pattern (a) rejected");
    expect(v, validate_dialogue(two_agent_transcript({1, 1, 0, 0})).ok(), "pattern (b) rejected");
    const auto banned = validate_dialogue(two_agent_transcript({0, 1, 0, 1}));
    expect(v, !banned.ok() && banned.violations.front() == "interleaved agents", "pattern (c) accepted");

    Rng rng(13);
    int allowed = 0, rejected = 0;
    for (int t = 0; t < 5000; ++t) {
        std::vector<int> agents;
        const std::size_t n = 2 + rng.below(9);
        if (rng.bernoulli(0.5)) {
            const int first = int(rng.below(2));
            const std::size_t split = 1 + rng.below(n - 1);
            for (std::size_t i = 0; i < n; ++i) agents.push_back(i < split ? first : 1 - first);
        } else {
            for (std::size_t i = 0; i < n; ++i) agents.push_back(int(rng.below(2)));
        }
        const bool ok = validate_dialogue(two_agent_transcript(agents)).ok();
        const bool expected = collapsed_is_sequential(agents);
        expect(v, ok == expected, fmt::format("transcript {} misjudged", fmt::join(agents, "")));
        (expected ? allowed : rejected) += 1;
    }
    expect(v, allowed > 1000 && rejected > 1000, "random transcripts did not cover both outcomes");
    if (v.pass) v.detail = fmt::format("table patterns a, b allowed and c banned; 5000 random transcripts ({} allowed, {} banned)", allowed, rejected);
    return v;
}

// 8 ------------------------------------------------------------------------

Check fleiss() {
    Check v;
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const int raters = 2 + int(rng.below(5));
        const std::size_t k = 2 + rng.below(3);
        std::vector<std::vector<int>> table;
        for (std::size_t i = 0; i < 10; ++i) {
            std::vector<int> row(k, 0);
            row[i % k] = raters;
            table.push_back(row);
        }
        expect(v, std::abs(fleiss_kappa(table, raters) - 1.0) <= 1e-12, "perfect agreement is not 1");
    }
    // 5 items, 3 raters, 3 categories; kappa = (2/3 - 77/225) / (1 - 77/225) = 73/148.
    const std::vector<std::vector<int>> hand{{2, 1, 0}, {0, 3, 0}, {1, 1, 1}, {0, 0, 3}, {3, 0, 0}};
    const double k = fleiss_kappa(hand, 3);
    expect(v, std::abs(k - 73.0 / 148.0) <= 1e-9, fmt::format("hand table gives {}", k));
    expect(v, std::abs(k - oracle::fleiss(hand, 3)) <= 1e-9, "hand table differs from the oracle");
    expect(v, classify_agreement(0.385) == AgreementBand::fair, ".385 is not fair");
    expect(v, classify_agreement(0.321) == AgreementBand::fair, ".321 is not fair");
    expect(v, classify_agreement(0.2) == AgreementBand::poor && classify_agreement(0.4) == AgreementBand::fair,
           "band boundaries");
    if (v.pass) v.detail = fmt::format("50 perfect tables give 1; hand table {:.10f} (73/148); .385 and .321 fair", k);
    return v;
}

// 9 ------------------------------------------------------------------------

std::string classification(const std::map<Category, std::string>& labels) {
    nlohmann::json j;
    for (const auto& [c, value] : labels) j[std::string(to_string(c))] = value;
    j["explanation"] = "stub";
    return "<classification>" + j.dump() + "</classification>";
}

std::string ref_of(const nlohmann::json& body) {
    static const std::regex re(R"(ref (\S+))");
    std::smatch m;
    const auto user = testing::user_text(body);
    return std::regex_search(user, m, re) ? m[1].str() : std::string();
}

Check lra_arithmetic() {
    Check v;
    std::vector<Dialogue> ds;
    const std::size_t n = Industry::cardinality() * 40;
    for (std::size_t i = 0; i < n; ++i) {
        GenerationParams p;
        p.industry = Industry(i % Industry::cardinality());
        p.problem = Problem(i % Problem::cardinality());
        p.channel = (i / Industry::cardinality()) % 2 ? Channel::chat : Channel::email;
        p.agent_experience = i % 3 ? AgentExperience::senior : AgentExperience::junior;
        p.agent_type = i % 5 ? AgentType::human : AgentType::bot;
        ds.push_back(testing::make_dialogue(fmt::format("lra-{:05}", i), "gen", p));
    }
    std::map<std::string, const Dialogue*> by_id;
    for (const auto& d : ds) by_id[d.id] = &d;
    JudgeConfig cfg;
    cfg.judge_model = "stub";
    cfg.sample_size = ds.size();
    cfg.max_in_flight = 1;

    auto perfect = std::make_shared<testing::ScriptedTransport>([&](const nlohmann::json& body) {
        const auto& p = by_id.at(ref_of(body))->params;
        std::map<Category, std::string> labels;
        for (auto c : kCategories) labels[c] = p.label(c);
        return testing::completion(classification(labels));
    });
    auto g1 = testing::quiet_gateway(perfect);
    const auto full = run_lra(ds, cfg, TemplateStore{}, g1);
    expect(v, full.overall == 1.0, "perfect stub overall is not 1");
    for (auto c : kCategories) expect(v, full.accuracy.at(c) == 1.0, "perfect stub category below 1");
    for (double x : full.aggregate.metrics.at(ScoreMetric::lra).values) expect(v, x == 1.0, "perfect stub dialogue below 1");

    auto constant = std::make_shared<testing::ScriptedTransport>(
        [](const nlohmann::json&) { return testing::completion(classification({{Category::channel, "chat"}})); });
    auto g2 = testing::quiet_gateway(constant);
    const auto half = run_lra(ds, cfg, TemplateStore{}, g2);
    expect(v, half.accuracy.at(Category::channel) == 0.5, fmt::format("constant stub channel accuracy {}", half.accuracy.at(Category::channel)));

    Rng guess(17);
    auto uniform = std::make_shared<testing::ScriptedTransport>([&](const nlohmann::json&) {
        const auto names = labels_for(Category::industry);
        return testing::completion(classification({{Category::industry, std::string(names[guess.below(names.size())])}}));
    });
    auto g3 = testing::quiet_gateway(uniform);
    const auto guessed = run_lra(ds, cfg, TemplateStore{}, g3);
    const double p0 = 1.0 / double(Industry::cardinality());
    const double sigma = std::sqrt(p0 * (1 - p0) / double(n));
    const double acc = guessed.accuracy.at(Category::industry);
    expect(v, std::abs(acc - p0) <= 3 * sigma, fmt::format("uniform guess accuracy {:.4f} vs {:.4f} ± {:.4f}", acc, p0, 3 * sigma));
    if (v.pass) {
        v.detail = fmt::format("perfect 1.0; constant channel {:.2f}; uniform industry {:.4f} vs 1/{} = {:.4f} (3σ {:.4f}, n = {})",
                               half.accuracy.at(Category::channel), acc, Industry::cardinality(), p0, 3 * sigma, n);
    }
    return v;
}

// 10 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Check end_to_end(const fs::path& fixture) {
    Check v;
    const auto t0 = Clock::now();
    ::unsetenv("RANKSTAB_PROVIDER_URL");
    ::unsetenv("RANKSTAB_PROVIDER_KEY");
    const auto base = fs::temp_directory_path() / "rankstab-acceptance-e2e";
    fs::remove_all(base);
    std::vector<std::string> reports, plots;
    for (const char* run : {"first", "second"}) {
        const auto dir = base / run;
        fs::create_directories(dir);
        for (const char* f : {"run.ini", "fixture.jsonl", "annotations.csv"}) fs::copy_file(fixture / f, dir / f);
        for (const char* step : {"generate", "metrics", "judge", "lra", "stability", "calibrate", "simulate", "report"}) {
            std::ostringstream out, err;
            const int code = cli::run({"--config", (dir / "run.ini").string(), "--mode", "replay", "--workspace",
                                       (dir / "ws").string(), step},
                                      out, err);
            expect(v, code == 0, fmt::format("{} exited {}: {}", step, code, err.str()));
            if (code != 0) return v;
        }
        reports.push_back(slurp(dir / "ws" / "report.md"));
        plots.push_back(slurp(dir / "ws" / "plot_data" / "stability.csv"));
    }
    const double secs = seconds_since(t0);
    expect(v, reports[0] == reports[1] && plots[0] == plots[1], "reports differ between runs");
    expect(v, reports[0] == slurp(fixture / "expected_report.md"), "report differs from the committed expected report");
    expect(v, plots[0] == slurp(fixture / "expected_stability.csv"), "plot data differs from the committed expected csv");

    const auto& md = reports[0];
    const std::regex mean_sd(R"(\| \*{0,2}\d\.\d\d\*{0,2} ±\.\d\d \|)");
    const std::regex tau_ci(R"(\| -?\d\.\d\d \[-?\d\.\d\d, -?\d\.\d\d\] \|)");
    const std::regex inv_p(R"(\| \d+, \d\.\d\d \|)");
    expect(v, std::regex_search(md, mean_sd), "no mean ±sd cell");
    expect(v, std::regex_search(md, tau_ci), "no tau [CI] cell");
    expect(v, std::regex_search(md, inv_p), "no inversions, p cell");
    expect(v, md.find("-0.00") == std::string::npos, "negative zero rendered");
    expect(v, secs < 60.0, "runtime over 1 min");
    if (v.pass) v.detail = fmt::format("2 replay runs byte-identical and equal to the committed report, table styles present, {:.2f} s", secs);
    return v;
}

} // namespace

int main(int argc, char** argv) {
    fs::path fixture = RANKSTAB_E2E_FIXTURE;
    if (argc > 1) fixture = argv[1];

    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Check()>& fn) {
        Check v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failures;
        std::cout << fmt::format("[{}] {:>2} {}: {}", v.pass ? "PASS" : "FAIL", id, name, v.detail) << std::endl;
    };

    NullExtras extras;
    report(1, "rank statistics oracle equivalence", rank_statistics);
    report(2, "permutation test exactness", permutation_exactness);
    report(3, "null calibration", [&] { return null_calibration(extras); });
    std::cout << fmt::format("[INFO]  3 six models, exhaustive: P(p <= .05) = {:.3f}; the smallest attainable p is 2/64\n"
                             "[INFO]  3 24 models with qualities .05 apart: P(p <= .05) = {:.3f}",
                             extras.six_models, extras.spaced)
              << std::endl;
    report(4, "bootstrap contract", bootstrap_contract);
    report(5, "metric oracles", metric_oracles);
    report(6, "sampler fidelity", sampler_fidelity);
    report(7, "dialogue validation", dialogue_validation);
    report(8, "fleiss kappa", fleiss);
    report(9, "label recovery arithmetic", lra_arithmetic);
    report(10, "end-to-end replay", [&] { return end_to_end(fixture); });
    return failures == 0 ? 0 : 1;
}
