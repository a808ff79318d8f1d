#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rankstab/calibration.hpp"
#include "rankstab/cli.hpp"
#include "rankstab/error.hpp"
#include "rankstab/genproto.hpp"
#include "rankstab/labels.hpp"
#include "rankstab/random.hpp"
#include "rankstab/report.hpp"
#include "rankstab/stability.hpp"
#include "rankstab/surface_metrics.hpp"
#include "rankstab/synthetic.hpp"

namespace py = pybind11;
using namespace rankstab;

namespace {

Language language_arg(const std::string& code) {
    if (auto l = parse_language(code)) return *l;
    throw ConfigError("unknown language '" + code + "'");
}

TokenStream stream(std::vector<std::string> tokens) {
    TokenStream ts;
    ts.tokens = std::move(tokens);
    return ts;
}

PermutationRequest mode_arg(const std::string& mode) {
    if (mode == "auto") return PermutationRequest::automatic;
    if (mode == "exhaustive") return PermutationRequest::exhaustive;
    if (mode == "monte_carlo") return PermutationRequest::monte_carlo;
    throw ConfigError("permutation mode must be auto, exhaustive or monte_carlo");
}

ScoreMode score_mode_arg(const std::string& mode) {
    if (mode == "clip_round") return ScoreMode::clip_round;
    if (mode == "clip") return ScoreMode::clip;
    if (mode == "raw") return ScoreMode::raw;
    throw ConfigError("score mode must be clip_round, clip or raw");
}

py::dict outcome_dict(const PermutationOutcome& o) {
    py::dict d;
    d["p_value"] = o.p_value;
    d["observed"] = o.observed;
    d["mode"] = std::string(to_string(o.mode));
    d["n_assignments"] = o.n_assignments;
    return d;
}

} // namespace

PYBIND11_MODULE(_rankstab, m) {
    m.doc() = "Ranking-stability statistics, surface metrics and the batch pipeline.";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    m.def("kendall_tau", [](std::vector<double> x, std::vector<double> y) { return kendall_tau_b(x, y); });
    m.def("spearman", [](std::vector<double> x, std::vector<double> y) { return spearman(x, y); });
    m.def("inversions", [](std::vector<double> x, std::vector<double> y) { return inversions(x, y); });

    m.def(
        "permutation_test",
        [](std::vector<double> first, std::vector<double> second, const std::string& mode, std::size_t n_perm,
           std::uint64_t seed) {
            PermutationOptions o;
            o.mode = mode_arg(mode);
            o.n_perm = n_perm;
            o.seed = seed;
            return outcome_dict(permutation_test_means(first, second, o));
        },
        py::arg("first"), py::arg("second"), py::arg("mode") = "auto", py::arg("n_perm") = 10000, py::arg("seed") = 0);

    m.def(
        "analyze_pair_json",
        [](const std::map<std::string, std::map<std::string, std::vector<double>>>& scores, const std::string& first,
           const std::string& second, std::size_t n_boot, std::size_t n_perm, std::uint64_t seed) {
            ScoreMatrix matrix;
            matrix.metric = "python";
            matrix.languages = {first, second};
            for (const auto& [model, cells] : scores) {
                matrix.models.push_back(model);
                for (const auto& [lang, values] : cells) matrix.cells[{model, lang}] = values;
            }
            BootstrapOptions b;
            b.n_boot = n_boot;
            b.seed = seed;
            PermutationOptions p;
            p.n_perm = n_perm;
            p.seed = derive_seed(seed, 1);
            nlohmann::json j = analyze_pair(matrix, {first, second}, b, p);
            return j.dump();
        },
        py::arg("scores"), py::arg("first"), py::arg("second"), py::arg("n_boot") = 1500, py::arg("n_perm") = 10000,
        py::arg("seed") = 0);

    m.def("tokenize", [](const std::string& text, const std::string& lang) {
        return FallbackNormalizer().tokens(text, language_arg(lang));
    });
    m.def("ttr", [](std::vector<std::string> tokens) { return ttr(stream(std::move(tokens))); });
    m.def(
        "mattr", [](std::vector<std::string> tokens, std::size_t window) { return mattr(stream(std::move(tokens)), window); },
        py::arg("tokens"), py::arg("window") = 100);
    m.def("self_bleu", [](const std::vector<std::vector<std::string>>& docs) {
        std::vector<TokenStream> corpus;
        for (const auto& d : docs) corpus.push_back(stream(d));
        return self_bleu(corpus, 1);
    });

    m.def("fleiss_kappa", &fleiss_kappa, py::arg("table"), py::arg("n_raters"));
    m.def("classify_agreement", [](double k) { return std::string(to_string(classify_agreement(k))); });

    m.def(
        "sample_params_json",
        [](std::size_t n, const std::string& lang, std::uint64_t seed) {
            SamplingPolicy policy;
            policy.rng_seed = seed;
            nlohmann::json j = sample_params(policy, n, language_arg(lang));
            return j.dump();
        },
        py::arg("n"), py::arg("language"), py::arg("seed") = 0);

    m.def(
        "power_analysis_json",
        [](std::size_t n_models, double spacing, std::vector<double> noise_grid, std::size_t n_reps, double alpha,
           std::uint64_t seed, bool planted, const std::string& score_mode, std::size_t dialogues) {
            auto world = evenly_spaced_world(n_models, 1.5 + spacing * double(n_models - 1) / 2, spacing);
            world.mode = score_mode_arg(score_mode);
            world.n_dialogues_per_cell = dialogues;
            if (planted) plant_reversal(world, "B");
            PowerOptions o;
            o.noise_grid = std::move(noise_grid);
            o.n_reps = n_reps;
            o.alpha = alpha;
            o.seed = seed;
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : power_analysis(world, o)) {
                rows.push_back({{"noise_sd", r.noise_sd}, {"n_reps", r.n_reps}, {"detections", r.detections},
                                {"rate", r.rate}, {"mean_inversions", r.mean_inversions}});
            }
            return rows.dump();
        },
        py::arg("n_models") = 6, py::arg("spacing") = 0.3, py::arg("noise_grid") = std::vector<double>{0.5, 1.0},
        py::arg("n_reps") = 200, py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("planted") = true,
        py::arg("score_mode") = "clip_round", py::arg("dialogues") = 100);

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    });
    m.def("render_report", [](const std::string& workspace) { return render_report(Workspace(workspace)).markdown; });
}
