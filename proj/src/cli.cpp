#include "rankstab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rankstab/calibration.hpp"
#include "rankstab/config.hpp"
#include "rankstab/error.hpp"
#include "rankstab/gateway.hpp"
#include "rankstab/genproto.hpp"
#include "rankstab/judge.hpp"
#include "rankstab/random.hpp"
#include "rankstab/records.hpp"
#include "rankstab/report.hpp"
#include "rankstab/stability.hpp"
#include "rankstab/surface_metrics.hpp"
#include "rankstab/synthetic.hpp"
#include "rankstab/workspace.hpp"

namespace rankstab::cli {

namespace {

struct Context {
    RunConfig cfg;
    Workspace ws{"."};
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
};

Gateway make_gateway(const RunConfig& cfg) {
    GatewayOptions o;
    o.retries = cfg.retries;
    o.backoff_base_ms = cfg.backoff_ms;
    o.rate_per_min = cfg.rate_per_min;
    o.replay = cfg.mode == RunMode::replay;
    o.fixture = cfg.fixture;
    o.timeout = std::chrono::seconds(cfg.timeout_s);
    if (o.replay && !o.fixture) throw ConfigError("gateway.fixture: replay mode needs a fixture file");
    return Gateway::from_environment(std::move(o));
}

std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, std::ostream& err) {
    auto loaded = load_records<Dialogue>(path);
    for (const auto& e : loaded.errors) {
        err << fmt::format("warning: {}:{}: {}\n", path.generic_string(), e.line, e.message);
    }
    return std::move(loaded.records);
}

/// Dialogue files of the workspace that hold at least one dialogue.
std::vector<std::pair<Language, std::vector<Dialogue>>> all_cells(const Context& ctx) {
    std::vector<std::pair<Language, std::vector<Dialogue>>> out;
    for (const auto& [lang, path] : ctx.ws.dialogue_files()) {
        auto ds = load_dialogues(path, *ctx.err);
        if (ds.empty()) {
            *ctx.err << fmt::format("warning: {} holds no dialogues\n", path.generic_string());
            continue;
        }
        out.emplace_back(lang, std::move(ds));
    }
    if (out.empty()) throw DataError(fmt::format("no dialogues under {}", (ctx.ws.root() / "dialogues").generic_string()));
    return out;
}

TemplateStore make_templates(const RunConfig& cfg) {
    TemplateStore t;
    if (cfg.templates_dir) t.load_directory(*cfg.templates_dir);
    return t;
}

void require_judge(const RunConfig& cfg) {
    if (cfg.judge.judge_model.empty()) throw ConfigError("judge.model: no judge model configured");
}

// ---------------------------------------------------------------- generate

void cmd_generate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.models.empty()) throw ConfigError("generation.models: no generator models configured");
    if (cfg.n_per_language == 0) throw ConfigError("generation.n_per_language: must be positive");
    auto gateway = make_gateway(cfg);
    for (auto lang : cfg.languages) {
        for (const auto& model : cfg.models) {
            GenerationOptions o;
            o.generator_model = model;
            o.temperature = cfg.temperature;
            o.max_tokens = cfg.max_tokens;
            o.max_in_flight = cfg.max_in_flight;
            o.created_at = cfg.created_at;
            auto run = generate_corpus(cfg.policy, cfg.n_per_language, lang, o, gateway);
            const auto path = ctx.ws.dialogues(lang, model);
            reset_output(path);
            store_records(path, run.dialogues);
            std::size_t skipped = 0, flagged = 0;
            for (const auto& f : run.failures) {
                (f.skipped ? skipped : flagged) += 1;
                *ctx.err << fmt::format("warning: {} {}: {}\n", f.dialogue_id, f.skipped ? "skipped" : "flagged", f.reason);
            }
            *ctx.out << fmt::format("generate {} {}: {} dialogues, {} skipped, {} flagged\n", to_string(lang), model,
                                    run.dialogues.size(), skipped, flagged);
        }
    }
}

// ---------------------------------------------------------------- metrics

void cmd_metrics(Context& ctx) {
    const auto& cfg = ctx.cfg;
    std::map<Language, Stopwords> stopwords;
    for (const auto& [lang, path] : cfg.stopwords) stopwords[lang] = load_stopwords(path);
    std::shared_ptr<const Normalizer> normalizer = std::make_shared<FallbackNormalizer>(stopwords);
    if (!cfg.lemmatizers.empty()) {
        normalizer = std::make_shared<ExternalLemmatizer>(cfg.lemmatizers, stopwords, normalizer);
    }
    std::unique_ptr<Embedder> embedder;
    if (cfg.embedder == "hashing") {
        embedder = std::make_unique<HashingEmbedder>();
    } else if (cfg.embedder == "http") {
        if (cfg.mode == RunMode::replay) throw ConfigError("metrics.embedder: http embeddings are unavailable in replay mode");
        const char* key = std::getenv("RANKSTAB_PROVIDER_KEY");
        if (!key || !*key) throw ConfigError("environment variable RANKSTAB_PROVIDER_KEY is not set");
        embedder = std::make_unique<HttpEmbedder>(
            std::make_shared<HttpTransport>(cfg.embedding_url, key, std::chrono::seconds(cfg.timeout_s)), cfg.embedding_model);
    }

    MetricsOptions mo;
    mo.window = cfg.window;
    mo.max_pairs = cfg.max_pairs;
    mo.seed = cfg.metrics_seed;
    mo.lemmatize_self_bleu = cfg.lemmatize_self_bleu;

    const auto cells = all_cells(ctx);
    reset_output(ctx.ws.metrics_summary());
    std::vector<CorpusMetrics> summaries;
    for (const auto& [lang, ds] : cells) {
        auto run = corpus_metrics(ds, lang, *normalizer, embedder.get(), mo);
        const auto path = ctx.ws.metrics(lang, ds.front().generator_model);
        reset_output(path);
        store_records(path, run.per_dialogue);
        summaries.push_back(run.summary);
        *ctx.out << fmt::format("metrics {} {}: TTR {} MATTR {}\n", to_string(lang), run.summary.generator_model,
                                format_mean_sd(run.summary.ttr_mean, run.summary.ttr_sd),
                                format_mean_sd(run.summary.mattr_mean, run.summary.mattr_sd));
    }
    store_records(ctx.ws.metrics_summary(), summaries);
}

// ---------------------------------------------------------------- judge, lra

void cmd_judge(Context& ctx) {
    const auto& cfg = ctx.cfg;
    require_judge(cfg);
    const auto templates = make_templates(cfg);
    auto gateway = make_gateway(cfg);
    const auto cells = all_cells(ctx);
    reset_output(ctx.ws.judge_summary());
    std::vector<AggregateScores> summaries;
    for (const auto& [lang, ds] : cells) {
        auto run = judge_corpus(ds, cfg.judge, templates, gateway);
        const auto path = ctx.ws.judge_scores(lang, ds.front().generator_model);
        reset_output(path);
        store_records(path, run.records);
        for (const auto& f : run.failures) *ctx.err << "warning: judge failure " << f << "\n";
        if (run.aggregate.unreliable) {
            *ctx.err << fmt::format("warning: {} {} marked unreliable ({} of {} failed)\n", to_string(lang),
                                    run.aggregate.generator_model, run.aggregate.failures, run.aggregate.requested);
        }
        *ctx.out << fmt::format("judge {} {}: {} scored, {} failed\n", to_string(lang), run.aggregate.generator_model,
                                run.records.size(), run.failures.size());
        summaries.push_back(std::move(run.aggregate));
    }
    store_records(ctx.ws.judge_summary(), summaries);
}

void cmd_lra(Context& ctx) {
    const auto& cfg = ctx.cfg;
    require_judge(cfg);
    const auto templates = make_templates(cfg);
    auto gateway = make_gateway(cfg);
    const auto cells = all_cells(ctx);
    reset_output(ctx.ws.lra_summary());
    std::vector<LRASummary> summaries;
    for (const auto& [lang, ds] : cells) {
        auto run = run_lra(ds, cfg.judge, templates, gateway);
        const auto path = ctx.ws.lra(lang, ds.front().generator_model);
        reset_output(path);
        store_records(path, run.records);
        for (const auto& f : run.failures) *ctx.err << "warning: LRA failure " << f << "\n";
        *ctx.out << fmt::format("lra {} {}: overall {}\n", to_string(lang), run.aggregate.generator_model,
                                format_score(run.overall));
        summaries.push_back(summary_of(run));
    }
    store_records(ctx.ws.lra_summary(), summaries);

    if (cfg.compare_judges.size() >= 2) {
        const Language lang = cfg.compare_language.value_or(cfg.languages.front());
        std::vector<Dialogue> pool;
        for (const auto& [l, ds] : cells) {
            if (l == lang) pool.insert(pool.end(), ds.begin(), ds.end());
        }
        if (pool.empty()) throw DataError(fmt::format("judge comparison: no {} dialogues", to_string(lang)));
        auto cmp = compare_judges(cfg.compare_judges, pool, cfg.judge, templates, gateway);
        reset_output(ctx.ws.judge_comparison());
        write_json_file(ctx.ws.judge_comparison(), cmp);
        *ctx.out << fmt::format("judge comparison over {} dialogues: mean rho {}\n", to_string(lang),
                                format_corr(cmp.mean_rho));
    } else if (cfg.compare_judges.size() == 1) {
        throw ConfigError("judge.compare: needs at least two judges");
    }
}

// ---------------------------------------------------------------- stability

void cmd_stability(Context& ctx) {
    const auto& cfg = ctx.cfg;
    std::vector<AggregateScores> aggs;
    bool any_source = false;
    if (std::filesystem::exists(ctx.ws.judge_summary())) {
        any_source = true;
        for (auto& a : load_records<AggregateScores>(ctx.ws.judge_summary()).records) aggs.push_back(std::move(a));
    }
    if (std::filesystem::exists(ctx.ws.lra_summary())) {
        any_source = true;
        for (auto& s : load_records<LRASummary>(ctx.ws.lra_summary()).records) aggs.push_back(std::move(s.aggregate));
    }
    if (!any_source) throw DataError("no judge or LRA summaries to analyse");

    std::set<std::string> judges;
    for (const auto& a : aggs) {
        if (a.prompt_language == cfg.judge.prompt_language) judges.insert(a.judge_model);
    }
    std::string judge = cfg.judge.judge_model;
    if (judge.empty()) {
        if (judges.size() != 1) throw ConfigError("judge.model: summaries hold several judges, choose one");
        judge = *judges.begin();
    }

    std::map<ScoreMetric, ScoreMatrix> matrices;
    std::set<Language> langs_present;
    for (const auto& a : aggs) {
        if (a.judge_model != judge || a.prompt_language != cfg.judge.prompt_language) continue;
        for (const auto& [metric, agg] : a.metrics) {
            if (agg.values.empty()) continue;
            auto& m = matrices[metric];
            m.metric = std::string(to_string(metric));
            m.cells[{a.generator_model, std::string(to_string(a.language))}] = agg.values;
            langs_present.insert(a.language);
        }
    }
    if (langs_present.size() < 2) {
        std::string have;
        for (auto l : langs_present) have += std::string(have.empty() ? "" : ", ") + std::string(to_string(l));
        throw ConfigError(fmt::format("pair incomplete: scores exist only for [{}]", have));
    }

    std::vector<LanguagePair> pairs = cfg.pairs;
    if (pairs.empty()) {
        std::vector<Language> sorted;
        for (auto l : kLanguages) {
            if (langs_present.contains(l)) sorted.push_back(l);
        }
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            for (std::size_t j = i + 1; j < sorted.size(); ++j) {
                pairs.push_back({std::string(to_string(sorted[i])), std::string(to_string(sorted[j]))});
            }
        }
    }
    for (const auto& p : pairs) {
        for (const auto* l : {&p.first, &p.second}) {
            if (!langs_present.contains(*parse_language(*l))) {
                throw ConfigError(fmt::format("pair incomplete: {}-{} has no {} scores", p.first, p.second, *l));
            }
        }
    }

    std::vector<StabilityResult> results;
    for (auto metric : cfg.stability_metrics) {
        auto it = matrices.find(metric);
        if (it == matrices.end()) {
            *ctx.err << fmt::format("warning: no {} scores, metric skipped\n", to_string(metric));
            continue;
        }
        const auto& full = it->second;
        for (const auto& pair : pairs) {
            ScoreMatrix m;
            m.metric = full.metric;
            m.languages = {pair.first, pair.second};
            std::set<std::string> models;
            for (const auto& [key, _] : full.cells) models.insert(key.first);
            for (const auto& model : models) {
                auto a = full.cells.find({model, pair.first});
                auto b = full.cells.find({model, pair.second});
                if (a == full.cells.end() || b == full.cells.end()) {
                    *ctx.err << fmt::format("warning: {} lacks {} scores for {}-{}, model dropped\n", model, m.metric,
                                            pair.first, pair.second);
                    continue;
                }
                m.models.push_back(model);
                m.cells[{model, pair.first}] = a->second;
                m.cells[{model, pair.second}] = b->second;
            }
            const auto stream = hash_string(fmt::format("{}|{}|{}", m.metric, pair.first, pair.second));
            BootstrapOptions bo{cfg.n_bootstrap, derive_seed(cfg.stats_seed, stream), 0};
            PermutationOptions po;
            po.n_perm = cfg.n_perm;
            po.seed = derive_seed(cfg.stats_seed, stream ^ 0x5bd1e995ULL);
            auto r = analyze_pair(m, pair, bo, po);
            *ctx.out << stability_row(r) << "\n";
            results.push_back(std::move(r));
        }
    }
    reset_output(ctx.ws.stability());
    store_records(ctx.ws.stability(), results);
}

// ---------------------------------------------------------------- calibrate

void cmd_calibrate(Context& ctx, const std::optional<std::filesystem::path>& annotations_flag) {
    const auto& cfg = ctx.cfg;
    const auto path = annotations_flag ? annotations_flag : cfg.annotations;
    if (!path) throw ConfigError("calibration.annotations: no annotation file configured");
    const auto set = ingest_annotations(*path);
    for (const auto& e : set.errors) *ctx.err << fmt::format("warning: {}:{}: {}\n", path->generic_string(), e.line, e.message);
    const auto refs = reference_labels(set.records);

    nlohmann::json doc;
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& e : set.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    doc["annotations"] = {{"n_records", set.records.size()},
                          {"errors", errors},
                          {"excluded", set.excluded},
                          {"coherence", set.coherence},
                          {"fluency", set.fluency}};
    doc["references"] = {{"n_labels", refs.labels.size()},
                         {"coherence", {{"mean", refs.coherence.mean}, {"sd", refs.coherence.sd}, {"n", refs.coherence.n}}},
                         {"fluency", {{"mean", refs.fluency.mean}, {"sd", refs.fluency.sd}, {"n", refs.fluency.n}}},
                         {"excluded", refs.excluded},
                         {"labels", refs.labels}};

    // Judge scores and generator models of the calibration language.
    const Language lang = cfg.calibration_language;
    std::vector<JudgeScoreRecord> scores;
    std::map<std::string, std::string> dialogue_model;
    for (const auto& [l, file] : ctx.ws.dialogue_files()) {
        if (l != lang) continue;
        for (const auto& d : load_dialogues(file, *ctx.err)) {
            dialogue_model[d.id] = d.generator_model;
        }
    }
    std::set<std::string> models;
    for (const auto& [_, m] : dialogue_model) models.insert(m);
    for (const auto& m : models) {
        const auto file = ctx.ws.judge_scores(lang, m);
        if (!std::filesystem::exists(file)) continue;
        for (auto& r : load_records<JudgeScoreRecord>(file).records) {
            if (cfg.judge.judge_model.empty() || r.judge_model == cfg.judge.judge_model) scores.push_back(std::move(r));
        }
    }

    std::optional<AlignmentResult> alignment;
    std::string note;
    try {
        alignment = judge_human_alignment(scores, refs.labels, dialogue_model);
    } catch (const DataError& e) {
        note = e.what();
        *ctx.err << "warning: " << note << "\n";
    }
    doc["alignment"] = alignment ? nlohmann::json(*alignment) : nlohmann::json(nullptr);
    doc["alignment_note"] = note;

    std::vector<CorpusMetrics> surface;
    if (std::filesystem::exists(ctx.ws.metrics_summary())) {
        surface = load_records<CorpusMetrics>(ctx.ws.metrics_summary()).records;
    }
    const auto gate = stability_gate(surface, alignment, cfg.thresholds);
    doc["gate"] = gate;
    reset_output(ctx.ws.calibration());
    write_json_file(ctx.ws.calibration(), doc);

    auto kappa_text = [](const KappaSummary& k) {
        return k.kappa ? fmt::format("{} ({})", format_score(*k.kappa), to_string(*k.band)) : "n/a (" + k.note + ")";
    };
    *ctx.out << fmt::format("calibrate: {} rows, kappa coherence {}, fluency {}\n", set.records.size(),
                            kappa_text(set.coherence), kappa_text(set.fluency));
    *ctx.out << gate.narrative << "\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateFlags {
    std::string grid;
    std::optional<std::size_t> reps;
    std::optional<double> alpha;
    std::optional<std::size_t> models;
    bool null_world = false;
};

void cmd_simulate(Context& ctx, const SimulateFlags& flags) {
    auto cfg = ctx.cfg;
    if (!flags.grid.empty()) {
        cfg.noise_grid.clear();
        std::stringstream ss(flags.grid);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(item, &used);
                if (used != item.size() || v < 0) throw std::invalid_argument(item);
                cfg.noise_grid.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("--grid: '{}' is not a non-negative number", item));
            }
        }
    }
    if (flags.reps) cfg.sim_reps = *flags.reps;
    if (flags.alpha) cfg.alpha = *flags.alpha;
    if (flags.models) cfg.sim_models = *flags.models;
    if (cfg.sim_reps == 0) throw ConfigError("--reps: must be positive");
    if (cfg.sim_models < 2) throw ConfigError("--models: must be >= 2");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("--alpha: must be in (0, 1)");

    const double top = 1.5 + cfg.sim_spacing * static_cast<double>(cfg.sim_models - 1) / 2.0;
    auto world = evenly_spaced_world(cfg.sim_models, top, cfg.sim_spacing);
    world.n_dialogues_per_cell = cfg.sim_dialogues;
    world.lo = 0.0;
    world.hi = 3.0;
    world.mode = cfg.sim_mode;
    if (cfg.sim_planted_reversal && !flags.null_world) plant_reversal(world, "B");

    PowerOptions po;
    po.noise_grid = cfg.noise_grid;
    po.n_reps = cfg.sim_reps;
    po.alpha = cfg.alpha;
    po.seed = cfg.sim_seed;
    po.permutation.n_perm = cfg.n_perm;
    const auto rows = power_analysis(world, po);

    std::string csv = "noise_sd,n_reps,detections,rate,mean_inversions\n";
    for (const auto& r : rows) {
        csv += fmt::format("{},{},{},{:.4f},{:.3f}\n", r.noise_sd, r.n_reps, r.detections, r.rate, r.mean_inversions);
    }
    reset_output(ctx.ws.power());
    std::ofstream f(ctx.ws.power(), std::ios::binary);
    f << csv;
    if (!f) throw DataError("cannot write " + ctx.ws.power().string());
    *ctx.out << csv;
}

void cmd_report(Context& ctx) {
    build_report(ctx.ws);
    *ctx.out << fmt::format("report written to {}\n", ctx.ws.report().generic_string());
}

int fail(std::ostream& err, const char* category, const std::string& message, int code) {
    err << nlohmann::json{{"error", category}, {"message", message}}.dump() << "\n";
    return code;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-language ranking stability of LLM evaluation"};
    app.name("rankstab");
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::string workspace = ".";
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "Run configuration file");
    app.add_option("--workspace", workspace, "Workspace directory")->capture_default_str();
    app.add_option("--mode", mode, "live or replay")->check(CLI::IsMember({"live", "replay"}));
    app.add_option("--seed", seed, "Overrides every configured seed");

    auto* generate = app.add_subcommand("generate", "Generate dialogues for every configured model and language");
    auto* metrics = app.add_subcommand("metrics", "Automatic corpus metrics");
    auto* judge = app.add_subcommand("judge", "Rubric scoring with the judge model");
    auto* lra = app.add_subcommand("lra", "Label recovery with the judge model");
    auto* stability = app.add_subcommand("stability", "Ranking stability over stored scores");
    auto* calibrate = app.add_subcommand("calibrate", "Human annotation agreement, alignment and validity gate");
    std::optional<std::string> annotations;
    calibrate->add_option("--annotations", annotations, "Annotation file (.csv or record lines)");
    auto* simulate = app.add_subcommand("simulate", "Power analysis on planted synthetic worlds");
    SimulateFlags sim;
    simulate->add_option("--grid", sim.grid, "Comma-separated noise levels");
    simulate->add_option("--reps", sim.reps, "Replicates per noise level");
    simulate->add_option("--alpha", sim.alpha, "Significance level");
    simulate->add_option("--models", sim.models, "Number of planted models");
    simulate->add_flag("--null", sim.null_world, "No planted effect");
    auto* report = app.add_subcommand("report", "Render report.md and plot data");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << app.help();
        return fail(err, "usage", e.what(), 2);
    }

    try {
        Context ctx;
        ctx.out = &out;
        ctx.err = &err;
        if (config_path) ctx.cfg = load_config(*config_path);
        if (mode) ctx.cfg.mode = *parse_run_mode(*mode);
        if (seed) override_seed(ctx.cfg, *seed);
        ctx.ws = Workspace(workspace);
        std::filesystem::create_directories(ctx.ws.root());

        if (generate->parsed()) cmd_generate(ctx);
        else if (metrics->parsed()) cmd_metrics(ctx);
        else if (judge->parsed()) cmd_judge(ctx);
        else if (lra->parsed()) cmd_lra(ctx);
        else if (stability->parsed()) cmd_stability(ctx);
        else if (calibrate->parsed()) cmd_calibrate(ctx, annotations ? std::optional<std::filesystem::path>(*annotations) : std::nullopt);
        else if (simulate->parsed()) cmd_simulate(ctx, sim);
        else if (report->parsed()) cmd_report(ctx);
        return 0;
    } catch (const Error& e) {
        return fail(err, e.category(), e.what(), static_cast<int>(e.kind()));
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(err, "data", e.what(), static_cast<int>(ErrorKind::data));
    } catch (const nlohmann::json::exception& e) {
        return fail(err, "data", e.what(), static_cast<int>(ErrorKind::data));
    }
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace rankstab::cli
