#include "rankstab/config.hpp"

#include <charconv>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "rankstab/error.hpp"

namespace rankstab {

namespace {

using boost::property_tree::ptree;

std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t");
    return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(',', start);
        if (end == std::string::npos) end = s.size();
        auto item = trim(std::string_view(s).substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = end + 1;
    }
    return out;
}

/// Reads keys out of one parsed file and remembers which ones were consumed.
class Reader {
public:
    Reader(const ptree& tree, std::filesystem::path base) : tree_(tree), base_(std::move(base)) {}

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        auto v = tree_.get_optional<std::string>(ptree::path_type(key, '.'));
        if (!v) {
            // INI keys may themselves contain dots ("metrics.stopwords.et").
            const auto dot = key.find('.');
            if (auto section = tree_.get_child_optional(key.substr(0, dot))) {
                if (auto child = section->get_child_optional(ptree::path_type(key.substr(dot + 1), '\0'))) {
                    v = child->get_value<std::string>();
                }
            }
        }
        if (!v) return std::nullopt;
        return trim(*v);
    }

    std::string str(const std::string& key, std::string fallback) {
        auto v = raw(key);
        return v ? *v : fallback;
    }

    template <class T>
    T number(const std::string& key, T fallback) {
        auto v = raw(key);
        if (!v || v->empty()) return fallback;
        T out{};
        const auto* end = v->data() + v->size();
        auto [ptr, ec] = std::from_chars(v->data(), end, out);
        if (ec != std::errc{} || ptr != end) fail(key, fmt::format("'{}' is not a valid number", *v));
        return out;
    }

    bool boolean(const std::string& key, bool fallback) {
        auto v = raw(key);
        if (!v || v->empty()) return fallback;
        if (*v == "true" || *v == "yes" || *v == "1" || *v == "on") return true;
        if (*v == "false" || *v == "no" || *v == "0" || *v == "off") return false;
        fail(key, fmt::format("'{}' is not a boolean", *v));
    }

    std::optional<std::filesystem::path> path(const std::string& key) {
        auto v = raw(key);
        if (!v || v->empty()) return std::nullopt;
        std::filesystem::path p(*v);
        return p.is_absolute() ? p : (base_ / p).lexically_normal();
    }

    Language language(const std::string& key, Language fallback) {
        auto v = raw(key);
        if (!v || v->empty()) return fallback;
        auto l = parse_language(*v);
        if (!l) fail(key, fmt::format("unknown language '{}'", *v));
        return *l;
    }

    /// Keys of a section that start with `prefix.`
    std::vector<std::string> suffixes(const std::string& section, const std::string& prefix) {
        std::vector<std::string> out;
        if (auto s = tree_.get_child_optional(section)) {
            for (const auto& [k, _] : *s) {
                if (k.rfind(prefix + ".", 0) == 0) {
                    out.push_back(k.substr(prefix.size() + 1));
                    used_.insert(section + "." + k);
                }
            }
        }
        return out;
    }

    [[noreturn]] static void fail(const std::string& key, const std::string& msg) {
        throw ConfigError(fmt::format("{}: {}", key, msg));
    }

    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty()) fail(section, "key outside any section");
            for (const auto& [k, _] : body) {
                const auto key = section + "." + k;
                if (!used_.contains(key)) fail(key, "unknown key");
            }
        }
    }

private:
    const ptree& tree_;
    std::filesystem::path base_;
    std::set<std::string> used_;
};

void require(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) Reader::fail(key, msg);
}

} // namespace

std::optional<RunMode> parse_run_mode(std::string_view s) {
    if (s == "live") return RunMode::live;
    if (s == "replay") return RunMode::replay;
    return std::nullopt;
}

RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("config file {} not found", path.string()));
    ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(fmt::format("{}:{}: {}", path.string(), e.line(), e.message()));
    }
    Reader r(tree, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    RunConfig c;

    // generation
    c.models = split_list(r.str("generation.models", ""));
    if (auto langs = r.raw("generation.languages"); langs && !langs->empty()) {
        c.languages.clear();
        for (const auto& s : split_list(*langs)) {
            auto l = parse_language(s);
            if (!l) Reader::fail("generation.languages", fmt::format("unknown language '{}'", s));
            c.languages.push_back(*l);
        }
    }
    c.n_per_language = r.number<std::size_t>("generation.n_per_language", c.n_per_language);
    c.policy.rng_seed = r.number<std::uint64_t>("generation.seed", 0);
    c.policy.p_two_agents = r.number<double>("generation.p_two_agents", c.policy.p_two_agents);
    if (auto w = r.raw("generation.length_weights"); w && !w->empty()) {
        const auto items = split_list(*w);
        if (items.size() != 4) Reader::fail("generation.length_weights", "expected four weights for 4, 8, 12, 16 messages");
        for (std::size_t i = 0; i < 4; ++i) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(items[i].data(), items[i].data() + items[i].size(), v);
            if (ec != std::errc{} || ptr != items[i].data() + items[i].size()) {
                Reader::fail("generation.length_weights", fmt::format("'{}' is not a number", items[i]));
            }
            c.policy.message_length_weights[i] = v;
        }
    }
    try {
        validate_policy(c.policy);
    } catch (const ConfigError& e) {
        Reader::fail("generation.length_weights", e.what());
    }
    c.temperature = r.number<double>("generation.temperature", c.temperature);
    if (int mt = r.number<int>("generation.max_tokens", 0); mt > 0) c.max_tokens = mt;
    c.max_in_flight = r.number<int>("generation.max_in_flight", c.max_in_flight);
    require(c.max_in_flight >= 1, "generation.max_in_flight", "must be >= 1");
    c.created_at = r.str("generation.created_at", "");

    // gateway
    if (auto m = r.raw("gateway.mode"); m && !m->empty()) {
        auto mode = parse_run_mode(*m);
        if (!mode) Reader::fail("gateway.mode", fmt::format("expected live or replay, got '{}'", *m));
        c.mode = *mode;
    }
    c.fixture = r.path("gateway.fixture");
    c.retries = r.number<int>("gateway.retries", c.retries);
    require(c.retries >= 0, "gateway.retries", "must be >= 0");
    c.backoff_ms = r.number<int>("gateway.backoff_ms", c.backoff_ms);
    c.rate_per_min = r.number<double>("gateway.rate_per_min", c.rate_per_min);
    c.timeout_s = r.number<int>("gateway.timeout_s", c.timeout_s);
    require(c.timeout_s > 0, "gateway.timeout_s", "must be > 0");

    // metrics
    c.window = r.number<std::size_t>("metrics.window", c.window);
    require(c.window > 0, "metrics.window", "must be > 0");
    c.max_pairs = r.number<std::size_t>("metrics.max_pairs", c.max_pairs);
    c.metrics_seed = r.number<std::uint64_t>("metrics.seed", 0);
    c.lemmatize_self_bleu = r.boolean("metrics.lemmatize_self_bleu", false);
    for (const auto& lang : r.suffixes("metrics", "stopwords")) {
        const auto l = parse_language(lang);
        if (!l) Reader::fail("metrics.stopwords." + lang, "unknown language");
        c.stopwords[*l] = *r.path("metrics.stopwords." + lang);
    }
    for (const auto& lang : r.suffixes("metrics", "lemmatizer")) {
        const auto l = parse_language(lang);
        if (!l) Reader::fail("metrics.lemmatizer." + lang, "unknown language");
        c.lemmatizers[*l] = r.str("metrics.lemmatizer." + lang, "");
    }
    c.embedder = r.str("metrics.embedder", c.embedder);
    require(c.embedder == "hashing" || c.embedder == "http" || c.embedder == "none", "metrics.embedder",
            "expected hashing, http or none");
    c.embedding_model = r.str("metrics.embedding_model", "");
    c.embedding_url = r.str("metrics.embedding_url", "");
    if (c.embedder == "http" && (c.embedding_model.empty() || c.embedding_url.empty())) {
        Reader::fail("metrics.embedding_model", "http embedder needs embedding_model and embedding_url");
    }

    // judge
    c.judge.judge_model = r.str("judge.model", "");
    c.judge.prompt_language = r.language("judge.prompt_language", Language::en);
    c.judge.sample_size = r.number<std::size_t>("judge.sample_size", c.judge.sample_size);
    require(c.judge.sample_size > 0, "judge.sample_size", "must be a positive integer");
    c.judge.seed = r.number<std::uint64_t>("judge.seed", 0);
    c.judge.temperature = r.number<double>("judge.temperature", 0.0);
    c.judge.max_in_flight = r.number<int>("judge.max_in_flight", c.judge.max_in_flight);
    c.judge.rubric_template_id = r.str("judge.rubric_template", c.judge.rubric_template_id);
    c.judge.lra_template_id = r.str("judge.lra_template", c.judge.lra_template_id);
    c.templates_dir = r.path("judge.templates_dir");
    c.compare_judges = split_list(r.str("judge.compare", ""));
    if (auto cl = r.raw("judge.compare_language"); cl && !cl->empty()) {
        c.compare_language = r.language("judge.compare_language", Language::en);
    }

    // stats
    c.n_bootstrap = r.number<std::size_t>("stats.n_bootstrap", c.n_bootstrap);
    require(c.n_bootstrap > 0, "stats.n_bootstrap", "must be > 0");
    c.n_perm = r.number<std::size_t>("stats.n_perm", c.n_perm);
    require(c.n_perm > 0, "stats.n_perm", "must be > 0");
    c.stats_seed = r.number<std::uint64_t>("stats.seed", 0);
    c.alpha = r.number<double>("stats.alpha", c.alpha);
    require(c.alpha > 0.0 && c.alpha < 1.0, "stats.alpha", "must be in (0, 1)");
    for (const auto& p : split_list(r.str("stats.pairs", ""))) {
        const auto dash = p.find('-');
        const auto a = dash == std::string::npos ? std::nullopt : parse_language(p.substr(0, dash));
        const auto b = dash == std::string::npos ? std::nullopt : parse_language(p.substr(dash + 1));
        if (!a || !b || *a == *b) Reader::fail("stats.pairs", fmt::format("'{}' is not a pair like et-fi", p));
        c.pairs.push_back({std::string(to_string(*a)), std::string(to_string(*b))});
    }
    if (auto ms = r.raw("stats.metrics"); ms && !ms->empty()) {
        c.stability_metrics.clear();
        for (const auto& s : split_list(*ms)) {
            auto m = parse_score_metric(s);
            if (!m) Reader::fail("stats.metrics", fmt::format("unknown metric '{}'", s));
            c.stability_metrics.push_back(*m);
        }
    }

    // calibration
    c.annotations = r.path("calibration.annotations");
    c.calibration_language = r.language("calibration.language", Language::et);
    c.thresholds.max_similarity_delta =
        r.number<double>("calibration.max_similarity_delta", c.thresholds.max_similarity_delta);
    c.thresholds.min_rho = r.number<double>("calibration.min_rho", c.thresholds.min_rho);

    // simulate
    c.sim_models = r.number<std::size_t>("simulate.models", c.sim_models);
    require(c.sim_models >= 2, "simulate.models", "must be >= 2");
    c.sim_dialogues = r.number<std::size_t>("simulate.dialogues", c.sim_dialogues);
    require(c.sim_dialogues >= 2, "simulate.dialogues", "must be >= 2");
    c.sim_spacing = r.number<double>("simulate.spacing", c.sim_spacing);
    c.sim_planted_reversal = r.boolean("simulate.planted_reversal", c.sim_planted_reversal);
    if (auto g = r.raw("simulate.noise_grid"); g && !g->empty()) {
        c.noise_grid.clear();
        for (const auto& s : split_list(*g)) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0) {
                Reader::fail("simulate.noise_grid", fmt::format("'{}' is not a non-negative number", s));
            }
            c.noise_grid.push_back(v);
        }
    }
    c.sim_reps = r.number<std::size_t>("simulate.reps", c.sim_reps);
    c.sim_seed = r.number<std::uint64_t>("simulate.seed", 0);
    if (auto m = r.raw("simulate.score_mode"); m && !m->empty()) {
        if (*m == "clip_round") c.sim_mode = ScoreMode::clip_round;
        else if (*m == "clip") c.sim_mode = ScoreMode::clip;
        else if (*m == "raw") c.sim_mode = ScoreMode::raw;
        else Reader::fail("simulate.score_mode", fmt::format("'{}' is not one of clip_round, clip, raw", *m));
    }

    r.reject_unknown();
    return c;
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.policy.rng_seed = seed;
    cfg.metrics_seed = seed;
    cfg.judge.seed = seed;
    cfg.stats_seed = seed;
    cfg.sim_seed = seed;
}

} // namespace rankstab
