#include "rankstab/surface_metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <sys/wait.h>
#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>
#include <unistd.h>

#include "rankstab/descriptive.hpp"
#include "rankstab/error.hpp"
#include "rankstab/parallel.hpp"
#include "rankstab/random.hpp"

namespace rankstab {

std::string_view to_string(Granularity g) {
    switch (g) {
    case Granularity::full: return "full";
    case Granularity::agent_only: return "agent_only";
    case Granularity::client_only: return "client_only";
    }
    return "full";
}

Stopwords load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read stopword list {}", path.string()));
    Stopwords out;
    FallbackNormalizer plain;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (auto& t : plain.tokens(line, Language::en)) out.insert(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------- normalizers

std::vector<std::string> FallbackNormalizer::tokens(std::string_view text, Language language) const {
    const icu::Locale locale(std::string(to_string(language)).c_str());
    const auto ustr = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> words(icu::BreakIterator::createWordInstance(locale, status));
    if (U_FAILURE(status)) throw DataError(fmt::format("ICU word segmentation unavailable: {}", u_errorName(status)));
    words->setText(ustr);

    const Stopwords* stop = nullptr;
    if (auto it = stopwords_.find(language); it != stopwords_.end()) stop = &it->second;

    std::vector<std::string> out;
    int32_t start = words->first();
    for (int32_t end = words->next(); end != icu::BreakIterator::DONE; start = end, end = words->next()) {
        if (words->getRuleStatus() == UBRK_WORD_NONE) continue; // spaces, punctuation
        icu::UnicodeString piece(ustr, start, end - start);
        piece.toLower(locale);
        std::string token;
        piece.toUTF8String(token);
        if (stop && stop->count(token)) continue;
        out.push_back(std::move(token));
    }
    return out;
}

ExternalLemmatizer::ExternalLemmatizer(std::map<Language, std::string> commands,
                                       std::map<Language, Stopwords> stopwords,
                                       std::shared_ptr<const Normalizer> fallback)
    : commands_(std::move(commands)), stopwords_(std::move(stopwords)), fallback_(std::move(fallback)) {}

std::vector<std::string> ExternalLemmatizer::tokens(std::string_view text, Language language) const {
    std::string output;
    try {
        auto it = commands_.find(language);
        if (it == commands_.end()) {
            throw DataError(fmt::format("no lemmatizer configured for {}", to_string(language)));
        }
        output = run_filter_command(it->second, text);
    } catch (const DataError&) {
        if (!fallback_) throw;
        return fallback_->tokens(text, language);
    }
    const Stopwords* stop = nullptr;
    if (auto s = stopwords_.find(language); s != stopwords_.end()) stop = &s->second;
    std::vector<std::string> out;
    std::istringstream in(output);
    std::string lemma;
    while (in >> lemma) {
        if (stop && stop->count(lemma)) continue;
        out.push_back(std::move(lemma));
    }
    return out;
}

std::string run_filter_command(const std::string& command, std::string_view input) {
    auto tmpl = (std::filesystem::temp_directory_path() / "rankstab-XXXXXX").string();
    std::vector<char> name(tmpl.begin(), tmpl.end());
    name.push_back('\0');
    const int fd = mkstemp(name.data());
    if (fd < 0) throw DataError("cannot create temporary file for lemmatizer input");
    const std::string path(name.data());
    {
        std::size_t off = 0;
        while (off < input.size()) {
            const auto n = ::write(fd, input.data() + off, input.size() - off);
            if (n <= 0) {
                ::close(fd);
                std::filesystem::remove(path);
                throw DataError("cannot write lemmatizer input");
            }
            off += static_cast<std::size_t>(n);
        }
        ::close(fd);
    }

    const std::string full = fmt::format("{} < '{}'", command, path);
    FILE* pipe = ::popen(full.c_str(), "r");
    if (!pipe) {
        std::filesystem::remove(path);
        throw DataError(fmt::format("cannot start lemmatizer '{}'", command));
    }
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = ::pclose(pipe);
    std::filesystem::remove(path);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw DataError(fmt::format("lemmatizer '{}' failed", command));
    }
    return out;
}

TokenStream normalize(std::string_view text, Language language, const Normalizer& normalizer,
                      std::string source_dialogue_id, Granularity granularity) {
    return {normalizer.tokens(text, language), std::move(source_dialogue_id), granularity};
}

// ---------------------------------------------------------------- TTR / MATTR

double ttr(const TokenStream& ts) {
    if (ts.tokens.empty()) throw DataError("TTR of an empty token stream is undefined");
    const std::set<std::string_view> distinct(ts.tokens.begin(), ts.tokens.end());
    return static_cast<double>(distinct.size()) / static_cast<double>(ts.tokens.size());
}

double mattr(const TokenStream& ts, std::size_t window) {
    if (window == 0) throw DataError("MATTR window must be positive");
    if (ts.tokens.empty()) throw DataError("MATTR of an empty token stream is undefined");
    const auto& tok = ts.tokens;
    if (tok.size() <= window) return ttr(ts);

    std::unordered_map<std::string_view, std::size_t> counts;
    std::size_t types = 0;
    for (std::size_t i = 0; i < window; ++i) {
        if (counts[tok[i]]++ == 0) ++types;
    }
    double sum = static_cast<double>(types);
    for (std::size_t i = window; i < tok.size(); ++i) {
        if (counts[tok[i]]++ == 0) ++types;
        if (--counts[tok[i - window]] == 0) --types;
        sum += static_cast<double>(types);
    }
    const auto n_windows = static_cast<double>(tok.size() - window + 1);
    return sum / n_windows / static_cast<double>(window);
}

// ---------------------------------------------------------------- self-BLEU

namespace {

constexpr int kMaxOrder = 4;
constexpr double kMethod4K = 5.0;

using NgramKey = std::string; // packed 32-bit token ids

struct DocNgrams {
    std::size_t length = 0;
    std::array<std::unordered_map<NgramKey, int>, kMaxOrder> counts;
};

/// Largest count of an n-gram over all documents, plus the runner-up from any
/// other document, so "max over references except me" is O(1).
struct TopTwo {
    int best = 0;
    std::size_t best_doc = SIZE_MAX;
    int second = 0;
};

NgramKey pack(const std::vector<std::uint32_t>& ids, std::size_t start, int n) {
    NgramKey key(static_cast<std::size_t>(n) * 4, '\0');
    for (int k = 0; k < n; ++k) std::memcpy(key.data() + 4 * k, &ids[start + k], 4);
    return key;
}

std::size_t closest_ref_length(const std::vector<std::size_t>& sorted, std::size_t own) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), own);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), own);
    if (hi - lo >= 2) return own; // another document has the same length
    std::optional<std::size_t> below, above;
    if (lo != sorted.begin()) below = *(lo - 1);
    if (hi != sorted.end()) above = *hi;
    if (!below) return *above;
    if (!above) return *below;
    // ties on distance prefer the shorter reference
    return (own - *below) <= (*above - own) ? *below : *above;
}

} // namespace

double self_bleu(std::span<const TokenStream> corpus, std::size_t threads) {
    if (corpus.size() < 2) throw DataError("self-BLEU needs >= 2 documents");

    std::unordered_map<std::string_view, std::uint32_t> vocab;
    std::vector<DocNgrams> docs(corpus.size());
    std::vector<std::size_t> lengths;
    std::array<std::unordered_map<NgramKey, TopTwo>, kMaxOrder> index;

    for (std::size_t d = 0; d < corpus.size(); ++d) {
        std::vector<std::uint32_t> ids;
        ids.reserve(corpus[d].tokens.size());
        for (const auto& t : corpus[d].tokens) {
            ids.push_back(vocab.try_emplace(t, static_cast<std::uint32_t>(vocab.size())).first->second);
        }
        docs[d].length = ids.size();
        lengths.push_back(ids.size());
        for (int n = 1; n <= kMaxOrder; ++n) {
            auto& counts = docs[d].counts[n - 1];
            for (std::size_t i = 0; i + n <= ids.size(); ++i) ++counts[pack(ids, i, n)];
            for (const auto& [key, c] : counts) {
                auto& top = index[n - 1][key];
                if (c > top.best) {
                    top.second = top.best;
                    top.best = c;
                    top.best_doc = d;
                } else if (c > top.second) {
                    top.second = c;
                }
            }
        }
    }
    std::sort(lengths.begin(), lengths.end());

    std::vector<double> scores(corpus.size(), 0.0);
    parallel_for(corpus.size(), threads ? threads : hardware_threads(), [&](std::size_t d) {
        const auto& doc = docs[d];
        const std::size_t hyp_len = doc.length;
        std::array<long, kMaxOrder> num{}, den{};
        for (int n = 1; n <= kMaxOrder; ++n) {
            long total = 0;
            for (const auto& [key, c] : doc.counts[n - 1]) {
                const auto& top = index[n - 1].at(key);
                const int ref_max = top.best_doc == d ? top.second : top.best;
                num[n - 1] += std::min(c, ref_max);
                total += c;
            }
            den[n - 1] = std::max(1L, total);
        }
        if (num[0] == 0) {
            scores[d] = 0.0;
            return;
        }
        const std::size_t ref_len = closest_ref_length(lengths, hyp_len);
        double bp = 1.0;
        if (hyp_len <= ref_len) {
            bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
        }
        double log_sum = 0.0;
        int smoothing_step = 1;
        for (int n = 0; n < kMaxOrder; ++n) {
            double p = static_cast<double>(num[n]) / static_cast<double>(den[n]);
            if (num[n] == 0 && hyp_len > 1) {
                const double smoothed =
                    1.0 / (std::pow(2.0, smoothing_step) * kMethod4K / std::log(static_cast<double>(hyp_len)));
                p = smoothed / static_cast<double>(den[n]);
                ++smoothing_step;
            }
            if (p > 0.0) log_sum += 0.25 * std::log(p);
        }
        scores[d] = bp * std::exp(log_sum);
    });

    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------- embeddings

HttpEmbedder::HttpEmbedder(std::shared_ptr<Transport> transport, std::string model, std::size_t batch_size)
    : transport_(std::move(transport)), model_(std::move(model)), batch_size_(std::max<std::size_t>(1, batch_size)) {
    if (!transport_) throw ConfigError("embedding provider needs a transport");
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
        const auto batch = texts.subspan(start, std::min(batch_size_, texts.size() - start));
        nlohmann::json body{{"model", model_}, {"input", std::vector<std::string>(batch.begin(), batch.end())}};
        const auto reply = transport_->post(body.dump());
        if (reply.status < 200 || reply.status >= 300) {
            throw ProviderError(fmt::format("embedding provider returned HTTP {}", reply.status));
        }
        try {
            const auto j = nlohmann::json::parse(reply.body);
            const auto& data = j.at("data");
            if (data.size() != batch.size()) throw ProtocolError("embedding count does not match input count");
            for (const auto& item : data) out.push_back(item.at("embedding").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(fmt::format("malformed embedding reply: {}", e.what()));
        }
    }
    return out;
}

std::vector<std::vector<double>> HashingEmbedder::embed(std::span<const std::string> texts) {
    FallbackNormalizer words;
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dim_, 0.0);
        const auto toks = words.tokens(text, Language::en);
        auto add = [&](const std::string& feature) {
            const auto h = hash_string(feature);
            v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
        };
        for (std::size_t i = 0; i < toks.size(); ++i) {
            add(toks[i]);
            if (i + 1 < toks.size()) add(toks[i] + ' ' + toks[i + 1]);
        }
        out.push_back(std::move(v));
    }
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DataError("degenerate embedding");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

SimilarityStats intra_model_similarity(std::span<const Dialogue> dialogues, Embedder& embedder,
                                       std::size_t max_pairs, std::uint64_t seed) {
    if (dialogues.size() < 2) throw DataError("intra-model similarity needs >= 2 dialogues");
    std::vector<const Dialogue*> ordered;
    for (const auto& d : dialogues) ordered.push_back(&d);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::vector<std::string> texts;
    for (const auto* d : ordered) texts.push_back(d->full_text());
    const auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) throw DataError("embedder returned the wrong number of vectors");

    const std::uint64_t n = ordered.size();
    const std::uint64_t total_pairs = n * (n - 1) / 2;
    std::vector<std::uint64_t> picks;
    if (max_pairs == 0 || total_pairs <= max_pairs) {
        picks.resize(total_pairs);
        std::iota(picks.begin(), picks.end(), 0);
    } else {
        // Floyd's algorithm: max_pairs distinct indices out of total_pairs.
        Rng rng(seed);
        std::set<std::uint64_t> chosen;
        for (std::uint64_t j = total_pairs - max_pairs; j < total_pairs; ++j) {
            const auto t = rng.below(j + 1);
            if (!chosen.insert(t).second) chosen.insert(j);
        }
        picks.assign(chosen.begin(), chosen.end());
    }

    std::vector<double> sims;
    sims.reserve(picks.size());
    std::uint64_t row = 0, row_start = 0;
    for (const auto k : picks) { // picks are ascending
        while (k >= row_start + (n - 1 - row)) {
            row_start += n - 1 - row;
            ++row;
        }
        const auto col = row + 1 + (k - row_start);
        sims.push_back(cosine_similarity(vectors[row], vectors[col]));
    }
    const auto ms = mean_sd(sims);
    return {ms.mean, ms.sd, sims.size()};
}

// ---------------------------------------------------------------- corpus

CorpusMetricsRun corpus_metrics(std::span<const Dialogue> dialogues, Language language,
                                const Normalizer& normalizer, Embedder* embedder,
                                const MetricsOptions& options) {
    if (dialogues.empty()) throw DataError("corpus metrics need a non-empty corpus");
    const std::size_t threads = options.threads ? options.threads : hardware_threads();
    FallbackNormalizer plain;
    const Normalizer& bleu_normalizer = options.lemmatize_self_bleu ? normalizer : plain;

    const std::size_t n = dialogues.size();
    CorpusMetricsRun run;
    run.per_dialogue.resize(n);
    std::vector<TokenStream> full(n), agent(n), client(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto& d = dialogues[i];
        auto lemmas = normalize(d.full_text(), language, normalizer, d.id);
        auto& m = run.per_dialogue[i];
        m.dialogue_id = d.id;
        m.n_tokens = lemmas.tokens.size();
        if (!lemmas.tokens.empty()) {
            m.ttr = ttr(lemmas);
            m.mattr = mattr(lemmas, options.window);
        }
        full[i] = normalize(d.full_text(), language, bleu_normalizer, d.id, Granularity::full);
        agent[i] = normalize(d.role_text(Role::agent), language, bleu_normalizer, d.id, Granularity::agent_only);
        client[i] = normalize(d.role_text(Role::customer), language, bleu_normalizer, d.id,
                              Granularity::client_only);
    });

    auto& s = run.summary;
    s.generator_model = dialogues.front().generator_model;
    s.language = language;
    s.n_dialogues = n;
    std::vector<double> ttrs, mattrs;
    for (const auto& m : run.per_dialogue) {
        if (m.n_tokens == 0) continue;
        ttrs.push_back(m.ttr);
        mattrs.push_back(m.mattr);
    }
    const auto t = mean_sd(ttrs);
    const auto mt = mean_sd(mattrs);
    s.ttr_mean = t.mean;
    s.ttr_sd = t.sd;
    s.mattr_mean = mt.mean;
    s.mattr_sd = mt.sd;

    auto bleu = [&](std::vector<TokenStream>& docs) -> OptionalValue {
        try {
            return {self_bleu(docs, threads), {}};
        } catch (const DataError& e) {
            return {std::nullopt, e.what()};
        }
    };
    s.self_bleu_full = bleu(full);
    s.self_bleu_agent = bleu(agent);
    s.self_bleu_client = bleu(client);

    if (!embedder) {
        s.intra_sim_mean = s.intra_sim_sd = {std::nullopt, "no embedder configured"};
    } else {
        try {
            const auto sim = intra_model_similarity(dialogues, *embedder, options.max_pairs, options.seed);
            s.intra_sim_mean = {sim.mean, {}};
            s.intra_sim_sd = {sim.sd, {}};
        } catch (const DataError& e) {
            s.intra_sim_mean = s.intra_sim_sd = {std::nullopt, e.what()};
        }
    }
    return run;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const DialogueMetrics& m) {
    j = nlohmann::json{{"dialogue_id", m.dialogue_id}, {"n_tokens", m.n_tokens}, {"ttr", m.ttr}, {"mattr", m.mattr}};
}

void from_json(const nlohmann::json& j, DialogueMetrics& m) {
    m.dialogue_id = j.at("dialogue_id").get<std::string>();
    m.n_tokens = j.at("n_tokens").get<std::size_t>();
    m.ttr = j.at("ttr").get<double>();
    m.mattr = j.at("mattr").get<double>();
}

namespace {

nlohmann::json optional_to_json(const OptionalValue& v) {
    if (v.value) return *v.value;
    return nlohmann::json{{"absent", v.note}};
}

OptionalValue optional_from_json(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>(), {}};
    return {std::nullopt, j.value("absent", std::string{})};
}

} // namespace

void to_json(nlohmann::json& j, const CorpusMetrics& m) {
    j = nlohmann::json{{"generator_model", m.generator_model},
                       {"language", to_string(m.language)},
                       {"n_dialogues", m.n_dialogues},
                       {"ttr_mean", m.ttr_mean},
                       {"ttr_sd", m.ttr_sd},
                       {"mattr_mean", m.mattr_mean},
                       {"mattr_sd", m.mattr_sd},
                       {"self_bleu_full", optional_to_json(m.self_bleu_full)},
                       {"self_bleu_agent", optional_to_json(m.self_bleu_agent)},
                       {"self_bleu_client", optional_to_json(m.self_bleu_client)},
                       {"intra_sim_mean", optional_to_json(m.intra_sim_mean)},
                       {"intra_sim_sd", optional_to_json(m.intra_sim_sd)}};
}

void from_json(const nlohmann::json& j, CorpusMetrics& m) {
    m.generator_model = j.at("generator_model").get<std::string>();
    const auto lang = j.at("language").get<std::string>();
    auto parsed = parse_language(lang);
    if (!parsed) throw DataError(fmt::format("unknown language '{}'", lang));
    m.language = *parsed;
    m.n_dialogues = j.at("n_dialogues").get<std::size_t>();
    m.ttr_mean = j.at("ttr_mean").get<double>();
    m.ttr_sd = j.at("ttr_sd").get<double>();
    m.mattr_mean = j.at("mattr_mean").get<double>();
    m.mattr_sd = j.at("mattr_sd").get<double>();
    m.self_bleu_full = optional_from_json(j.at("self_bleu_full"));
    m.self_bleu_agent = optional_from_json(j.at("self_bleu_agent"));
    m.self_bleu_client = optional_from_json(j.at("self_bleu_client"));
    m.intra_sim_mean = optional_from_json(j.at("intra_sim_mean"));
    m.intra_sim_sd = optional_from_json(j.at("intra_sim_sd"));
}

} // namespace rankstab
