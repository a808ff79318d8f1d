#pragma once

// Automatic corpus metrics: TTR, MATTR, self-BLEU at three granularities and
// intra-model conversation similarity.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rankstab/corpus.hpp"
#include "rankstab/gateway.hpp"

namespace rankstab {

enum class Granularity : std::uint8_t { full, agent_only, client_only };

std::string_view to_string(Granularity g);

struct TokenStream {
    std::vector<std::string> tokens;
    std::string source_dialogue_id;
    Granularity granularity = Granularity::full;
};

using Stopwords = std::set<std::string, std::less<>>;

/// One stopword per line; blank lines and '#' comments ignored; lowercased.
Stopwords load_stopwords(const std::filesystem::path& path);

class Normalizer {
public:
    virtual ~Normalizer() = default;
    virtual std::vector<std::string> tokens(std::string_view text, Language language) const = 0;
};

/// Unicode word segmentation, lowercasing and stopword removal.
class FallbackNormalizer : public Normalizer {
public:
    FallbackNormalizer() = default;
    explicit FallbackNormalizer(std::map<Language, Stopwords> stopwords)
        : stopwords_(std::move(stopwords)) {}

    std::vector<std::string> tokens(std::string_view text, Language language) const override;

private:
    std::map<Language, Stopwords> stopwords_;
};

/// Runs an external lemmatizer per language as `<command> < textfile` and
/// splits its stdout on whitespace. Stopwords are removed afterwards.
class ExternalLemmatizer : public Normalizer {
public:
    ExternalLemmatizer(std::map<Language, std::string> commands, std::map<Language, Stopwords> stopwords,
                       std::shared_ptr<const Normalizer> fallback = nullptr);

    /// Throws DataError when the adapter is missing or fails and no fallback was given.
    std::vector<std::string> tokens(std::string_view text, Language language) const override;

private:
    std::map<Language, std::string> commands_;
    std::map<Language, Stopwords> stopwords_;
    std::shared_ptr<const Normalizer> fallback_;
};

/// Runs a shell command with `input` on stdin; returns stdout. Throws DataError
/// on spawn failure or nonzero exit.
std::string run_filter_command(const std::string& command, std::string_view input);

TokenStream normalize(std::string_view text, Language language, const Normalizer& normalizer,
                      std::string source_dialogue_id = {}, Granularity granularity = Granularity::full);

/// distinct / total. Empty stream throws DataError.
double ttr(const TokenStream& ts);

/// Mean TTR over all stride-1 windows; equals ttr() when the stream is not
/// longer than the window.
double mattr(const TokenStream& ts, std::size_t window = 100);

/// Mean 4-gram BLEU of each document against all others, with NLTK's
/// smoothing method 4 (k = 5). Needs at least two documents.
double self_bleu(std::span<const TokenStream> corpus, std::size_t threads = 0);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// OpenAI-style embedding endpoint: {"model", "input": [...]} -> {"data": [{"embedding": [...]}]}.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(std::shared_ptr<Transport> transport, std::string model, std::size_t batch_size = 32);
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::shared_ptr<Transport> transport_;
    std::string model_;
    std::size_t batch_size_;
};

/// Offline stand-in: signed feature hashing of lowercased word unigrams and
/// bigrams. Deterministic and dependency-free; not a semantic model.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct SimilarityStats {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n_pairs = 0;
};

/// Cosine similarity over up to `max_pairs` uniformly sampled unordered pairs
/// (all pairs if fewer). Dialogues are ordered by id before sampling.
SimilarityStats intra_model_similarity(std::span<const Dialogue> dialogues, Embedder& embedder,
                                       std::size_t max_pairs = 2000, std::uint64_t seed = 0);

struct DialogueMetrics {
    std::string dialogue_id;
    std::size_t n_tokens = 0;
    double ttr = 0.0;
    double mattr = 0.0;
};

/// A value that may be absent, together with the reason.
struct OptionalValue {
    std::optional<double> value;
    std::string note;
};

struct CorpusMetrics {
    std::string generator_model;
    Language language = Language::et;
    std::size_t n_dialogues = 0;
    double ttr_mean = 0.0, ttr_sd = 0.0;
    double mattr_mean = 0.0, mattr_sd = 0.0;
    OptionalValue self_bleu_full, self_bleu_agent, self_bleu_client;
    OptionalValue intra_sim_mean, intra_sim_sd;
};

struct MetricsOptions {
    std::size_t window = 100;
    std::size_t max_pairs = 2000;
    std::uint64_t seed = 0;
    /// Self-BLEU uses plain lowercased tokens unless this is set.
    bool lemmatize_self_bleu = false;
    std::size_t threads = 0; // 0: hardware concurrency
};

struct CorpusMetricsRun {
    CorpusMetrics summary;
    std::vector<DialogueMetrics> per_dialogue;
};

/// `embedder` may be null; similarity is then absent with a note.
CorpusMetricsRun corpus_metrics(std::span<const Dialogue> dialogues, Language language,
                                const Normalizer& normalizer, Embedder* embedder,
                                const MetricsOptions& options = {});

void to_json(nlohmann::json& j, const DialogueMetrics& m);
void from_json(const nlohmann::json& j, DialogueMetrics& m);
void to_json(nlohmann::json& j, const CorpusMetrics& m);
void from_json(const nlohmann::json& j, CorpusMetrics& m);

} // namespace rankstab
