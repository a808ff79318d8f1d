#pragma once

// Controlled generation protocol: parameter sampling, prompt rendering,
// transcript parsing and corpus generation through the gateway.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rankstab/corpus.hpp"
#include "rankstab/gateway.hpp"

namespace rankstab {

struct SamplingPolicy {
    /// Probabilities of 4, 8, 12 and 16 messages.
    std::array<double, 4> message_length_weights{0.4, 0.3, 0.2, 0.1};
    /// Probability that a dialogue has two agents instead of one.
    double p_two_agents = 0.1;
    std::uint64_t rng_seed = 0;
};

/// Throws ConfigError for negative weights or weights not summing to 1 (±1e-9).
void validate_policy(const SamplingPolicy& policy);

/// Deterministic in (policy, n, language). The language never touches the
/// random stream, so equal seeds give equal non-language fields across languages.
std::vector<GenerationParams> sample_params(const SamplingPolicy& policy, std::size_t n,
                                            Language language);

struct PromptPair {
    std::string system;
    std::string user;
};

std::string_view generation_system_prompt();
std::string_view generation_user_template();

/// Replaces every {name}; unknown names and unbalanced braces throw ConfigError.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

PromptPair render_generation_prompt(const GenerationParams& p);

struct ParsedTranscript {
    std::vector<Turn> turns;
    std::vector<std::string> problems;
};

/// Reads "AGENT: ..." / "CUSTOMER: ..." lines (case-insensitive, optional
/// agent number or "(email)"). Lines without a marker continue the previous
/// turn; text before the first marker is reported, never guessed at.
ParsedTranscript parse_transcript(std::string_view text, const GenerationParams& params);

struct GenerationOptions {
    std::string generator_model;
    double temperature = 0.7;
    std::optional<int> max_tokens;
    int max_in_flight = 8;
    std::string created_at; // empty: current UTC time
};

struct GenerationFailure {
    std::size_t index = 0;
    std::string dialogue_id;
    std::string reason;
    bool skipped = false; // true: no dialogue produced; false: kept but flagged
};

struct GenerationRun {
    std::vector<Dialogue> dialogues;
    std::vector<GenerationFailure> failures;
};

std::string make_dialogue_id(std::string_view generator_model, Language language,
                             std::uint64_t seed, std::size_t index);

ChatRequest generation_request(const GenerationParams& p, const GenerationOptions& options);

GenerationRun generate_corpus(const SamplingPolicy& policy, std::size_t n, Language language,
                              const GenerationOptions& options, Gateway& gateway);

std::string utc_timestamp();

} // namespace rankstab
