#include "rankstab/genproto.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <regex>

#include <fmt/format.h>

#include "rankstab/error.hpp"
#include "rankstab/parallel.hpp"
#include "rankstab/random.hpp"

namespace rankstab {

namespace {

constexpr std::string_view kSystemPrompt =
    R"(**Role**
You are an expert generator of customer support conversations.
The generated conversations must stay on topic as much as possible, and mimic real life customer support interactions as much as possible.
The most important thing is for these conversations to be as realistic as possible.

**Instructions**
These conversations are between professional agents and human customers. Customers have emotions, needs, and expectations. There are specific instructions
for each conversation that you must follow. These are for agents to follow when interacting with customers. There are also instructions
for the customer to follow.
Do you UTMOST BEST to adhere to the following instructions for generation.
If there are more than 1 agent in the conversation, the agents turns must be sequential and must NOT interleave. For example, if agent1 and agent2
are in the conversation, the ALLOWED turns can be:
a) agent1, customer, agent1, customer, agent2, customer, agent2;
b) agent2, customer, agent2, customer, agent1, customer, agent1;
and the BANNED turns are:
c) agent1, customer, agent2, customer, agent1, customer, agent2;)";

constexpr std::string_view kUserTemplate =
    R"(Generate a chat conversation between a customer and  and {n_agents} support agents. The emails of the agents are: {agent_emails}.
The conversation must be in {language} and should be made of [{n_messages}] messages.

'Klaus' is a company in the {industry} industry. The conversation must be tailored to the industry. For example,
use products and services that are common in the industry, and use language that is common in the industry.
The conversation must reference at least one issue with a service, product, or policy that is relevant to the company.

The AGENT must greet the customer. For example, using common greeting words like 'Hello' or 'Good day' in the respective language and address the customer by name, and based on the channel.
The AGENT must use proper grammar and spelling, and must follow grammatical rules in the respective language.
The AGENT must demonstrate empathy towards the customer and must tailor the conversation to address their problems and needs.
The AGENT must use professional tone.
{agent_type}
{problem}
{channel}
{agent_experience})";

std::string agent_type_clause(AgentType t) {
    return t == AgentType::human ? "The AGENT is a human customer support agent."
                                 : "The AGENT is an automated customer support bot.";
}

std::string problem_clause(Problem p) {
    return fmt::format("The CUSTOMER is contacting support about the following problem: {}.", p.name());
}

std::string channel_clause(Channel c) {
    return c == Channel::email ? "The conversation takes place over email."
                               : "The conversation takes place over live chat.";
}

std::string experience_clause(AgentExperience e) {
    return e == AgentExperience::junior
               ? "The AGENT is a junior agent with limited experience."
               : "The AGENT is a senior agent with extensive experience.";
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
        out += keep ? c : '_';
    }
    return out;
}

} // namespace

void validate_policy(const SamplingPolicy& policy) {
    double sum = 0.0;
    for (double w : policy.message_length_weights) {
        if (!(w >= 0.0)) throw ConfigError("message length weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError(fmt::format("message length weights sum to {}, expected 1", sum));
    }
    if (!(policy.p_two_agents >= 0.0 && policy.p_two_agents <= 1.0)) {
        throw ConfigError("p_two_agents must lie in [0, 1]");
    }
}

std::vector<GenerationParams> sample_params(const SamplingPolicy& policy, std::size_t n,
                                            Language language) {
    validate_policy(policy);
    Rng rng(policy.rng_seed);
    std::vector<GenerationParams> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        GenerationParams p;
        p.industry = Industry(rng.below(Industry::cardinality()));
        p.problem = Problem(rng.below(Problem::cardinality()));
        p.channel = static_cast<Channel>(rng.below(2));
        p.agent_experience = static_cast<AgentExperience>(rng.below(2));
        p.agent_type = static_cast<AgentType>(rng.below(2));
        p.n_messages = kMessageCounts[rng.pick(policy.message_length_weights)];
        p.n_agents = rng.bernoulli(policy.p_two_agents) ? 2 : 1;
        for (int a = 1; a <= p.n_agents; ++a) p.agent_emails.push_back(fmt::format("agent{}@klaus.example", a));
        p.language = language;
        p.seed = derive_seed(policy.rng_seed, i);
        out.push_back(std::move(p));
    }
    return out;
}

std::string_view generation_system_prompt() { return kSystemPrompt; }
std::string_view generation_user_template() { return kUserTemplate; }

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find_first_of("{}", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        if (tmpl[open] == '}') throw ConfigError("template has an unmatched '}'");
        out.append(tmpl.substr(pos, open - pos));
        const auto close = tmpl.find('}', open);
        if (close == std::string_view::npos) throw ConfigError("template has an unmatched '{'");
        const std::string name(tmpl.substr(open + 1, close - open - 1));
        auto it = values.find(name);
        if (it == values.end()) throw ConfigError(fmt::format("unknown template placeholder {{{}}}", name));
        out += it->second;
        pos = close + 1;
    }
    return out;
}

PromptPair render_generation_prompt(const GenerationParams& p) {
    if (auto v = validate_params(p); !v.ok()) throw DataError("invalid params: " + v.violations.front());
    std::string emails;
    for (const auto& e : p.agent_emails) {
        if (!emails.empty()) emails += ", ";
        emails += e;
    }
    const std::map<std::string, std::string> values{
        {"n_agents", std::to_string(p.n_agents)},
        {"agent_emails", emails},
        {"language", std::string(language_name(p.language))},
        {"n_messages", std::to_string(p.n_messages)},
        {"industry", std::string(p.industry.name())},
        {"agent_type", agent_type_clause(p.agent_type)},
        {"problem", problem_clause(p.problem)},
        {"channel", channel_clause(p.channel)},
        {"agent_experience", experience_clause(p.agent_experience)},
    };
    return {std::string(kSystemPrompt), render_template(kUserTemplate, values)};
}

ParsedTranscript parse_transcript(std::string_view text, const GenerationParams& params) {
    static const std::regex marker(
        R"(^\s*[*_]*\s*(agent|customer)\s*(\d+)?\s*(?:\(([^)]*)\))?\s*[*_]*\s*:\s*[*_]*\s*(.*)$)",
        std::regex::icase | std::regex::ECMAScript);

    ParsedTranscript out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string line(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }

        std::smatch m;
        if (std::regex_match(line, m, marker)) {
            Turn t;
            t.index = static_cast<int>(out.turns.size());
            const bool is_agent = std::tolower(static_cast<unsigned char>(m[1].str()[0])) == 'a';
            t.role = is_agent ? Role::agent : Role::customer;
            t.text = trim(m[4].str());
            if (is_agent) {
                if (m[3].matched && !trim(m[3].str()).empty()) {
                    t.agent_id = trim(m[3].str());
                } else if (m[2].matched) {
                    const auto k = static_cast<std::size_t>(std::stoul(m[2].str()));
                    t.agent_id = (k >= 1 && k <= params.agent_emails.size())
                                     ? params.agent_emails[k - 1]
                                     : fmt::format("agent{}", k);
                } else if (params.agent_emails.size() == 1) {
                    t.agent_id = params.agent_emails.front();
                } else {
                    out.problems.push_back(fmt::format("line {}: agent identity missing", line_no));
                }
            }
            out.turns.push_back(std::move(t));
        } else if (out.turns.empty()) {
            out.problems.push_back(fmt::format("line {}: text before first role marker", line_no));
        } else {
            auto& last = out.turns.back();
            if (!last.text.empty()) last.text += '\n';
            last.text += trim(line);
        }
        if (end == text.size()) break;
    }
    if (out.turns.empty()) out.problems.push_back("no role-marked turns found");
    return out;
}

std::string make_dialogue_id(std::string_view generator_model, Language language, std::uint64_t seed,
                             std::size_t index) {
    return fmt::format("{}-{}-{:016x}-{:05}", to_string(language), slug(generator_model), seed, index);
}

ChatRequest generation_request(const GenerationParams& p, const GenerationOptions& options) {
    auto prompt = render_generation_prompt(p);
    ChatRequest req;
    req.model = options.generator_model;
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.messages = {{"system", std::move(prompt.system)}, {"user", std::move(prompt.user)}};
    return req;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

GenerationRun generate_corpus(const SamplingPolicy& policy, std::size_t n, Language language,
                              const GenerationOptions& options, Gateway& gateway) {
    if (options.generator_model.empty()) throw ConfigError("generator model is empty");
    const auto params = sample_params(policy, n, language);
    const std::string created_at = options.created_at.empty() ? utc_timestamp() : options.created_at;

    struct Slot {
        std::optional<Dialogue> dialogue;
        std::optional<GenerationFailure> failure;
    };
    std::vector<Slot> slots(n);

    parallel_for(n, static_cast<std::size_t>(std::max(1, options.max_in_flight)), [&](std::size_t i) {
        const auto& p = params[i];
        const auto id = make_dialogue_id(options.generator_model, language, policy.rng_seed, i);
        Completion completion;
        try {
            completion = gateway.complete(generation_request(p, options));
        } catch (const ReplayMissError&) {
            throw;
        } catch (const ProviderError& e) {
            slots[i].failure = GenerationFailure{i, id, e.what(), true};
            return;
        }
        auto parsed = parse_transcript(completion.text, p);
        Dialogue d;
        d.id = id;
        d.generator_model = options.generator_model;
        d.params = p;
        d.turns = std::move(parsed.turns);
        d.created_at = created_at;
        d.raw_response = completion.text;

        auto verdict = validate_dialogue(d);
        std::vector<std::string> reasons = std::move(parsed.problems);
        reasons.insert(reasons.end(), verdict.violations.begin(), verdict.violations.end());
        if (!reasons.empty()) {
            std::string joined;
            for (const auto& r : reasons) joined += (joined.empty() ? "" : "; ") + r;
            slots[i].failure = GenerationFailure{i, id, joined, false};
        }
        slots[i].dialogue = std::move(d);
    });

    GenerationRun run;
    for (auto& s : slots) {
        if (s.dialogue) run.dialogues.push_back(std::move(*s.dialogue));
        if (s.failure) run.failures.push_back(std::move(*s.failure));
    }
    return run;
}

} // namespace rankstab
