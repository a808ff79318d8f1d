#include "rankstab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "rankstab/error.hpp"

namespace rankstab {

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

template <class T>
T require(std::optional<T> v, std::string_view what, std::string_view value) {
    if (!v) throw DataError(fmt::format("unknown {} '{}'", what, value));
    return *v;
}

std::string join_turns(const std::vector<Turn>& turns, const Role* only) {
    std::string out;
    for (const auto& t : turns) {
        if (only && t.role != *only) continue;
        if (!out.empty()) out += '\n';
        out += t.text;
    }
    return out;
}

} // namespace

std::string_view to_string(Role r) { return r == Role::agent ? "agent" : "customer"; }

std::string GenerationParams::label(Category c) const {
    switch (c) {
    case Category::industry: return std::string(industry.name());
    case Category::problem: return std::string(problem.name());
    case Category::channel: return std::string(to_string(channel));
    case Category::agent_experience: return std::string(to_string(agent_experience));
    case Category::agent_type: return std::string(to_string(agent_type));
    }
    return {};
}

std::string Dialogue::full_text() const { return join_turns(turns, nullptr); }

std::string Dialogue::role_text(Role r) const { return join_turns(turns, &r); }

int LRARecord::n_correct() const {
    int n = 0;
    for (Category c : kCategories) {
        auto p = predicted.find(c);
        auto g = correct.find(c);
        if (p != predicted.end() && g != correct.end() && p->second == g->second) ++n;
    }
    return n;
}

Verdict validate_params(const GenerationParams& p) {
    Verdict v;
    if (std::find(kMessageCounts.begin(), kMessageCounts.end(), p.n_messages) == kMessageCounts.end()) {
        v.violations.push_back(fmt::format("n_messages {} not in {{4,8,12,16}}", p.n_messages));
    }
    if (p.n_agents < 1) v.violations.push_back("n_agents must be positive");
    if (p.agent_emails.empty()) v.violations.push_back("agent_emails empty");
    if (static_cast<int>(p.agent_emails.size()) != p.n_agents) {
        v.violations.push_back(fmt::format("agent_emails has {} entries for n_agents {}",
                                           p.agent_emails.size(), p.n_agents));
    }
    if (p.industry.index() >= kIndustries.size()) v.violations.push_back("industry out of range");
    if (p.problem.index() >= kProblems.size()) v.violations.push_back("problem out of range");
    return v;
}

Verdict validate_dialogue(const Dialogue& d) {
    Verdict v;
    if (d.turns.size() < 2) v.violations.push_back("|turns| < 2");
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
        const Turn& t = d.turns[i];
        if (t.index != static_cast<int>(i)) {
            v.violations.push_back(fmt::format("turn {} has index {}", i, t.index));
        }
        if (blank(t.text)) v.violations.push_back(fmt::format("turn {} is empty", i));
        if (t.role == Role::agent && !t.agent_id) {
            v.violations.push_back(fmt::format("agent turn {} has no agent_id", i));
        }
        if (t.role == Role::customer && t.agent_id) {
            v.violations.push_back(fmt::format("customer turn {} carries an agent_id", i));
        }
    }
    if (!d.turns.empty() && d.turns.front().role != Role::agent) {
        v.violations.push_back("first turn is not an agent turn");
    }

    // Collapse runs of the same agent; any agent seen again afterwards interleaves.
    std::set<std::string> finished;
    const std::string* current = nullptr;
    for (const Turn& t : d.turns) {
        if (t.role != Role::agent || !t.agent_id) continue;
        if (current && *current == *t.agent_id) continue;
        if (current) finished.insert(*current);
        if (finished.count(*t.agent_id)) {
            v.violations.push_back("interleaved agents");
            break;
        }
        current = &*t.agent_id;
    }

    auto pv = validate_params(d.params);
    v.violations.insert(v.violations.end(), pv.violations.begin(), pv.violations.end());
    return v;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const GenerationParams& p) {
    j = nlohmann::json{{"industry", p.industry.name()},
                       {"problem", p.problem.name()},
                       {"channel", to_string(p.channel)},
                       {"agent_experience", to_string(p.agent_experience)},
                       {"agent_type", to_string(p.agent_type)},
                       {"language", to_string(p.language)},
                       {"n_messages", p.n_messages},
                       {"n_agents", p.n_agents},
                       {"agent_emails", p.agent_emails},
                       {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, GenerationParams& p) {
    const auto industry = j.at("industry").get<std::string>();
    const auto problem = j.at("problem").get<std::string>();
    const auto channel = j.at("channel").get<std::string>();
    const auto experience = j.at("agent_experience").get<std::string>();
    const auto agent_type = j.at("agent_type").get<std::string>();
    const auto language = j.at("language").get<std::string>();
    p.industry = require(Industry::parse(industry), "industry", industry);
    p.problem = require(Problem::parse(problem), "problem", problem);
    p.channel = require(parse_channel(channel), "channel", channel);
    p.agent_experience = require(parse_agent_experience(experience), "agent_experience", experience);
    p.agent_type = require(parse_agent_type(agent_type), "agent_type", agent_type);
    p.language = require(parse_language(language), "language", language);
    p.n_messages = j.at("n_messages").get<int>();
    p.n_agents = j.at("n_agents").get<int>();
    p.agent_emails = j.at("agent_emails").get<std::vector<std::string>>();
    p.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(nlohmann::json& j, const Turn& t) {
    j = nlohmann::json{{"index", t.index}, {"role", to_string(t.role)}, {"text", t.text}};
    if (t.agent_id) j["agent_id"] = *t.agent_id;
}

void from_json(const nlohmann::json& j, Turn& t) {
    t.index = j.at("index").get<int>();
    const auto role = j.at("role").get<std::string>();
    if (role == "agent") {
        t.role = Role::agent;
    } else if (role == "customer") {
        t.role = Role::customer;
    } else {
        throw DataError(fmt::format("unknown role '{}'", role));
    }
    t.agent_id.reset();
    if (auto it = j.find("agent_id"); it != j.end() && !it->is_null()) t.agent_id = it->get<std::string>();
    t.text = j.at("text").get<std::string>();
}

void to_json(nlohmann::json& j, const Dialogue& d) {
    j = nlohmann::json{{"id", d.id},
                       {"generator_model", d.generator_model},
                       {"params", d.params},
                       {"turns", d.turns},
                       {"created_at", d.created_at}};
    if (d.raw_response) j["raw_response"] = *d.raw_response;
}

void from_json(const nlohmann::json& j, Dialogue& d) {
    d.id = j.at("id").get<std::string>();
    d.generator_model = j.at("generator_model").get<std::string>();
    d.params = j.at("params").get<GenerationParams>();
    d.turns = j.at("turns").get<std::vector<Turn>>();
    d.created_at = j.value("created_at", std::string{});
    d.raw_response.reset();
    if (auto it = j.find("raw_response"); it != j.end() && !it->is_null()) {
        d.raw_response = it->get<std::string>();
    }
}

void to_json(nlohmann::json& j, const JudgeScoreRecord& r) {
    j = nlohmann::json{{"dialogue_id", r.dialogue_id},
                       {"judge_model", r.judge_model},
                       {"prompt_language", to_string(r.prompt_language)},
                       {"grammar", r.grammar},
                       {"readability", r.readability},
                       {"coherence", r.coherence},
                       {"fluency", r.fluency},
                       {"raw_response", r.raw_response}};
}

void from_json(const nlohmann::json& j, JudgeScoreRecord& r) {
    r.dialogue_id = j.at("dialogue_id").get<std::string>();
    r.judge_model = j.at("judge_model").get<std::string>();
    const auto lang = j.at("prompt_language").get<std::string>();
    r.prompt_language = require(parse_language(lang), "prompt_language", lang);
    r.grammar = j.at("grammar").get<int>();
    r.readability = j.at("readability").get<int>();
    r.coherence = j.at("coherence").get<int>();
    r.fluency = j.at("fluency").get<int>();
    r.raw_response = j.value("raw_response", std::string{});
    auto in = [](int v, int hi) { return v >= 0 && v <= hi; };
    if (!in(r.grammar, 4) || !in(r.readability, 4) || !in(r.coherence, 3) || !in(r.fluency, 3)) {
        throw DataError("judge score outside rubric range");
    }
}

namespace {

nlohmann::json category_map_to_json(const std::map<Category, std::string>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [c, v] : m) j[std::string(to_string(c))] = v;
    return j;
}

std::map<Category, std::string> category_map_from_json(const nlohmann::json& j, bool strict) {
    std::map<Category, std::string> m;
    for (const auto& [k, v] : j.items()) {
        m[require(parse_category(k), "category", k)] = v.get<std::string>();
    }
    if (strict && m.size() != kCategories.size()) {
        throw DataError("LRA record must hold exactly the five categories");
    }
    return m;
}

} // namespace

void to_json(nlohmann::json& j, const LRARecord& r) {
    j = nlohmann::json{{"dialogue_id", r.dialogue_id},
                       {"judge_model", r.judge_model},
                       {"predicted", category_map_to_json(r.predicted)},
                       {"correct", category_map_to_json(r.correct)},
                       {"explanation", r.explanation}};
}

void from_json(const nlohmann::json& j, LRARecord& r) {
    r.dialogue_id = j.at("dialogue_id").get<std::string>();
    r.judge_model = j.at("judge_model").get<std::string>();
    r.predicted = category_map_from_json(j.at("predicted"), true);
    r.correct = category_map_from_json(j.at("correct"), true);
    r.explanation = j.value("explanation", std::string{});
}

void to_json(nlohmann::json& j, const AnnotationRecord& r) {
    j = nlohmann::json{{"dialogue_id", r.dialogue_id},
                       {"annotator_id", r.annotator_id},
                       {"coherence", r.coherence},
                       {"fluency", r.fluency}};
    if (r.feedback) j["feedback"] = *r.feedback;
}

void from_json(const nlohmann::json& j, AnnotationRecord& r) {
    r.dialogue_id = j.at("dialogue_id").get<std::string>();
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.coherence = j.at("coherence").get<int>();
    r.fluency = j.at("fluency").get<int>();
    if (r.coherence < 0 || r.coherence > 1) throw DataError("coherence must be 0 or 1");
    if (r.fluency < 0 || r.fluency > 3) throw DataError("fluency must be in 0-3");
    r.feedback.reset();
    if (auto it = j.find("feedback"); it != j.end() && !it->is_null()) r.feedback = it->get<std::string>();
}

} // namespace rankstab
