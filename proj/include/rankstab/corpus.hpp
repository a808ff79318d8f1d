#pragma once

// Canonical data model: dialogues, judge scores, label-recovery records and
// human annotations, plus their structural validation.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankstab/labels.hpp"

namespace rankstab {

/// Hidden label vector a dialogue was conditioned on.
struct GenerationParams {
    Industry industry;
    Problem problem;
    Channel channel = Channel::email;
    AgentExperience agent_experience = AgentExperience::junior;
    AgentType agent_type = AgentType::human;
    Language language = Language::et;
    int n_messages = 4;
    int n_agents = 1;
    std::vector<std::string> agent_emails;
    std::uint64_t seed = 0;

    /// Ground-truth label of one recoverable category.
    std::string label(Category c) const;

    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

enum class Role : std::uint8_t { agent, customer };

std::string_view to_string(Role r);

struct Turn {
    int index = 0;
    Role role = Role::agent;
    std::optional<std::string> agent_id; // present iff role == agent
    std::string text;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Dialogue {
    std::string id;
    std::string generator_model;
    GenerationParams params;
    std::vector<Turn> turns;
    std::string created_at;                  // ISO-8601, not part of equality
    std::optional<std::string> raw_response; // not part of equality

    /// All turn texts joined by newlines.
    std::string full_text() const;
    /// Texts of one role only, joined by newlines.
    std::string role_text(Role r) const;

    friend bool operator==(const Dialogue& a, const Dialogue& b) {
        return a.id == b.id && a.generator_model == b.generator_model && a.params == b.params &&
               a.turns == b.turns;
    }
};

struct JudgeScoreRecord {
    std::string dialogue_id;
    std::string judge_model;
    Language prompt_language = Language::en;
    int grammar = 0;     // 0-4
    int readability = 0; // 0-4
    int coherence = 0;   // 0-3
    int fluency = 0;     // 0-3
    std::string raw_response;

    friend bool operator==(const JudgeScoreRecord& a, const JudgeScoreRecord& b) {
        return a.dialogue_id == b.dialogue_id && a.judge_model == b.judge_model &&
               a.prompt_language == b.prompt_language && a.grammar == b.grammar &&
               a.readability == b.readability && a.coherence == b.coherence &&
               a.fluency == b.fluency;
    }
};

/// Sentinel label for predictions outside the closed set.
inline constexpr std::string_view kUnparseable = "UNPARSEABLE";

struct LRARecord {
    std::string dialogue_id;
    std::string judge_model;
    std::map<Category, std::string> predicted;
    std::map<Category, std::string> correct;
    std::string explanation;

    int n_correct() const;

    friend bool operator==(const LRARecord&, const LRARecord&) = default;
};

struct AnnotationRecord {
    std::string dialogue_id;
    std::string annotator_id;
    int coherence = 0; // {0,1}
    int fluency = 0;   // {0,1,2,3}
    std::optional<std::string> feedback;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Outcome of validate_dialogue; violations are data, never exceptions.
struct Verdict {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

Verdict validate_params(const GenerationParams& p);
Verdict validate_dialogue(const Dialogue& d);

void to_json(nlohmann::json& j, const GenerationParams& p);
void from_json(const nlohmann::json& j, GenerationParams& p);
void to_json(nlohmann::json& j, const Turn& t);
void from_json(const nlohmann::json& j, Turn& t);
void to_json(nlohmann::json& j, const Dialogue& d);
void from_json(const nlohmann::json& j, Dialogue& d);
void to_json(nlohmann::json& j, const JudgeScoreRecord& r);
void from_json(const nlohmann::json& j, JudgeScoreRecord& r);
void to_json(nlohmann::json& j, const LRARecord& r);
void from_json(const nlohmann::json& j, LRARecord& r);
void to_json(nlohmann::json& j, const AnnotationRecord& r);
void from_json(const nlohmann::json& j, AnnotationRecord& r);

} // namespace rankstab
