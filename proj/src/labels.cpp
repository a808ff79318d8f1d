#include "rankstab/labels.hpp"

namespace rankstab {

namespace {

template <class E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<std::string_view, N>& names) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<E>(i);
    }
    return std::nullopt;
}

constexpr std::array<std::string_view, 4> kLanguageCodes = {"et", "fi", "hu", "en"};
constexpr std::array<std::string_view, 4> kLanguageNames = {"Estonian", "Finnish", "Hungarian",
                                                            "English"};
constexpr std::array<std::string_view, 2> kChannels = {"email", "chat"};
constexpr std::array<std::string_view, 2> kExperience = {"junior", "senior"};
constexpr std::array<std::string_view, 2> kAgentTypes = {"human", "bot"};
constexpr std::array<std::string_view, 5> kCategoryNames = {
    "industry", "problem", "channel", "agent_experience", "agent_type"};

} // namespace

std::string_view to_string(Language v) { return kLanguageCodes[static_cast<std::size_t>(v)]; }
std::string_view to_string(Channel v) { return kChannels[static_cast<std::size_t>(v)]; }
std::string_view to_string(AgentExperience v) { return kExperience[static_cast<std::size_t>(v)]; }
std::string_view to_string(AgentType v) { return kAgentTypes[static_cast<std::size_t>(v)]; }
std::string_view to_string(Category v) { return kCategoryNames[static_cast<std::size_t>(v)]; }

std::optional<Language> parse_language(std::string_view s) { return lookup<Language>(s, kLanguageCodes); }
std::optional<Channel> parse_channel(std::string_view s) { return lookup<Channel>(s, kChannels); }
std::optional<AgentExperience> parse_agent_experience(std::string_view s) {
    return lookup<AgentExperience>(s, kExperience);
}
std::optional<AgentType> parse_agent_type(std::string_view s) { return lookup<AgentType>(s, kAgentTypes); }
std::optional<Category> parse_category(std::string_view s) { return lookup<Category>(s, kCategoryNames); }

std::string_view language_name(Language v) { return kLanguageNames[static_cast<std::size_t>(v)]; }

std::vector<std::string_view> labels_for(Category c) {
    switch (c) {
    case Category::industry: return {kIndustries.begin(), kIndustries.end()};
    case Category::problem: return {kProblems.begin(), kProblems.end()};
    case Category::channel: return {kChannels.begin(), kChannels.end()};
    case Category::agent_experience: return {kExperience.begin(), kExperience.end()};
    case Category::agent_type: return {kAgentTypes.begin(), kAgentTypes.end()};
    }
    return {};
}

} // namespace rankstab
