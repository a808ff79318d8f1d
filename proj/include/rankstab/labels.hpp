#pragma once

// Closed label universes for dialogue generation parameters.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rankstab {

inline constexpr std::array<std::string_view, 49> kIndustries = {
    "manufacturing",
    "energy production",
    "energy management",
    "energy technology",
    "apparel retail",
    "retail clothing stores",
    "apparel manufacturing",
    "fitness apparel retail",
    "footwear retail",
    "safety apparel manufacturing",
    "home decor retail",
    "home textiles retail",
    "manufacturing tools",
    "retail technology solutions",
    "gaming technology services",
    "transportation technology",
    "transportation services",
    "logistics and transportation",
    "kitchen appliances manufacturing",
    "utility management services",
    "audio equipment manufacturing",
    "e-commerce grocery retail",
    "gambling and betting",
    "e-commerce retail baby products",
    "furniture retail",
    "label manufacturing",
    "cutlery manufacturing",
    "bicycle manufacturing",
    "telecommunications retail",
    "pet retail",
    "financial services",
    "financial software development",
    "gaming",
    "retail",
    "outdoor equipment retail",
    "e-commerce jewelry manufacturing",
    "retail fashion accessories",
    "automotive parts retail",
    "fintech services",
    "games",
    "e-commerce retail goods",
    "automotive retail",
    "coatings manufacturing",
    "sporting goods manufacturing",
    "e-commerce",
    "beverage retailing",
    "computer hardware manufacturing",
    "automotive manufacturing",
    "e-commerce electronics retail",
};

inline constexpr std::array<std::string_view, 20> kProblems = {
    "create account",
    "delete account",
    "edit account",
    "switch account",
    "check cancellation fee",
    "delivery options",
    "complaint",
    "review",
    "check invoice",
    "get invoice",
    "newsletter subscription",
    "cancel order",
    "change order",
    "place order",
    "check payment methods",
    "payment issue",
    "check refund policy",
    "track refund",
    "change shipping address",
    "set up shipping address",
};

inline constexpr std::array<int, 4> kMessageCounts = {4, 8, 12, 16};

enum class Language : std::uint8_t { et, fi, hu, en };
enum class Channel : std::uint8_t { email, chat };
enum class AgentExperience : std::uint8_t { junior, senior };
enum class AgentType : std::uint8_t { human, bot };

inline constexpr std::array<Language, 4> kLanguages = {Language::et, Language::fi, Language::hu,
                                                       Language::en};

/// Label-recovery categories, in the order the classification prompt lists them.
enum class Category : std::uint8_t { industry, problem, channel, agent_experience, agent_type };

inline constexpr std::array<Category, 5> kCategories = {
    Category::industry, Category::problem, Category::channel, Category::agent_experience,
    Category::agent_type};

/// Index into one of the frozen label arrays above.
template <const auto& Universe>
class ClosedLabel {
public:
    constexpr explicit ClosedLabel(std::size_t index = 0) : index_(static_cast<std::uint8_t>(index)) {}

    static std::optional<ClosedLabel> parse(std::string_view name) {
        for (std::size_t i = 0; i < Universe.size(); ++i) {
            if (Universe[i] == name) return ClosedLabel(i);
        }
        return std::nullopt;
    }
    static constexpr std::size_t cardinality() { return Universe.size(); }

    constexpr std::size_t index() const { return index_; }
    constexpr std::string_view name() const { return Universe[index_]; }

    friend constexpr bool operator==(ClosedLabel, ClosedLabel) = default;

private:
    std::uint8_t index_;
};

using Industry = ClosedLabel<kIndustries>;
using Problem = ClosedLabel<kProblems>;

std::string_view to_string(Language v);
std::string_view to_string(Channel v);
std::string_view to_string(AgentExperience v);
std::string_view to_string(AgentType v);
std::string_view to_string(Category v);

std::optional<Language> parse_language(std::string_view s);
std::optional<Channel> parse_channel(std::string_view s);
std::optional<AgentExperience> parse_agent_experience(std::string_view s);
std::optional<AgentType> parse_agent_type(std::string_view s);
std::optional<Category> parse_category(std::string_view s);

/// English name used inside prompts ("Estonian", ...).
std::string_view language_name(Language v);

/// The closed label set of one category.
std::vector<std::string_view> labels_for(Category c);

} // namespace rankstab
