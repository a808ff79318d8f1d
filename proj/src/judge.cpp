#include "rankstab/judge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "rankstab/descriptive.hpp"
#include "rankstab/error.hpp"
#include "rankstab/genproto.hpp"
#include "rankstab/parallel.hpp"
#include "rankstab/random.hpp"
#include "rankstab/stability.hpp"

namespace rankstab {

namespace {

constexpr std::string_view kRubricSystem =
    R"(You are an expert linguistic judge specialising in customer-support dialogues across all languages, including Finno-Ugric languages. Your task is to rate the given dialogue according to the criteria below. Provide only the requested output format.

Grading Criteria

1. Grammaticality (G): Score 0–4
This criterion evaluates the grammatical correctness of the text, checking how free it is from grammatical errors.
0: Numerous grammatical mistakes; largely unreadable.
1: Significant errors that make parts difficult to understand.
2: Some errors present but overall understandable.
3: Minor mistakes that do not affect comprehension.
4: Grammatically perfect with no mistakes.

2. Readability (R): Score 0–4
This criterion assesses ease of reading and natural flow, considering sentence length, word complexity, and overall coherence.
0: Completely incoherent and unreadable.
1: Very difficult to read and understand.
2: Readable but requires significant effort.
3: Mostly coherent, minor effort required.
4: Very easy to read, natural flow.

3. Content Coherence (C): Score 0–3
3: Questions and answers are completely logical, relevant, and form a coherent dialogue flow; realistic business scenario
2: Questions and answers are mostly logical and relevant with minor coherence issues; plausible business scenario
1: Some logical connection between questions and answers but with notable coherence problems; somewhat realistic scenario
0: Questions and answers do not interact logically OR the issue/solution would never occur in any industry OR conversations lack proper structure

4. Fluency (F): Score 0–3
How fluent and natural is this {language}?
3: Messages could pass as written by fluent native speakers.
2: Majority of messages pass as fluent, but 1–2 odd wordings and/or 1–2 grammar mistakes.
1: Several odd wordings and grammar mistakes; still resembles the language.
0: Extremely poor quality with pervasive errors.)";

constexpr std::string_view kRubricUser = "{conversation}";

constexpr std::string_view kLraSystem =
    R"(You are an expert analyst specializing in customer support conversation classification across all languages, including Finno-Ugric languages. Your task is to classify the given conversation according to the categories below.

--------------------
CLASSIFICATION CATEGORIES
--------------------

1. Industry: {industries}

2. Problem: Identify the primary issue or inquiry type: {problems}

3. Channel: Determine the communication method used
   • email: Email-based correspondence
   • chat: Live chat, instant messaging

4. Agent Experience: Assess the agent's expertise level based on responses
   • junior: Basic responses, may need escalation, limited problem-solving
   • senior: Expert responses, complex problem-solving, proactive suggestions

5. Agent Type: Determine if responses are from human or AI
   • human: Natural conversational style, empathy, contextual understanding
   • bot: Structured responses, consistent formatting, may lack nuance

Analyze the conversation carefully and provide your classification for each category along with a brief explanation.)";

constexpr std::string_view kLraUser =
    R"(Please classify the following customer support conversation across all required categories:
{conversation}

Provide classifications for:
1. Industry: Select from the specific industries listed in the system prompt (e.g., manufacturing, energy production, etc.)
2. Problem type: Select from the specific problem types
3. Channel: email or chat
4. Agent experience level: junior or senior
5. Agent type: human or bot

Include a brief explanation for your classification decisions.)";

constexpr std::string_view kScoreInstruction =
    "\n\nOutput format: reply with exactly one block of the form\n"
    "<scores>{\"G\": <int 0-4>, \"R\": <int 0-4>, \"C\": <int 0-3>, \"F\": <int 0-3>}</scores>\n"
    "and nothing else.";

constexpr std::string_view kScoreReminder =
    "\n\nReminder: answer only with <scores>{\"G\": int, \"R\": int, \"C\": int, \"F\": int}</scores> "
    "using integers within the stated ranges.";

constexpr std::string_view kClassificationInstruction =
    "\n\nOutput format: reply with exactly one block of the form\n"
    "<classification>{\"industry\": \"...\", \"problem\": \"...\", \"channel\": \"email|chat\", "
    "\"agent_experience\": \"junior|senior\", \"agent_type\": \"human|bot\", \"explanation\": \"...\"}"
    "</classification>\n"
    "Use label names exactly as listed.";

constexpr std::string_view kClassificationReminder =
    "\n\nReminder: answer only with one <classification>{...}</classification> block containing the "
    "keys industry, problem, channel, agent_experience, agent_type and explanation.";

constexpr std::string_view kUserSeparator = "=== USER ===";

std::string join(const std::vector<std::string_view>& items, std::string_view sep) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

/// Content between <tag> and </tag>, if both are present.
std::optional<std::string> extract_block(std::string_view text, std::string_view tag) {
    const std::string open = fmt::format("<{}>", tag);
    const std::string close = fmt::format("</{}>", tag);
    const auto a = text.find(open);
    if (a == std::string_view::npos) return std::nullopt;
    const auto b = text.find(close, a + open.size());
    if (b == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(a + open.size(), b - a - open.size()));
}

void check_single_cell(std::span<const Dialogue> dialogues) {
    if (dialogues.empty()) throw DataError("no dialogues to judge");
    for (const auto& d : dialogues) {
        if (d.generator_model != dialogues.front().generator_model ||
            d.params.language != dialogues.front().params.language) {
            throw DataError("dialogues span more than one (model, language) cell");
        }
    }
}

ChatRequest with_reminder(ChatRequest req, std::string_view reminder) {
    req.messages.back().content += reminder;
    return req;
}

bool unreliable(std::size_t failures, std::size_t requested) {
    return requested > 0 && static_cast<double>(failures) > 0.2 * static_cast<double>(requested);
}

} // namespace

std::string_view to_string(ScoreMetric m) {
    switch (m) {
    case ScoreMetric::grammar: return "grammar";
    case ScoreMetric::readability: return "readability";
    case ScoreMetric::coherence: return "coherence";
    case ScoreMetric::fluency: return "fluency";
    case ScoreMetric::lra: return "lra";
    }
    return "grammar";
}

std::string_view short_name(ScoreMetric m) {
    switch (m) {
    case ScoreMetric::grammar: return "G";
    case ScoreMetric::readability: return "R";
    case ScoreMetric::coherence: return "C";
    case ScoreMetric::fluency: return "F";
    case ScoreMetric::lra: return "LRA";
    }
    return "G";
}

std::string_view display_name(ScoreMetric m) {
    switch (m) {
    case ScoreMetric::grammar: return "Grammar (G)";
    case ScoreMetric::readability: return "Readability (R)";
    case ScoreMetric::coherence: return "Coherence (C)";
    case ScoreMetric::fluency: return "Fluency (F)";
    case ScoreMetric::lra: return "LRA";
    }
    return "Grammar (G)";
}

std::optional<ScoreMetric> parse_score_metric(std::string_view s) {
    for (auto m : kScoreMetrics) {
        if (s == to_string(m) || s == short_name(m)) return m;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------- templates

TemplateStore::TemplateStore() {
    add("rubric", Language::en, std::string(kRubricSystem), std::string(kRubricUser));
    add("lra", Language::en, std::string(kLraSystem), std::string(kLraUser));
}

void TemplateStore::add(std::string template_id, Language language, std::string system_text, std::string user_text) {
    known_ids_[template_id] = true;
    templates_[{std::move(template_id), language}] = Template{std::move(system_text), std::move(user_text)};
}

void TemplateStore::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError(fmt::format("template directory {} not found", dir.string()));
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const auto stem = path.stem().string(); // "<id>.<lang>"
        const auto dot = stem.rfind('.');
        if (dot == std::string::npos) continue;
        const auto lang = parse_language(stem.substr(dot + 1));
        if (!lang) throw ConfigError(fmt::format("template {}: unknown language suffix", path.filename().string()));
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError(fmt::format("cannot read template {}", path.string()));
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        const auto sep = text.find(kUserSeparator);
        if (sep == std::string::npos) {
            throw ConfigError(fmt::format("template {} lacks a '{}' line", path.filename().string(), kUserSeparator));
        }
        auto strip = [](std::string s) {
            while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
            std::size_t i = 0;
            while (i < s.size() && (s[i] == '\n' || s[i] == '\r')) ++i;
            return s.substr(i);
        };
        add(stem.substr(0, dot), *lang, strip(text.substr(0, sep)), strip(text.substr(sep + kUserSeparator.size())));
    }
}

const TemplateStore::Template& TemplateStore::get(const std::string& template_id, Language language) const {
    auto it = templates_.find({template_id, language});
    if (it != templates_.end()) return it->second;
    if (!known_ids_.contains(template_id)) throw ConfigError(fmt::format("unknown template '{}'", template_id));
    throw ConfigError(fmt::format("template '{}' has no vetted {} translation", template_id, to_string(language)));
}

// ---------------------------------------------------------------- prompts

std::string serialize_conversation(const Dialogue& d) {
    std::string out;
    for (const auto& t : d.turns) {
        if (!out.empty()) out += '\n';
        if (t.role == Role::agent) {
            out += t.agent_id ? fmt::format("AGENT ({}): ", *t.agent_id) : std::string("AGENT: ");
        } else {
            out += "CUSTOMER: ";
        }
        out += t.text;
    }
    return out;
}

std::string_view score_format_instruction() { return kScoreInstruction; }
std::string_view score_format_reminder() { return kScoreReminder; }
std::string_view classification_format_instruction() { return kClassificationInstruction; }

ChatRequest render_judge_prompt(const Dialogue& dialogue, const std::string& template_id, Language prompt_language,
                                const TemplateStore& templates, const std::string& judge_model, double temperature) {
    const auto& t = templates.get(template_id, prompt_language);
    const std::map<std::string, std::string> values{
        {"language", std::string(language_name(dialogue.params.language))},
        {"conversation", serialize_conversation(dialogue)},
    };
    ChatRequest req;
    req.model = judge_model;
    req.temperature = temperature;
    req.messages.push_back({"system", render_template(t.system, values) + std::string(kScoreInstruction)});
    req.messages.push_back({"user", render_template(t.user, values)});
    return req;
}

ChatRequest render_lra_prompt(const Dialogue& dialogue, const std::string& template_id, Language prompt_language,
                              const TemplateStore& templates, const std::string& judge_model, double temperature) {
    const auto& t = templates.get(template_id, prompt_language);
    const std::map<std::string, std::string> values{
        {"industries", join(labels_for(Category::industry), ", ")},
        {"problems", join(labels_for(Category::problem), ", ")},
        {"conversation", serialize_conversation(dialogue)},
    };
    ChatRequest req;
    req.model = judge_model;
    req.temperature = temperature;
    req.messages.push_back({"system", render_template(t.system, values) + std::string(kClassificationInstruction)});
    req.messages.push_back({"user", render_template(t.user, values)});
    return req;
}

// ---------------------------------------------------------------- parsing

JudgeParse parse_judge_scores(std::string_view completion) {
    JudgeParse out;
    out.raw = std::string(completion);
    const auto block = extract_block(completion, "scores");
    if (!block) {
        out.failure = "no structured block";
        return out;
    }
    const auto j = nlohmann::json::parse(*block, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        out.failure = "malformed structured block";
        return out;
    }
    struct Field {
        const char* key;
        const char* name;
        int max;
        int RubricScores::*slot;
    };
    static constexpr Field fields[] = {
        {"G", "grammar", 4, &RubricScores::grammar},
        {"R", "readability", 4, &RubricScores::readability},
        {"C", "coherence", 3, &RubricScores::coherence},
        {"F", "fluency", 3, &RubricScores::fluency},
    };
    RubricScores s;
    for (const auto& f : fields) {
        if (!j.contains(f.key)) {
            out.failure = fmt::format("missing field {}", f.key);
            return out;
        }
        const auto& v = j.at(f.key);
        if (!v.is_number_integer()) {
            out.failure = fmt::format("{} is not an integer", f.name);
            return out;
        }
        const auto value = v.get<long long>();
        if (value < 0 || value > f.max) {
            out.failure = fmt::format("{} out of range", f.name);
            return out;
        }
        s.*(f.slot) = static_cast<int>(value);
    }
    out.scores = s;
    return out;
}

std::string normalize_label(std::string_view s) {
    std::string out;
    bool space = false;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c >= 0x80) {
            if (space && !out.empty()) out += ' ';
            space = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            space = true;
        }
    }
    return out;
}

std::string match_label(Category c, std::string_view prediction) {
    const auto wanted = normalize_label(prediction);
    if (wanted.empty()) return std::string(kUnparseable);
    for (const auto& label : labels_for(c)) {
        if (normalize_label(label) == wanted) return std::string(label);
    }
    return std::string(kUnparseable);
}

ClassificationParse parse_classification(std::string_view completion) {
    ClassificationParse out;
    const auto block = extract_block(completion, "classification");
    if (!block) {
        out.failure = "no structured block";
        return out;
    }
    const auto j = nlohmann::json::parse(*block, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        out.failure = "malformed structured block";
        return out;
    }
    std::map<Category, std::string> labels;
    for (auto c : kCategories) {
        const auto key = std::string(to_string(c));
        if (j.contains(key) && j.at(key).is_string()) {
            labels[c] = match_label(c, j.at(key).get<std::string>());
        } else {
            labels[c] = std::string(kUnparseable);
        }
    }
    if (j.contains("explanation") && j.at("explanation").is_string()) out.explanation = j.at("explanation").get<std::string>();
    out.labels = std::move(labels);
    return out;
}

// ---------------------------------------------------------------- sampling, aggregation

std::vector<const Dialogue*> sample_dialogues(std::span<const Dialogue> dialogues, std::size_t sample_size,
                                              std::uint64_t seed) {
    if (sample_size == 0) throw ConfigError("judge sample_size must be positive");
    if (sample_size > dialogues.size()) {
        throw ConfigError(fmt::format("judge sample_size {} exceeds corpus size {}", sample_size, dialogues.size()));
    }
    std::vector<std::pair<std::uint64_t, const Dialogue*>> keyed;
    keyed.reserve(dialogues.size());
    for (const auto& d : dialogues) keyed.emplace_back(hash_string(d.id, seed), &d);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
    });
    std::vector<const Dialogue*> out;
    for (std::size_t i = 0; i < sample_size; ++i) out.push_back(keyed[i].second);
    std::sort(out.begin(), out.end(), [](const Dialogue* a, const Dialogue* b) { return a->id < b->id; });
    return out;
}

MetricAggregate aggregate_values(std::vector<double> values) {
    MetricAggregate a;
    const auto ms = mean_sd(values);
    a.mean = ms.mean;
    a.sd = ms.sd;
    a.n = ms.n;
    a.values = std::move(values);
    return a;
}

AggregateScores aggregate_scores(std::span<const JudgeScoreRecord> records) {
    AggregateScores out;
    std::vector<double> g, r, c, f;
    for (const auto& rec : records) {
        g.push_back(rec.grammar);
        r.push_back(rec.readability);
        c.push_back(rec.coherence);
        f.push_back(rec.fluency);
    }
    if (!records.empty()) {
        out.judge_model = records.front().judge_model;
        out.prompt_language = records.front().prompt_language;
    }
    out.metrics[ScoreMetric::grammar] = aggregate_values(std::move(g));
    out.metrics[ScoreMetric::readability] = aggregate_values(std::move(r));
    out.metrics[ScoreMetric::coherence] = aggregate_values(std::move(c));
    out.metrics[ScoreMetric::fluency] = aggregate_values(std::move(f));
    out.requested = records.size();
    return out;
}

JudgeRun judge_corpus(std::span<const Dialogue> dialogues, const JudgeConfig& cfg, const TemplateStore& templates,
                      Gateway& gateway) {
    if (cfg.judge_model.empty()) throw ConfigError("judge model is empty");
    check_single_cell(dialogues);
    const auto sample = sample_dialogues(dialogues, cfg.sample_size, cfg.seed);

    struct Slot {
        std::optional<JudgeScoreRecord> record;
        std::string failure;
    };
    std::vector<Slot> slots(sample.size());
    parallel_for(sample.size(), static_cast<std::size_t>(std::max(1, cfg.max_in_flight)), [&](std::size_t i) {
        const Dialogue& d = *sample[i];
        const auto req = render_judge_prompt(d, cfg.rubric_template_id, cfg.prompt_language, templates,
                                             cfg.judge_model, cfg.temperature);
        try {
            auto parsed = parse_judge_scores(gateway.complete(req).text);
            if (!parsed.scores) parsed = parse_judge_scores(gateway.complete(with_reminder(req, kScoreReminder)).text);
            if (!parsed.scores) {
                slots[i].failure = fmt::format("{}: {}", d.id, parsed.failure);
                return;
            }
            JudgeScoreRecord rec;
            rec.dialogue_id = d.id;
            rec.judge_model = cfg.judge_model;
            rec.prompt_language = cfg.prompt_language;
            rec.grammar = parsed.scores->grammar;
            rec.readability = parsed.scores->readability;
            rec.coherence = parsed.scores->coherence;
            rec.fluency = parsed.scores->fluency;
            rec.raw_response = std::move(parsed.raw);
            slots[i].record = std::move(rec);
        } catch (const ReplayMissError&) {
            throw;
        } catch (const ProviderError& e) {
            slots[i].failure = fmt::format("{}: {}", d.id, e.what());
        }
    });

    JudgeRun run;
    for (auto& s : slots) {
        if (s.record) run.records.push_back(std::move(*s.record));
        if (!s.failure.empty()) run.failures.push_back(std::move(s.failure));
    }
    run.aggregate = aggregate_scores(run.records);
    run.aggregate.generator_model = dialogues.front().generator_model;
    run.aggregate.language = dialogues.front().params.language;
    run.aggregate.judge_model = cfg.judge_model;
    run.aggregate.prompt_language = cfg.prompt_language;
    run.aggregate.requested = sample.size();
    run.aggregate.failures = run.failures.size();
    run.aggregate.unreliable = unreliable(run.failures.size(), sample.size());
    return run;
}

// ---------------------------------------------------------------- LRA

void summarize_lra(LRARun& run) {
    run.accuracy.clear();
    run.overall = 0.0;
    std::vector<double> per_dialogue;
    if (run.records.empty()) {
        run.aggregate.metrics[ScoreMetric::lra] = aggregate_values({});
        return;
    }
    std::map<Category, std::size_t> correct;
    for (const auto& rec : run.records) {
        int hits = 0;
        for (auto c : kCategories) {
            auto p = rec.predicted.find(c);
            auto t = rec.correct.find(c);
            const bool ok = p != rec.predicted.end() && t != rec.correct.end() && p->second != kUnparseable &&
                            p->second == t->second;
            correct[c] += ok ? 1 : 0;
            hits += ok ? 1 : 0;
        }
        per_dialogue.push_back(static_cast<double>(hits) / static_cast<double>(kCategories.size()));
    }
    double sum = 0.0;
    for (auto c : kCategories) {
        const double acc = static_cast<double>(correct[c]) / static_cast<double>(run.records.size());
        run.accuracy[c] = acc;
        sum += acc;
    }
    run.overall = sum / static_cast<double>(kCategories.size());
    run.aggregate.metrics[ScoreMetric::lra] = aggregate_values(std::move(per_dialogue));
}

LRARun run_lra(std::span<const Dialogue> dialogues, const JudgeConfig& cfg, const TemplateStore& templates,
               Gateway& gateway) {
    if (cfg.judge_model.empty()) throw ConfigError("judge model is empty");
    check_single_cell(dialogues);
    const auto sample = sample_dialogues(dialogues, cfg.sample_size, cfg.seed);

    struct Slot {
        std::optional<LRARecord> record;
        std::string failure;
    };
    std::vector<Slot> slots(sample.size());
    parallel_for(sample.size(), static_cast<std::size_t>(std::max(1, cfg.max_in_flight)), [&](std::size_t i) {
        const Dialogue& d = *sample[i];
        const auto req = render_lra_prompt(d, cfg.lra_template_id, cfg.prompt_language, templates, cfg.judge_model,
                                           cfg.temperature);
        try {
            auto parsed = parse_classification(gateway.complete(req).text);
            if (!parsed.labels) {
                parsed = parse_classification(gateway.complete(with_reminder(req, kClassificationReminder)).text);
            }
            if (!parsed.labels) {
                slots[i].failure = fmt::format("{}: {}", d.id, parsed.failure);
                return;
            }
            LRARecord rec;
            rec.dialogue_id = d.id;
            rec.judge_model = cfg.judge_model;
            rec.predicted = std::move(*parsed.labels);
            for (auto c : kCategories) rec.correct[c] = d.params.label(c);
            rec.explanation = std::move(parsed.explanation);
            slots[i].record = std::move(rec);
        } catch (const ReplayMissError&) {
            throw;
        } catch (const ProviderError& e) {
            slots[i].failure = fmt::format("{}: {}", d.id, e.what());
        }
    });

    LRARun run;
    for (auto& s : slots) {
        if (s.record) run.records.push_back(std::move(*s.record));
        if (!s.failure.empty()) run.failures.push_back(std::move(s.failure));
    }
    summarize_lra(run);
    run.aggregate.generator_model = dialogues.front().generator_model;
    run.aggregate.language = dialogues.front().params.language;
    run.aggregate.judge_model = cfg.judge_model;
    run.aggregate.prompt_language = cfg.prompt_language;
    run.aggregate.requested = sample.size();
    run.aggregate.failures = run.failures.size();
    run.aggregate.unreliable = unreliable(run.failures.size(), sample.size());
    return run;
}

// ---------------------------------------------------------------- judge comparison

void correlate_judges(JudgeComparison& cmp) {
    const std::size_t k = cmp.judges.size();
    if (k < 2) throw ConfigError("judge comparison needs at least two judges");
    cmp.rho.assign(k, std::vector<double>(k, 1.0));
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const auto& x = cmp.cell_accuracy.at(cmp.judges[a]);
            const auto& y = cmp.cell_accuracy.at(cmp.judges[b]);
            const double r = spearman(x, y);
            cmp.rho[a][b] = cmp.rho[b][a] = r;
            sum += r;
            ++pairs;
        }
    }
    cmp.mean_rho = sum / static_cast<double>(pairs);
}

JudgeComparison compare_judges(std::span<const std::string> judge_ids, std::span<const Dialogue> dialogues,
                               const JudgeConfig& cfg, const TemplateStore& templates, Gateway& gateway) {
    if (judge_ids.size() < 2) throw ConfigError("judge comparison needs at least two judges");
    if (std::set<std::string>(judge_ids.begin(), judge_ids.end()).size() != judge_ids.size()) {
        throw ConfigError("judge ids must be distinct");
    }
    std::map<std::string, std::vector<Dialogue>> by_model;
    for (const auto& d : dialogues) by_model[d.generator_model].push_back(d);
    if (by_model.empty()) throw DataError("no dialogues to judge");

    JudgeComparison cmp;
    cmp.judges.assign(judge_ids.begin(), judge_ids.end());
    for (const auto& [model, _] : by_model) {
        for (auto c : kCategories) cmp.cells.push_back(fmt::format("{}/{}", model, to_string(c)));
    }
    for (const auto& judge : cmp.judges) {
        JudgeConfig jc = cfg;
        jc.judge_model = judge;
        auto& acc = cmp.cell_accuracy[judge];
        for (const auto& [model, ds] : by_model) {
            auto run = run_lra(ds, jc, templates, gateway);
            for (auto c : kCategories) {
                auto it = run.accuracy.find(c);
                acc.push_back(it == run.accuracy.end() ? 0.0 : it->second);
            }
            cmp.runs.emplace(fmt::format("{}|{}", judge, model), std::move(run));
        }
    }
    correlate_judges(cmp);
    return cmp;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const AggregateScores& a) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [m, agg] : a.metrics) {
        metrics[std::string(to_string(m))] = {{"mean", agg.mean}, {"sd", agg.sd}, {"n", agg.n}, {"values", agg.values}};
    }
    j = nlohmann::json{{"generator_model", a.generator_model},
                       {"language", to_string(a.language)},
                       {"judge_model", a.judge_model},
                       {"prompt_language", to_string(a.prompt_language)},
                       {"metrics", metrics},
                       {"requested", a.requested},
                       {"failures", a.failures},
                       {"unreliable", a.unreliable}};
}

void from_json(const nlohmann::json& j, AggregateScores& a) {
    a.generator_model = j.at("generator_model").get<std::string>();
    const auto lang = parse_language(j.at("language").get<std::string>());
    const auto prompt = parse_language(j.at("prompt_language").get<std::string>());
    if (!lang || !prompt) throw DataError("aggregate record has an unknown language");
    a.language = *lang;
    a.prompt_language = *prompt;
    a.judge_model = j.at("judge_model").get<std::string>();
    a.metrics.clear();
    for (const auto& [key, value] : j.at("metrics").items()) {
        const auto m = parse_score_metric(key);
        if (!m) throw DataError(fmt::format("aggregate record has unknown metric '{}'", key));
        MetricAggregate agg;
        agg.mean = value.at("mean").get<double>();
        agg.sd = value.at("sd").get<double>();
        agg.n = value.at("n").get<std::size_t>();
        agg.values = value.at("values").get<std::vector<double>>();
        a.metrics[*m] = std::move(agg);
    }
    a.requested = j.at("requested").get<std::size_t>();
    a.failures = j.at("failures").get<std::size_t>();
    a.unreliable = j.at("unreliable").get<bool>();
}

LRASummary summary_of(const LRARun& run) {
    return LRASummary{run.aggregate, run.accuracy, run.overall};
}

void to_json(nlohmann::json& j, const LRASummary& s) {
    nlohmann::json acc = nlohmann::json::object();
    for (const auto& [c, v] : s.accuracy) acc[std::string(to_string(c))] = v;
    j = nlohmann::json{{"aggregate", s.aggregate}, {"accuracy", acc}, {"overall", s.overall}};
}

void from_json(const nlohmann::json& j, LRASummary& s) {
    s.aggregate = j.at("aggregate").get<AggregateScores>();
    s.accuracy.clear();
    for (const auto& [key, value] : j.at("accuracy").items()) {
        const auto c = parse_category(key);
        if (!c) throw DataError(fmt::format("unknown category '{}'", key));
        s.accuracy[*c] = value.get<double>();
    }
    s.overall = j.at("overall").get<double>();
}

void to_json(nlohmann::json& j, const JudgeComparison& c) {
    j = nlohmann::json{{"judges", c.judges},
                       {"cells", c.cells},
                       {"cell_accuracy", c.cell_accuracy},
                       {"rho", c.rho},
                       {"mean_rho", c.mean_rho}};
}

void from_json(const nlohmann::json& j, JudgeComparison& c) {
    c.judges = j.at("judges").get<std::vector<std::string>>();
    c.cells = j.at("cells").get<std::vector<std::string>>();
    c.cell_accuracy = j.at("cell_accuracy").get<std::map<std::string, std::vector<double>>>();
    c.rho = j.at("rho").get<std::vector<std::vector<double>>>();
    c.mean_rho = j.at("mean_rho").get<double>();
    c.runs.clear();
}

} // namespace rankstab
