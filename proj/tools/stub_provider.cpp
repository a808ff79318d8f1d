// Deterministic chat-completion server for offline runs and fixture recording.
// Answers generation, rubric and classification prompts with synthetic text
// whose quality depends on the model name; never calls out anywhere.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "rankstab/labels.hpp"
#include "rankstab/random.hpp"

using namespace rankstab;
using nlohmann::json;

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// 0.25 .. 0.95 from the model name.
double model_quality(const std::string& model) {
    return 0.25 + 0.7 * static_cast<double>(hash_string(model, 17) % 1000) / 999.0;
}

const std::map<std::string, std::vector<std::string>> kSyllables = {
    {"Estonian", {"ta", "ke", "mi", "su", "lo", "va", "ri", "ne", "õu", "pä", "hu", "ja", "le", "ko", "ti", "mä"}},
    {"Finnish", {"ka", "ta", "lo", "mi", "nen", "hy", "vä", "ku", "sa", "pe", "ri", "jo", "ki", "te", "yö", "ää"}},
    {"Hungarian", {"me", "gy", "ha", "sz", "ol", "ke", "ré", "zö", "bo", "ny", "ál", "te", "vi", "ló", "ek", "ás"}},
    {"English", {"an", "re", "to", "in", "pro", "de", "ser", "vi", "ce", "or", "der", "ca", "ble", "ment", "ly", "st"}},
};

std::vector<std::string> make_vocabulary(const std::string& language, std::size_t size, std::uint64_t seed) {
    const auto it = kSyllables.find(language);
    const auto& syl = it == kSyllables.end() ? kSyllables.at("English") : it->second;
    Rng rng(seed);
    std::set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < size) {
        std::string w;
        const auto n = 1 + rng.below(3);
        for (std::uint64_t i = 0; i < n; ++i) w += syl[rng.below(syl.size())];
        if (seen.insert(w).second) out.push_back(w);
    }
    return out;
}

std::string capture(const std::string& text, const std::string& pattern) {
    std::smatch m;
    const std::regex re(pattern);
    return std::regex_search(text, m, re) ? m[1].str() : std::string();
}

std::string generate(const std::string& model, const std::string& prompt) {
    const double q = model_quality(model);
    Rng rng(hash_string(prompt, hash_string(model)));
    const std::string language = capture(prompt, R"(must be in (\w+) and)");
    const int n_messages = std::stoi(capture(prompt, R"(made of \[(\d+)\] messages)"));
    std::vector<std::string> emails;
    {
        std::stringstream ss(capture(prompt, R"(emails of the agents are: ([^\n]*)\.\n)"));
        std::string e;
        while (std::getline(ss, e, ',')) {
            e.erase(0, e.find_first_not_of(' '));
            if (!e.empty()) emails.push_back(e);
        }
    }
    if (emails.empty()) emails.push_back("agent@klaus.example");
    const std::string industry = capture(prompt, R"(in the (.+) industry\.)");
    const std::string problem = capture(prompt, R"(following problem: (.+)\.)");
    const bool email = prompt.find("over email") != std::string::npos;
    const bool senior = prompt.find("senior agent") != std::string::npos;
    const bool bot = prompt.find("automated customer support bot") != std::string::npos;

    const auto vocab = make_vocabulary(language, 40 + static_cast<std::size_t>(q * 360.0),
                                       hash_string(model + language));
    auto sentence = [&](std::size_t words) {
        std::string s;
        for (std::size_t i = 0; i < words; ++i) {
            // Weaker models lean on the head of the vocabulary.
            const double u = std::pow(rng.uniform(), 1.0 + 2.0 * (1.0 - q));
            s += (i ? " " : "") + vocab[static_cast<std::size_t>(u * static_cast<double>(vocab.size() - 1))];
        }
        return s;
    };

    std::string out;
    for (int k = 0; k < n_messages; ++k) {
        const bool agent = k % 2 == 0;
        std::string text = sentence(6 + rng.below(10));
        if (k == 1 && rng.bernoulli(q)) text += " " + problem;
        if (agent) {
            if (k == 0 && rng.bernoulli(q)) text += " " + industry;
            if (email && rng.bernoulli(q)) text += " regards";
            if (senior && rng.bernoulli(q)) text += " proactively";
            if (bot && rng.bernoulli(q)) text += " automated";
            const std::size_t who = emails.size() > 1 && k >= n_messages / 2 ? 1 : 0;
            out += fmt::format("AGENT ({}): {}.\n", emails[who], text);
        } else {
            out += fmt::format("CUSTOMER: {}?\n", text);
        }
    }
    return out;
}

/// Conversation lines of a serialized dialogue, lowercased.
std::string conversation_of(const std::string& user) {
    std::string out;
    std::stringstream ss(user);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.rfind("AGENT", 0) == 0 || line.rfind("CUSTOMER", 0) == 0) {
            const auto colon = line.find(": ");
            out += lower(colon == std::string::npos ? line : line.substr(colon + 2)) + "\n";
        }
    }
    return out;
}

std::string judge(const std::string& model, const std::string& user, bool reminded) {
    Rng rng(hash_string(user, hash_string(model)));
    if (!reminded && rng.bernoulli(0.04)) return "The dialogue reads well overall.";
    std::stringstream ss(conversation_of(user));
    std::set<std::string> distinct;
    std::size_t total = 0;
    std::string w;
    while (ss >> w) {
        distinct.insert(w);
        ++total;
    }
    const double ttr = total ? static_cast<double>(distinct.size()) / static_cast<double>(total) : 0.0;
    const double bias = 0.4 * (static_cast<double>(hash_string(model) % 100) / 100.0 - 0.5);
    auto score = [&](double scale, int hi) {
        const double v = scale * ttr + bias + 0.6 * rng.normal();
        return std::clamp(static_cast<int>(std::lround(v)), 0, hi);
    };
    return fmt::format("<scores>{{\"G\": {}, \"R\": {}, \"C\": {}, \"F\": {}}}</scores>", score(4.6, 4), score(4.2, 4),
                       score(3.4, 3), score(3.2, 3));
}

template <class Universe>
std::string find_label(const Universe& universe, const std::string& text, Rng& rng, double slip) {
    std::string best;
    for (auto name : universe) {
        if (text.find(name) != std::string::npos && name.size() > best.size()) best = name;
    }
    if (best.empty() || rng.bernoulli(slip)) best = universe[rng.below(universe.size())];
    return best;
}

std::string classify(const std::string& model, const std::string& user, bool reminded) {
    Rng rng(hash_string(user, hash_string(model) ^ 0xc1a5));
    if (!reminded && rng.bernoulli(0.03)) return "<classification>{\"industry\": \"retail\"</classification>";
    const std::string conv = conversation_of(user);
    const double slip = 0.05 + 0.2 * static_cast<double>(hash_string(model, 3) % 100) / 100.0;
    auto has = [&](const char* cue) { return conv.find(cue) != std::string::npos; };
    json j{{"industry", find_label(kIndustries, conv, rng, slip)},
           {"problem", find_label(kProblems, conv, rng, slip)},
           {"channel", has("regards") ? "email" : "chat"},
           {"agent_experience", has("proactively") ? "senior" : "junior"},
           {"agent_type", has("automated") ? "bot" : "human"},
           {"explanation", "cues found in the agent turns"}};
    return "<classification>" + j.dump() + "</classification>";
}

std::atomic<httplib::Server*> g_server{nullptr};

void on_signal(int) {
    if (auto* s = g_server.load()) s->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic stub chat-completion provider"};
    int port = 0;
    std::string host = "127.0.0.1";
    app.add_option("--port", port, "0 picks a free port");
    app.add_option("--host", host);
    CLI11_PARSE(app, argc, argv);

    httplib::Server server;
    server.Post(R"(/.*)", [](const httplib::Request& req, httplib::Response& res) {
        const auto auth = req.get_header_value("Authorization");
        if (auth.rfind("Bearer ", 0) != 0 || auth.size() <= 7) {
            res.status = 401;
            res.set_content(R"({"error":"missing credential"})", "application/json");
            return;
        }
        json body;
        try {
            body = json::parse(req.body);
        } catch (const std::exception&) {
            res.status = 400;
            return;
        }
        const std::string model = body.value("model", "");
        std::string system, user;
        for (const auto& m : body.at("messages")) {
            (m.at("role") == "system" ? system : user) += m.at("content").get<std::string>();
        }
        std::string text;
        const bool reminded = user.find("Reminder:") != std::string::npos;
        if (system.rfind("**Role**", 0) == 0) text = generate(model, user);
        else if (system.find("<scores>") != std::string::npos) text = judge(model, user, reminded);
        else if (system.find("<classification>") != std::string::npos) text = classify(model, user, reminded);
        else text = "I can only help with support conversations.";
        const json reply{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})},
                         {"usage", {{"prompt_tokens", (system.size() + user.size()) / 4}, {"completion_tokens", text.size() / 4}}}};
        res.set_content(reply.dump(), "application/json");
    });

    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << host << ":" << bound << std::endl;
    server.listen_after_bind();
    return 0;
}
