#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankstab/corpus.hpp"
#include "rankstab/gateway.hpp"

namespace testing {

/// Transport answering with a callback on the user message text.
class ScriptedTransport : public rankstab::Transport {
public:
    using Handler = std::function<rankstab::HttpReply(const nlohmann::json& body)>;
    explicit ScriptedTransport(Handler h) : handler_(std::move(h)) {}

    rankstab::HttpReply post(const std::string& body) override {
        ++calls;
        const auto j = nlohmann::json::parse(body);
        std::lock_guard lock(mutex_);
        bodies.push_back(body);
        return handler_(j);
    }

    std::atomic<int> calls{0};
    std::vector<std::string> bodies;

private:
    Handler handler_;
    std::mutex mutex_;
};

inline rankstab::HttpReply completion(const std::string& text) {
    nlohmann::json j{{"choices", nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})}};
    return {200, j.dump()};
}

inline std::string user_text(const nlohmann::json& body) {
    std::string out;
    for (const auto& m : body.at("messages")) {
        if (m.at("role") == "user") out += m.at("content").get<std::string>();
    }
    return out;
}

inline std::string system_text(const nlohmann::json& body) {
    std::string out;
    for (const auto& m : body.at("messages")) {
        if (m.at("role") == "system") out += m.at("content").get<std::string>();
    }
    return out;
}

inline rankstab::Gateway quiet_gateway(std::shared_ptr<rankstab::Transport> t, int retries = 3) {
    rankstab::GatewayOptions o;
    o.retries = retries;
    o.backoff_base_ms = 1;
    rankstab::Gateway g(std::move(t), o);
    g.set_sleeper([](std::chrono::milliseconds) {});
    return g;
}

/// A valid single-agent dialogue; the first turn carries "ref <id>".
inline rankstab::Dialogue make_dialogue(const std::string& id, const std::string& model,
                                        rankstab::GenerationParams p, int n_turns = 4) {
    rankstab::Dialogue d;
    d.id = id;
    d.generator_model = model;
    if (p.agent_emails.empty()) {
        for (int a = 1; a <= p.n_agents; ++a) p.agent_emails.push_back("agent" + std::to_string(a) + "@klaus.example");
    }
    p.n_messages = n_turns;
    d.params = p;
    for (int i = 0; i < n_turns; ++i) {
        rankstab::Turn t;
        t.index = i;
        t.role = i % 2 == 0 ? rankstab::Role::agent : rankstab::Role::customer;
        if (t.role == rankstab::Role::agent) t.agent_id = p.agent_emails.front();
        t.text = i == 0 ? "ref " + id + " hello there" : "message number " + std::to_string(i);
        d.turns.push_back(t);
    }
    d.created_at = "2026-01-01T00:00:00Z";
    return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("rankstab_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing
