#include "rankstab/gateway.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "rankstab/error.hpp"
#include "rankstab/records.hpp"

namespace rankstab {

namespace {

std::string collapse_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(c);
    }
    return out;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

bool transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

} // namespace

void validate_request(const ChatRequest& req) {
    if (req.messages.empty()) throw DataError("chat request has no messages");
    const auto& first = req.messages.front().role;
    if (first != "system" && first != "user") throw DataError("first message must be system or user");
    for (const auto& m : req.messages) {
        if (m.role != "system" && m.role != "user" && m.role != "assistant") {
            throw DataError(fmt::format("unknown message role '{}'", m.role));
        }
    }
    if (!(req.temperature >= 0.0)) throw DataError("temperature must be >= 0");
    if (req.max_tokens && *req.max_tokens <= 0) throw DataError("max_tokens must be positive");
}

std::string canonical_form(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"content", collapse_whitespace(m.content)}, {"role", m.role}});
    }
    nlohmann::json j{{"model", req.model}, {"messages", messages}, {"temperature", req.temperature}};
    j["max_tokens"] = req.max_tokens ? nlohmann::json(*req.max_tokens) : nlohmann::json(nullptr);
    return j.dump();
}

CacheKey cache_key(const ChatRequest& req) { return {sha256_hex(canonical_form(req))}; }

std::string request_body(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json j{{"model", req.model}, {"messages", messages}, {"temperature", req.temperature}};
    if (req.max_tokens) j["max_tokens"] = *req.max_tokens;
    return j.dump();
}

Completion parse_completion_body(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(fmt::format("provider reply is not JSON: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw ProtocolError("provider reply has no choices");
    }
    const auto& choice = j["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
        !choice["message"].contains("content") || !choice["message"]["content"].is_string()) {
        throw ProtocolError("provider reply choice has no message content");
    }
    Completion c;
    c.text = choice["message"]["content"].get<std::string>();
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        if (u->contains("prompt_tokens") && (*u)["prompt_tokens"].is_number_integer()) {
            c.usage.prompt_tokens = (*u)["prompt_tokens"].get<long>();
        }
        if (u->contains("completion_tokens") && (*u)["completion_tokens"].is_number_integer()) {
            c.usage.completion_tokens = (*u)["completion_tokens"].get<long>();
        }
    }
    return c;
}

// ---------------------------------------------------------------- Gateway

struct Gateway::State {
    std::shared_ptr<Transport> transport;
    GatewayOptions options;
    Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

    mutable std::mutex cache_mutex;
    std::map<std::string, std::string> cache;

    std::mutex fixture_mutex;

    std::mutex rate_mutex;
    std::chrono::steady_clock::time_point next_slot{};

    std::atomic<std::size_t> attempts{0};
    std::atomic<std::size_t> hits{0};

    void throttle() {
        if (options.rate_per_min <= 0.0) return;
        const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(60.0 / options.rate_per_min));
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard lock(rate_mutex);
            const auto now = std::chrono::steady_clock::now();
            slot = std::max(now, next_slot);
            next_slot = slot + interval;
        }
        const auto wait = slot - std::chrono::steady_clock::now();
        if (wait.count() > 0) std::this_thread::sleep_until(slot);
    }
};

Gateway::Gateway(std::shared_ptr<Transport> transport, GatewayOptions options)
    : state_(std::make_unique<State>()) {
    if (!options.replay && !transport) throw ConfigError("live gateway needs a transport");
    if (options.retries < 0) throw ConfigError("gateway.retries must be >= 0");
    if (options.replay && !options.fixture) throw ConfigError("replay mode needs a fixture path");
    state_->transport = std::move(transport);
    state_->options = std::move(options);
    const auto& fixture = state_->options.fixture;
    if (fixture && std::filesystem::exists(*fixture)) {
        for (auto& e : load_fixture(*fixture)) state_->cache[e.digest] = std::move(e.completion);
    } else if (state_->options.replay) {
        throw ConfigError(fmt::format("replay fixture {} does not exist", fixture->string()));
    }
}

Gateway Gateway::from_environment(GatewayOptions options, const std::string& url_var,
                                  const std::string& key_var) {
    if (options.replay) return Gateway(nullptr, std::move(options));
    const char* url = std::getenv(url_var.c_str());
    const char* key = std::getenv(key_var.c_str());
    if (!url || !*url) throw ConfigError(fmt::format("environment variable {} is not set", url_var));
    if (!key || !*key) throw ConfigError(fmt::format("environment variable {} is not set", key_var));
    auto transport = std::make_shared<HttpTransport>(url, key, options.timeout);
    return Gateway(std::move(transport), std::move(options));
}

Gateway::Gateway(Gateway&&) noexcept = default;
Gateway& Gateway::operator=(Gateway&&) noexcept = default;
Gateway::~Gateway() = default;

Completion Gateway::complete(const ChatRequest& req) {
    validate_request(req);
    auto& s = *state_;
    const auto key = cache_key(req);

    if (s.options.cache || s.options.replay) {
        std::lock_guard lock(s.cache_mutex);
        if (auto it = s.cache.find(key.digest); it != s.cache.end()) {
            ++s.hits;
            return Completion{it->second, {}, true};
        }
    }
    if (s.options.replay) throw ReplayMissError(key.digest);

    const std::string body = request_body(req);
    const int max_attempts = s.options.retries + 1;
    HttpReply reply;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        s.throttle();
        ++s.attempts;
        reply = s.transport->post(body);
        if (reply.status >= 200 && reply.status < 300) break;
        if (!transient(reply.status)) {
            throw ProviderError(fmt::format("provider returned HTTP {}", reply.status));
        }
        if (attempt == max_attempts) {
            throw TransportError(fmt::format("provider failed after {} attempts (last status {})",
                                             attempt, reply.status),
                                 attempt);
        }
        s.sleeper(std::chrono::milliseconds(static_cast<long long>(s.options.backoff_base_ms)
                                            << (attempt - 1)));
    }

    Completion c = parse_completion_body(reply.body);
    if (s.options.cache) {
        std::lock_guard lock(s.cache_mutex);
        s.cache[key.digest] = c.text;
    }
    if (s.options.fixture) {
        std::lock_guard lock(s.fixture_mutex);
        const std::string line = nlohmann::json{{"digest", key.digest}, {"completion", c.text}}.dump();
        detail::append_lines(*s.options.fixture, std::span<const std::string>(&line, 1));
    }
    return c;
}

std::size_t Gateway::record_fixture(std::span<const ChatRequest> requests,
                                    const std::filesystem::path& path) const {
    std::vector<std::string> lines;
    {
        std::lock_guard lock(state_->cache_mutex);
        for (const auto& req : requests) {
            const auto key = cache_key(req);
            auto it = state_->cache.find(key.digest);
            if (it == state_->cache.end()) throw ReplayMissError(key.digest);
            lines.push_back(nlohmann::json{{"digest", key.digest}, {"completion", it->second}}.dump());
        }
    }
    detail::append_lines(path, lines);
    return lines.size();
}

bool Gateway::replay() const { return state_->options.replay; }
std::size_t Gateway::network_attempts() const { return state_->attempts.load(); }
std::size_t Gateway::cache_hits() const { return state_->hits.load(); }
void Gateway::set_sleeper(Sleeper sleeper) { state_->sleeper = std::move(sleeper); }

std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path) {
    std::vector<FixtureEntry> out;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        try {
            auto j = nlohmann::json::parse(lines[i]);
            out.push_back({j.at("digest").get<std::string>(), j.at("completion").get<std::string>()});
        } catch (const std::exception& e) {
            throw DataError(fmt::format("{}:{}: malformed fixture line: {}", path.string(), i + 1, e.what()));
        }
    }
    return out;
}

} // namespace rankstab
