#pragma once

// Chat-completion client shared by generation and judging: deterministic
// caching, bounded retries with exponential backoff, and a replay mode that
// serves exclusively from a recorded fixture.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rankstab {

struct ChatMessage {
    std::string role; // system | user | assistant
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_tokens;

    friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

/// Throws DataError when the request violates its invariants.
void validate_request(const ChatRequest& req);

/// Sorted-key serialization with whitespace-collapsed contents. Used only for
/// hashing; the bytes sent to the provider are never normalized.
std::string canonical_form(const ChatRequest& req);

struct CacheKey {
    std::string digest; // lowercase hex SHA-256 of canonical_form

    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

CacheKey cache_key(const ChatRequest& req);

/// Wire body in the single supported dialect (model + messages).
std::string request_body(const ChatRequest& req);

struct Usage {
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
};

struct Completion {
    std::string text;
    Usage usage;
    bool from_cache = false;
};

/// Parses a provider reply: {"choices":[{"message":{"content":...}}], "usage":{...}}.
/// Throws ProtocolError on any other shape.
Completion parse_completion_body(const std::string& body);

struct HttpReply {
    int status = 0; // 0: connection failure or timeout
    std::string body;
};

/// One POST endpoint. Implementations must be safe for concurrent use.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpReply post(const std::string& json_body) = 0;
};

/// cpp-httplib backed transport. The bearer credential lives only here.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string url, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(120));
    HttpReply post(const std::string& json_body) override;

private:
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

struct GatewayOptions {
    int retries = 3;
    int backoff_base_ms = 500;
    double rate_per_min = 0.0; // 0 disables rate limiting
    bool replay = false;
    /// Fixture file; loaded on construction when it exists. In live mode every
    /// fresh completion is appended to it.
    std::optional<std::filesystem::path> fixture;
    bool cache = true;
    /// Per-request timeout of the transport built by from_environment.
    std::chrono::seconds timeout{120};
};

struct FixtureEntry {
    std::string digest;
    std::string completion;
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    /// `transport` may be null only in replay mode.
    Gateway(std::shared_ptr<Transport> transport, GatewayOptions options);

    /// Live mode reads the endpoint and credential from the environment and
    /// throws ConfigError if either is missing. Replay mode needs neither.
    static Gateway from_environment(GatewayOptions options,
                                    const std::string& url_var = "RANKSTAB_PROVIDER_URL",
                                    const std::string& key_var = "RANKSTAB_PROVIDER_KEY");

    Gateway(Gateway&&) noexcept;
    Gateway& operator=(Gateway&&) noexcept;
    ~Gateway();

    Completion complete(const ChatRequest& req);

    /// Writes (digest, completion) pairs for `requests` from the cache.
    /// Throws ReplayMissError naming the first request that was never completed.
    std::size_t record_fixture(std::span<const ChatRequest> requests,
                               const std::filesystem::path& path) const;

    bool replay() const;
    std::size_t network_attempts() const;
    std::size_t cache_hits() const;
    void set_sleeper(Sleeper sleeper);

private:
    struct State;
    std::unique_ptr<State> state_;
};

std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path);

} // namespace rankstab
