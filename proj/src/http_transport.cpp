#include <httplib.h>

#include <fmt/format.h>

#include "rankstab/error.hpp"
#include "rankstab/gateway.hpp"

namespace rankstab {

HttpTransport::HttpTransport(std::string url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError(fmt::format("provider URL '{}' has no scheme", url));
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

HttpReply HttpTransport::post(const std::string& json_body) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path_, headers, json_body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
}

} // namespace rankstab
