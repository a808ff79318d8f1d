#pragma once

#include <stdexcept>
#include <string>

namespace rankstab {

/// Error categories double as CLI exit codes.
enum class ErrorKind { usage = 2, config = 3, data = 4, provider = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    const char* category() const noexcept;

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Bad or insufficient input data (empty streams, degenerate tables, ...).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what) : Error(ErrorKind::provider, what) {}
};

/// Retry budget exhausted or connection-level failure.
class TransportError : public ProviderError {
public:
    TransportError(const std::string& what, int attempts)
        : ProviderError(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Provider answered, but not in the expected shape.
class ProtocolError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

/// Replay mode was asked for a request the fixture does not hold.
class ReplayMissError : public ProviderError {
public:
    explicit ReplayMissError(std::string digest)
        : ProviderError("replay fixture has no entry for request " + digest),
          digest_(std::move(digest)) {}
    const std::string& digest() const noexcept { return digest_; }

private:
    std::string digest_;
};

inline const char* Error::category() const noexcept {
    switch (kind_) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::provider: return "provider";
    }
    return "unknown";
}

} // namespace rankstab
