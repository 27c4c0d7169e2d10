#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace orderpipe {

enum class Role { system, user, assistant };

std::string_view role_label(Role r);

struct ChatMessage {
    Role role;
    std::string content;
};

struct CompletionRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 2048;
    std::optional<int> seed;
};

enum class FinishReason { stop, length, other };

std::string_view finish_reason_label(FinishReason r);
FinishReason finish_reason_from_string(std::string_view s);

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct CompletionResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::other;
    std::chrono::milliseconds latency{0};
    std::optional<TokenUsage> usage;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class GatewayError : public std::runtime_error {
public:
    GatewayError(std::string message, bool retryable);

    bool retryable() const { return retryable_; }
    int attempts() const { return attempts_; }

    /// Stamps the attempt count onto the message ("... (after N attempts)").
    void set_attempts(int n);

    const char* what() const noexcept override { return full_message_.c_str(); }

private:
    std::string base_message_;
    std::string full_message_;
    bool retryable_;
    int attempts_ = 0;
};

/// Network failure or HTTP >= 500. Retryable.
class TransportError : public GatewayError {
public:
    explicit TransportError(std::string message) : GatewayError(std::move(message), true) {}
};

/// HTTP 429. Retryable with backoff.
class RateLimitedError : public GatewayError {
public:
    explicit RateLimitedError(std::string message) : GatewayError(std::move(message), true) {}
};

/// HTTP 4xx other than 429, or an unusable request. Fatal.
class BadRequestError : public GatewayError {
public:
    explicit BadRequestError(std::string message) : GatewayError(std::move(message), false) {}
};

/// Replay backend has no fixture for the request hash. Fatal.
class ReplayMissError : public GatewayError {
public:
    ReplayMissError(std::string message, std::string hash);

    const std::string& hash() const { return hash_; }

private:
    std::string hash_;
};

// ---------------------------------------------------------------------------
// Backend interface and retry
// ---------------------------------------------------------------------------

class Backend {
public:
    virtual ~Backend() = default;

    /// Must be safe for concurrent calls.
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;

    virtual std::string name() const = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{1000};   // exponential, jittered
};

/// Retries only retryable errors, with exponential jittered backoff. The last
/// error is rethrown annotated with the attempt count.
CompletionResponse complete_with_retry(Backend& backend, const CompletionRequest& req,
                                       const RetryPolicy& policy = {});

// ---------------------------------------------------------------------------
// Canonical request identity
// ---------------------------------------------------------------------------

/// Byte-stable canonical serialization: compact JSON with sorted keys over
/// {messages[{content,role}], model, temperature}. This is the replay/record
/// fixture identity, so max_tokens and seed are deliberately excluded.
std::string canonical_request_serialization(const CompletionRequest& req);

/// SHA-256 hex digest of canonical_request_serialization.
std::string request_hash(const CompletionRequest& req);

/// First 16 hex chars of request_hash; fixture filenames are `<key>.json`.
std::string fixture_key(const CompletionRequest& req);

/// SHA-256 hex digest of arbitrary bytes.
std::string sha256_hex(std::string_view data);

}  // namespace orderpipe
