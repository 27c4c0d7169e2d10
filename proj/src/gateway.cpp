#include "orderpipe/gateway.hpp"

#include <openssl/evp.h>

#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace orderpipe {

std::string_view role_label(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

std::string_view finish_reason_label(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::other: return "other";
    }
    return "other";
}

FinishReason finish_reason_from_string(std::string_view s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::other;
}

GatewayError::GatewayError(std::string message, bool retryable)
    : std::runtime_error(message),
      base_message_(std::move(message)),
      full_message_(base_message_),
      retryable_(retryable) {}

void GatewayError::set_attempts(int n) {
    attempts_ = n;
    full_message_ = base_message_ + " (after " + std::to_string(n) +
                    (n == 1 ? " attempt)" : " attempts)");
}

ReplayMissError::ReplayMissError(std::string message, std::string hash)
    : GatewayError(std::move(message), false), hash_(std::move(hash)) {}

CompletionResponse complete_with_retry(Backend& backend, const CompletionRequest& req,
                                       const RetryPolicy& policy) {
    thread_local std::mt19937 rng{std::random_device{}()};
    int max_attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
    for (int attempt = 1;; ++attempt) {
        try {
            return backend.complete(req);
        } catch (GatewayError& e) {
            e.set_attempts(attempt);
            if (!e.retryable() || attempt == max_attempts) throw;
            auto base = policy.base_backoff.count();
            if (base > 0) {
                double factor = static_cast<double>(1LL << (attempt - 1));
                std::uniform_real_distribution<double> jitter(0.5, 1.0);
                auto delay = static_cast<long long>(static_cast<double>(base) * factor * jitter(rng));
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
        }
    }
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

std::string canonical_request_serialization(const CompletionRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"content", m.content}, {"role", role_label(m.role)}});
    }
    // nlohmann objects keep keys sorted, and dump() is compact: byte-stable
    nlohmann::json canonical{
        {"messages", std::move(messages)}, {"model", req.model}, {"temperature", req.temperature}};
    return canonical.dump();
}

std::string request_hash(const CompletionRequest& req) {
    return sha256_hex(canonical_request_serialization(req));
}

std::string fixture_key(const CompletionRequest& req) {
    return request_hash(req).substr(0, 16);
}

}  // namespace orderpipe
