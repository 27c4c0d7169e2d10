#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "orderpipe/gateway.hpp"

namespace orderpipe {

/// Fixture store directory or file cannot be used. Fatal.
class FixtureIoError : public GatewayError {
public:
    explicit FixtureIoError(std::string message) : GatewayError(std::move(message), false) {}
};

// ---------------------------------------------------------------------------
// Scripted backend (tests, offline demos)
// ---------------------------------------------------------------------------

/// Answers from a fixed reply sequence, or from a responder function keyed on
/// the request. Sequence consumption is serialized, so scripts stay in order;
/// keep scripts per-encounter (or concurrency at 1) when order matters.
class ScriptedBackend : public Backend {
public:
    struct Reply {
        enum class Kind { text, transport_error, rate_limited, bad_request };
        Kind kind = Kind::text;
        std::string payload;

        static Reply text(std::string body);
        static Reply transport_error(std::string message);
        static Reply rate_limited(std::string message);
        static Reply bad_request(std::string message);
    };

    using Responder = std::function<std::string(const CompletionRequest&)>;

    explicit ScriptedBackend(std::vector<Reply> script);
    explicit ScriptedBackend(std::vector<std::string> texts);
    explicit ScriptedBackend(Responder responder);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::string name() const override { return "scripted"; }

    /// Every request seen, in call order.
    std::vector<CompletionRequest> requests() const;
    size_t calls() const;

private:
    mutable std::mutex mutex_;
    std::vector<Reply> script_;
    size_t next_ = 0;
    Responder responder_;
    std::vector<CompletionRequest> requests_;
};

// ---------------------------------------------------------------------------
// Fixture store, replay and recording
// ---------------------------------------------------------------------------

/// One file per request, named `<first 16 hex of request hash>.json`, holding
/// {request, response, timestamp}.
class FixtureStore {
public:
    explicit FixtureStore(std::filesystem::path dir, bool create = true);

    void save(const CompletionRequest& req, const CompletionResponse& resp) const;
    std::optional<CompletionResponse> load(const CompletionRequest& req) const;

    const std::filesystem::path& dir() const { return dir_; }
    size_t size() const;

private:
    std::filesystem::path dir_;
};

/// Replays recorded responses; unrecorded requests raise ReplayMissError with
/// the request hash and a prompt digest.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(std::filesystem::path fixture_dir);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::string name() const override { return "replay"; }

private:
    FixtureStore store_;
};

/// Decorator that persists every request/response pair for later replay.
class RecordingBackend : public Backend {
public:
    RecordingBackend(Backend& inner, std::filesystem::path fixture_dir);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::string name() const override;

private:
    Backend& inner_;
    FixtureStore store_;
    std::mutex write_mutex_;
};

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

struct HttpOptions {
    std::string base_url = "http://localhost:8000/v1";
    std::string api_key;        // empty: read from ORDERPIPE_API_KEY
    int connect_timeout_s = 10;
    int read_timeout_s = 300;
};

/// POSTs {base_url}/chat/completions with a bearer token. HTTP >= 500 and
/// connection failures map to TransportError, 429 to RateLimitedError, other
/// 4xx to BadRequestError.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpOptions options);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::string name() const override { return "http"; }

private:
    HttpOptions options_;
    std::string origin_;        // scheme://host[:port]
    std::string path_prefix_;   // e.g. "/v1"
};

}  // namespace orderpipe
