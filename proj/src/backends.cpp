#include "orderpipe/backends.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace orderpipe {

namespace {

using nlohmann::json;

json request_to_json(const CompletionRequest& req) {
    json messages = json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"role", role_label(m.role)}, {"content", m.content}});
    }
    json body{{"model", req.model},
              {"messages", std::move(messages)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens}};
    if (req.seed) body["seed"] = *req.seed;
    return body;
}

json response_to_json(const CompletionResponse& resp) {
    json out{{"text", resp.text}, {"finish_reason", finish_reason_label(resp.finish_reason)}};
    if (resp.usage) {
        out["usage"] = {{"prompt_tokens", resp.usage->prompt_tokens},
                        {"completion_tokens", resp.usage->completion_tokens}};
    }
    return out;
}

CompletionResponse response_from_json(const json& doc) {
    CompletionResponse resp;
    resp.text = doc.value("text", "");
    resp.finish_reason = finish_reason_from_string(doc.value("finish_reason", "other"));
    if (doc.contains("usage") && doc.at("usage").is_object()) {
        TokenUsage usage;
        usage.prompt_tokens = doc.at("usage").value("prompt_tokens", 0);
        usage.completion_tokens = doc.at("usage").value("completion_tokens", 0);
        resp.usage = usage;
    }
    return resp;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string prompt_digest(const CompletionRequest& req) {
    if (req.messages.empty()) return "(no messages)";
    const std::string& content = req.messages.back().content;
    std::string head = content.substr(0, 80);
    for (char& c : head) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    if (content.size() > 80) head += "...";
    return head;
}

}  // namespace

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

ScriptedBackend::Reply ScriptedBackend::Reply::text(std::string body) {
    return {Kind::text, std::move(body)};
}
ScriptedBackend::Reply ScriptedBackend::Reply::transport_error(std::string message) {
    return {Kind::transport_error, std::move(message)};
}
ScriptedBackend::Reply ScriptedBackend::Reply::rate_limited(std::string message) {
    return {Kind::rate_limited, std::move(message)};
}
ScriptedBackend::Reply ScriptedBackend::Reply::bad_request(std::string message) {
    return {Kind::bad_request, std::move(message)};
}

ScriptedBackend::ScriptedBackend(std::vector<Reply> script) : script_(std::move(script)) {}

ScriptedBackend::ScriptedBackend(std::vector<std::string> texts) {
    script_.reserve(texts.size());
    for (auto& t : texts) script_.push_back(Reply::text(std::move(t)));
}

ScriptedBackend::ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& req) {
    std::string text;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        requests_.push_back(req);
        if (responder_) {
            text = responder_(req);
        } else {
            if (next_ >= script_.size()) {
                throw BadRequestError("scripted backend: script exhausted after " +
                                      std::to_string(script_.size()) + " replies");
            }
            const Reply& reply = script_[next_++];
            switch (reply.kind) {
                case Reply::Kind::text: text = reply.payload; break;
                case Reply::Kind::transport_error: throw TransportError(reply.payload);
                case Reply::Kind::rate_limited: throw RateLimitedError(reply.payload);
                case Reply::Kind::bad_request: throw BadRequestError(reply.payload);
            }
        }
    }
    CompletionResponse resp;
    resp.text = std::move(text);
    resp.finish_reason = FinishReason::stop;
    return resp;
}

std::vector<CompletionRequest> ScriptedBackend::requests() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return requests_;
}

size_t ScriptedBackend::calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return requests_.size();
}

// ---------------------------------------------------------------------------
// FixtureStore / ReplayBackend / RecordingBackend
// ---------------------------------------------------------------------------

FixtureStore::FixtureStore(std::filesystem::path dir, bool create) : dir_(std::move(dir)) {
    if (create) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw FixtureIoError("cannot create fixture dir " + dir_.string() + ": " + ec.message());
    }
}

void FixtureStore::save(const CompletionRequest& req, const CompletionResponse& resp) const {
    json doc{{"request", request_to_json(req)},
             {"response", response_to_json(resp)},
             {"timestamp", utc_timestamp()}};
    std::filesystem::path file = dir_ / (fixture_key(req) + ".json");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw FixtureIoError("cannot write fixture " + file.string());
    out << doc.dump(2) << "\n";
}

std::optional<CompletionResponse> FixtureStore::load(const CompletionRequest& req) const {
    std::filesystem::path file = dir_ / (fixture_key(req) + ".json");
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    json doc;
    try {
        in >> doc;
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!doc.contains("response")) return std::nullopt;
    return response_from_json(doc.at("response"));
}

size_t FixtureStore::size() const {
    size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") ++n;
    }
    return n;
}

ReplayBackend::ReplayBackend(std::filesystem::path fixture_dir)
    : store_(std::move(fixture_dir), /*create=*/false) {}

CompletionResponse ReplayBackend::complete(const CompletionRequest& req) {
    auto resp = store_.load(req);
    if (!resp) {
        throw ReplayMissError("replay miss: no fixture " + fixture_key(req) + ".json (hash " +
                                  request_hash(req) + ", prompt \"" + prompt_digest(req) + "\")",
                              request_hash(req));
    }
    return *resp;
}

RecordingBackend::RecordingBackend(Backend& inner, std::filesystem::path fixture_dir)
    : inner_(inner), store_(std::move(fixture_dir)) {}

CompletionResponse RecordingBackend::complete(const CompletionRequest& req) {
    CompletionResponse resp = inner_.complete(req);
    std::lock_guard<std::mutex> lock(write_mutex_);
    store_.save(req, resp);
    return resp;
}

std::string RecordingBackend::name() const { return inner_.name() + "+record"; }

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
    if (options_.api_key.empty()) {
        if (const char* key = std::getenv("ORDERPIPE_API_KEY")) options_.api_key = key;
    }
    const std::string& url = options_.base_url;
    size_t scheme = url.find("://");
    size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    size_t slash = url.find('/', host_start);
    origin_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_prefix_ = slash == std::string::npos ? "" : url.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

CompletionResponse HttpBackend::complete(const CompletionRequest& req) {
    httplib::Client client(origin_);
    client.set_connection_timeout(options_.connect_timeout_s, 0);
    client.set_read_timeout(options_.read_timeout_s, 0);
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }

    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path_prefix_ + "/chat/completions", headers,
                              request_to_json(req).dump(), "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (!result) {
        throw TransportError("http: " + httplib::to_string(result.error()) + " (" + origin_ + ")");
    }
    std::string body_head = result->body.substr(0, 200);
    if (result->status == 429) {
        throw RateLimitedError("http 429: " + body_head);
    }
    if (result->status >= 500) {
        throw TransportError("http " + std::to_string(result->status) + ": " + body_head);
    }
    if (result->status >= 400) {
        throw BadRequestError("http " + std::to_string(result->status) + ": " + body_head);
    }

    json doc;
    try {
        doc = json::parse(result->body);
    } catch (const json::exception& e) {
        throw TransportError(std::string("http: unparsable response body: ") + e.what());
    }
    if (!doc.contains("choices") || !doc.at("choices").is_array() || doc.at("choices").empty()) {
        throw TransportError("http: response has no choices");
    }
    const json& choice = doc.at("choices").at(0);

    CompletionResponse resp;
    resp.latency = elapsed;
    if (choice.contains("message") && choice.at("message").contains("content") &&
        choice.at("message").at("content").is_string()) {
        resp.text = choice.at("message").at("content").get<std::string>();
    }
    resp.finish_reason = finish_reason_from_string(choice.value("finish_reason", "other"));
    if (doc.contains("usage") && doc.at("usage").is_object()) {
        TokenUsage usage;
        usage.prompt_tokens = doc.at("usage").value("prompt_tokens", 0);
        usage.completion_tokens = doc.at("usage").value("completion_tokens", 0);
        resp.usage = usage;
    }
    return resp;
}

}  // namespace orderpipe
