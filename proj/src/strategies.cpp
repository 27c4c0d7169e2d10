#include "orderpipe/strategies.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "orderpipe/metrics.hpp"

namespace orderpipe {

using nlohmann::json;

std::string_view strategy_label(Strategy s) {
    switch (s) {
        case Strategy::oneshot: return "oneshot";
        case Strategy::react: return "react";
        case Strategy::agentic: return "agentic";
    }
    return "oneshot";
}

std::optional<Strategy> strategy_from_string(std::string_view s) {
    if (s == "oneshot" || s == "one-shot" || s == "1-shot") return Strategy::oneshot;
    if (s == "react") return Strategy::react;
    if (s == "agentic") return Strategy::agentic;
    return std::nullopt;
}

std::string_view source_stage_label(SourceStage s) {
    switch (s) {
        case SourceStage::oneshot: return "oneshot";
        case SourceStage::react_action: return "react_action";
        case SourceStage::identifier: return "identifier";
        case SourceStage::mapper: return "mapper";
        case SourceStage::structurer: return "structurer";
        case SourceStage::validator: return "validator";
    }
    return "oneshot";
}

std::string_view violation_kind_label(ViolationKind k) {
    switch (k) {
        case ViolationKind::not_doctor_initiated: return "NOT_DOCTOR_INITIATED";
        case ViolationKind::wording_mismatch: return "WORDING_MISMATCH";
        case ViolationKind::too_long: return "TOO_LONG";
        case ViolationKind::compound: return "COMPOUND";
        case ViolationKind::duplicate: return "DUPLICATE";
        case ViolationKind::over_cap: return "OVER_CAP";
        case ViolationKind::bad_schema: return "BAD_SCHEMA";
    }
    return "BAD_SCHEMA";
}

ExtractionStageError::ExtractionStageError(SourceStage stage, const std::string& message)
    : std::runtime_error("stage " + std::string(source_stage_label(stage)) + ": " + message),
      stage_(stage) {}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

namespace {

// Drops fence marker lines (``` or ```lang) so fenced JSON scans like bare JSON.
std::string strip_code_fences(std::string_view text) {
    if (text.find("```") == std::string_view::npos) return std::string(text);
    std::string out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                               : eol - pos);
        size_t first = line.find_first_not_of(" \t");
        bool fence = first != std::string_view::npos && line.substr(first, 3) == "```";
        if (!fence) {
            out.append(line);
            if (eol != std::string_view::npos) out.push_back('\n');
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return out;
}

// Returns the balanced bracket span starting at `start` (which must hold an
// opening bracket), honoring string literals and escapes. npos if unbalanced.
size_t balanced_end(std::string_view text, size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[' || c == '{') {
            ++depth;
        } else if (c == ']' || c == '}') {
            --depth;
            if (depth == 0) return i;
            if (depth < 0) return std::string_view::npos;
        }
    }
    return std::string_view::npos;
}

// First balanced top-level array in the text; a complete top-level object is
// skipped whole (and remembered for the wrap-a-lone-object fallback), so
// arrays nested inside it are never mistaken for the answer.
struct SpanScan {
    std::optional<json> array;
    std::optional<json> object;
};

SpanScan scan_json_spans(std::string_view text) {
    SpanScan result;
    size_t pos = 0;
    while (pos < text.size()) {
        char c = text[pos];
        if (c != '[' && c != '{') {
            ++pos;
            continue;
        }
        size_t end = balanced_end(text, pos);
        if (end == std::string_view::npos) {
            ++pos;
            continue;
        }
        auto doc = json::parse(text.substr(pos, end - pos + 1), nullptr, false);
        if (doc.is_discarded()) {
            ++pos;   // balanced but not JSON; rescan inside it
            continue;
        }
        if (c == '[') {
            result.array = std::move(doc);
            return result;
        }
        if (!result.object) result.object = std::move(doc);
        pos = end + 1;
    }
    return result;
}

}  // namespace

ParsedResponse parse_orders_response(std::string_view text, SourceStage stage) {
    ParsedResponse result;
    std::string cleaned = strip_code_fences(text);

    SpanScan scan = scan_json_spans(cleaned);
    std::optional<json> doc = std::move(scan.array);
    if (!doc && scan.object) doc = json::array({std::move(*scan.object)});
    if (!doc) {
        result.error = "no parsable JSON array or object in model output";
        return result;
    }

    result.parsable = true;
    int index = 0;
    for (const auto& element : *doc) {
        SchemaCheck check = validate_order_schema(element);
        if (check.ok()) {
            result.candidates.push_back({std::move(*check.order), stage, index});
        } else {
            std::string details;
            for (const auto& v : check.violations) {
                if (!details.empty()) details += "; ";
                details += v.to_string();
            }
            result.schema_violations.push_back(
                {ViolationKind::bad_schema, index, "failed schema validation: " + details});
        }
        ++index;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Constraint validation
// ---------------------------------------------------------------------------

namespace {

// order keyword lexicon for compound detection, grouped by order type
const std::set<std::string>& compound_keywords() {
    static const std::set<std::string> keywords = {
        // lab
        "test", "panel", "level", "a1c",
        // imaging
        "scan", "xray", "mri", "ct", "ultrasound",
        // medication
        "prescription", "refill",
        // followup
        "follow",
    };
    return keywords;
}

std::string strip_non_alnum(std::string_view token) {
    std::string out;
    for (unsigned char c : token) {
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool is_order_keyword(const std::string& normalized_token) {
    if (normalized_token.empty()) return false;
    const auto& keywords = compound_keywords();
    if (keywords.count(normalized_token)) return true;
    return normalized_token.rfind("follow", 0) == 0;   // follow-up, followup, follows
}

// "and" with an order keyword on each side marks a compound instruction
bool is_compound_description(const std::string& description) {
    std::istringstream stream(description);
    std::vector<std::string> tokens;
    std::string word;
    while (stream >> word) tokens.push_back(strip_non_alnum(word));

    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] != "and") continue;
        bool left = false;
        for (size_t j = 0; j < i && !left; ++j) left = is_order_keyword(tokens[j]);
        bool right = false;
        for (size_t j = i + 1; j < tokens.size() && !right; ++j) right = is_order_keyword(tokens[j]);
        if (left && right) return true;
    }
    return false;
}

std::string lower_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::vector<Violation> validate_candidates(const std::vector<CandidateOrder>& candidates,
                                           const Transcript& t, const ReactConfig& cfg) {
    std::vector<Violation> violations;
    const std::set<int> doctor = doctor_turns(t);
    const int max_words = cfg.postprocess.max_words;

    std::map<std::pair<int, std::string>, int> first_by_key;
    for (const CandidateOrder& cand : candidates) {
        const MedicalOrder& order = cand.order;
        const int idx = cand.element_index;

        std::vector<int> non_doctor;
        for (int turn : order.provenance) {
            if (!doctor.count(turn)) non_doctor.push_back(turn);
        }
        if (!non_doctor.empty()) {
            std::string turns;
            for (size_t i = 0; i < non_doctor.size(); ++i) {
                if (i) turns += ", ";
                turns += std::to_string(non_doctor[i]);
            }
            violations.push_back({ViolationKind::not_doctor_initiated, idx,
                                  "cites turns not spoken by the doctor: " + turns});
        }

        // wording: fraction of description tokens that appear in the cited turns
        auto description_tokens = metrics::tokenize(order.description);
        if (!description_tokens.empty()) {
            std::unordered_set<std::string> cited;
            for (const Turn& turn : t.turns) {
                if (std::find(order.provenance.begin(), order.provenance.end(), turn.index) ==
                    order.provenance.end())
                    continue;
                for (auto& tok : metrics::tokenize(turn.text)) cited.insert(std::move(tok));
            }
            size_t covered = 0;
            for (const auto& tok : description_tokens) {
                if (cited.count(tok)) ++covered;
            }
            double coverage = static_cast<double>(covered) / description_tokens.size();
            if (coverage < cfg.wording_overlap_threshold) {
                std::ostringstream msg;
                msg << "description wording not found in cited turns (coverage "
                    << static_cast<int>(coverage * 100) << "%, need "
                    << static_cast<int>(cfg.wording_overlap_threshold * 100) << "%)";
                violations.push_back({ViolationKind::wording_mismatch, idx, msg.str()});
            }
        }

        int description_words = word_count(order.description);
        int reason_words = word_count(order.reason);
        if (description_words > max_words || reason_words > max_words) {
            std::string field = description_words > max_words ? "description" : "reason";
            int words = description_words > max_words ? description_words : reason_words;
            violations.push_back({ViolationKind::too_long, idx,
                                  field + " has " + std::to_string(words) + " words (limit " +
                                      std::to_string(max_words) + ")"});
        }

        if (is_compound_description(order.description)) {
            violations.push_back({ViolationKind::compound, idx,
                                  "description joins multiple orders with \"and\"; create a "
                                  "separate order for each item"});
        }

        auto key = std::make_pair(static_cast<int>(order.order_type),
                                  fold_text(order.description));
        auto [it, inserted] = first_by_key.emplace(key, idx);
        if (!inserted) {
            violations.push_back({ViolationKind::duplicate, idx,
                                  "duplicate of order " + std::to_string(it->second) +
                                      " (same type and description)"});
        }

        if (order.provenance.size() > static_cast<size_t>(cfg.postprocess.max_provenance)) {
            violations.push_back({ViolationKind::over_cap, idx,
                                  "provenance lists " + std::to_string(order.provenance.size()) +
                                      " turns (cap " +
                                      std::to_string(cfg.postprocess.max_provenance) + ")"});
        }
        if (idx >= cfg.postprocess.max_orders) {
            violations.push_back({ViolationKind::over_cap, idx,
                                  "too many orders (cap " +
                                      std::to_string(cfg.postprocess.max_orders) + ")"});
        }
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

namespace {

CompletionRequest make_request(const CompletionParams& params, std::vector<ChatMessage> messages) {
    CompletionRequest req;
    req.model = params.model;
    req.messages = std::move(messages);
    req.temperature = params.temperature;
    req.max_tokens = params.max_tokens;
    req.seed = params.seed;
    return req;
}

json candidate_to_json(const CandidateOrder& cand) {
    // the "order type" spelling matches the output format the prompts request
    return json{{"order type", order_type_label(cand.order.order_type)},
                {"description", cand.order.description},
                {"reason", cand.order.reason},
                {"provenance", cand.order.provenance}};
}

std::string render_violations(const std::vector<Violation>& violations) {
    std::string out;
    for (const Violation& v : violations) {
        if (!out.empty()) out.push_back('\n');
        out += "- ";
        if (v.candidate_index >= 0) out += "order " + std::to_string(v.candidate_index) + ": ";
        out += "[";
        out += violation_kind_label(v.kind);
        out += "] ";
        out += v.message;
    }
    return out;
}

std::vector<MedicalOrder> to_orders(const std::vector<CandidateOrder>& candidates) {
    std::vector<MedicalOrder> orders;
    orders.reserve(candidates.size());
    for (const auto& cand : candidates) orders.push_back(cand.order);
    return orders;
}

class WallTimer {
public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

}  // namespace

std::vector<ChatMessage> build_oneshot_messages(const Encounter& e, const PromptCatalog& prompts) {
    std::string instruction =
        fill_placeholder(prompts.oneshot_instruction, "conversation", render_transcript(e.transcript));
    std::string user = fill_placeholder(prompts.oneshot_user, "instruction", instruction);
    return {{Role::system, prompts.oneshot_system}, {Role::user, std::move(user)}};
}

ExtractionResult extract_oneshot(const Encounter& e, ExtractionContext& ctx,
                                 const PostprocessConfig& cfg) {
    WallTimer timer;
    ExtractionResult result;
    result.encounter_id = e.id;
    result.strategy = Strategy::oneshot;

    CompletionResponse resp = complete_with_retry(
        *ctx.backend, make_request(ctx.params, build_oneshot_messages(e, *ctx.prompts)), ctx.retry);
    result.diagnostics.raw_responses.push_back(resp.text);
    result.diagnostics.iterations = 1;

    ParsedResponse parsed = parse_orders_response(resp.text, SourceStage::oneshot);
    result.diagnostics.violations_per_iteration.push_back(parsed.schema_violations);
    if (!parsed.parsable) {
        result.diagnostics.notes.push_back("NoParsableOutput: " + parsed.error);
    } else {
        PostprocessResult post = postprocess_orders(to_orders(parsed.candidates), e.transcript, cfg);
        result.orders = std::move(post.orders);
        result.diagnostics.repairs = std::move(post.log);
    }
    result.diagnostics.wall_time_ms = timer.elapsed_ms();
    return result;
}

ExtractionResult extract_react(const Encounter& e, ExtractionContext& ctx, const ReactConfig& cfg) {
    WallTimer timer;
    ExtractionResult result;
    result.encounter_id = e.id;
    result.strategy = Strategy::react;

    const std::string conversation = render_transcript(e.transcript);
    const std::string base_user =
        fill_placeholder(ctx.prompts->react_user, "conversation", conversation);

    std::vector<CandidateOrder> candidates;
    std::vector<Violation> violations;
    std::string previous_output;
    int max_iterations = cfg.max_iterations < 1 ? 1 : cfg.max_iterations;

    for (int iteration = 1; iteration <= max_iterations; ++iteration) {
        std::string user = base_user;
        if (iteration > 1) {
            std::string observation = ctx.prompts->react_observation;
            observation = fill_placeholder(observation, "previous_output",
                                           cfg.include_previous_output ? previous_output
                                                                       : "(omitted)");
            observation = fill_placeholder(observation, "violations", render_violations(violations));
            user += "\n\n" + observation;
        }

        CompletionResponse resp = complete_with_retry(
            *ctx.backend,
            make_request(ctx.params, {{Role::system, ctx.prompts->react_system},
                                      {Role::user, std::move(user)}}),
            ctx.retry);
        result.diagnostics.raw_responses.push_back(resp.text);
        result.diagnostics.iterations = iteration;

        ParsedResponse parsed = parse_orders_response(resp.text, SourceStage::react_action);
        violations = parsed.schema_violations;
        if (!parsed.parsable) {
            violations.push_back({ViolationKind::bad_schema, -1,
                                  "no parsable JSON array found in the reply; output the orders "
                                  "as one JSON array"});
            result.diagnostics.notes.push_back("iteration " + std::to_string(iteration) +
                                               ": NoParsableOutput: " + parsed.error);
        }
        auto constraint_violations = validate_candidates(parsed.candidates, e.transcript, cfg);
        violations.insert(violations.end(), constraint_violations.begin(),
                          constraint_violations.end());
        result.diagnostics.violations_per_iteration.push_back(violations);

        candidates = std::move(parsed.candidates);
        if (violations.empty()) break;

        if (cfg.include_previous_output) {
            json echo = json::array();
            for (const auto& cand : candidates) echo.push_back(candidate_to_json(cand));
            previous_output = candidates.empty() ? resp.text : echo.dump(2);
        }
    }

    if (!violations.empty()) {
        // exhausted: drop every candidate named in a violation, keep the rest
        result.diagnostics.exhausted = true;
        std::unordered_set<int> violating;
        for (const Violation& v : violations) {
            if (v.candidate_index >= 0) violating.insert(v.candidate_index);
        }
        std::vector<CandidateOrder> kept;
        for (auto& cand : candidates) {
            if (!violating.count(cand.element_index)) kept.push_back(std::move(cand));
        }
        candidates = std::move(kept);
    }

    PostprocessResult post =
        postprocess_orders(to_orders(candidates), e.transcript, cfg.postprocess);
    result.orders = std::move(post.orders);
    result.diagnostics.repairs = std::move(post.log);
    result.diagnostics.wall_time_ms = timer.elapsed_ms();
    return result;
}

ExtractionResult extract_agentic(const Encounter& e, ExtractionContext& ctx,
                                 const PostprocessConfig& cfg) {
    WallTimer timer;
    ExtractionResult result;
    result.encounter_id = e.id;
    result.strategy = Strategy::agentic;

    const std::string conversation = render_transcript(e.transcript);
    const PromptCatalog& prompts = *ctx.prompts;

    auto call_stage = [&](SourceStage stage, const std::string& system,
                          std::string user) -> std::string {
        try {
            CompletionResponse resp = complete_with_retry(
                *ctx.backend,
                make_request(ctx.params, {{Role::system, system}, {Role::user, std::move(user)}}),
                ctx.retry);
            result.diagnostics.raw_responses.push_back(resp.text);
            return resp.text;
        } catch (const GatewayError& err) {
            throw ExtractionStageError(stage, err.what());
        }
    };

    std::string identified =
        call_stage(SourceStage::identifier, prompts.agentic_identifier_system,
                   fill_placeholder(prompts.agentic_identifier_user, "conversation", conversation));
    std::string mapped = call_stage(SourceStage::mapper, prompts.agentic_mapper_system,
                                    fill_placeholder(prompts.agentic_mapper_user, "orders", identified));
    std::string structured =
        call_stage(SourceStage::structurer, prompts.agentic_structurer_system,
                   fill_placeholder(prompts.agentic_structurer_user, "pairs", mapped));
    std::string validated = call_stage(
        SourceStage::validator, prompts.agentic_validator_system,
        fill_placeholder(fill_placeholder(prompts.agentic_validator_user, "conversation", conversation),
                         "structured", structured));

    ParsedResponse parsed = parse_orders_response(validated, SourceStage::validator);
    if (!parsed.parsable) {
        result.diagnostics.used_structurer_fallback = true;
        result.diagnostics.notes.push_back("validator output unparsable (" + parsed.error +
                                           "); falling back to structurer output");
        parsed = parse_orders_response(structured, SourceStage::structurer);
        if (!parsed.parsable) {
            result.diagnostics.notes.push_back("NoParsableOutput: structurer output unparsable (" +
                                               parsed.error + ")");
        }
    }
    result.diagnostics.iterations = 1;
    result.diagnostics.violations_per_iteration.push_back(parsed.schema_violations);
    if (parsed.parsable) {
        PostprocessResult post = postprocess_orders(to_orders(parsed.candidates), e.transcript, cfg);
        result.orders = std::move(post.orders);
        result.diagnostics.repairs = std::move(post.log);
    }
    result.diagnostics.wall_time_ms = timer.elapsed_ms();
    return result;
}

ExtractionResult run_strategy(Strategy strategy, const Encounter& e, ExtractionContext& ctx,
                              const ReactConfig& cfg) {
    switch (strategy) {
        case Strategy::oneshot: return extract_oneshot(e, ctx, cfg.postprocess);
        case Strategy::react: return extract_react(e, ctx, cfg);
        case Strategy::agentic: return extract_agentic(e, ctx, cfg.postprocess);
    }
    return extract_oneshot(e, ctx, cfg.postprocess);
}

}  // namespace orderpipe
