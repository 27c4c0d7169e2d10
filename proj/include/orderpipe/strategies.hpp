#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "orderpipe/gateway.hpp"
#include "orderpipe/orders.hpp"
#include "orderpipe/prompts.hpp"
#include "orderpipe/transcript.hpp"

namespace orderpipe {

enum class Strategy { oneshot, react, agentic };

std::string_view strategy_label(Strategy s);
std::optional<Strategy> strategy_from_string(std::string_view s);

enum class SourceStage { oneshot, react_action, identifier, mapper, structurer, validator };

std::string_view source_stage_label(SourceStage s);

/// An order candidate as produced by a model, after schema validation but
/// before constraint checking and post-processing.
struct CandidateOrder {
    MedicalOrder order;
    SourceStage source_stage = SourceStage::oneshot;
    int element_index = 0;   // position in the model's output array
};

enum class ViolationKind {
    not_doctor_initiated,
    wording_mismatch,
    too_long,
    compound,
    duplicate,
    over_cap,
    bad_schema,
};

std::string_view violation_kind_label(ViolationKind k);

struct Violation {
    ViolationKind kind;
    int candidate_index = -1;   // -1 for whole-response problems
    std::string message;        // model-readable; embedded in the next observation
};

struct ReactConfig {
    int max_iterations = 3;
    double wording_overlap_threshold = 0.6;
    bool include_previous_output = true;   // echo prior candidates in the observation
    PostprocessConfig postprocess;
};

struct Diagnostics {
    std::vector<std::string> raw_responses;                    // one per LLM call
    std::vector<std::vector<Violation>> violations_per_iteration;
    int iterations = 0;
    RepairLog repairs;
    double wall_time_ms = 0.0;
    bool exhausted = false;            // react hit max_iterations with violations left
    bool used_structurer_fallback = false;
    std::vector<std::string> notes;    // parse failures and similar

    int llm_calls() const { return static_cast<int>(raw_responses.size()); }
};

struct ExtractionResult {
    std::string encounter_id;
    Strategy strategy = Strategy::oneshot;
    std::vector<MedicalOrder> orders;   // already post-processed
    Diagnostics diagnostics;
};

/// Raised when a multi-stage pipeline dies mid-flight; identifies the stage.
class ExtractionStageError : public std::runtime_error {
public:
    ExtractionStageError(SourceStage stage, const std::string& message);

    SourceStage stage() const { return stage_; }

private:
    SourceStage stage_;
};

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

struct ParsedResponse {
    std::vector<CandidateOrder> candidates;     // schema-valid elements
    std::vector<Violation> schema_violations;   // bad_schema, one per failed element
    bool parsable = false;
    std::string error;                          // set when !parsable
};

/// Strips code fences, finds the first balanced top-level JSON array (string
/// literals respected; a lone object is wrapped), and schema-validates each
/// element. Elements failing validation become bad_schema diagnostics rather
/// than being dropped silently.
ParsedResponse parse_orders_response(std::string_view text, SourceStage stage);

// ---------------------------------------------------------------------------
// Constraint validation (the react observation step)
// ---------------------------------------------------------------------------

/// Checks every candidate against the extraction constraints: doctor-initiated
/// provenance, transcript wording coverage, word limits, compound phrasing,
/// duplicates, and the order/provenance caps.
std::vector<Violation> validate_candidates(const std::vector<CandidateOrder>& candidates,
                                           const Transcript& t, const ReactConfig& cfg);

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

struct CompletionParams {
    std::string model = "medgemma-4b-it";
    double temperature = 0.0;
    int max_tokens = 2048;
    std::optional<int> seed;
};

struct ExtractionContext {
    Backend* backend = nullptr;
    const PromptCatalog* prompts = &PromptCatalog::builtin();
    CompletionParams params;
    RetryPolicy retry;
};

/// System + user message pair for the one-shot strategy; the user message
/// embeds the worked example and the rendered conversation.
std::vector<ChatMessage> build_oneshot_messages(const Encounter& e, const PromptCatalog& prompts);

ExtractionResult extract_oneshot(const Encounter& e, ExtractionContext& ctx,
                                 const PostprocessConfig& cfg = {});

/// Thought/action/observation loop: completions are validated and violations
/// are fed back verbatim until the output is clean or iterations run out, in
/// which case violating candidates are dropped and the valid subset kept.
ExtractionResult extract_react(const Encounter& e, ExtractionContext& ctx,
                               const ReactConfig& cfg = {});

/// Four sequential calls: identifier -> mapper -> structurer -> validator.
/// The validator output is parsed; if unparsable the structurer output is
/// used instead (recorded in diagnostics).
ExtractionResult extract_agentic(const Encounter& e, ExtractionContext& ctx,
                                 const PostprocessConfig& cfg = {});

ExtractionResult run_strategy(Strategy strategy, const Encounter& e, ExtractionContext& ctx,
                              const ReactConfig& cfg);

}  // namespace orderpipe
