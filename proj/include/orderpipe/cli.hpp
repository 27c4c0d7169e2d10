#pragma once

#include <iosfwd>
#include <string>

#include "orderpipe/backends.hpp"
#include "orderpipe/metrics.hpp"
#include "orderpipe/strategies.hpp"
#include "orderpipe/transcript.hpp"

namespace orderpipe::cli {

// Exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;     // config/backend failure, nothing usable produced
inline constexpr int kExitPartial = 2;   // some encounters failed; predictions still written

struct RunConfig {
    std::string input;
    std::string output;
    std::string strategy = "oneshot";
    std::string backend = "replay";
    std::string split = "custom";
    std::string base_url = "http://localhost:8000/v1";
    std::string fixtures_dir;
    std::string script_path;     // scripted backend reply file (JSON array of strings)
    std::string prompts_dir;     // optional prompt catalog override
    int concurrency = 4;
    bool strict = false;
    bool persist_fixtures = false;   // record mode
    CompletionParams params;
    RetryPolicy retry;
    ReactConfig react;               // carries the postprocess config too
};

struct EvalConfig {
    std::string predictions;
    std::string gold;
    std::string report_path;     // optional JSON report output
    std::string split = "custom";
    bool strict = false;
    metrics::AlignOptions align;
    metrics::AggregateOptions aggregate;
};

/// Runs the chosen strategy over every encounter and writes one predictions
/// record per encounter, ordered by encounter id. Failed encounters go to a
/// `<output>.failures.json` sidecar and never abort the batch in lenient mode.
int run_extract(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Extraction with every request/response persisted to the fixture store.
int run_record(RunConfig cfg, std::ostream& out, std::ostream& err);

/// Scores a predictions file against gold annotations and prints the headline
/// metric row; optionally writes the full report document.
int run_evaluate(const EvalConfig& cfg, std::ostream& out, std::ostream& err);

/// Pretty-prints a previously written report document.
int run_report(const std::string& report_path, std::ostream& out, std::ostream& err);

}  // namespace orderpipe::cli
