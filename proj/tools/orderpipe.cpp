#include <iostream>

#include <CLI11.hpp>

#include "orderpipe/cli.hpp"

namespace {

void add_extract_options(CLI::App* cmd, orderpipe::cli::RunConfig& cfg) {
    cmd->set_config("--config", "", "flat key=value config file");
    cmd->add_option("-i,--input", cfg.input, "dataset file or directory")
        ->required()
        ->envname("ORDERPIPE_INPUT");
    cmd->add_option("-o,--output", cfg.output, "predictions file")->envname("ORDERPIPE_OUTPUT");
    cmd->add_option("--strategy", cfg.strategy, "oneshot|react|agentic")
        ->envname("ORDERPIPE_STRATEGY");
    cmd->add_option("--backend", cfg.backend, "http|replay|scripted")
        ->envname("ORDERPIPE_BACKEND");
    cmd->add_option("--model", cfg.params.model, "model name")->envname("ORDERPIPE_MODEL");
    cmd->add_option("--base-url", cfg.base_url, "chat-completions base url")
        ->envname("ORDERPIPE_BASE_URL");
    cmd->add_option("--fixtures", cfg.fixtures_dir, "fixture store directory")
        ->envname("ORDERPIPE_FIXTURES");
    cmd->add_option("--script", cfg.script_path, "scripted backend reply file");
    cmd->add_option("--prompts", cfg.prompts_dir, "prompt catalog override directory");
    cmd->add_option("--split", cfg.split, "train|dev|custom");
    cmd->add_option("--concurrency", cfg.concurrency, "max in-flight encounters")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--strict", cfg.strict, "abort on the first malformed record");
    cmd->add_option("--temperature", cfg.params.temperature, "sampling temperature")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-tokens", cfg.params.max_tokens, "completion token cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", [&cfg](const CLI::results_t& res) {
        cfg.params.seed = std::stoi(res[0]);
        return true;
    }, "decoding seed");
    cmd->add_option("--max-iterations", cfg.react.max_iterations, "react iteration cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--wording-threshold", cfg.react.wording_overlap_threshold,
                    "wording coverage threshold in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--max-words", cfg.react.postprocess.max_words, "description/reason word cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-orders", cfg.react.postprocess.max_orders, "order count cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-provenance", cfg.react.postprocess.max_provenance,
                    "provenance turn cap")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("!--no-doctor-filter", cfg.react.postprocess.require_doctor_provenance,
                  "keep provenance that cites non-doctor turns");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"medical order extraction and evaluation pipeline"};
    app.require_subcommand(1);

    orderpipe::cli::RunConfig extract_cfg;
    CLI::App* extract = app.add_subcommand("extract", "run an extraction strategy over a dataset");
    add_extract_options(extract, extract_cfg);

    orderpipe::cli::RunConfig record_cfg;
    record_cfg.backend = "http";
    CLI::App* record =
        app.add_subcommand("record", "extract while persisting fixtures for replay");
    add_extract_options(record, record_cfg);

    orderpipe::cli::EvalConfig eval_cfg;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against gold orders");
    evaluate->set_config("--config", "", "flat key=value config file");
    evaluate->add_option("-p,--pred", eval_cfg.predictions, "predictions file")->required();
    evaluate->add_option("-g,--gold", eval_cfg.gold, "gold dataset file or directory")->required();
    evaluate->add_option("-r,--report", eval_cfg.report_path, "report JSON output path");
    evaluate->add_option("--split", eval_cfg.split, "train|dev|custom");
    evaluate->add_flag("--strict", eval_cfg.strict, "abort on the first malformed record");
    evaluate->add_flag("--require-type-match", eval_cfg.align.require_type_match,
                       "only align orders of the same type");
    evaluate->add_flag("!--ordertype-macro", eval_cfg.aggregate.micro_ordertype,
                       "macro-average the per-encounter type F1 instead of pooling");

    std::string report_path;
    CLI::App* report = app.add_subcommand("report", "pretty-print a report document");
    report->add_option("-r,--report", report_path, "report JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : orderpipe::cli::kExitFatal;
    }

    if (extract->parsed())
        return orderpipe::cli::run_extract(extract_cfg, std::cout, std::cerr);
    if (record->parsed()) return orderpipe::cli::run_record(record_cfg, std::cout, std::cerr);
    if (evaluate->parsed())
        return orderpipe::cli::run_evaluate(eval_cfg, std::cout, std::cerr);
    if (report->parsed()) return orderpipe::cli::run_report(report_path, std::cout, std::cerr);
    return orderpipe::cli::kExitFatal;
}
