#include "orderpipe/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orderpipe/runner.hpp"

namespace orderpipe::cli {

using nlohmann::json;

namespace {

json diagnostics_summary(const Diagnostics& d) {
    // deterministic fields only: predictions files must be byte-stable
    size_t violation_count = 0;
    for (const auto& per_iteration : d.violations_per_iteration)
        violation_count += per_iteration.size();
    return json{{"llm_calls", d.llm_calls()},
                {"iterations", d.iterations},
                {"violations", violation_count},
                {"repairs", d.repairs.size()},
                {"exhausted", d.exhausted},
                {"structurer_fallback", d.used_structurer_fallback},
                {"notes", d.notes}};
}

json prediction_record(const ExtractionResult& result) {
    return json{{"encounter_id", result.encounter_id},
                {"strategy", strategy_label(result.strategy)},
                {"orders", orders_to_json(result.orders)},
                {"diagnostics", diagnostics_summary(result.diagnostics)}};
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("short write to " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw MalformedRecordError(path.string() + ": " + e.what());
    }
    return doc;
}

std::unique_ptr<Backend> make_backend(const RunConfig& cfg) {
    if (cfg.backend == "http") {
        HttpOptions options;
        options.base_url = cfg.base_url;
        return std::make_unique<HttpBackend>(options);
    }
    if (cfg.backend == "replay") {
        if (cfg.fixtures_dir.empty())
            throw BadRequestError("replay backend needs --fixtures");
        return std::make_unique<ReplayBackend>(cfg.fixtures_dir);
    }
    if (cfg.backend == "scripted") {
        if (cfg.script_path.empty())
            throw BadRequestError("scripted backend needs --script (JSON array of replies)");
        json doc = read_json_file(cfg.script_path);
        if (!doc.is_array()) throw BadRequestError("script file must hold a JSON array of strings");
        std::vector<std::string> replies;
        for (const auto& item : doc) {
            if (!item.is_string())
                throw BadRequestError("script file must hold a JSON array of strings");
            replies.push_back(item.get<std::string>());
        }
        return std::make_unique<ScriptedBackend>(std::move(replies));
    }
    throw BadRequestError("unknown backend \"" + cfg.backend + "\" (http|replay|scripted)");
}

struct EncounterOutcome {
    std::optional<ExtractionResult> result;
    std::string error;
};

}  // namespace

int run_extract(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    Split split = split_from_string(cfg.split).value_or(Split::custom);
    auto strategy = strategy_from_string(cfg.strategy);
    if (!strategy) {
        err << "error: unknown strategy \"" << cfg.strategy << "\"\n";
        return kExitFatal;
    }

    LoadedDataset dataset;
    std::unique_ptr<Backend> backend;
    std::unique_ptr<RecordingBackend> recorder;
    PromptCatalog catalog;
    try {
        LoadOptions load_opts;
        load_opts.strict = cfg.strict;
        dataset = load_dataset(cfg.input, split, load_opts);
        backend = make_backend(cfg);
        if (cfg.persist_fixtures) {
            if (cfg.fixtures_dir.empty()) throw BadRequestError("record mode needs --fixtures");
            recorder = std::make_unique<RecordingBackend>(*backend, cfg.fixtures_dir);
        }
        catalog = cfg.prompts_dir.empty() ? PromptCatalog::builtin()
                                          : PromptCatalog::from_directory(cfg.prompts_dir);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    for (const auto& message : dataset.stats.errors) err << "warning: " << message << "\n";

    std::vector<Encounter> encounters = std::move(dataset.encounters);
    std::sort(encounters.begin(), encounters.end(),
              [](const Encounter& a, const Encounter& b) { return a.id < b.id; });

    // sequential scripts map replies to encounters by position
    int workers = cfg.backend == "scripted" ? 1 : cfg.concurrency;
    if (cfg.backend == "scripted" && cfg.concurrency > 1) {
        err << "note: scripted backend runs with concurrency 1 to keep script order\n";
    }

    Backend& active = recorder ? static_cast<Backend&>(*recorder) : *backend;
    std::vector<EncounterOutcome> outcomes(encounters.size());
    parallel_for(encounters.size(), workers, [&](size_t i) {
        ExtractionContext ctx;
        ctx.backend = &active;
        ctx.prompts = &catalog;
        ctx.params = cfg.params;
        ctx.retry = cfg.retry;
        try {
            outcomes[i].result = run_strategy(*strategy, encounters[i], ctx, cfg.react);
        } catch (const std::exception& e) {
            outcomes[i].error = e.what();
        }
    });

    json predictions = json::array();
    json failures = json::array();
    int total_orders = 0;
    for (size_t i = 0; i < encounters.size(); ++i) {
        if (outcomes[i].result) {
            predictions.push_back(prediction_record(*outcomes[i].result));
            total_orders += static_cast<int>(outcomes[i].result->orders.size());
            out << encounters[i].id << ": " << outcomes[i].result->orders.size() << " orders ("
                << outcomes[i].result->diagnostics.llm_calls() << " calls, "
                << outcomes[i].result->diagnostics.iterations << " iterations)\n";
        } else {
            failures.push_back({{"encounter_id", encounters[i].id}, {"error", outcomes[i].error}});
            err << encounters[i].id << ": FAILED: " << outcomes[i].error << "\n";
        }
    }

    try {
        if (!cfg.output.empty()) {
            write_text_file(cfg.output, predictions.dump(2) + "\n");
            if (!failures.empty())
                write_text_file(cfg.output + ".failures.json", failures.dump(2) + "\n");
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }

    size_t failed = failures.size();
    out << "extracted " << total_orders << " orders from " << (encounters.size() - failed) << "/"
        << encounters.size() << " encounters";
    if (dataset.stats.skipped_records > 0)
        out << " (" << dataset.stats.skipped_records << " records skipped at load)";
    out << "\n";

    if (failed == 0) return kExitOk;
    if (failed == encounters.size()) return kExitFatal;
    return kExitPartial;
}

int run_record(RunConfig cfg, std::ostream& out, std::ostream& err) {
    cfg.persist_fixtures = true;
    if (cfg.backend == "replay") cfg.backend = "http";   // recording a replay is a no-op
    return run_extract(cfg, out, err);
}

namespace {

// Accepts prediction records ({encounter_id, orders}) and gold-format records
// ({id, expected_orders}), so a gold file evaluates cleanly against itself.
std::map<std::string, std::vector<MedicalOrder>> load_predictions(
    const std::filesystem::path& path) {
    json doc = read_json_file(path);
    if (!doc.is_array()) throw MalformedRecordError(path.string() + ": expected a JSON array");

    std::map<std::string, std::vector<MedicalOrder>> result;
    for (const auto& record : doc) {
        if (!record.is_object())
            throw MalformedRecordError(path.string() + ": prediction record is not an object");
        std::string id;
        if (record.contains("encounter_id") && record.at("encounter_id").is_string()) {
            id = record.at("encounter_id").get<std::string>();
        } else if (record.contains("id") && record.at("id").is_string()) {
            id = record.at("id").get<std::string>();
        } else {
            throw MalformedRecordError(path.string() + ": prediction record missing encounter_id");
        }
        const char* key = record.contains("orders") ? "orders" : "expected_orders";
        std::vector<MedicalOrder> orders;
        if (record.contains(key)) {
            if (!record.at(key).is_array())
                throw MalformedRecordError(path.string() + ": orders for \"" + id +
                                           "\" is not an array");
            for (const auto& raw : record.at(key)) {
                SchemaCheck check = validate_order_schema(raw);
                if (!check.ok()) {
                    std::string details;
                    for (const auto& v : check.violations) {
                        if (!details.empty()) details += "; ";
                        details += v.to_string();
                    }
                    throw MalformedRecordError(path.string() + ": bad order for \"" + id +
                                               "\": " + details);
                }
                orders.push_back(std::move(*check.order));
            }
        }
        if (!result.emplace(id, std::move(orders)).second)
            throw MalformedRecordError(path.string() + ": duplicate encounter id \"" + id + "\"");
    }
    return result;
}

}  // namespace

int run_evaluate(const EvalConfig& cfg, std::ostream& out, std::ostream& err) {
    Split split = split_from_string(cfg.split).value_or(Split::custom);

    LoadedDataset gold;
    std::map<std::string, std::vector<MedicalOrder>> predictions;
    try {
        LoadOptions load_opts;
        load_opts.strict = cfg.strict;
        gold = load_dataset(cfg.gold, split, load_opts);
        predictions = load_predictions(cfg.predictions);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    for (const auto& message : gold.stats.errors) err << "warning: " << message << "\n";

    std::set<std::string> gold_ids;
    for (const auto& e : gold.encounters) gold_ids.insert(e.id);
    std::vector<std::string> unknown;
    for (const auto& [id, orders] : predictions) {
        if (!gold_ids.count(id)) unknown.push_back(id);
    }
    if (!unknown.empty()) {
        err << "error: predictions reference encounter ids missing from gold:";
        for (const auto& id : unknown) err << " " << id;
        err << "\n";
        return kExitFatal;
    }

    std::sort(gold.encounters.begin(), gold.encounters.end(),
              [](const Encounter& a, const Encounter& b) { return a.id < b.id; });
    std::vector<metrics::ScoredEncounter> scores;
    scores.reserve(gold.encounters.size());
    static const std::vector<MedicalOrder> kNoOrders;
    for (const auto& encounter : gold.encounters) {
        auto it = predictions.find(encounter.id);
        const auto& predicted = it == predictions.end() ? kNoOrders : it->second;
        const auto& expected = encounter.gold_orders ? *encounter.gold_orders : kNoOrders;
        scores.push_back({encounter.id, metrics::score_encounter(predicted, expected, cfg.align)});
    }

    if (scores.empty()) {
        err << "error: gold dataset is empty\n";
        return kExitFatal;
    }
    metrics::CorpusReport report = metrics::aggregate(scores, cfg.aggregate);
    try {
        if (!cfg.report_path.empty())
            write_text_file(cfg.report_path, metrics::report_to_json(report).dump(2) + "\n");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }

    out << "encounters: " << scores.size() << "\n";
    out << metrics::format_report_row(report) << "\n";
    return kExitOk;
}

int run_report(const std::string& report_path, std::ostream& out, std::ostream& err) {
    try {
        metrics::CorpusReport report = metrics::report_from_json(read_json_file(report_path));
        out << metrics::format_report_table(report);
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
}

}  // namespace orderpipe::cli
