#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "orderpipe/cli.hpp"
#include "support/fixtures.hpp"

using namespace orderpipe;
using namespace orderpipe::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string example_dataset_path() {
    return (testing::test_data_dir() / "appendix_example.json").string();
}

RunConfig scripted_run(const testing::TempDir& dir, const std::vector<std::string>& replies) {
    json script = json::array();
    for (const auto& r : replies) script.push_back(r);
    testing::write_file(dir.file("script.json"), script.dump());

    RunConfig cfg;
    cfg.input = example_dataset_path();
    cfg.output = dir.file("predictions.json").string();
    cfg.backend = "scripted";
    cfg.script_path = dir.file("script.json").string();
    return cfg;
}

}  // namespace

TEST_CASE("extract with a scripted backend writes the predictions file") {
    testing::TempDir dir;
    RunConfig cfg = scripted_run(dir, {testing::example_reply()});
    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_extract(cfg, out, err) == kExitOk);

    json predictions = json::parse(testing::read_file(cfg.output));
    REQUIRE(predictions.size() == 1);
    CHECK(predictions[0]["encounter_id"] == "appendix-example");
    CHECK(predictions[0]["strategy"] == "oneshot");
    REQUIRE(predictions[0]["orders"].size() == 2);
    CHECK(predictions[0]["orders"][0]["description"] == "lasix 40 milligrams a day");
    CHECK(predictions[0]["orders"][1]["description"] == "hemoglobin a1c");
    CHECK(predictions[0]["diagnostics"]["llm_calls"] == 1);
    CHECK_FALSE(fs::exists(cfg.output + ".failures.json"));
    CHECK(out.str().find("extracted 2 orders from 1/1 encounters") != std::string::npos);
}

TEST_CASE("extract over an empty dataset exits cleanly") {
    testing::TempDir dir;
    testing::write_file(dir.file("empty.json"), "[]");
    RunConfig cfg;
    cfg.input = dir.file("empty.json").string();
    cfg.output = dir.file("predictions.json").string();
    cfg.backend = "scripted";
    json script = json::array({"[]"});
    testing::write_file(dir.file("script.json"), script.dump());
    cfg.script_path = dir.file("script.json").string();

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_extract(cfg, out, err) == kExitOk);
    CHECK(json::parse(testing::read_file(cfg.output)).empty());
}

TEST_CASE("extract with an unreachable http backend exits fatally") {
    testing::TempDir dir;
    RunConfig cfg;
    cfg.input = example_dataset_path();
    cfg.output = dir.file("predictions.json").string();
    cfg.backend = "http";
    cfg.base_url = "http://127.0.0.1:1/v1";
    cfg.params.max_tokens = 16;
    cfg.retry.base_backoff = std::chrono::milliseconds(0);

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_extract(cfg, out, err) == kExitFatal);
    CHECK(err.str().find("FAILED") != std::string::npos);
}

TEST_CASE("extract partial failure keeps completed work and the sidecar") {
    testing::TempDir dir;
    // two encounters; the scripted reply list runs dry on the second
    json dataset = json::array();
    for (int i = 0; i < 2; ++i) {
        dataset.push_back({{"id", "enc-" + std::to_string(i)},
                           {"transcript", json::array({{{"speaker", "doctor"},
                                                        {"text", "get a chest x-ray"}}})}});
    }
    testing::write_file(dir.file("two.json"), dataset.dump());

    RunConfig cfg;
    cfg.input = dir.file("two.json").string();
    cfg.output = dir.file("predictions.json").string();
    cfg.backend = "scripted";
    json script = json::array({R"([{"order type": "imaging", "description": "chest x-ray", "provenance": [0]}])"});
    testing::write_file(dir.file("script.json"), script.dump());
    cfg.script_path = dir.file("script.json").string();

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_extract(cfg, out, err) == kExitPartial);

    json predictions = json::parse(testing::read_file(cfg.output));
    REQUIRE(predictions.size() == 1);
    CHECK(predictions[0]["encounter_id"] == "enc-0");

    json failures = json::parse(testing::read_file(cfg.output + ".failures.json"));
    REQUIRE(failures.size() == 1);
    CHECK(failures[0]["encounter_id"] == "enc-1");
}

TEST_CASE("evaluate gold against itself is perfect") {
    testing::TempDir dir;
    EvalConfig cfg;
    cfg.predictions = example_dataset_path();   // gold-format accepted as predictions
    cfg.gold = example_dataset_path();
    cfg.report_path = dir.file("report.json").string();

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_evaluate(cfg, out, err) == kExitOk);
    json report = json::parse(testing::read_file(cfg.report_path));
    CHECK(report["metrics"]["description_rouge1"] == 1.0);
    CHECK(report["metrics"]["reason_rouge1"] == 1.0);
    CHECK(report["metrics"]["ordertype_strict_f1"] == 1.0);
    CHECK(report["metrics"]["provenance_multilabel_f1"] == 1.0);
    CHECK(report["metrics"]["average_score"] == 1.0);
    CHECK(out.str().find("1.000 | 1.000 | 1.000 | 1.000 | 1.000") != std::string::npos);
}

TEST_CASE("evaluate empty predictions against gold") {
    testing::TempDir dir;
    json predictions = json::array({{{"encounter_id", "appendix-example"},
                                     {"orders", json::array()}}});
    testing::write_file(dir.file("pred.json"), predictions.dump());

    EvalConfig cfg;
    cfg.predictions = dir.file("pred.json").string();
    cfg.gold = example_dataset_path();
    cfg.report_path = dir.file("report.json").string();

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_evaluate(cfg, out, err) == kExitOk);
    json report = json::parse(testing::read_file(cfg.report_path));
    CHECK(report["metrics"]["description_rouge1"] == 0.0);
    CHECK(report["metrics"]["reason_rouge1"] == 0.0);
    CHECK(report["metrics"]["ordertype_strict_f1"] == 0.0);
    CHECK(report["metrics"]["provenance_multilabel_f1"] == 0.0);
}

TEST_CASE("evaluate scores a dropped provenance turn as 2/3") {
    testing::TempDir dir;
    json lasix;
    lasix["order_type"] = "medication";
    lasix["description"] = "lasix 40 milligrams a day";
    lasix["reason"] = "shortness of breath acute heart failure exacerbation";
    lasix["provenance"] = json::array({126});   // 127 missing
    json a1c;
    a1c["order_type"] = "lab";
    a1c["description"] = "hemoglobin a1c";
    a1c["reason"] = "type i diabetes";
    a1c["provenance"] = json::array({138});
    json record;
    record["encounter_id"] = "appendix-example";
    record["orders"] = json::array({lasix, a1c});
    json predictions = json::array({record});
    testing::write_file(dir.file("pred.json"), predictions.dump());

    EvalConfig cfg;
    cfg.predictions = dir.file("pred.json").string();
    cfg.gold = example_dataset_path();
    cfg.report_path = dir.file("report.json").string();

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_evaluate(cfg, out, err) == kExitOk);
    json report = json::parse(testing::read_file(cfg.report_path));
    // mean over 2 orders: (2/3 + 1)/2 = 5/6
    double provenance = report["metrics"]["provenance_multilabel_f1"].get<double>();
    CHECK(provenance == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    double per_encounter =
        report["encounters"][0]["provenance_f1"].get<double>();
    CHECK(per_encounter == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("evaluate rejects predictions with unknown encounter ids") {
    testing::TempDir dir;
    json predictions =
        json::array({{{"encounter_id", "no-such-encounter"}, {"orders", json::array()}}});
    testing::write_file(dir.file("pred.json"), predictions.dump());

    EvalConfig cfg;
    cfg.predictions = dir.file("pred.json").string();
    cfg.gold = example_dataset_path();

    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_evaluate(cfg, out, err) == kExitFatal);
    CHECK(err.str().find("no-such-encounter") != std::string::npos);
}

TEST_CASE("record persists one fixture per call and replay reproduces bytes") {
    testing::TempDir dir;
    // two encounters, one-shot: exactly two fixtures expected
    json dataset = json::array();
    for (int i = 0; i < 2; ++i) {
        dataset.push_back({{"id", "enc-" + std::to_string(i)},
                           {"transcript", json::array({{{"speaker", "doctor"},
                                                        {"text", "order test " + std::to_string(i)}}})}});
    }
    testing::write_file(dir.file("data.json"), dataset.dump());

    RunConfig cfg;
    cfg.input = dir.file("data.json").string();
    cfg.output = dir.file("pred_record.json").string();
    cfg.backend = "scripted";
    json script = json::array({"[]", "[]"});
    testing::write_file(dir.file("script.json"), script.dump());
    cfg.script_path = dir.file("script.json").string();
    cfg.fixtures_dir = dir.file("fixtures").string();
    cfg.persist_fixtures = true;

    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(run_extract(cfg, out, err) == kExitOk);
    CHECK(FixtureStore(cfg.fixtures_dir, false).size() == 2);

    RunConfig replay = cfg;
    replay.backend = "replay";
    replay.persist_fixtures = false;
    replay.output = dir.file("pred_replay.json").string();
    REQUIRE(run_extract(replay, out, err) == kExitOk);
    CHECK(testing::read_file(cfg.output) == testing::read_file(replay.output));
}

TEST_CASE("report subcommand renders a saved document") {
    testing::TempDir dir;
    EvalConfig cfg;
    cfg.predictions = example_dataset_path();
    cfg.gold = example_dataset_path();
    cfg.report_path = dir.file("report.json").string();
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(run_evaluate(cfg, out, err) == kExitOk);

    std::ostringstream table;
    CHECK(run_report(cfg.report_path, table, err) == kExitOk);
    CHECK(table.str().find("appendix-example") != std::string::npos);
    CHECK(table.str().find("Avg. Score") != std::string::npos);

    CHECK(run_report(dir.file("missing.json").string(), table, err) == kExitFatal);
}
