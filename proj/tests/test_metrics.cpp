#include <doctest.h>

#include <cmath>
#include <random>

#include "orderpipe/metrics.hpp"

using namespace orderpipe;
using namespace orderpipe::metrics;

TEST_CASE("tokenize") {
    CHECK(tokenize("Lasix 40 milligrams a day") ==
          std::vector<std::string>{"lasix", "40", "milligrams", "a", "day"});
    CHECK(tokenize("hemoglobin a1c") == std::vector<std::string>{"hemoglobin", "a1c"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("x-ray, stat!") == std::vector<std::string>{"x", "ray", "stat"});
    CHECK(tokenize("don't") == std::vector<std::string>{"don", "t"});
}

TEST_CASE("rouge1_f1 basics") {
    CHECK(rouge1_f1("hemoglobin a1c", "hemoglobin a1c") == doctest::Approx(1.0));
    // overlap 2 (lasix, 40); P=2/4, R=2/5 -> 4/9
    CHECK(rouge1_f1("lasix 40 mg daily", "lasix 40 milligrams a day") ==
          doctest::Approx(4.0 / 9.0).epsilon(1e-12));
    CHECK(rouge1_f1("", "hemoglobin a1c") == 0.0);
    CHECK(rouge1_f1("hemoglobin a1c", "") == 0.0);
    CHECK(rouge1_f1("", "") == 1.0);
    CHECK(rouge1_f1("urinalysis", "urine analysis") == 0.0);
    // multiset counting: "a a a" vs "a" -> overlap 1, P=1/3, R=1 -> 0.5
    CHECK(rouge1_f1("a a a", "a") == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rouge1_f1 symmetry and self-identity properties") {
    static const char* samples[] = {
        "lasix 40 milligrams a day", "hemoglobin a1c", "chest x-ray", "follow up in two weeks",
        "", "mri of the brain", "a a b", "b a a c"};
    for (const char* a : samples) {
        for (const char* b : samples) {
            double ab = rouge1_f1(a, b);
            double ba = rouge1_f1(b, a);
            CHECK(ab == ba);
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
        }
        if (*a) CHECK(rouge1_f1(a, a) == 1.0);
    }
}

TEST_CASE("multilabel_f1") {
    CHECK(multilabel_f1({126, 127}, {126, 127}) == 1.0);
    CHECK(multilabel_f1({126}, {126, 127}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(multilabel_f1({5}, {9}) == 0.0);
    CHECK(multilabel_f1({}, {}) == 1.0);
    CHECK(multilabel_f1({1}, {}) == 0.0);
    CHECK(multilabel_f1({1, 2, 3, 4, 5}, {2, 3, 4, 5, 6}) == doctest::Approx(0.8).epsilon(1e-12));
}

namespace {

MedicalOrder order(OrderType type, std::string description, std::vector<int> provenance = {0},
                   std::string reason = "") {
    MedicalOrder o;
    o.order_type = type;
    o.description = std::move(description);
    o.reason = std::move(reason);
    o.provenance = std::move(provenance);
    return o;
}

}  // namespace

TEST_CASE("align_orders identity") {
    std::vector<MedicalOrder> orders = {order(OrderType::medication, "lasix 40 milligrams a day"),
                                        order(OrderType::lab, "hemoglobin a1c")};
    Alignment a = align_orders(orders, orders);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(a.pairs[1] == std::pair<int, int>{1, 1});
    CHECK(a.unmatched_pred.empty());
    CHECK(a.unmatched_gold.empty());
}

TEST_CASE("align_orders discards zero-weight pairs") {
    std::vector<MedicalOrder> pred = {order(OrderType::lab, "urinalysis")};
    std::vector<MedicalOrder> gold = {order(OrderType::lab, "complete blood count")};
    Alignment a = align_orders(pred, gold);
    CHECK(a.pairs.empty());
    CHECK(a.unmatched_pred == std::vector<int>{0});
    CHECK(a.unmatched_gold == std::vector<int>{0});
}

TEST_CASE("align_orders picks the crossing assignment when heavier") {
    // pred0 ~ gold1, pred1 ~ gold0
    std::vector<MedicalOrder> pred = {order(OrderType::lab, "hemoglobin a1c"),
                                      order(OrderType::medication, "lasix 40 milligrams")};
    std::vector<MedicalOrder> gold = {order(OrderType::medication, "lasix 40 milligrams a day"),
                                      order(OrderType::lab, "hemoglobin a1c today")};
    Alignment a = align_orders(pred, gold);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 1});
    CHECK(a.pairs[1] == std::pair<int, int>{1, 0});
}

TEST_CASE("align_orders deterministic tie-break prefers low indices") {
    // both golds identical: pred0 must take gold0
    std::vector<MedicalOrder> pred = {order(OrderType::lab, "cbc"), order(OrderType::lab, "cbc")};
    std::vector<MedicalOrder> gold = {order(OrderType::lab, "cbc"), order(OrderType::lab, "cbc")};
    Alignment a = align_orders(pred, gold);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(a.pairs[1] == std::pair<int, int>{1, 1});

    // one pred, two identical golds: smallest gold index wins
    std::vector<MedicalOrder> single = {order(OrderType::lab, "cbc")};
    Alignment b = align_orders(single, gold);
    REQUIRE(b.pairs.size() == 1);
    CHECK(b.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(b.unmatched_gold == std::vector<int>{1});
}

TEST_CASE("align_orders respects require_type_match") {
    std::vector<MedicalOrder> pred = {order(OrderType::lab, "chest x-ray")};
    std::vector<MedicalOrder> gold = {order(OrderType::imaging, "chest x-ray")};
    CHECK(align_orders(pred, gold).pairs.size() == 1);
    AlignOptions typed;
    typed.require_type_match = true;
    CHECK(align_orders(pred, gold, typed).pairs.empty());
}

// brute-force oracle: recursively try every assignment
namespace {

double brute_force_best(const std::vector<std::vector<double>>& w, size_t i,
                        std::vector<bool>& used) {
    if (i == w.size()) return 0.0;
    double best = brute_force_best(w, i + 1, used);   // leave pred i unmatched
    for (size_t g = 0; g < used.size(); ++g) {
        if (used[g] || w[i][g] <= 0.0) continue;
        used[g] = true;
        best = std::max(best, w[i][g] + brute_force_best(w, i + 1, used));
        used[g] = false;
    }
    return best;
}

double total_weight(const Alignment& a, const std::vector<std::vector<double>>& w) {
    double total = 0.0;
    for (auto [p, g] : a.pairs) total += w[static_cast<size_t>(p)][static_cast<size_t>(g)];
    return total;
}

}  // namespace

TEST_CASE("align_orders matches the brute-force optimum on random instances") {
    static const char* vocab[] = {"blood", "test", "chest", "x", "ray", "panel", "count", "mri"};
    std::mt19937 rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        auto make_side = [&](int n) {
            std::vector<MedicalOrder> side;
            for (int i = 0; i < n; ++i) {
                std::string description;
                int len = 1 + static_cast<int>(rng() % 4);
                for (int w = 0; w < len; ++w) {
                    if (w) description += ' ';
                    description += vocab[rng() % 8];
                }
                side.push_back(order(static_cast<OrderType>(rng() % 4), description));
            }
            return side;
        };
        auto pred = make_side(static_cast<int>(rng() % 6));
        auto gold = make_side(static_cast<int>(rng() % 6));

        std::vector<std::vector<double>> w(pred.size(), std::vector<double>(gold.size(), 0.0));
        for (size_t i = 0; i < pred.size(); ++i) {
            for (size_t g = 0; g < gold.size(); ++g) {
                w[i][g] = rouge1_f1(pred[i].description, gold[g].description);
            }
        }
        std::vector<bool> used(gold.size(), false);
        double expected = brute_force_best(w, 0, used);

        Alignment a = align_orders(pred, gold);
        CHECK(std::abs(total_weight(a, w) - expected) < 1e-12);
    }
}

TEST_CASE("score_encounter identity gives perfect components") {
    std::vector<MedicalOrder> orders = {
        order(OrderType::medication, "lasix 40 milligrams a day", {126, 127},
              "shortness of breath acute heart failure exacerbation"),
        order(OrderType::lab, "hemoglobin a1c", {138}, "type i diabetes"),
    };
    EncounterScore s = score_encounter(orders, orders);
    CHECK(s.description_rouge1 == doctest::Approx(1.0));
    CHECK(s.reason_rouge1 == doctest::Approx(1.0));
    CHECK(s.provenance_f1 == doctest::Approx(1.0));
    CHECK(s.ordertype_tp == 2);
    CHECK(s.ordertype_fp == 0);
    CHECK(s.ordertype_fn == 0);
}

TEST_CASE("score_encounter penalizes a flipped order type only in strict counts") {
    std::vector<MedicalOrder> gold = {
        order(OrderType::medication, "lasix 40 milligrams a day", {126, 127}),
        order(OrderType::lab, "hemoglobin a1c", {138}),
    };
    std::vector<MedicalOrder> pred = gold;
    pred[1].order_type = OrderType::imaging;
    EncounterScore s = score_encounter(pred, gold);
    CHECK(s.description_rouge1 == doctest::Approx(1.0));
    CHECK(s.ordertype_tp == 1);
    CHECK(s.ordertype_fp == 1);
    CHECK(s.ordertype_fn == 1);
}

TEST_CASE("score_encounter with empty predictions") {
    std::vector<MedicalOrder> gold = {order(OrderType::medication, "lasix", {126}),
                                      order(OrderType::lab, "a1c", {138})};
    EncounterScore s = score_encounter({}, gold);
    CHECK(s.description_rouge1 == 0.0);
    CHECK(s.reason_rouge1 == 0.0);
    CHECK(s.provenance_f1 == 0.0);
    CHECK(s.ordertype_tp == 0);
    CHECK(s.ordertype_fn == 2);
}

TEST_CASE("score_encounter empty-vs-empty is perfect") {
    EncounterScore s = score_encounter({}, {});
    CHECK(s.description_rouge1 == 1.0);
    CHECK(s.reason_rouge1 == 1.0);
    CHECK(s.provenance_f1 == 1.0);
    CHECK(s.ordertype_tp == 0);
}

TEST_CASE("score_encounter self-identity property") {
    static const char* vocab[] = {"lasix", "aspirin", "panel", "xray", "brain", "daily"};
    std::mt19937 rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<MedicalOrder> orders;
        int n = static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) {
            std::string description = vocab[rng() % 6];
            description += " ";
            description += vocab[rng() % 6];
            orders.push_back(order(static_cast<OrderType>(rng() % 4), description,
                                   {static_cast<int>(rng() % 20)}, vocab[rng() % 6]));
        }
        EncounterScore s = score_encounter(orders, orders);
        CHECK(s.description_rouge1 == doctest::Approx(1.0));
        CHECK(s.reason_rouge1 == doctest::Approx(1.0));
        CHECK(s.provenance_f1 == doctest::Approx(1.0));
        CHECK(s.ordertype_tp == n);
    }
}

TEST_CASE("aggregate macro/micro behaviour and the average") {
    std::vector<ScoredEncounter> scores;
    EncounterScore a;
    a.description_rouge1 = 0.5;
    a.reason_rouge1 = 0.25;
    a.provenance_f1 = 1.0;
    a.ordertype_tp = 1;
    a.ordertype_fp = 1;
    a.ordertype_fn = 0;
    a.n_pred = 2;
    a.n_gold = 1;
    EncounterScore b;
    b.description_rouge1 = 1.0;
    b.reason_rouge1 = 0.75;
    b.provenance_f1 = 0.0;
    b.ordertype_tp = 2;
    b.ordertype_fp = 0;
    b.ordertype_fn = 2;
    b.n_pred = 2;
    b.n_gold = 4;
    scores.push_back({"e1", a});
    scores.push_back({"e2", b});

    CorpusReport report = aggregate(scores);
    CHECK(report.description_rouge1 == doctest::Approx(0.75));
    CHECK(report.reason_rouge1 == doctest::Approx(0.5));
    CHECK(report.provenance_multilabel_f1 == doctest::Approx(0.5));
    // pooled: tp=3, fp=1, fn=2 -> 2*3/(6+1+2) = 6/9
    CHECK(report.ordertype_strict_f1 == doctest::Approx(6.0 / 9.0).epsilon(1e-12));
    CHECK(report.average_score ==
          doctest::Approx(average_of(0.75, 0.5, 6.0 / 9.0, 0.5)).epsilon(1e-12));

    AggregateOptions macro;
    macro.micro_ordertype = false;
    CorpusReport macro_report = aggregate(scores, macro);
    // per-encounter: 2/3 and 2/3 -> 2/3
    CHECK(macro_report.ordertype_strict_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("average_of reproduces the reference summary rows") {
    CHECK(average_of(0.516, 0.318, 0.602, 0.307) == doctest::Approx(0.436).epsilon(0.002));
    CHECK(average_of(0.591, 0.342, 0.703, 0.561) == doctest::Approx(0.549).epsilon(0.002));
    CHECK(average_of(0.09, 0.06, 0.169, 0.123) == doctest::Approx(0.111).epsilon(0.005));
}

TEST_CASE("report json round-trip and row format") {
    std::vector<ScoredEncounter> scores;
    EncounterScore s;
    s.description_rouge1 = 0.516;
    s.reason_rouge1 = 0.318;
    s.provenance_f1 = 0.307;
    s.ordertype_tp = 3;
    s.ordertype_fp = 2;
    s.ordertype_fn = 2;
    s.n_pred = 5;
    s.n_gold = 5;
    scores.push_back({"e1", s});
    CorpusReport report = aggregate(scores);

    CorpusReport back = report_from_json(report_to_json(report));
    CHECK(back.description_rouge1 == doctest::Approx(report.description_rouge1));
    CHECK(back.average_score == doctest::Approx(report.average_score));
    REQUIRE(back.encounters.size() == 1);
    CHECK(back.encounters[0].id == "e1");

    std::string row = format_report_row(report);
    CHECK(row.find("Description (Rouge1_F1)") != std::string::npos);
    CHECK(row.find("Reason (Rouge1_F1)") != std::string::npos);
    CHECK(row.find("Order Type (Strict_F1)") != std::string::npos);
    CHECK(row.find("Provenance (MultiLabel_F1)") != std::string::npos);
    CHECK(row.find("Avg. Score") != std::string::npos);
    CHECK(row.find("0.516") != std::string::npos);
}
