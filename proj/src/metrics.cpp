#include "orderpipe/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace orderpipe::metrics {

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double rouge1_f1(std::string_view pred, std::string_view ref) {
    auto pred_tokens = tokenize(pred);
    auto ref_tokens = tokenize(ref);
    if (pred_tokens.empty() && ref_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || ref_tokens.empty()) return 0.0;

    std::unordered_map<std::string, int> counts;
    for (const auto& t : pred_tokens) ++counts[t];
    long long overlap = 0;
    for (const auto& t : ref_tokens) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(ref_tokens.size());
    return 2.0 * precision * recall / (precision + recall);
}

double multilabel_f1(const std::set<int>& pred, const std::set<int>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    size_t common = 0;
    for (int x : pred) common += gold.count(x);
    return 2.0 * static_cast<double>(common) / static_cast<double>(pred.size() + gold.size());
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

namespace {

// Memoized best total weight matching preds i.. against golds outside `used`.
class AssignmentSolver {
public:
    AssignmentSolver(const std::vector<std::vector<double>>& weights, int n_gold)
        : weights_(weights), n_pred_(static_cast<int>(weights.size())), n_gold_(n_gold),
          memo_(weights.size() + 1) {}

    double best(int i, uint64_t used) {
        if (i == n_pred_) return 0.0;
        auto& level = memo_[static_cast<size_t>(i)];
        auto it = level.find(used);
        if (it != level.end()) return it->second;
        double value = best(i + 1, used);
        for (int g = 0; g < n_gold_; ++g) {
            if (used >> g & 1) continue;
            double w = weights_[static_cast<size_t>(i)][static_cast<size_t>(g)];
            if (w <= 0.0) continue;
            value = std::max(value, w + best(i + 1, used | (uint64_t{1} << g)));
        }
        level.emplace(used, value);
        return value;
    }

private:
    const std::vector<std::vector<double>>& weights_;
    int n_pred_;
    int n_gold_;
    std::vector<std::unordered_map<uint64_t, double>> memo_;
};

}  // namespace

Alignment align_orders(const std::vector<MedicalOrder>& pred,
                       const std::vector<MedicalOrder>& gold, const AlignOptions& opts) {
    const int n_pred = static_cast<int>(pred.size());
    const int n_gold = static_cast<int>(gold.size());
    if (n_gold > 62) throw std::invalid_argument("align_orders: gold list too large");

    std::vector<std::vector<double>> weights(static_cast<size_t>(n_pred),
                                             std::vector<double>(static_cast<size_t>(n_gold), 0.0));
    for (int i = 0; i < n_pred; ++i) {
        for (int g = 0; g < n_gold; ++g) {
            if (opts.require_type_match && pred[i].order_type != gold[g].order_type) continue;
            weights[i][g] = rouge1_f1(pred[i].description, gold[g].description);
        }
    }

    AssignmentSolver solver(weights, n_gold);
    Alignment alignment;
    uint64_t used = 0;

    // Commit pairs greedily while preserving the optimal total: yields the
    // lexicographically smallest (pred, gold) pair list among maximum-weight
    // matchings. The equality test is safe because both sides evaluate the
    // identical float expression.
    for (int i = 0; i < n_pred; ++i) {
        double target = solver.best(i, used);
        bool matched = false;
        for (int g = 0; g < n_gold && !matched; ++g) {
            if (used >> g & 1) continue;
            double w = weights[static_cast<size_t>(i)][static_cast<size_t>(g)];
            if (w <= 0.0) continue;
            if (w + solver.best(i + 1, used | (uint64_t{1} << g)) == target) {
                alignment.pairs.emplace_back(i, g);
                used |= uint64_t{1} << g;
                matched = true;
            }
        }
        if (!matched) alignment.unmatched_pred.push_back(i);
    }
    for (int g = 0; g < n_gold; ++g) {
        if (!(used >> g & 1)) alignment.unmatched_gold.push_back(g);
    }
    return alignment;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

EncounterScore score_encounter(const std::vector<MedicalOrder>& pred,
                               const std::vector<MedicalOrder>& gold, const AlignOptions& opts) {
    EncounterScore score;
    score.n_pred = static_cast<int>(pred.size());
    score.n_gold = static_cast<int>(gold.size());

    if (pred.empty() && gold.empty()) {
        score.description_rouge1 = 1.0;
        score.reason_rouge1 = 1.0;
        score.provenance_f1 = 1.0;
        return score;
    }

    Alignment alignment = align_orders(pred, gold, opts);
    const double denom = static_cast<double>(std::max(score.n_pred, score.n_gold));

    double description_sum = 0.0;
    double reason_sum = 0.0;
    double provenance_sum = 0.0;
    for (auto [p, g] : alignment.pairs) {
        description_sum += rouge1_f1(pred[static_cast<size_t>(p)].description,
                                     gold[static_cast<size_t>(g)].description);
        reason_sum += rouge1_f1(pred[static_cast<size_t>(p)].reason,
                                gold[static_cast<size_t>(g)].reason);
        provenance_sum += multilabel_f1(
            std::set<int>(pred[static_cast<size_t>(p)].provenance.begin(),
                          pred[static_cast<size_t>(p)].provenance.end()),
            std::set<int>(gold[static_cast<size_t>(g)].provenance.begin(),
                          gold[static_cast<size_t>(g)].provenance.end()));
        if (pred[static_cast<size_t>(p)].order_type == gold[static_cast<size_t>(g)].order_type)
            ++score.ordertype_tp;
    }
    score.description_rouge1 = description_sum / denom;
    score.reason_rouge1 = reason_sum / denom;
    score.provenance_f1 = provenance_sum / denom;
    score.ordertype_fp = score.n_pred - score.ordertype_tp;
    score.ordertype_fn = score.n_gold - score.ordertype_tp;
    return score;
}

double average_of(double description_rouge1, double reason_rouge1, double ordertype_strict_f1,
                  double provenance_multilabel_f1) {
    return (description_rouge1 + reason_rouge1 + ordertype_strict_f1 + provenance_multilabel_f1) /
           4.0;
}

namespace {

double f1_from_counts(long long tp, long long fp, long long fn) {
    long long denom = 2 * tp + fp + fn;
    if (denom == 0) return 1.0;   // nothing predicted, nothing expected
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

CorpusReport aggregate(const std::vector<ScoredEncounter>& scores, const AggregateOptions& opts) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");

    CorpusReport report;
    report.encounters = scores;

    double description_sum = 0.0;
    double reason_sum = 0.0;
    double provenance_sum = 0.0;
    double macro_type_sum = 0.0;
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    for (const auto& [id, s] : scores) {
        description_sum += s.description_rouge1;
        reason_sum += s.reason_rouge1;
        provenance_sum += s.provenance_f1;
        macro_type_sum += f1_from_counts(s.ordertype_tp, s.ordertype_fp, s.ordertype_fn);
        tp += s.ordertype_tp;
        fp += s.ordertype_fp;
        fn += s.ordertype_fn;
    }
    const double n = static_cast<double>(scores.size());
    report.description_rouge1 = description_sum / n;
    report.reason_rouge1 = reason_sum / n;
    report.provenance_multilabel_f1 = provenance_sum / n;
    report.ordertype_strict_f1 = opts.micro_ordertype ? f1_from_counts(tp, fp, fn)
                                                      : macro_type_sum / n;
    report.average_score = average_of(report.description_rouge1, report.reason_rouge1,
                                      report.ordertype_strict_f1,
                                      report.provenance_multilabel_f1);
    return report;
}

// ---------------------------------------------------------------------------
// Report document
// ---------------------------------------------------------------------------

nlohmann::json report_to_json(const CorpusReport& report) {
    nlohmann::json encounters = nlohmann::json::array();
    for (const auto& [id, s] : report.encounters) {
        encounters.push_back({{"id", id},
                              {"description_rouge1", s.description_rouge1},
                              {"reason_rouge1", s.reason_rouge1},
                              {"provenance_f1", s.provenance_f1},
                              {"ordertype_tp", s.ordertype_tp},
                              {"ordertype_fp", s.ordertype_fp},
                              {"ordertype_fn", s.ordertype_fn},
                              {"n_pred", s.n_pred},
                              {"n_gold", s.n_gold}});
    }
    return nlohmann::json{{"metrics",
                           {{"description_rouge1", report.description_rouge1},
                            {"reason_rouge1", report.reason_rouge1},
                            {"ordertype_strict_f1", report.ordertype_strict_f1},
                            {"provenance_multilabel_f1", report.provenance_multilabel_f1},
                            {"average_score", report.average_score}}},
                          {"encounters", std::move(encounters)}};
}

CorpusReport report_from_json(const nlohmann::json& doc) {
    CorpusReport report;
    const auto& metrics = doc.at("metrics");
    report.description_rouge1 = metrics.at("description_rouge1").get<double>();
    report.reason_rouge1 = metrics.at("reason_rouge1").get<double>();
    report.ordertype_strict_f1 = metrics.at("ordertype_strict_f1").get<double>();
    report.provenance_multilabel_f1 = metrics.at("provenance_multilabel_f1").get<double>();
    report.average_score = metrics.at("average_score").get<double>();
    if (doc.contains("encounters")) {
        for (const auto& e : doc.at("encounters")) {
            ScoredEncounter scored;
            scored.id = e.value("id", "");
            scored.score.description_rouge1 = e.value("description_rouge1", 0.0);
            scored.score.reason_rouge1 = e.value("reason_rouge1", 0.0);
            scored.score.provenance_f1 = e.value("provenance_f1", 0.0);
            scored.score.ordertype_tp = e.value("ordertype_tp", 0);
            scored.score.ordertype_fp = e.value("ordertype_fp", 0);
            scored.score.ordertype_fn = e.value("ordertype_fn", 0);
            scored.score.n_pred = e.value("n_pred", 0);
            scored.score.n_gold = e.value("n_gold", 0);
            report.encounters.push_back(std::move(scored));
        }
    }
    return report;
}

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

std::string format_report_row(const CorpusReport& report) {
    std::string header =
        "Description (Rouge1_F1) | Reason (Rouge1_F1) | Order Type (Strict_F1) | "
        "Provenance (MultiLabel_F1) | Avg. Score";
    std::string values = fixed3(report.description_rouge1) + " | " +
                         fixed3(report.reason_rouge1) + " | " +
                         fixed3(report.ordertype_strict_f1) + " | " +
                         fixed3(report.provenance_multilabel_f1) + " | " +
                         fixed3(report.average_score);
    return header + "\n" + values;
}

std::string format_report_table(const CorpusReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-24s %5s %5s %9s %9s %9s %7s\n", "encounter", "pred",
                  "gold", "desc-r1", "reason-r1", "prov-f1", "type-tp");
    out += line;
    for (const auto& [id, s] : report.encounters) {
        std::snprintf(line, sizeof(line), "%-24s %5d %5d %9.3f %9.3f %9.3f %7d\n",
                      id.substr(0, 24).c_str(), s.n_pred, s.n_gold, s.description_rouge1,
                      s.reason_rouge1, s.provenance_f1, s.ordertype_tp);
        out += line;
    }
    out += "\n" + format_report_row(report) + "\n";
    return out;
}

}  // namespace orderpipe::metrics
