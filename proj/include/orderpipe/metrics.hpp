#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderpipe/orders.hpp"

namespace orderpipe::metrics {

/// Lowercases and splits on any non-alphanumeric character, dropping empty
/// tokens. No stemming, no stopword removal.
std::vector<std::string> tokenize(std::string_view s);

/// Unigram F1 over token multisets. Both empty -> 1, exactly one empty -> 0.
double rouge1_f1(std::string_view pred, std::string_view ref);

/// 2|a∩b| / (|a|+|b|); both empty -> 1.
double multilabel_f1(const std::set<int>& pred, const std::set<int>& gold);

// ---------------------------------------------------------------------------
// Order alignment
// ---------------------------------------------------------------------------

struct Alignment {
    std::vector<std::pair<int, int>> pairs;   // (pred index, gold index)
    std::vector<int> unmatched_pred;
    std::vector<int> unmatched_gold;
};

struct AlignOptions {
    /// When set, pairs with differing order types get weight 0 (sensitivity
    /// analysis switch; off by default so type errors cost strict F1 instead).
    bool require_type_match = false;
};

/// Maximum-weight bipartite matching with weight = description rouge1_f1.
/// Zero-weight pairs are discarded. Exact for per-encounter sizes; ties are
/// broken toward the lexicographically smallest (pred, gold) pair list.
Alignment align_orders(const std::vector<MedicalOrder>& pred,
                       const std::vector<MedicalOrder>& gold, const AlignOptions& opts = {});

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct EncounterScore {
    double description_rouge1 = 0.0;
    double reason_rouge1 = 0.0;
    double provenance_f1 = 0.0;
    int ordertype_tp = 0;
    int ordertype_fp = 0;
    int ordertype_fn = 0;
    int n_pred = 0;
    int n_gold = 0;
};

/// Aligns, then averages pairwise metrics over max(n_pred, n_gold) so both
/// hallucinated and missed orders count as zeros. Type counts are strict:
/// a matched pair is a true positive only on exact type equality. An
/// empty-vs-empty encounter scores 1.0 on every fraction.
EncounterScore score_encounter(const std::vector<MedicalOrder>& pred,
                               const std::vector<MedicalOrder>& gold,
                               const AlignOptions& opts = {});

struct ScoredEncounter {
    std::string id;
    EncounterScore score;
};

struct CorpusReport {
    double description_rouge1 = 0.0;
    double reason_rouge1 = 0.0;
    double ordertype_strict_f1 = 0.0;
    double provenance_multilabel_f1 = 0.0;
    double average_score = 0.0;
    std::vector<ScoredEncounter> encounters;
};

struct AggregateOptions {
    /// Strict type F1 pooled over the corpus (micro) by default; macro
    /// averages the per-encounter F1 instead.
    bool micro_ordertype = true;
};

/// Arithmetic mean of the four headline metrics.
double average_of(double description_rouge1, double reason_rouge1, double ordertype_strict_f1,
                  double provenance_multilabel_f1);

/// Macro-averages the rouge/provenance metrics and pools type counts into a
/// micro strict F1. Throws std::invalid_argument on an empty score list.
CorpusReport aggregate(const std::vector<ScoredEncounter>& scores,
                       const AggregateOptions& opts = {});

// ---------------------------------------------------------------------------
// Report document
// ---------------------------------------------------------------------------

nlohmann::json report_to_json(const CorpusReport& report);
CorpusReport report_from_json(const nlohmann::json& doc);

/// Two lines, headline metric names and values, in the summary-row format.
std::string format_report_row(const CorpusReport& report);

/// Per-encounter table plus the summary row.
std::string format_report_table(const CorpusReport& report);

}  // namespace orderpipe::metrics
