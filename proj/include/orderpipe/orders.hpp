#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace orderpipe {

struct Transcript;

/// The four order categories. Enum order is the canonical tie-break order
/// used when sorting post-processed orders.
enum class OrderType { medication, lab, imaging, followup };

constexpr std::array<OrderType, 4> kAllOrderTypes = {
    OrderType::medication, OrderType::lab, OrderType::imaging, OrderType::followup};

/// Canonical lowercase label ("medication", "lab", "imaging", "followup").
std::string_view order_type_label(OrderType t);

/// Case-, punctuation- and whitespace-insensitive lookup of a raw type label.
/// Returns nullopt for anything outside the known alias table ("unknown" is a
/// value, not an error). "referral" maps to followup.
std::optional<OrderType> normalize_order_type(std::string_view raw);

struct MedicalOrder {
    OrderType order_type = OrderType::medication;
    std::string description;
    std::string reason;                // may be empty
    std::vector<int> provenance;       // turn indices

    bool operator==(const MedicalOrder&) const = default;
};

/// Caps applied by postprocess_orders. All caps must be >= 1.
struct PostprocessConfig {
    int max_words = 20;
    int max_orders = 10;
    int max_provenance = 5;
    bool require_doctor_provenance = true;
};

// ---------------------------------------------------------------------------
// Schema validation
// ---------------------------------------------------------------------------

enum class SchemaViolationKind { missing_field, bad_type, unknown_order_type, empty_provenance };

std::string_view schema_violation_label(SchemaViolationKind k);

struct SchemaViolation {
    SchemaViolationKind kind;
    std::string field;    // offending field ("" for whole-element problems)
    std::string detail;

    std::string to_string() const;
};

struct SchemaCheck {
    std::optional<MedicalOrder> order;        // set iff violations empty
    std::vector<SchemaViolation> violations;

    bool ok() const { return order.has_value(); }
};

/// Validates one raw structured value against the order schema. Accepts both
/// the `order_type` and `order type` key spellings and coerces provenance
/// elements to integers (numbers or numeric strings).
SchemaCheck validate_order_schema(const nlohmann::json& raw);

// ---------------------------------------------------------------------------
// Deterministic post-processing
// ---------------------------------------------------------------------------

/// Keeps the first `max_words` whitespace-separated words, rejoined with
/// single spaces. Strings within the limit come back whitespace-normalized.
std::string truncate_words(std::string_view s, int max_words);

/// Number of whitespace-separated words.
int word_count(std::string_view s);

/// Lowercased, whitespace-normalized copy; the duplicate-detection key for
/// descriptions.
std::string fold_text(std::string_view s);

enum class RepairKind {
    provenance_filtered,
    order_dropped,
    description_truncated,
    reason_truncated,
    duplicate_merged,
    provenance_capped,
    orders_capped,
};

std::string_view repair_kind_label(RepairKind k);

struct Repair {
    RepairKind kind;
    int order_index;      // index into the input list (-1 for list-level repairs)
    std::string detail;
};

using RepairLog = std::vector<Repair>;

struct PostprocessResult {
    std::vector<MedicalOrder> orders;
    RepairLog log;
};

/// Applies, in order: provenance filtering (existing turns, and doctor turns
/// when required), word-limit truncation, duplicate merging, provenance
/// sort/cap, ordering by minimum provenance, and the order-count cap.
/// Idempotent; every mutation is appended to the repair log.
PostprocessResult postprocess_orders(std::vector<MedicalOrder> raw, const Transcript& t,
                                     const PostprocessConfig& cfg = {});

// ---------------------------------------------------------------------------
// Canonical JSON form (the emitted prediction schema)
// ---------------------------------------------------------------------------

nlohmann::json order_to_json(const MedicalOrder& order);

nlohmann::json orders_to_json(const std::vector<MedicalOrder>& orders);

}  // namespace orderpipe
