#include "orderpipe/orders.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "orderpipe/transcript.hpp"

namespace orderpipe {

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// lowercase with all non-alphanumeric characters removed; the alias-table key
std::string alnum_fold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) words.emplace_back(s.substr(start, i - start));
    }
    return words;
}

std::string join_words(const std::vector<std::string>& words, size_t count) {
    std::string out;
    for (size_t i = 0; i < count && i < words.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::string join_ints(const std::vector<int>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

std::optional<int> coerce_int(const nlohmann::json& v) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_unsigned()) return static_cast<int>(v.get<unsigned long long>());
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d == std::floor(d)) return static_cast<int>(d);
        return std::nullopt;
    }
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        if (a == std::string::npos) return std::nullopt;
        int value = 0;
        auto [ptr, ec] = std::from_chars(s.data() + a, s.data() + b + 1, value);
        if (ec == std::errc{} && ptr == s.data() + b + 1) return value;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

std::string_view order_type_label(OrderType t) {
    switch (t) {
        case OrderType::medication: return "medication";
        case OrderType::lab: return "lab";
        case OrderType::imaging: return "imaging";
        case OrderType::followup: return "followup";
    }
    return "medication";
}

std::optional<OrderType> normalize_order_type(std::string_view raw) {
    static const std::unordered_map<std::string, OrderType> table = {
        {"medication", OrderType::medication}, {"med", OrderType::medication},
        {"prescription", OrderType::medication},
        {"lab", OrderType::lab},               {"laboratory", OrderType::lab},
        {"labtest", OrderType::lab},
        {"imaging", OrderType::imaging},       {"radiology", OrderType::imaging},
        {"followup", OrderType::followup},     {"referral", OrderType::followup},
    };
    auto it = table.find(alnum_fold(raw));
    if (it == table.end()) return std::nullopt;
    return it->second;
}

std::string_view schema_violation_label(SchemaViolationKind k) {
    switch (k) {
        case SchemaViolationKind::missing_field: return "MissingField";
        case SchemaViolationKind::bad_type: return "BadType";
        case SchemaViolationKind::unknown_order_type: return "UnknownOrderType";
        case SchemaViolationKind::empty_provenance: return "EmptyProvenance";
    }
    return "BadType";
}

std::string SchemaViolation::to_string() const {
    std::string out(schema_violation_label(kind));
    if (!field.empty()) out += "(" + field + ")";
    if (!detail.empty()) out += ": " + detail;
    return out;
}

SchemaCheck validate_order_schema(const nlohmann::json& raw) {
    SchemaCheck result;
    auto violate = [&](SchemaViolationKind kind, std::string field, std::string detail = "") {
        result.violations.push_back({kind, std::move(field), std::move(detail)});
    };

    if (!raw.is_object()) {
        violate(SchemaViolationKind::bad_type, "", "element is not an object");
        return result;
    }

    MedicalOrder order;

    // order_type — the `order type` key spelling is accepted on input
    const nlohmann::json* type_value = nullptr;
    if (raw.contains("order_type")) {
        type_value = &raw.at("order_type");
    } else if (raw.contains("order type")) {
        type_value = &raw.at("order type");
    }
    if (type_value == nullptr) {
        violate(SchemaViolationKind::missing_field, "order_type");
    } else if (!type_value->is_string()) {
        violate(SchemaViolationKind::bad_type, "order_type", "expected a string");
    } else {
        auto normalized = normalize_order_type(type_value->get<std::string>());
        if (!normalized) {
            violate(SchemaViolationKind::unknown_order_type, "order_type",
                    "\"" + type_value->get<std::string>() + "\"");
        } else {
            order.order_type = *normalized;
        }
    }

    if (!raw.contains("description")) {
        violate(SchemaViolationKind::missing_field, "description");
    } else if (!raw.at("description").is_string()) {
        violate(SchemaViolationKind::bad_type, "description", "expected a string");
    } else {
        order.description = raw.at("description").get<std::string>();
        if (word_count(order.description) == 0) {
            violate(SchemaViolationKind::missing_field, "description", "empty");
        }
    }

    if (raw.contains("reason") && !raw.at("reason").is_null()) {
        if (!raw.at("reason").is_string()) {
            violate(SchemaViolationKind::bad_type, "reason", "expected a string");
        } else {
            order.reason = raw.at("reason").get<std::string>();
        }
    }

    if (!raw.contains("provenance") || (raw.at("provenance").is_array() && raw.at("provenance").empty())) {
        violate(SchemaViolationKind::empty_provenance, "provenance");
    } else if (!raw.at("provenance").is_array()) {
        violate(SchemaViolationKind::bad_type, "provenance", "expected an array of turn numbers");
    } else {
        for (const auto& element : raw.at("provenance")) {
            auto value = coerce_int(element);
            if (!value) {
                violate(SchemaViolationKind::bad_type, "provenance",
                        "element " + element.dump() + " is not a turn number");
                continue;
            }
            order.provenance.push_back(*value);
        }
        if (result.violations.empty() && order.provenance.empty()) {
            violate(SchemaViolationKind::empty_provenance, "provenance");
        }
    }

    if (result.violations.empty()) result.order = std::move(order);
    return result;
}

std::string truncate_words(std::string_view s, int max_words) {
    auto words = split_words(s);
    size_t keep = std::min(words.size(), static_cast<size_t>(max_words < 1 ? 1 : max_words));
    return join_words(words, keep);
}

int word_count(std::string_view s) {
    int count = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

std::string fold_text(std::string_view s) {
    return lower_ascii(truncate_words(s, std::numeric_limits<int>::max()));
}

std::string_view repair_kind_label(RepairKind k) {
    switch (k) {
        case RepairKind::provenance_filtered: return "provenance_filtered";
        case RepairKind::order_dropped: return "order_dropped";
        case RepairKind::description_truncated: return "description_truncated";
        case RepairKind::reason_truncated: return "reason_truncated";
        case RepairKind::duplicate_merged: return "duplicate_merged";
        case RepairKind::provenance_capped: return "provenance_capped";
        case RepairKind::orders_capped: return "orders_capped";
    }
    return "order_dropped";
}

PostprocessResult postprocess_orders(std::vector<MedicalOrder> raw, const Transcript& t,
                                     const PostprocessConfig& cfg) {
    PostprocessResult result;
    const std::set<int> doctor = doctor_turns(t);

    struct Entry {
        MedicalOrder order;
        int input_index;
        std::set<int> provenance;   // merged set, pre-cap
    };
    std::vector<Entry> entries;

    // (1) keep only provenance turns that exist (and are doctor turns when
    // required); an order left without provenance is dropped
    for (size_t i = 0; i < raw.size(); ++i) {
        MedicalOrder& order = raw[i];
        std::set<int> kept;
        std::vector<int> dropped;
        for (int idx : order.provenance) {
            bool valid = cfg.require_doctor_provenance ? doctor.count(idx) > 0 : has_turn(t, idx);
            if (valid) {
                kept.insert(idx);
            } else {
                dropped.push_back(idx);
            }
        }
        if (!dropped.empty()) {
            result.log.push_back({RepairKind::provenance_filtered, static_cast<int>(i),
                                  "dropped turns [" + join_ints(dropped) + "]"});
        }
        if (kept.empty()) {
            result.log.push_back({RepairKind::order_dropped, static_cast<int>(i),
                                  "no valid provenance left: \"" + order.description + "\""});
            continue;
        }
        entries.push_back({std::move(order), static_cast<int>(i), std::move(kept)});
    }

    // (2) word caps; truncate_words also normalizes whitespace
    for (Entry& e : entries) {
        int words = word_count(e.order.description);
        if (words > cfg.max_words) {
            result.log.push_back({RepairKind::description_truncated, e.input_index,
                                  std::to_string(words) + " -> " + std::to_string(cfg.max_words) +
                                      " words"});
        }
        e.order.description = truncate_words(e.order.description, cfg.max_words);
        words = word_count(e.order.reason);
        if (words > cfg.max_words) {
            result.log.push_back({RepairKind::reason_truncated, e.input_index,
                                  std::to_string(words) + " -> " + std::to_string(cfg.max_words) +
                                      " words"});
        }
        e.order.reason = truncate_words(e.order.reason, cfg.max_words);
    }

    // (3) duplicates: same type + case-folded description; keep the first,
    // merge provenance sets
    std::vector<Entry> unique_entries;
    std::map<std::pair<int, std::string>, size_t> seen;
    for (Entry& e : entries) {
        auto key = std::make_pair(static_cast<int>(e.order.order_type),
                                  lower_ascii(e.order.description));
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(std::move(key), unique_entries.size());
            unique_entries.push_back(std::move(e));
        } else {
            Entry& first = unique_entries[it->second];
            first.provenance.insert(e.provenance.begin(), e.provenance.end());
            result.log.push_back({RepairKind::duplicate_merged, e.input_index,
                                  "merged into order " + std::to_string(first.input_index) +
                                      " (\"" + first.order.description + "\")"});
        }
    }

    // (4) provenance sorted ascending (std::set already is) and capped
    for (Entry& e : unique_entries) {
        std::vector<int> provenance(e.provenance.begin(), e.provenance.end());
        if (provenance.size() > static_cast<size_t>(cfg.max_provenance)) {
            result.log.push_back({RepairKind::provenance_capped, e.input_index,
                                  std::to_string(provenance.size()) + " -> " +
                                      std::to_string(cfg.max_provenance) + " turns"});
            provenance.resize(static_cast<size_t>(cfg.max_provenance));
        }
        e.order.provenance = std::move(provenance);
    }

    // (5) order by earliest provenance turn; ties by type then description
    std::sort(unique_entries.begin(), unique_entries.end(), [](const Entry& a, const Entry& b) {
        int pa = a.order.provenance.front();
        int pb = b.order.provenance.front();
        if (pa != pb) return pa < pb;
        if (a.order.order_type != b.order.order_type)
            return a.order.order_type < b.order.order_type;
        return a.order.description < b.order.description;
    });

    // (6) order-count cap
    if (unique_entries.size() > static_cast<size_t>(cfg.max_orders)) {
        result.log.push_back({RepairKind::orders_capped, -1,
                              std::to_string(unique_entries.size()) + " -> " +
                                  std::to_string(cfg.max_orders) + " orders"});
        unique_entries.resize(static_cast<size_t>(cfg.max_orders));
    }

    result.orders.reserve(unique_entries.size());
    for (Entry& e : unique_entries) result.orders.push_back(std::move(e.order));
    return result;
}

nlohmann::json order_to_json(const MedicalOrder& order) {
    return nlohmann::json{{"order_type", order_type_label(order.order_type)},
                          {"description", order.description},
                          {"reason", order.reason},
                          {"provenance", order.provenance}};
}

nlohmann::json orders_to_json(const std::vector<MedicalOrder>& orders) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& order : orders) out.push_back(order_to_json(order));
    return out;
}

}  // namespace orderpipe
