#include "orderpipe/transcript.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace orderpipe {

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    size_t a = 0;
    size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

std::string_view speaker_label(Speaker s) {
    switch (s) {
        case Speaker::doctor: return "DOCTOR";
        case Speaker::patient: return "PATIENT";
        case Speaker::other: return "OTHER";
    }
    return "OTHER";
}

Speaker normalize_speaker(std::string_view raw) {
    std::string s = lower_ascii(trim(raw));
    if (starts_with(s, "doctor") || starts_with(s, "dr") || starts_with(s, "physician"))
        return Speaker::doctor;
    if (starts_with(s, "patient") || starts_with(s, "pt")) return Speaker::patient;
    return Speaker::other;
}

BadProvenanceError::BadProvenanceError(const std::string& encounter_id, int turn_index)
    : DatasetError("encounter \"" + encounter_id + "\": gold order cites nonexistent turn " +
                   std::to_string(turn_index)),
      encounter_id_(encounter_id),
      turn_index_(turn_index) {}

Encounter parse_encounter(const nlohmann::json& doc, const FieldMap& fields) {
    if (!doc.is_object()) throw MalformedRecordError("record is not an object");

    Encounter e;
    if (!doc.contains(fields.id) || !doc.at(fields.id).is_string() ||
        doc.at(fields.id).get<std::string>().empty()) {
        throw MalformedRecordError("record missing id");
    }
    e.id = doc.at(fields.id).get<std::string>();

    if (!doc.contains(fields.transcript) || !doc.at(fields.transcript).is_array()) {
        throw MalformedRecordError("encounter \"" + e.id + "\": missing turns");
    }

    const auto& turns = doc.at(fields.transcript);
    size_t with_id = 0;
    std::vector<std::optional<int>> source_ids;
    source_ids.reserve(turns.size());
    for (const auto& turn : turns) {
        if (!turn.is_object())
            throw MalformedRecordError("encounter \"" + e.id + "\": turn is not an object");
        if (turn.contains(fields.turn_id)) {
            if (!turn.at(fields.turn_id).is_number_integer() &&
                !turn.at(fields.turn_id).is_number_unsigned()) {
                throw MalformedRecordError("encounter \"" + e.id + "\": turn id is not an integer");
            }
            int idx = turn.at(fields.turn_id).get<int>();
            if (idx < 0)
                throw MalformedRecordError("encounter \"" + e.id + "\": negative turn id");
            source_ids.emplace_back(idx);
            ++with_id;
        } else {
            source_ids.emplace_back(std::nullopt);
        }
    }
    if (with_id != 0 && with_id != turns.size()) {
        throw MalformedRecordError("encounter \"" + e.id +
                                   "\": some turns carry ids and some do not");
    }

    e.transcript.source_indices_preserved = with_id == turns.size() && !turns.empty();
    e.transcript.turns.reserve(turns.size());
    int previous = -1;
    for (size_t i = 0; i < turns.size(); ++i) {
        const auto& turn = turns[i];
        Turn parsed;
        parsed.index = source_ids[i] ? *source_ids[i] : static_cast<int>(i);
        if (parsed.index <= previous) {
            throw MalformedRecordError("encounter \"" + e.id +
                                       "\": turn ids not strictly increasing");
        }
        previous = parsed.index;
        if (turn.contains(fields.speaker) && turn.at(fields.speaker).is_string()) {
            parsed.speaker = normalize_speaker(turn.at(fields.speaker).get<std::string>());
        }
        if (turn.contains(fields.text) && turn.at(fields.text).is_string()) {
            parsed.text = turn.at(fields.text).get<std::string>();
        }
        e.transcript.turns.push_back(std::move(parsed));
    }

    if (doc.contains(fields.expected_orders) && !doc.at(fields.expected_orders).is_null()) {
        const auto& golds = doc.at(fields.expected_orders);
        if (!golds.is_array()) {
            throw MalformedRecordError("encounter \"" + e.id + "\": expected orders not an array");
        }
        std::vector<MedicalOrder> parsed_orders;
        for (const auto& raw : golds) {
            SchemaCheck check = validate_order_schema(raw);
            if (!check.ok()) {
                std::string details;
                for (const auto& v : check.violations) {
                    if (!details.empty()) details += "; ";
                    details += v.to_string();
                }
                throw MalformedRecordError("encounter \"" + e.id + "\": bad gold order: " + details);
            }
            for (int idx : check.order->provenance) {
                if (!has_turn(e.transcript, idx)) throw BadProvenanceError(e.id, idx);
            }
            parsed_orders.push_back(std::move(*check.order));
        }
        e.gold_orders = std::move(parsed_orders);
    }
    return e;
}

nlohmann::json serialize_encounter(const Encounter& e, const FieldMap& fields) {
    nlohmann::json turns = nlohmann::json::array();
    for (const Turn& turn : e.transcript.turns) {
        nlohmann::json t;
        // assigned 0-based indices are implicit, so round-trips keep the mode
        if (e.transcript.source_indices_preserved) t[fields.turn_id] = turn.index;
        t[fields.speaker] = lower_ascii(speaker_label(turn.speaker));
        t[fields.text] = turn.text;
        turns.push_back(std::move(t));
    }
    nlohmann::json doc{{fields.id, e.id}, {fields.transcript, std::move(turns)}};
    if (e.gold_orders) doc[fields.expected_orders] = orders_to_json(*e.gold_orders);
    return doc;
}

std::set<int> doctor_turns(const Transcript& t) {
    std::set<int> result;
    for (const Turn& turn : t.turns) {
        if (turn.speaker == Speaker::doctor) result.insert(turn.index);
    }
    return result;
}

bool has_turn(const Transcript& t, int index) {
    return std::any_of(t.turns.begin(), t.turns.end(),
                       [index](const Turn& turn) { return turn.index == index; });
}

std::string render_transcript(const Transcript& t) {
    std::string out;
    for (size_t i = 0; i < t.turns.size(); ++i) {
        const Turn& turn = t.turns[i];
        if (i > 0) out.push_back('\n');
        out += "Turn " + std::to_string(turn.index) + " - ";
        out += speaker_label(turn.speaker);
        out += ": ";
        out += turn.text;
    }
    return out;
}

std::optional<Split> split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "custom") return Split::custom;
    return std::nullopt;
}

namespace {

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::custom: return "custom";
    }
    return "custom";
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecordError(path.string() + ": " + e.what());
    }
    return doc;
}

std::vector<nlohmann::json> collect_records(const nlohmann::json& doc) {
    if (doc.is_array()) return std::vector<nlohmann::json>(doc.begin(), doc.end());
    if (doc.is_object() && doc.contains("encounters") && doc.at("encounters").is_array()) {
        const auto& inner = doc.at("encounters");
        return std::vector<nlohmann::json>(inner.begin(), inner.end());
    }
    return {doc};
}

}  // namespace

LoadedDataset load_dataset(const std::filesystem::path& path, Split split,
                           const LoadOptions& opts) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw IoError("dataset path does not exist: " + path.string());

    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        fs::path split_file = path / (std::string(split_name(split)) + ".json");
        if (split != Split::custom && fs::exists(split_file)) {
            files.push_back(split_file);
        } else {
            for (const auto& entry : fs::directory_iterator(path)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json")
                    files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
        }
    } else {
        files.push_back(path);
    }

    LoadedDataset out;
    std::set<std::string> seen_ids;
    for (const auto& file : files) {
        std::vector<nlohmann::json> records;
        try {
            records = collect_records(read_json_file(file));
        } catch (const IoError&) {
            throw;
        } catch (const DatasetError& e) {
            if (opts.strict) throw;
            out.stats.errors.emplace_back(e.what());
            continue;
        }
        for (const auto& record : records) {
            try {
                Encounter e = parse_encounter(record, opts.fields);
                if (!seen_ids.insert(e.id).second) {
                    throw MalformedRecordError("duplicate encounter id \"" + e.id + "\"");
                }
                if (e.gold_orders) {
                    for (const auto& order : *e.gold_orders) {
                        ++out.stats.orders_per_type[static_cast<size_t>(order.order_type)];
                        ++out.stats.total_orders;
                    }
                }
                out.encounters.push_back(std::move(e));
                ++out.stats.encounters;
            } catch (const DatasetError& e) {
                if (opts.strict) throw;
                out.stats.errors.emplace_back(e.what());
                ++out.stats.skipped_records;
            }
        }
    }
    return out;
}

}  // namespace orderpipe
