#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderpipe/orders.hpp"

namespace orderpipe {

enum class Speaker { doctor, patient, other };

/// Uppercase label used in rendered transcripts ("DOCTOR", "PATIENT", "OTHER").
std::string_view speaker_label(Speaker s);

/// Case-insensitive prefix match: "doctor"/"dr"/"physician" -> doctor,
/// "patient"/"pt" -> patient, everything else -> other.
Speaker normalize_speaker(std::string_view raw);

struct Turn {
    int index = 0;
    Speaker speaker = Speaker::other;
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct Transcript {
    std::vector<Turn> turns;            // indices strictly increasing
    bool source_indices_preserved = true;

    bool operator==(const Transcript&) const = default;
};

struct Encounter {
    std::string id;
    Transcript transcript;
    std::optional<std::vector<MedicalOrder>> gold_orders;

    bool operator==(const Encounter&) const = default;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class DatasetError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class IoError : public DatasetError {
    using DatasetError::DatasetError;
};

class MalformedRecordError : public DatasetError {
    using DatasetError::DatasetError;
};

class BadProvenanceError : public DatasetError {
public:
    BadProvenanceError(const std::string& encounter_id, int turn_index);

    const std::string& encounter_id() const { return encounter_id_; }
    int turn_index() const { return turn_index_; }

private:
    std::string encounter_id_;
    int turn_index_;
};

// ---------------------------------------------------------------------------
// Parsing and rendering
// ---------------------------------------------------------------------------

/// Source field names for the encounter record format. Remapping these covers
/// datasets that use different key spellings; no code change needed.
struct FieldMap {
    std::string id = "id";
    std::string transcript = "transcript";
    std::string turn_id = "turn_id";
    std::string speaker = "speaker";
    std::string text = "text";
    std::string expected_orders = "expected_orders";
};

/// Parses one encounter record. Speakers are normalized; turn indices are
/// preserved when every turn carries one, otherwise assigned 0..n-1.
/// Throws MalformedRecordError or BadProvenanceError.
Encounter parse_encounter(const nlohmann::json& doc, const FieldMap& fields = {});

/// Inverse of parse_encounter: turn ids are written only when the transcript
/// preserved source indices, so parse(serialize(e)) == e either way.
nlohmann::json serialize_encounter(const Encounter& e, const FieldMap& fields = {});

/// Indices of turns spoken by the doctor.
std::set<int> doctor_turns(const Transcript& t);

/// True if the transcript contains a turn with this index.
bool has_turn(const Transcript& t, int index);

/// One line per turn, `Turn {index} - {SPEAKER}: {text}`, newline-joined with
/// no trailing newline. Used verbatim inside prompts.
std::string render_transcript(const Transcript& t);

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

enum class Split { train, dev, custom };

std::optional<Split> split_from_string(std::string_view s);

struct DatasetStats {
    int encounters = 0;
    std::array<int, 4> orders_per_type{};   // indexed by OrderType
    int total_orders = 0;
    int skipped_records = 0;                // lenient mode only
    std::vector<std::string> errors;        // per-record messages, lenient mode

    int orders_of(OrderType t) const { return orders_per_type[static_cast<size_t>(t)]; }
};

struct LoadOptions {
    bool strict = false;    // strict: abort on first bad record; lenient: skip and report
    FieldMap fields;
};

struct LoadedDataset {
    std::vector<Encounter> encounters;
    DatasetStats stats;
};

/// Loads encounters from a file (single record or array) or a directory. For
/// train/dev splits a `<split>.json` file inside a directory is preferred;
/// otherwise every *.json file is read in filename order.
LoadedDataset load_dataset(const std::filesystem::path& path, Split split = Split::custom,
                           const LoadOptions& opts = {});

}  // namespace orderpipe
