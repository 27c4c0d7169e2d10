#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "orderpipe/transcript.hpp"

namespace orderpipe::testing {

/// Unique temp directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "orderpipe") {
        static std::mt19937_64 rng{std::random_device{}()};
        auto base = std::filesystem::temp_directory_path();
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / (tag + "-" + std::to_string(rng()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("TempDir: cannot create a unique directory");
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::filesystem::path test_data_dir() { return ORDERPIPE_TEST_DATA_DIR; }

/// The worked-example encounter: three doctor turns, two gold orders.
inline Encounter example_encounter() {
    Encounter e;
    e.id = "appendix-example";
    e.transcript.source_indices_preserved = true;
    e.transcript.turns = {
        {126, Speaker::doctor,
         "so, for your first problem of your shortness of breath i think that you are in an "
         "acute heart failure exacerbation."},
        {127, Speaker::doctor,
         "i want to go ahead and, uh, put you on some lasix, 40 milligrams a day."},
        {138, Speaker::doctor,
         "for your second problem of your type i diabetes, um, let's go ahead... i wanna order "
         "a hemoglobin a1c for, um, uh, just in a, like a month or so."},
    };
    e.gold_orders = std::vector<MedicalOrder>{
        {OrderType::medication, "lasix 40 milligrams a day",
         "shortness of breath acute heart failure exacerbation", {126, 127}},
        {OrderType::lab, "hemoglobin a1c", "type i diabetes", {138}},
    };
    return e;
}

/// The model reply that matches example_encounter()'s gold orders.
inline std::string example_reply() {
    return R"([
   {
    "order type": "medication",
    "description": "lasix 40 milligrams a day",
    "reason": "shortness of breath acute heart failure exacerbation",
    "provenance": [126, 127]
   },
   {
    "order type": "lab",
    "description": "hemoglobin a1c",
    "reason": "type i diabetes",
    "provenance": [138]
   }
])";
}

}  // namespace orderpipe::testing
