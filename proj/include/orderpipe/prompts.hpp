#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace orderpipe {

/// The prompt text for every (strategy, stage) pair. The built-in catalog is
/// generated from assets/prompts/ at build time; a directory of same-named
/// .txt files overrides individual entries at runtime, so prompt text is
/// configuration, not code.
struct PromptCatalog {
    std::string oneshot_system;
    std::string oneshot_user;          // {instruction} slot
    std::string oneshot_instruction;   // {conversation} slot

    std::string react_system;
    std::string react_user;            // {conversation}
    std::string react_observation;     // {previous_output}, {violations}

    std::string agentic_identifier_system;
    std::string agentic_identifier_user;   // {conversation}
    std::string agentic_mapper_system;
    std::string agentic_mapper_user;       // {orders}
    std::string agentic_structurer_system;
    std::string agentic_structurer_user;   // {pairs}
    std::string agentic_validator_system;
    std::string agentic_validator_user;    // {conversation}, {structured}

    static const PromptCatalog& builtin();

    /// Builtin catalog with any `<name>.txt` files found in `dir` substituted.
    static PromptCatalog from_directory(const std::filesystem::path& dir);
};

/// Replaces every occurrence of `{key}` in the template.
std::string fill_placeholder(std::string text, std::string_view key, std::string_view value);

}  // namespace orderpipe
