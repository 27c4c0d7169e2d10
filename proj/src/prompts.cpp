#include "orderpipe/prompts.hpp"

#include <fstream>
#include <sstream>

namespace orderpipe {

namespace builtin_prompts {
extern const char* oneshot_system;
extern const char* oneshot_user;
extern const char* oneshot_instruction;
extern const char* react_system;
extern const char* react_user;
extern const char* react_observation;
extern const char* agentic_identifier_system;
extern const char* agentic_identifier_user;
extern const char* agentic_mapper_system;
extern const char* agentic_mapper_user;
extern const char* agentic_structurer_system;
extern const char* agentic_structurer_user;
extern const char* agentic_validator_system;
extern const char* agentic_validator_user;
}  // namespace builtin_prompts

const PromptCatalog& PromptCatalog::builtin() {
    static const PromptCatalog catalog = [] {
        PromptCatalog c;
        c.oneshot_system = builtin_prompts::oneshot_system;
        c.oneshot_user = builtin_prompts::oneshot_user;
        c.oneshot_instruction = builtin_prompts::oneshot_instruction;
        c.react_system = builtin_prompts::react_system;
        c.react_user = builtin_prompts::react_user;
        c.react_observation = builtin_prompts::react_observation;
        c.agentic_identifier_system = builtin_prompts::agentic_identifier_system;
        c.agentic_identifier_user = builtin_prompts::agentic_identifier_user;
        c.agentic_mapper_system = builtin_prompts::agentic_mapper_system;
        c.agentic_mapper_user = builtin_prompts::agentic_mapper_user;
        c.agentic_structurer_system = builtin_prompts::agentic_structurer_system;
        c.agentic_structurer_user = builtin_prompts::agentic_structurer_user;
        c.agentic_validator_system = builtin_prompts::agentic_validator_system;
        c.agentic_validator_user = builtin_prompts::agentic_validator_user;
        return c;
    }();
    return catalog;
}

namespace {

void load_if_present(const std::filesystem::path& dir, const char* name, std::string& slot) {
    std::ifstream in(dir / (std::string(name) + ".txt"), std::ios::binary);
    if (!in) return;
    std::ostringstream buf;
    buf << in.rdbuf();
    slot = buf.str();
}

}  // namespace

PromptCatalog PromptCatalog::from_directory(const std::filesystem::path& dir) {
    PromptCatalog c = builtin();
    load_if_present(dir, "oneshot_system", c.oneshot_system);
    load_if_present(dir, "oneshot_user", c.oneshot_user);
    load_if_present(dir, "oneshot_instruction", c.oneshot_instruction);
    load_if_present(dir, "react_system", c.react_system);
    load_if_present(dir, "react_user", c.react_user);
    load_if_present(dir, "react_observation", c.react_observation);
    load_if_present(dir, "agentic_identifier_system", c.agentic_identifier_system);
    load_if_present(dir, "agentic_identifier_user", c.agentic_identifier_user);
    load_if_present(dir, "agentic_mapper_system", c.agentic_mapper_system);
    load_if_present(dir, "agentic_mapper_user", c.agentic_mapper_user);
    load_if_present(dir, "agentic_structurer_system", c.agentic_structurer_system);
    load_if_present(dir, "agentic_structurer_user", c.agentic_structurer_user);
    load_if_present(dir, "agentic_validator_system", c.agentic_validator_system);
    load_if_present(dir, "agentic_validator_user", c.agentic_validator_user);
    return c;
}

std::string fill_placeholder(std::string text, std::string_view key, std::string_view value) {
    std::string token = "{" + std::string(key) + "}";
    size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace orderpipe
