#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mobforge {

enum class TemplateId {
    InitialGroupDivision,
    PatternExtraction,
    PatternsUpdateStep1,
    PatternsUpdateStep2,
    DailyPlan,
    RecursiveReasoning,
};

inline constexpr std::array<TemplateId, 6> kAllTemplates{
    TemplateId::InitialGroupDivision, TemplateId::PatternExtraction, TemplateId::PatternsUpdateStep1,
    TemplateId::PatternsUpdateStep2,  TemplateId::DailyPlan,         TemplateId::RecursiveReasoning,
};

struct PromptTemplate {
    TemplateId id;
    std::string_view name;
    std::string_view body;  // verbatim prompt text with <INPUT n> slots
    std::size_t slot_count;
    std::string output_contract;
};

const PromptTemplate& prompt_template(TemplateId id);
std::string_view template_name(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);

// Replaces <INPUT n> with slots[n-1] and appends the output contract.
// Throws Error(SlotArityMismatch).
std::string render_prompt(TemplateId id, const std::vector<std::string>& slots);

}  // namespace mobforge
