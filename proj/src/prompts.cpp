#include "mobforge/prompts.hpp"

#include "mobforge/error.hpp"
#include "mobforge/vocab.hpp"

namespace mobforge {

namespace {

constexpr std::string_view k_initial_group_division = R"(You have a travel survey dataset regarding travel conditions. Preliminary data analysis has revealed several key insights <INPUT 1>.

Your goal is to capture the complex diversity in human mobility behaviors present in these data across different groups, aiming to uncover the subtle differences and unique aspects of travel patterns among various subgroups. Currently, you have initially classified the subjects based on several criteria <INPUT 2>. To gain a more refined understanding of the diversity in travel patterns, please evaluate whether it is necessary to further segment the groups based on another specific dimension <INPUT 3>, considering the statistical distribution characteristics of the current data and general knowledge from daily life. Based on this consideration, please provide a rating (ranging from 1 to 10), where a higher score (closer to 10) indicates a strong recommendation for additional segmentation to obtain deeper insights.)";

constexpr std::string_view k_pattern_extraction = R"(The profiles of this group are as follows <INPUT 1>.

The patterns and distributions of their travel behaviors are as follows <INPUT 2>.

Please use common knowledge and logical reasoning to deeply consider the impact of each dimension of the group's attributes on their travel patterns. Please list in detail the correlations between each attribute and travel behavior, and analyze the fundamental reasons behind these connections. Please first analyze the dimension <INPUT 3>.)";

constexpr std::string_view k_patterns_update_step1 = R"(These are the mobility patterns you have identified <INPUT 1>. These are the travel trajectories I have provided <INPUT 2>. Please analyze the observed anonymous travel trajectories and compare them with the patterns you have identified.

Please follow the steps below:

Look at each trajectory and compare it to the patterns you identified.

Decide which group the trajectory belongs to. For example, if the trajectory shows regular long-distance travel during work hours, it might belong to 'young professionals'. Furthermore, you need to infer the age, income level, and gender of 'young professionals'.

Explain your reasoning. For instance, "This trajectory shows long commutes in the morning and evening, matching the 'young professionals' pattern."

Start with the first trajectory: Describe it, infer the group, and explain your reasoning.)";

constexpr std::string_view k_patterns_update_step2 = R"(These are the mobility patterns you have identified <INPUT 1>. This is a trajectory with some information masked <INPUT 2>.

Please follow the steps below:

Fill in missing details like travel times and reasons. For example, if you know someone is a 'student' and the trajectory is missing the reason for travel at 8 AM, infer it's likely for school.

Think about why they travel the way they do. For instance, 'students' travel early for classes.

Update the patterns if needed. If you find a new behavior that doesn't fit existing patterns, refine your groups.

Start with the first anonymized trajectory: Fill in missing details, explain the reasoning, and update the patterns if necessary.)";

constexpr std::string_view k_daily_plan = R"(Role:

You are a daily planning expert, skilled at creating clear and reasonable daily plans for individuals based on various factors (such as location, external conditions, personal attributes, and previous reflections).

Skill:

Creating a daily life plan for someone.

The individual profiles are as follows: <INPUT 1>.

The mobility patterns of this group are as follows: <INPUT 2>.

Please deeply analyze the mobility patterns and accurately infer what activities the person will likely engage in throughout the day and for how long. Present the plan in a step-by-step, executable format.

Constraints:

The plan should not include any speculative or uncertain terms.

If there are any unspecified contexts, you may make appropriate assumptions to ensure the plan appears realistic.

Provide the plan directly, without explanations or summaries.

Now, please provide the plan for <INPUT 3>.)";

constexpr std::string_view k_recursive_reasoning = R"(Current time: <INPUT 1>

Overall plan for today: <INPUT 2>

Earlier schedule for today: <INPUT 3>

Individual profiles: <INPUT 4>

Mobility patterns of this group: <INPUT 5>

Task: Based on the overall plan for today and the given earlier schedule, infer what the person is most likely doing at the current time. Please fully consider real-world plausibility. If there is any travel involved, provide the destination and the most likely range of travel distance, taking into account the group's attributes and mobility patterns.)";

std::string fenced_rules() {
    return "Purposes: " + vocab_listing<Purpose>() + ".\nCategories: " + vocab_listing<PoiCategory>() +
           ".\nModes: " + vocab_listing<TravelMode>() + ".";
}

std::array<PromptTemplate, 6> build_templates() {
    return {{
        {TemplateId::InitialGroupDivision, "initial_group_division", k_initial_group_division, 3,
         "Answer format: end your answer with a single line `RATING: <integer from 1 to 10>`."},
        {TemplateId::PatternExtraction, "pattern_extraction", k_pattern_extraction, 3,
         "Answer format: plain prose about the named dimension; keep it under 300 words."},
        {TemplateId::PatternsUpdateStep1, "patterns_update_step1", k_patterns_update_step1, 2,
         "Answer format: end your answer with a single line `GROUP: <label>`, copying the label exactly as it "
         "appears in the patterns above."},
        {TemplateId::PatternsUpdateStep2, "patterns_update_step2", k_patterns_update_step2, 2,
         "Answer format: for every masked field [MASK_k] write one line `MASK_k: <value>`. Times are HH:MM, "
         "distances are whole meters, purposes and modes use the survey wording.\n" + fenced_rules()},
        {TemplateId::DailyPlan, "daily_plan", k_daily_plan, 3,
         "Answer format: end your answer with a fenced block (```) holding one group of lines per trip, in time "
         "order:\nWINDOW: HH:MM-HH:MM\nPURPOSE: <travel purpose>\nCATEGORY: <destination category>\n"
         "DISTANCE_M: <lo>-<hi>\nMODE: <travel mode>\nLeave the block empty if the person makes no trips.\n" +
             fenced_rules()},
        {TemplateId::RecursiveReasoning, "recursive_reasoning", k_recursive_reasoning, 5,
         "Answer format: end your answer with a fenced block (```) describing the next trip:\nPURPOSE: <travel "
         "purpose>\nCATEGORY: <destination category>\nDEPART: HH:MM\nDISTANCE_M: <lo>-<hi>\nMODE: <travel mode>\n"
         "If the person makes no further trips today, put the single line `DONE: yes` in the block instead.\n" +
             fenced_rules()},
    }};
}

const std::array<PromptTemplate, 6>& templates() {
    static const auto t = build_templates();
    return t;
}

}  // namespace

const PromptTemplate& prompt_template(TemplateId id) { return templates()[static_cast<std::size_t>(id)]; }

std::string_view template_name(TemplateId id) { return prompt_template(id).name; }

std::optional<TemplateId> parse_template_id(std::string_view name) {
    for (const auto& t : templates())
        if (t.name == name) return t.id;
    return std::nullopt;
}

std::string render_prompt(TemplateId id, const std::vector<std::string>& slots) {
    const auto& t = prompt_template(id);
    if (slots.size() != t.slot_count)
        throw Error(ErrorCode::SlotArityMismatch, std::string(t.name) + " takes " + std::to_string(t.slot_count) +
                                                      " slots, got " + std::to_string(slots.size()));
    std::string out;
    const std::string_view body = t.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find("<INPUT ", pos);
        if (open == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        const auto close = body.find('>', open);
        out.append(body.substr(pos, open - pos));
        const auto n = std::stoul(std::string(body.substr(open + 7, close - open - 7)));
        out += slots.at(n - 1);
        pos = close + 1;
    }
    out += "\n\n";
    out += t.output_contract;
    return out;
}

}  // namespace mobforge
