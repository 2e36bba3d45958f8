#include <gtest/gtest.h>

#include <functional>
#include <random>

#include <jicplan/plan.hpp>
#include <jicplan/scenario_io.hpp>

#include "support.hpp"

using namespace jicplan;
using jicplan::testing::reference_plan;

namespace {

const char* hires_only = R"({
  "name": "hires-only",
  "time_axis": {"start_s": 48000, "end_s": 52200},
  "energy_axis": {"min_ah": 0, "max_ah": 20},
  "actions": [
    {"id": "HiRes", "duration": {"mean_s": 5, "stddev_s": 1}, "energy": {"mean_ah": 0.01, "stddev_ah": 0},
     "energy_floor_ah": 0.02, "window": {"earliest_s": 32400, "latest_s": 57600}, "reward": 10}
  ],
  "structure": [ {"action_id": "HiRes"} ]
})";

std::string two_action_doc(const std::string& structure) {
    return R"({
  "name": "two",
  "time_axis": {"start_s": 0, "end_s": 100},
  "energy_axis": {"min_ah": 0, "max_ah": 1},
  "actions": [
    {"id": "A", "duration": {"mean_s": 1, "stddev_s": 0}, "energy": {"mean_ah": 0.1, "stddev_ah": 0},
     "energy_floor_ah": 0, "window": {"earliest_s": 0, "latest_s": 86400}, "reward": 1},
    {"id": "B", "duration": {"mean_s": 1, "stddev_s": 0}, "energy": {"mean_ah": 0.1, "stddev_ah": 0},
     "energy_floor_ah": 0, "window": {"earliest_s": 0, "latest_s": 86400}, "reward": 1}
  ],
  "structure": )" + structure + "}";
}

std::vector<std::string> ids(const Linearization& l) {
    std::vector<std::string> out;
    for (const auto& a : l.actions) out.push_back(a.id);
    return out;
}

}  // namespace

TEST(ParsePlan, ReferenceScenarioHasSevenActionsAndTwoBranchPoints) {
    const auto& plan = reference_plan();
    ASSERT_EQ(plan.actions.size(), 7u);
    std::vector<std::string> names;
    for (const auto& a : plan.actions) names.push_back(a.id);
    EXPECT_EQ(names, (std::vector<std::string>{"VisualServo", "Dig", "Drive", "NIR", "HiRes", "LoRes", "RockFinder"}));
    EXPECT_EQ(count_branch_points(plan), 2u);
    EXPECT_EQ(plan.start_alternatives.size(), 2u);
    EXPECT_TRUE(validate_plan(plan).empty());

    const Action* h = plan.find_action("HiRes");
    ASSERT_NE(h, nullptr);
    EXPECT_EQ(h->duration, (UncertainQuantity{5.0, 1.0}));
    EXPECT_EQ(h->energy, (UncertainQuantity{0.01, 0.0}));
    EXPECT_EQ(h->energy_floor, 0.02);
    EXPECT_EQ(h->window, (TimeWindow{32400.0, 57600.0}));
    EXPECT_EQ(h->reward, 10.0);
}

TEST(ParsePlan, SingleActionDocument) {
    const auto plan = parse_plan(hires_only);
    EXPECT_EQ(plan.start_alternatives.size(), 1u);
    EXPECT_EQ(count_branch_points(plan), 0u);
    EXPECT_EQ(linearizations(plan).size(), 1u);
}

TEST(ParsePlan, NodeThatIsItsOwnDescendantIsACycle) {
    const auto doc = two_action_doc(R"([{"action_id": "A", "alternatives": [
        {"action_id": "B", "alternatives": [{"action_id": "A"}]}]}])");
    try {
        parse_plan(doc);
        FAIL() << "expected a cycle error";
    } catch (const ValidationError& e) {
        ASSERT_EQ(e.report().size(), 1u);
        EXPECT_EQ(e.report()[0].subject, "A");
        EXPECT_NE(e.report()[0].message.find("cycle"), std::string::npos);
    }
}

TEST(ParsePlan, SyntaxErrorReportsPosition) {
    try {
        parse_plan("{\"name\": \"x\",,}");
        FAIL() << "expected a syntax error";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.position(), 14u);
    }
}

TEST(ParsePlan, SchemaViolations) {
    // Missing field.
    EXPECT_THROW(parse_plan(R"({"name": "x", "time_axis": {"start_s": 0, "end_s": 1}})"), SchemaError);
    // Wrong unit tag: durations are in seconds.
    std::string doc = hires_only;
    doc.replace(doc.find("\"mean_s\""), 8, "\"mean_ms\"");
    EXPECT_THROW(parse_plan(doc), SchemaError);
    // Wrong value type.
    std::string doc2 = hires_only;
    doc2.replace(doc2.find("\"reward\": 10"), 12, "\"reward\": \"ten\"");
    EXPECT_THROW(parse_plan(doc2), SchemaError);
}

TEST(ParsePlan, RewardOverrideAppliesPerNode) {
    const auto& plan = reference_plan();
    const auto lins = linearizations(plan);
    ASSERT_EQ(lins.size(), 3u);
    EXPECT_EQ(lins[0].actions.back().reward, 100.0);
    EXPECT_EQ(lins[2].actions.back().id, "NIR");
    EXPECT_EQ(lins[2].actions.back().reward, 50.0);
    double branch_total = 0.0;
    for (const auto& a : lins[2].actions) branch_total += a.reward;
    EXPECT_EQ(branch_total, 55.0);
}

TEST(ValidatePlan, NegativeStddevNamesTheAction) {
    auto plan = reference_plan();
    plan.actions[1].duration.stddev = -1.0;
    const auto r = validate_plan(plan);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].subject, "Dig");
}

TEST(ValidatePlan, DuplicateIdAcrossBranches) {
    // Two catalogue entries named "B", one used in each branch.
    auto plan = parse_plan(two_action_doc(R"([{"action_id": "A"}, {"action_id": "B"}])"));
    plan.actions[0].id = "B";
    plan.start_alternatives[0].step.action_id = "B";
    const auto r = validate_plan(plan);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].subject, "B");
    EXPECT_NE(r[0].message.find("duplicate"), std::string::npos);
}

TEST(ValidatePlan, ImproveSectionChecks) {
    auto plan = reference_plan();
    plan.improve->alternatives[1].insert_after = {"Telescope"};
    EXPECT_EQ(validate_plan(plan).size(), 1u);
    plan = reference_plan();
    plan.improve->alternatives[0].actions.push_back({"Nope", std::nullopt});
    EXPECT_EQ(validate_plan(plan).size(), 1u);
}

TEST(ValidatePlan, EverySingleFieldMutationIsRejected) {
    using Mut = std::function<void(ContingentPlan&)>;
    const std::vector<std::pair<const char*, Mut>> mutations = {
        {"duration mean", [](auto& p) { p.actions[0].duration.mean = -1.0; }},
        {"duration stddev", [](auto& p) { p.actions[0].duration.stddev = -0.5; }},
        {"energy mean", [](auto& p) { p.actions[2].energy.mean = -0.1; }},
        {"energy stddev", [](auto& p) { p.actions[2].energy.stddev = -0.1; }},
        {"energy floor", [](auto& p) { p.actions[3].energy_floor = -1.0; }},
        {"reward", [](auto& p) { p.actions[4].reward = -10.0; }},
        {"window order", [](auto& p) { p.actions[4].window = {50000.0, 40000.0}; }},
        {"window range", [](auto& p) { p.actions[4].window.latest = 90000.0; }},
        {"window start", [](auto& p) { p.actions[4].window.earliest = -1.0; }},
        {"duplicate id", [](auto& p) { p.actions[6].id = "LoRes"; }},
        {"empty id", [](auto& p) { p.actions[0].id = ""; }},
        {"no start", [](auto& p) { p.start_alternatives.clear(); }},
        {"unknown ref", [](auto& p) { p.start_alternatives[1].step.action_id = "Ghost"; }},
        {"override reward", [](auto& p) { p.start_alternatives[0].step.reward = -1.0; }},
        {"time axis", [](auto& p) { p.time_axis = {52200.0, 48000.0}; }},
        {"energy axis", [](auto& p) { p.energy_axis = {0.0, 0.0}; }},
        {"nan mean", [](auto& p) { p.actions[0].duration.mean = std::nan(""); }},
    };
    for (const auto& [name, mutate] : mutations) {
        auto plan = reference_plan();
        mutate(plan);
        EXPECT_FALSE(validate_plan(plan).empty()) << name;
    }
}

TEST(Linearizations, ReferenceScenarioOrder) {
    const auto lins = linearizations(reference_plan());
    ASSERT_EQ(lins.size(), 3u);
    EXPECT_EQ(ids(lins[0]), (std::vector<std::string>{"VisualServo", "Dig", "Drive", "NIR"}));
    EXPECT_EQ(ids(lins[1]), (std::vector<std::string>{"VisualServo", "Dig", "Drive", "HiRes"}));
    EXPECT_EQ(ids(lins[2]), (std::vector<std::string>{"LoRes", "RockFinder", "NIR"}));
    EXPECT_EQ(lins[1].choices, (std::vector<std::size_t>{0, 0, 0, 1}));
    EXPECT_EQ(lins[2].choices, (std::vector<std::size_t>{1, 0, 0}));
}

TEST(Linearizations, ChainOfThree) {
    using jicplan::testing::make_action;
    const auto plan = jicplan::testing::chain_plan(
        {make_action("a", {1, 0}, {0, 0}), make_action("b", {1, 0}, {0, 0}), make_action("c", {1, 0}, {0, 0})});
    const auto lins = linearizations(plan);
    ASSERT_EQ(lins.size(), 1u);
    EXPECT_EQ(lins[0].actions.size(), 3u);
}

namespace {

void count_leaves(const PlanNode& n, std::size_t& leaves) {
    if (n.alternatives.empty()) ++leaves;
    for (const auto& a : n.alternatives) count_leaves(a, leaves);
}

}  // namespace

TEST(Linearizations, PropertyEachLeafOnceAlongTreeEdges) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto plan = jicplan::testing::random_plan(rng);
        ASSERT_TRUE(validate_plan(plan).empty());
        std::size_t leaves = 0;
        for (const auto& r : plan.start_alternatives) count_leaves(r, leaves);
        const auto lins = linearizations(plan);
        ASSERT_EQ(lins.size(), leaves);
        std::set<std::vector<std::size_t>> seen;
        for (const auto& l : lins) {
            EXPECT_TRUE(seen.insert(l.choices).second);
            // Walk the choices through the tree and check every action matches.
            const PlanNode* node = &plan.start_alternatives.at(l.choices[0]);
            ASSERT_EQ(l.actions.size(), l.choices.size());
            for (std::size_t k = 0; k < l.actions.size(); ++k) {
                if (k > 0) node = &node->alternatives.at(l.choices[k]);
                EXPECT_EQ(node->step.action_id, l.actions[k].id);
            }
            EXPECT_TRUE(node->alternatives.empty());
        }
    }
}

TEST(SerializePlan, PropertyRoundTripIsIdentity) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        auto plan = trial % 2 ? jicplan::testing::random_plan(rng) : jicplan::testing::random_branching_problem(rng);
        plan.name = "trial-" + std::to_string(trial);
        const auto text = serialize_plan(plan);
        EXPECT_EQ(parse_plan(text), plan) << text;
    }
    EXPECT_EQ(parse_plan(serialize_plan(reference_plan())), reference_plan());
}
