#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace jicplan {

inline constexpr double seconds_per_day = 86400.0;

/// Gaussian quantity described by its mean and standard deviation.
/// A zero standard deviation denotes a deterministic quantity.
struct UncertainQuantity {
    double mean = 0.0;
    double stddev = 0.0;

    bool deterministic() const { return stddev == 0.0; }
    bool operator==(const UncertainQuantity&) const = default;
};

/// Inclusive start-time window, in seconds of the day.
struct TimeWindow {
    double earliest = 0.0;
    double latest = seconds_per_day;

    bool operator==(const TimeWindow&) const = default;
};

struct Action {
    std::string id;
    UncertainQuantity duration;  // seconds
    UncertainQuantity energy;    // amp-hours consumed
    double energy_floor = 0.0;   // start requires energy > floor
    TimeWindow window;
    double reward = 0.0;

    bool operator==(const Action&) const = default;
};

/// Reference to a catalogued action, optionally overriding its reward at
/// this position in the plan (the same instrument may be worth different
/// amounts in different branches).
struct ActionRef {
    std::string action_id;
    std::optional<double> reward;

    bool operator==(const ActionRef&) const = default;
};

/// A node of the plan tree. Zero alternatives is a leaf, one is a fixed
/// successor, two or more make this node a branch point.
struct PlanNode {
    ActionRef step;
    std::vector<PlanNode> alternatives;

    bool is_branch_point() const { return alternatives.size() >= 2; }
    bool operator==(const PlanNode&) const = default;
};

struct Axis {
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Axis&) const = default;
};

/// Candidate branch declared for plan improvement: a suffix of actions that
/// may be spliced in after any of `insert_after` ("start" = before the first
/// primary action).
struct AlternativeSpec {
    std::string name;
    std::vector<ActionRef> actions;
    std::vector<std::string> insert_after;

    bool operator==(const AlternativeSpec&) const = default;
};

struct ImproveSpec {
    std::vector<ActionRef> primary;
    std::vector<AlternativeSpec> alternatives;

    bool operator==(const ImproveSpec&) const = default;
};

inline constexpr std::string_view start_point = "start";

struct ContingentPlan {
    std::string name;
    Axis time_axis;    // seconds of day
    Axis energy_axis;  // amp-hours
    std::vector<Action> actions;
    std::vector<PlanNode> start_alternatives;
    std::optional<ImproveSpec> improve;

    const Action* find_action(std::string_view id) const {
        for (const auto& a : actions)
            if (a.id == id) return &a;
        return nullptr;
    }

    /// Catalogued action with the reference's reward override applied.
    Action resolve(const ActionRef& ref) const {
        const Action* base = find_action(ref.action_id);
        if (!base) throw std::out_of_range("unknown action id '" + ref.action_id + "'");
        Action out = *base;
        if (ref.reward) out.reward = *ref.reward;
        return out;
    }

    bool operator==(const ContingentPlan&) const = default;
};

/// One root-to-leaf commitment through a plan. `choices[k]` is the index of
/// the alternative taken to reach `actions[k]` (for k = 0, the start
/// alternative).
struct Linearization {
    std::vector<Action> actions;
    std::vector<std::size_t> choices;

    std::string label() const {
        std::string s;
        for (std::size_t k = 0; k < actions.size(); ++k) {
            if (k) s += ',';
            s += actions[k].id;
        }
        return s;
    }
};

/// Branch points are named by the alternative indices leading to them;
/// the choice made before any action runs is "start".
inline std::string branch_point_id(const std::vector<std::size_t>& path) {
    if (path.empty()) return std::string(start_point);
    std::string s;
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (k) s += '.';
        s += std::to_string(path[k]);
    }
    return s;
}

struct Violation {
    std::string subject;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

namespace detail {

inline bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

inline void check_quantity(ValidationReport& out, const std::string& id, const char* what,
                           const UncertainQuantity& q) {
    if (!finite_nonneg(q.mean)) out.push_back({id, std::string(what) + " mean must be >= 0"});
    if (!finite_nonneg(q.stddev)) out.push_back({id, std::string(what) + " stddev must be >= 0"});
}

inline void check_ref(ValidationReport& out, const ContingentPlan& plan, const ActionRef& ref,
                      const std::string& where) {
    if (!plan.find_action(ref.action_id))
        out.push_back({ref.action_id, "unknown action referenced by " + where});
    if (ref.reward && !finite_nonneg(*ref.reward))
        out.push_back({ref.action_id, "reward override must be >= 0 (" + where + ")"});
}

inline void check_node(ValidationReport& out, const ContingentPlan& plan, const PlanNode& node,
                       std::vector<std::string>& ancestry, std::vector<std::size_t>& path) {
    const std::string where = "node " + branch_point_id(path);
    check_ref(out, plan, node.step, where);
    for (const auto& a : ancestry) {
        if (a == node.step.action_id) {
            out.push_back({node.step.action_id, "cycle: action appears as its own descendant at " + where});
            break;
        }
    }
    ancestry.push_back(node.step.action_id);
    for (std::size_t k = 0; k < node.alternatives.size(); ++k) {
        path.push_back(k);
        check_node(out, plan, node.alternatives[k], ancestry, path);
        path.pop_back();
    }
    ancestry.pop_back();
}

}  // namespace detail

/// Lists every broken invariant; an empty report means the plan is valid.
inline ValidationReport validate_plan(const ContingentPlan& plan) {
    ValidationReport out;
    if (!(plan.time_axis.lo < plan.time_axis.hi))
        out.push_back({"time_axis", "start_s must be < end_s"});
    if (!(plan.energy_axis.lo < plan.energy_axis.hi))
        out.push_back({"energy_axis", "min_ah must be < max_ah"});

    std::unordered_set<std::string> seen;
    for (const auto& a : plan.actions) {
        if (a.id.empty()) out.push_back({"<unnamed>", "action id must be non-empty"});
        if (!seen.insert(a.id).second) out.push_back({a.id, "duplicate action id"});
        detail::check_quantity(out, a.id, "duration", a.duration);
        detail::check_quantity(out, a.id, "energy", a.energy);
        if (!detail::finite_nonneg(a.energy_floor)) out.push_back({a.id, "energy_floor must be >= 0"});
        if (!detail::finite_nonneg(a.reward)) out.push_back({a.id, "reward must be >= 0"});
        const auto& w = a.window;
        if (!(0.0 <= w.earliest && w.earliest <= w.latest && w.latest <= seconds_per_day))
            out.push_back({a.id, "window must satisfy 0 <= earliest <= latest <= 86400"});
    }

    if (plan.start_alternatives.empty()) out.push_back({"structure", "at least one start alternative required"});
    std::vector<std::string> ancestry;
    std::vector<std::size_t> path;
    for (std::size_t k = 0; k < plan.start_alternatives.size(); ++k) {
        path.assign(1, k);
        detail::check_node(out, plan, plan.start_alternatives[k], ancestry, path);
    }

    if (plan.improve) {
        const auto& imp = *plan.improve;
        if (imp.primary.empty()) out.push_back({"improve", "primary must list at least one action"});
        std::unordered_set<std::string> primary_ids;
        for (const auto& r : imp.primary) {
            detail::check_ref(out, plan, r, "improve.primary");
            if (!primary_ids.insert(r.action_id).second)
                out.push_back({r.action_id, "action repeated in improve.primary"});
        }
        for (const auto& alt : imp.alternatives) {
            if (alt.actions.empty()) out.push_back({alt.name, "alternative has no actions"});
            for (const auto& r : alt.actions) detail::check_ref(out, plan, r, "alternative " + alt.name);
            if (alt.insert_after.empty()) out.push_back({alt.name, "alternative has no insertion point"});
            for (const auto& p : alt.insert_after)
                if (p != start_point && !primary_ids.count(p))
                    out.push_back({alt.name, "insertion point '" + p + "' is not a primary action"});
        }
    }
    return out;
}

namespace detail {

inline void collect_linearizations(const ContingentPlan& plan, const PlanNode& node, Linearization& prefix,
                                   std::vector<Linearization>& out) {
    prefix.actions.push_back(plan.resolve(node.step));
    if (node.alternatives.empty()) {
        out.push_back(prefix);
    } else {
        for (std::size_t k = 0; k < node.alternatives.size(); ++k) {
            prefix.choices.push_back(k);
            collect_linearizations(plan, node.alternatives[k], prefix, out);
            prefix.choices.pop_back();
        }
    }
    prefix.actions.pop_back();
}

}  // namespace detail

/// Every root-to-leaf commitment, depth-first in alternative order.
inline std::vector<Linearization> linearizations(const ContingentPlan& plan) {
    std::vector<Linearization> out;
    Linearization prefix;
    for (std::size_t k = 0; k < plan.start_alternatives.size(); ++k) {
        prefix.choices.assign(1, k);
        detail::collect_linearizations(plan, plan.start_alternatives[k], prefix, out);
    }
    return out;
}

/// Builds the chain node for `refs[from..]`.
inline PlanNode make_chain(const std::vector<ActionRef>& refs, std::size_t from = 0) {
    if (from >= refs.size()) throw std::invalid_argument("make_chain: empty action list");
    PlanNode head{refs[from], {}};
    PlanNode* tail = &head;
    for (std::size_t k = from + 1; k < refs.size(); ++k) {
        tail->alternatives.push_back(PlanNode{refs[k], {}});
        tail = &tail->alternatives.back();
    }
    return head;
}

inline std::size_t count_nodes(const PlanNode& node) {
    std::size_t n = 1;
    for (const auto& a : node.alternatives) n += count_nodes(a);
    return n;
}

inline std::size_t count_nodes(const ContingentPlan& plan) {
    std::size_t n = 0;
    for (const auto& a : plan.start_alternatives) n += count_nodes(a);
    return n;
}

namespace detail {
inline std::size_t count_branch_points(const PlanNode& node) {
    std::size_t n = node.is_branch_point() ? 1 : 0;
    for (const auto& a : node.alternatives) n += count_branch_points(a);
    return n;
}
}  // namespace detail

/// Branch points including the start choice when it has two or more options.
inline std::size_t count_branch_points(const ContingentPlan& plan) {
    std::size_t n = plan.start_alternatives.size() >= 2 ? 1 : 0;
    for (const auto& a : plan.start_alternatives) n += detail::count_branch_points(a);
    return n;
}

}  // namespace jicplan
