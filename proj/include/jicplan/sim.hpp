#pragma once

// Stochastic execution of contingent plans: outcome sampling, single runs,
// Monte Carlo utility estimates and failure profiles.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "normal.hpp"
#include "plan.hpp"
#include "plan_tree.hpp"

namespace jicplan {

struct State {
    double time = 0.0;    // seconds of day
    double energy = 0.0;  // amp-hours
};

enum class Outcome { completed, precondition_failed, energy_exhausted };

inline const char* to_string(Outcome o) {
    switch (o) {
    case Outcome::completed: return "completed";
    case Outcome::precondition_failed: return "precondition-failed";
    case Outcome::energy_exhausted: return "energy-exhausted";
    }
    return "?";
}

struct TraceEvent {
    std::string action_id;
    State start;             // after any wait for the window to open
    double duration = 0.0;   // 0 when the precondition failed
    double energy = 0.0;
    Outcome outcome = Outcome::completed;
};

struct Trace {
    std::vector<TraceEvent> events;
    double total_utility = 0.0;
    std::uint64_t seed = 0;
};

struct UtilityEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

/// Anything that picks an alternative at a branch point from the current
/// state. Returning nullopt means the policy does not cover that point.
template <class P>
concept ExecutionPolicy = requires(const P& p, const BranchPoint& bp, const State& s) {
    { p(bp, s) } -> std::convertible_to<std::optional<std::size_t>>;
};

using Rng = std::mt19937_64;

template <class URBG>
std::pair<double, double> sample_outcome(const Action& action, URBG& rng) {
    const double d = TruncatedNormal(action.duration)(rng);
    const double e = TruncatedNormal(action.energy)(rng);
    return {d, e};
}

/// Applies one action to `state`: wait for the window, check start
/// preconditions, draw the outcome, check end energy. `state` is advanced
/// unless the precondition failed.
template <class URBG>
TraceEvent step(const Action& action, State& state, URBG& rng) {
    TraceEvent ev{action.id, state, 0.0, 0.0, Outcome::completed};
    if (state.time < action.window.earliest) state.time = action.window.earliest;
    ev.start = state;
    if (state.time > action.window.latest || !(state.energy > action.energy_floor)) {
        ev.outcome = Outcome::precondition_failed;
        return ev;
    }
    auto [d, e] = sample_outcome(action, rng);
    ev.duration = d;
    ev.energy = e;
    state.time += d;
    state.energy -= e;
    if (state.energy < 0.0) ev.outcome = Outcome::energy_exhausted;
    return ev;
}

/// Commits to one linearization: follows its recorded choices and refuses
/// branch points off that path.
class CommitPolicy {
public:
    explicit CommitPolicy(std::vector<std::size_t> choices) : choices_(std::move(choices)) {}
    explicit CommitPolicy(const Linearization& lin) : choices_(lin.choices) {}

    std::optional<std::size_t> operator()(const BranchPoint& bp, const State&) const {
        if (bp.path.size() >= choices_.size()) return std::nullopt;
        for (std::size_t k = 0; k < bp.path.size(); ++k)
            if (bp.path[k] != choices_[k]) return std::nullopt;
        return choices_[bp.path.size()];
    }

private:
    std::vector<std::size_t> choices_;
};

namespace sim_detail {

template <ExecutionPolicy Policy>
std::size_t choose(const Policy& policy, std::string_view id, std::span<const std::size_t> path,
                   std::size_t arity, const State& s) {
    if (arity == 1) return 0;
    auto pick = policy(BranchPoint{id, path, arity}, s);
    if (!pick || *pick >= arity)
        throw ContractError("execution policy does not cover branch point '" + std::string(id) + "'");
    return *pick;
}

// Runs the tree and reports each event to `sink`; returns total utility.
template <ExecutionPolicy Policy, class URBG, class Sink>
double run(const PlanTree& tree, const Policy& policy, State state, URBG& rng, Sink&& sink) {
    double utility = 0.0;
    auto roots = tree.roots();
    std::size_t cur = roots[choose(policy, start_point, {}, roots.size(), state)];
    for (;;) {
        const auto& node = tree.node(cur);
        TraceEvent ev = step(node.action, state, rng);
        const Outcome outcome = ev.outcome;
        if (outcome == Outcome::completed) utility += node.action.reward;
        sink(std::move(ev));
        if (outcome != Outcome::completed || node.children.empty()) break;
        cur = node.children[choose(policy, node.branch_id, node.path, node.children.size(), state)];
    }
    return utility;
}

}  // namespace sim_detail

template <ExecutionPolicy Policy, class URBG>
Trace execute_once(const PlanTree& tree, const Policy& policy, const State& start, URBG& rng) {
    Trace t;
    t.total_utility = sim_detail::run(tree, policy, start, rng, [&](TraceEvent&& ev) { t.events.push_back(std::move(ev)); });
    return t;
}

template <ExecutionPolicy Policy>
Trace execute_once(const ContingentPlan& plan, const Policy& policy, const State& start, std::uint64_t seed) {
    Rng rng(seed);
    Trace t = execute_once(PlanTree(plan), policy, start, rng);
    t.seed = seed;
    return t;
}

/// Mean, standard error and normal 95% interval of a sample.
class RunningStats {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    UtilityEstimate estimate() const {
        UtilityEstimate e;
        e.n = n_;
        e.mean = mean_;
        e.std_error = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_)) : 0.0;
        e.ci_lo = e.mean - 1.96 * e.std_error;
        e.ci_hi = e.mean + 1.96 * e.std_error;
        return e;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

template <ExecutionPolicy Policy>
UtilityEstimate estimate_utility(const PlanTree& tree, const Policy& policy, const State& start, std::size_t n,
                                 std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("estimate_utility: n must be >= 1");
    Rng rng(seed);
    RunningStats stats;
    for (std::size_t k = 0; k < n; ++k) stats.add(sim_detail::run(tree, policy, start, rng, [](TraceEvent&&) {}));
    return stats.estimate();
}

template <ExecutionPolicy Policy>
UtilityEstimate estimate_utility(const ContingentPlan& plan, const Policy& policy, const State& start,
                                 std::size_t n, std::uint64_t seed) {
    return estimate_utility(PlanTree(plan), policy, start, n, seed);
}

struct FailureProfile {
    std::vector<std::string> action_ids;
    std::vector<std::size_t> first_failures;  // runs whose first failure was at action k
    std::size_t successes = 0;
    std::size_t n = 0;

    double failure_probability(std::size_t k) const {
        return static_cast<double>(first_failures[k]) / static_cast<double>(n);
    }
    double success_probability() const { return static_cast<double>(successes) / static_cast<double>(n); }

    /// Index of the action most likely to fail first, nullopt if none fail.
    std::optional<std::size_t> most_likely_failure() const {
        std::optional<std::size_t> best;
        for (std::size_t k = 0; k < first_failures.size(); ++k)
            if (first_failures[k] > 0 && (!best || first_failures[k] > first_failures[*best])) best = k;
        return best;
    }
};

/// Runs `actions` once; returns the index of the failing action, or
/// actions.size() on success.
template <class URBG>
std::size_t run_sequence(std::span<const Action> actions, State state, URBG& rng) {
    for (std::size_t k = 0; k < actions.size(); ++k)
        if (step(actions[k], state, rng).outcome != Outcome::completed) return k;
    return actions.size();
}

inline FailureProfile failure_profile(const Linearization& lin, const State& start, std::size_t n,
                                      std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("failure_profile: n must be >= 1");
    FailureProfile p;
    p.n = n;
    for (const auto& a : lin.actions) p.action_ids.push_back(a.id);
    p.first_failures.assign(lin.actions.size(), 0);
    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t k = run_sequence(lin.actions, start, rng);
        if (k == lin.actions.size())
            ++p.successes;
        else
            ++p.first_failures[k];
    }
    return p;
}

/// CSV export of one trace.
inline void write_trace_csv(std::ostream& os, const Trace& t) {
    os << "action_id,start_time_s,start_energy_ah,duration_s,energy_ah,outcome\n";
    char buf[256];
    for (const auto& ev : t.events) {
        std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.12g,%.12g,%s\n", ev.action_id.c_str(), ev.start.time,
                      ev.start.energy, ev.duration, ev.energy, to_string(ev.outcome));
        os << buf;
    }
}

}  // namespace jicplan
