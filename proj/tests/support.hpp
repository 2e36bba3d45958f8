#pragma once

// Test-only helpers: plan builders, random plan generators and the
// grid-snapped Monte Carlo oracle used to cross-check the DP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <jicplan/dp.hpp>
#include <jicplan/plan.hpp>
#include <jicplan/plan_tree.hpp>
#include <jicplan/scenario_io.hpp>
#include <jicplan/sim.hpp>

namespace jicplan::testing {

inline std::string reference_path() { return JICPLAN_REFERENCE_SCENARIO; }

inline const ContingentPlan& reference_plan() {
    static const ContingentPlan plan = load_plan(reference_path());
    return plan;
}

inline Action make_action(std::string id, UncertainQuantity duration, UncertainQuantity energy, double floor = 0.0,
                          TimeWindow window = {0.0, seconds_per_day}, double reward = 0.0) {
    return Action{std::move(id), duration, energy, floor, window, reward};
}

/// HiRes exactly as documented: E > 0.02 Ah, 09:00-16:00, 5 +/- 1 s,
/// 0.01 +/- 0 Ah, reward 10.
inline Action hires() { return make_action("HiRes", {5.0, 1.0}, {0.01, 0.0}, 0.02, {32400.0, 57600.0}, 10.0); }

/// Plan with a single chain of the given actions as its only start alternative.
inline ContingentPlan chain_plan(std::vector<Action> actions, Axis time_axis = {48000.0, 52200.0},
                                 Axis energy_axis = {0.0, 20.0}) {
    ContingentPlan p;
    p.name = "chain";
    p.time_axis = time_axis;
    p.energy_axis = energy_axis;
    std::vector<ActionRef> refs;
    for (const auto& a : actions) refs.push_back({a.id, std::nullopt});
    p.actions = std::move(actions);
    p.start_alternatives = {make_chain(refs)};
    return p;
}

/// Same plan with every standard deviation set to zero.
inline ContingentPlan deterministic_copy(ContingentPlan p) {
    for (auto& a : p.actions) {
        a.duration.stddev = 0.0;
        a.energy.stddev = 0.0;
    }
    return p;
}

inline Linearization deterministic_copy(Linearization l) {
    for (auto& a : l.actions) {
        a.duration.stddev = 0.0;
        a.energy.stddev = 0.0;
    }
    return l;
}

// ---------------------------------------------------------------------------
// Random generators

inline Action random_action(std::mt19937_64& rng, const std::string& id, bool allow_deterministic = true) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto pick = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    Action a;
    a.id = id;
    a.duration.mean = std::round(pick(30.0, 900.0));
    a.duration.stddev = (allow_deterministic && u(rng) < 0.2) ? 0.0 : std::round(pick(0.02, 0.25) * a.duration.mean);
    a.energy.mean = std::round(pick(0.1, 3.0) * 100.0) / 100.0;
    a.energy.stddev = (allow_deterministic && u(rng) < 0.2) ? 0.0 : std::round(pick(0.02, 0.3) * a.energy.mean * 100.0) / 100.0;
    a.energy_floor = std::round(pick(0.0, 2.0) * 10.0) / 10.0;
    a.window.earliest = u(rng) < 0.7 ? 32400.0 : std::round(pick(48000.0, 49500.0));
    a.window.latest = u(rng) < 0.3 ? 57600.0 : std::round(pick(49500.0, 52200.0));
    static const double rewards[] = {0.0, 0.0, 5.0, 10.0, 20.0, 50.0, 100.0};
    a.reward = rewards[std::uniform_int_distribution<int>(0, 6)(rng)];
    return a;
}

/// Random tree plan with at most `max_actions` catalogued actions.
inline ContingentPlan random_plan(std::mt19937_64& rng, std::size_t max_actions = 6) {
    ContingentPlan p;
    p.name = "random";
    p.time_axis = {48000.0, 52200.0};
    p.energy_axis = {0.0, 20.0};
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_actions)(rng);
    for (std::size_t k = 0; k < n; ++k) p.actions.push_back(random_action(rng, "A" + std::to_string(k)));

    // Attach each action either as a new start alternative or under an
    // earlier node; ids along any root path stay distinct by construction.
    std::vector<std::vector<std::size_t>> paths;
    for (std::size_t k = 0; k < n; ++k) {
        std::optional<double> reward;
        if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.2) reward = 7.0;
        PlanNode node{{p.actions[k].id, reward}, {}};
        const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, paths.size())(rng);
        if (parent == paths.size() || paths.empty()) {
            p.start_alternatives.push_back(node);
            paths.push_back({p.start_alternatives.size() - 1});
        } else {
            const auto& pp = paths[parent];
            PlanNode* at = &p.start_alternatives[pp[0]];
            for (std::size_t d = 1; d < pp.size(); ++d) at = &at->alternatives[pp[d]];
            at->alternatives.push_back(node);
            auto child = pp;
            child.push_back(at->alternatives.size() - 1);
            paths.push_back(child);
        }
    }
    return p;
}

/// Random improvement problem: a primary chain plus up to three
/// alternatives, at most `max_actions` distinct actions in total.
inline ContingentPlan random_branching_problem(std::mt19937_64& rng, std::size_t max_actions = 6) {
    ContingentPlan p;
    p.name = "jic-random";
    p.time_axis = {48000.0, 52200.0};
    p.energy_axis = {0.0, 20.0};
    auto uint = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };

    const std::size_t primary_len = uint(2, 4);
    ImproveSpec imp;
    for (std::size_t k = 0; k < primary_len; ++k) {
        p.actions.push_back(random_action(rng, "P" + std::to_string(k)));
        imp.primary.push_back({p.actions.back().id, std::nullopt});
    }
    const std::size_t budget = max_actions - primary_len;
    const std::size_t n_alts = uint(1, std::min<std::size_t>(3, budget));
    std::size_t used = 0;
    for (std::size_t a = 0; a < n_alts; ++a) {
        AlternativeSpec alt;
        alt.name = "alt" + std::to_string(a);
        const std::size_t remaining_alts = n_alts - a - 1;
        const std::size_t len = uint(1, std::max<std::size_t>(1, std::min<std::size_t>(2, budget - used - remaining_alts)));
        for (std::size_t m = 0; m < len; ++m) {
            // Occasionally reuse a primary action so suffix-equivalent branches show up.
            if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.15) {
                alt.actions.push_back(imp.primary[uint(0, primary_len - 1)]);
            } else {
                p.actions.push_back(random_action(rng, "B" + std::to_string(a) + "_" + std::to_string(m)));
                alt.actions.push_back({p.actions.back().id, std::nullopt});
                ++used;
            }
        }
        alt.insert_after.push_back(std::string(start_point));
        for (std::size_t k = 0; k + 1 < primary_len; ++k)
            if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.6) alt.insert_after.push_back(imp.primary[k].action_id);
        imp.alternatives.push_back(std::move(alt));
    }
    p.start_alternatives = {make_chain(imp.primary)};
    p.improve = std::move(imp);
    return p;
}

// ---------------------------------------------------------------------------
// Grid-snapped Monte Carlo oracle
//
// Executes a plan by sampling, but rounds every outcome to the DP grid
// exactly as the DP discretization prescribes. Its expectation is therefore
// the DP value, which makes it an independent statistical check of the
// kernel construction and the backward recursion.

class SnappedSimulator {
public:
    SnappedSimulator(const PlanTree& tree, const GridPolicy& policy, const Grid& grid)
        : tree_(tree), policy_(policy), g_(grid) {}

    double run(std::size_t i, std::size_t j, std::mt19937_64& rng) const {
        const double dt = (g_.t1 - g_.t0) / static_cast<double>(g_.nt);
        const double de = (g_.e1 - g_.e0) / static_cast<double>(g_.ne);
        auto roots = tree_.roots();
        std::size_t cur = roots[pick(std::string(start_point), roots.size(), i, j)];
        double utility = 0.0;
        for (;;) {
            const Action& a = tree_.node(cur).action;
            double t = g_.t0 + (static_cast<double>(i) + 0.5) * dt;
            if (t < a.window.earliest) {
                t = a.window.earliest;
                const double x = std::floor((t - g_.t0) / dt);
                i = x <= 0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(x), g_.nt - 1);
            }
            const double e = g_.e0 + (static_cast<double>(j) + 0.5) * de;
            if (t > a.window.latest || !(e > a.energy_floor)) break;
            const double d = TruncatedNormal(a.duration)(rng);
            const double used = TruncatedNormal(a.energy)(rng);
            if (used > e) break;
            utility += a.reward;
            const long di = static_cast<long>(std::floor(d / dt + 0.5));
            const long dj = static_cast<long>(std::floor(used / de + 0.5));
            i = std::min<std::size_t>(i + static_cast<std::size_t>(di), g_.nt - 1);
            const long nj = static_cast<long>(j) - dj;
            if (nj < 0) break;
            j = static_cast<std::size_t>(nj);
            const auto& node = tree_.node(cur);
            if (node.children.empty()) break;
            cur = node.children[pick(node.branch_id, node.children.size(), i, j)];
        }
        return utility;
    }

private:
    std::size_t pick(const std::string& id, std::size_t arity, std::size_t i, std::size_t j) const {
        if (arity == 1) return 0;
        return policy_.choices.at(id)[i * g_.ne + j];
    }

    const PlanTree& tree_;
    const GridPolicy& policy_;
    Grid g_;
};

/// Deterministic utility of `lin` from a continuous start state.
inline double deterministic_utility(const Linearization& lin, State s) {
    double u = 0.0;
    for (const auto& a : lin.actions) {
        if (s.time < a.window.earliest) s.time = a.window.earliest;
        if (s.time > a.window.latest || !(s.energy > a.energy_floor)) break;
        s.time += a.duration.mean;
        s.energy -= a.energy.mean;
        if (s.energy < 0.0) break;
        u += a.reward;
    }
    return u;
}

// ---------------------------------------------------------------------------
// Exhaustive branch-insertion oracle

/// One-branch plan built directly from nested nodes.
inline PlanNode chain_with_branch(const std::vector<ActionRef>& primary, std::size_t depth, std::size_t rank,
                           const std::vector<ActionRef>& alt) {
    PlanNode n{primary[depth], {}};
    if (depth + 1 < primary.size()) n.alternatives.push_back(chain_with_branch(primary, depth + 1, rank, alt));
    if (depth + 1 == rank) n.alternatives.push_back(make_chain(alt));
    return n;
}

inline ContingentPlan enumerate_one(const ContingentPlan& problem, std::size_t rank, const std::vector<ActionRef>& alt) {
    ContingentPlan p = problem;
    const auto& primary = problem.improve->primary;
    p.start_alternatives = {chain_with_branch(primary, 0, rank, alt)};
    if (rank == 0) p.start_alternatives.push_back(make_chain(alt));
    return p;
}

inline std::size_t rank_of(const std::vector<ActionRef>& primary, const std::string& point) {
    if (point == "start") return 0;
    for (std::size_t k = 0; k < primary.size(); ++k)
        if (primary[k].action_id == point) return k + 1;
    return primary.size();
}

struct Enumerated {
    ContingentPlan plan;
    double score;
};

/// Exhaustive oracle: every legal one-branch plan, scored at `s`; ties go to
/// the earlier insertion, then the earlier alternative.
inline std::optional<Enumerated> brute_force(const ContingentPlan& problem, const Grid& g, const State& s) {
    const auto& imp = *problem.improve;
    std::optional<Enumerated> best;
    std::size_t best_rank = 0, best_alt = 0;
    for (std::size_t a = 0; a < imp.alternatives.size(); ++a)
        for (const auto& point : imp.alternatives[a].insert_after) {
            const std::size_t r = rank_of(imp.primary, point);
            auto p = enumerate_one(problem, r, imp.alternatives[a].actions);
            const double v = solve_optimal(p, g).root.value_at(s);
            const bool better = !best || v > best->score ||
                                (v == best->score && (r < best_rank || (r == best_rank && a < best_alt)));
            if (better) {
                best = Enumerated{std::move(p), v};
                best_rank = r;
                best_alt = a;
            }
        }
    return best;
}

}  // namespace jicplan::testing
