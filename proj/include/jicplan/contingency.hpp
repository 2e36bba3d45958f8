#pragma once

// Heuristic construction and improvement of contingent plans: mean-case seed
// plans, worst-case feasibility, just-in-case branch scoring and insertion,
// failure anticipation and rectangular branch conditions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dp.hpp"
#include "plan.hpp"
#include "plan_tree.hpp"
#include "sim.hpp"

namespace jicplan {

// ---------------------------------------------------------------------------
// Mean-case and worst-case walks

enum class Verdict { feasible, precondition_failed, energy_exhausted, not_reached };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::feasible: return "feasible";
    case Verdict::precondition_failed: return "precondition-failed";
    case Verdict::energy_exhausted: return "energy-exhausted";
    case Verdict::not_reached: return "not-reached";
    }
    return "?";
}

/// Deterministic step where every draw is replaced by mean + k * stddev.
inline Verdict shifted_step(const Action& a, State& s, double k) {
    if (s.time < a.window.earliest) s.time = a.window.earliest;
    if (s.time > a.window.latest || !(s.energy > a.energy_floor)) return Verdict::precondition_failed;
    s.time += std::max(0.0, a.duration.mean + k * a.duration.stddev);
    s.energy -= std::max(0.0, a.energy.mean + k * a.energy.stddev);
    return s.energy < 0.0 ? Verdict::energy_exhausted : Verdict::feasible;
}

struct ActionVerdict {
    std::string action_id;
    Verdict verdict;
};

/// Executes `lin` with every draw at mean + k stddev; actions after the first
/// failure are reported as not reached.
inline std::vector<ActionVerdict> worst_case_feasible(const Linearization& lin, const State& start, double k) {
    if (!(k >= 0.0)) throw std::invalid_argument("worst_case_feasible: k must be >= 0");
    std::vector<ActionVerdict> out;
    State s = start;
    bool failed = false;
    for (const auto& a : lin.actions) {
        if (failed) {
            out.push_back({a.id, Verdict::not_reached});
            continue;
        }
        const Verdict v = shifted_step(a, s, k);
        failed = v != Verdict::feasible;
        out.push_back({a.id, v});
    }
    return out;
}

inline bool all_feasible(const std::vector<ActionVerdict>& v) {
    return std::all_of(v.begin(), v.end(), [](const auto& x) { return x.verdict == Verdict::feasible; });
}

namespace jic_detail {

struct MeanWalk {
    double utility = 0.0;
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> choices;
};

inline MeanWalk mean_walk(const PlanTree& tree, std::size_t n, State s) {
    const auto& node = tree.node(n);
    MeanWalk w;
    w.nodes.push_back(n);
    if (shifted_step(node.action, s, 0.0) != Verdict::feasible) {
        // Nothing further earns reward; complete the path by lowest index.
        for (std::size_t m = n; !tree.node(m).children.empty();) {
            m = tree.node(m).children[0];
            w.nodes.push_back(m);
            w.choices.push_back(0);
        }
        return w;
    }
    w.utility = node.action.reward;
    if (node.children.empty()) return w;
    std::optional<MeanWalk> best;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < node.children.size(); ++k) {
        MeanWalk sub = mean_walk(tree, node.children[k], s);
        if (!best || sub.utility > best->utility) {
            best = std::move(sub);
            best_k = k;
        }
    }
    w.utility += best->utility;
    w.choices.push_back(best_k);
    w.nodes.insert(w.nodes.end(), best->nodes.begin(), best->nodes.end());
    w.choices.insert(w.choices.end(), best->choices.begin(), best->choices.end());
    return w;
}

}  // namespace jic_detail

/// Commitment chosen by replacing every distribution with its mean and
/// taking, at each branch point, the alternative with the highest mean-case
/// utility (ties to the lowest index).
inline Linearization expected_plan(const ContingentPlan& plan, const State& start) {
    const PlanTree tree(plan);
    std::optional<jic_detail::MeanWalk> best;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < tree.roots().size(); ++k) {
        auto w = jic_detail::mean_walk(tree, tree.roots()[k], start);
        if (!best || w.utility > best->utility) {
            best = std::move(w);
            best_k = k;
        }
    }
    Linearization lin;
    lin.choices.push_back(best_k);
    lin.choices.insert(lin.choices.end(), best->choices.begin(), best->choices.end());
    for (auto n : best->nodes) lin.actions.push_back(tree.node(n).action);
    return lin;
}

// ---------------------------------------------------------------------------
// Branch insertion

/// Weighted set of start states at which candidate plans are compared.
struct StartQuery {
    std::vector<State> states;
    std::vector<double> weights;  // empty = uniform

    static StartQuery at(const State& s) { return {{s}, {}}; }

    double evaluate(const ValueGrid& vg) const {
        if (states.empty()) throw std::invalid_argument("StartQuery: no states");
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < states.size(); ++k) {
            const double w = weights.empty() ? 1.0 : weights[k];
            num += w * vg.value_at(states[k]);
            den += w;
        }
        return num / den;
    }
};

struct BranchCandidate {
    std::string insertion_point;    // "start" or the primary action the branch follows
    std::size_t insertion_rank = 0; // 0 = start, k = after the k-th primary action
    std::size_t alternative = 0;    // index into the alternative list
    std::string alternative_name;
    double score = 0.0;
};

/// Plan whose only start alternative is the primary chain.
inline ContingentPlan primary_plan(const ContingentPlan& catalogue, const std::vector<ActionRef>& primary) {
    ContingentPlan p = catalogue;
    p.start_alternatives = {make_chain(primary)};
    return p;
}

/// Rank of an insertion point along `primary`; throws if it is not a legal
/// branch position.
inline std::size_t insertion_rank(const std::vector<ActionRef>& primary, const std::string& point) {
    if (point == start_point) return 0;
    for (std::size_t k = 0; k < primary.size(); ++k) {
        if (primary[k].action_id != point) continue;
        if (k + 1 == primary.size())
            throw std::invalid_argument("cannot branch after the last primary action '" + point + "'");
        return k + 1;
    }
    throw std::invalid_argument("insertion point '" + point + "' is not an action of the primary plan");
}

/// Adds `alternative` as a new option at the given rank of the primary path
/// inside `plan`. The primary path is found by following, from the start,
/// the first alternative whose action matches each primary action in turn.
inline ContingentPlan insert_branch(ContingentPlan plan, const std::vector<ActionRef>& primary, std::size_t rank,
                                    const std::vector<ActionRef>& alternative) {
    PlanNode chain = make_chain(alternative);
    if (rank == 0) {
        plan.start_alternatives.push_back(std::move(chain));
        return plan;
    }
    std::vector<PlanNode>* level = &plan.start_alternatives;
    PlanNode* node = nullptr;
    for (std::size_t k = 0; k < rank; ++k) {
        auto it = std::find_if(level->begin(), level->end(),
                               [&](const PlanNode& n) { return n.step.action_id == primary[k].action_id; });
        if (it == level->end())
            throw std::invalid_argument("primary path not found in plan at '" + primary[k].action_id + "'");
        node = &*it;
        level = &node->alternatives;
    }
    node->alternatives.push_back(std::move(chain));
    return plan;
}

struct CandidateSolution {
    BranchCandidate candidate;
    ContingentPlan plan;
    OptimalSolution solution;
};

/// Builds and solves every (insertion point, alternative) one-branch plan on
/// top of `base`, in declaration order.
inline std::vector<CandidateSolution> solve_candidates(const ContingentPlan& base, const std::vector<ActionRef>& primary,
                                                       const std::vector<AlternativeSpec>& alternatives,
                                                       const Grid& grid, const StartQuery& query) {
    std::vector<CandidateSolution> out;
    for (std::size_t a = 0; a < alternatives.size(); ++a) {
        for (const auto& point : alternatives[a].insert_after) {
            BranchCandidate c;
            c.insertion_point = point;
            c.insertion_rank = insertion_rank(primary, point);
            c.alternative = a;
            c.alternative_name = alternatives[a].name;
            ContingentPlan p = insert_branch(base, primary, c.insertion_rank, alternatives[a].actions);
            OptimalSolution sol = solve_optimal(p, grid);
            c.score = query.evaluate(sol.root);
            out.push_back({std::move(c), std::move(p), std::move(sol)});
        }
    }
    return out;
}

/// Score descending, then earliest insertion point, then declaration order.
inline bool candidate_before(const BranchCandidate& x, const BranchCandidate& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.insertion_rank != y.insertion_rank) return x.insertion_rank < y.insertion_rank;
    return x.alternative < y.alternative;
}

inline std::vector<BranchCandidate> score_branch_points(const ContingentPlan& base, const std::vector<ActionRef>& primary,
                                                        const std::vector<AlternativeSpec>& alternatives,
                                                        const Grid& grid, const StartQuery& query) {
    std::vector<BranchCandidate> out;
    for (auto& cs : solve_candidates(base, primary, alternatives, grid, query)) out.push_back(std::move(cs.candidate));
    std::stable_sort(out.begin(), out.end(), candidate_before);
    return out;
}

/// `base` augmented with the best-scoring single branch; `base` itself when
/// there are no alternatives.
inline ContingentPlan insert_best_branch(const ContingentPlan& base, const std::vector<ActionRef>& primary,
                                         const std::vector<AlternativeSpec>& alternatives, const Grid& grid,
                                         const StartQuery& query) {
    auto ranked = score_branch_points(base, primary, alternatives, grid, query);
    if (ranked.empty()) return base;
    const auto& best = ranked.front();
    return insert_branch(base, primary, best.insertion_rank, alternatives[best.alternative].actions);
}

// ---------------------------------------------------------------------------
// Failure anticipation

struct AnticipationPoint {
    std::size_t boundary = 0;  // index of the next action; 0 = before the first
    std::string label;         // "start" or "after <action id>"
    double failure_fraction = 0.0;
};

/// Earliest action boundary at which the runs still going fail with
/// frequency >= confidence, or nullopt.
inline std::optional<AnticipationPoint> failure_anticipation_point(const Linearization& lin, const State& start,
                                                                   double confidence, std::size_t n,
                                                                   std::uint64_t seed) {
    if (!(confidence > 0.0 && confidence <= 1.0))
        throw std::invalid_argument("failure_anticipation_point: confidence must be in (0, 1]");
    const FailureProfile p = failure_profile(lin, start, n, seed);
    const std::size_t m = lin.actions.size();
    // Walk boundaries from the end so running totals are suffix sums.
    std::vector<std::size_t> failing_from(m + 1, 0);
    for (std::size_t k = m; k-- > 0;) failing_from[k] = failing_from[k + 1] + p.first_failures[k];
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t running = failing_from[k] + p.successes;
        if (running == 0) break;
        const double frac = static_cast<double>(failing_from[k]) / static_cast<double>(running);
        if (frac >= confidence)
            return AnticipationPoint{k, k == 0 ? std::string(start_point) : "after " + lin.actions[k - 1].id, frac};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Rectangular branch conditions

struct CellRect {
    std::size_t i0 = 0, i1 = 0;  // inclusive time cells
    std::size_t j0 = 0, j1 = 0;  // inclusive energy cells

    bool contains(std::size_t i, std::size_t j) const { return i0 <= i && i <= i1 && j0 <= j && j <= j1; }
};

struct RectRule {
    std::size_t alternative = 0;
    CellRect cells;
    double t_lo = 0.0, t_hi = 0.0, e_lo = 0.0, e_hi = 0.0;
};

/// Branch condition made of axis-aligned (time, energy) rectangles. The first
/// rule containing a state decides; uncovered states take the default.
struct RectCondition {
    std::string branch_point;
    Grid grid;
    std::vector<RectRule> rules;
    std::size_t default_alternative = 0;
    double agreement = 0.0;      // fraction of cells matching the cellwise argmax
    double loss = 0.0;           // mean per-cell utility lost versus the argmax
    double relative_loss = 0.0;  // loss / mean argmax utility
    std::vector<std::vector<double>> thresholds;  // per energy row: times where the argmax changes

    std::size_t evaluate_cell(std::size_t i, std::size_t j) const {
        for (const auto& r : rules)
            if (r.cells.contains(i, j)) return r.alternative;
        return default_alternative;
    }

    std::size_t evaluate(const State& s) const { return evaluate_cell(grid.time_cell(s.time), grid.energy_cell(s.energy)); }
};

namespace jic_detail {

struct BestRect {
    double gain = 0.0;
    CellRect rect;
};

// Maximum-sum axis-aligned sub-rectangle of w (nt x ne, row-major by time).
inline BestRect max_sum_rect(const std::vector<double>& w, std::size_t nt, std::size_t ne) {
    BestRect best;
    std::vector<double> col(nt);
    for (std::size_t j0 = 0; j0 < ne; ++j0) {
        std::fill(col.begin(), col.end(), 0.0);
        for (std::size_t j1 = j0; j1 < ne; ++j1) {
            for (std::size_t i = 0; i < nt; ++i) col[i] += w[i * ne + j1];
            double run = 0.0;
            std::size_t start = 0;
            for (std::size_t i = 0; i < nt; ++i) {
                if (run <= 0.0) {
                    run = 0.0;
                    start = i;
                }
                run += col[i];
                if (run > best.gain) best = {run, {start, i, j0, j1}};
            }
        }
    }
    return best;
}

}  // namespace jic_detail

/// Fits one rectangle per alternative to the cellwise argmax of
/// `alternatives` and measures how much utility the rectangles give up.
inline RectCondition extract_rect_condition(const std::string& branch_point, std::span<const ValueGrid> alternatives,
                                            const Grid& g) {
    if (alternatives.empty()) throw std::invalid_argument("extract_rect_condition: no alternatives");
    for (const auto& a : alternatives) require_same_grid(a.grid, g);
    std::vector<const ValueGrid*> ptrs;
    for (const auto& a : alternatives) ptrs.push_back(&a);
    auto [best, arg] = envelope_with_argmax(ptrs);

    RectCondition rc;
    rc.branch_point = branch_point;
    rc.grid = g;
    const std::size_t nt = g.nt, ne = g.ne, cells = g.cells();

    std::vector<std::size_t> count(alternatives.size(), 0);
    for (auto a : arg) ++count[a];
    rc.default_alternative = static_cast<std::size_t>(std::max_element(count.begin(), count.end()) - count.begin());

    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < alternatives.size(); ++k)
        if (k != rc.default_alternative && count[k] > 0) order.push_back(k);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return count[x] > count[y]; });

    std::vector<std::size_t> assigned(cells, rc.default_alternative);
    std::vector<bool> covered(cells, false);
    std::vector<double> w(cells);
    for (auto k : order) {
        for (std::size_t c = 0; c < cells; ++c)
            w[c] = covered[c] ? 0.0 : (arg[c] == k ? 1.0 : 0.0) - (arg[c] == assigned[c] ? 1.0 : 0.0);
        const auto br = jic_detail::max_sum_rect(w, nt, ne);
        if (br.gain <= 0.0) continue;
        const auto& r = br.rect;
        for (std::size_t i = r.i0; i <= r.i1; ++i)
            for (std::size_t j = r.j0; j <= r.j1; ++j)
                if (!covered[i * ne + j]) {
                    covered[i * ne + j] = true;
                    assigned[i * ne + j] = k;
                }
        const double dt = g.dt(), de = g.de();
        rc.rules.push_back({k, r, g.t0 + static_cast<double>(r.i0) * dt, g.t0 + static_cast<double>(r.i1 + 1) * dt,
                            g.e0 + static_cast<double>(r.j0) * de, g.e0 + static_cast<double>(r.j1 + 1) * de});
    }

    // The default alternative's own rectangle goes last; it never changes
    // evaluation because uncovered cells already fall back to the default.
    for (std::size_t c = 0; c < cells; ++c)
        w[c] = covered[c] ? 0.0 : (arg[c] == rc.default_alternative ? 1.0 : -1.0);
    if (const auto br = jic_detail::max_sum_rect(w, nt, ne); br.gain > 0.0) {
        const auto& r = br.rect;
        const double dt = g.dt(), de = g.de();
        rc.rules.push_back({rc.default_alternative, r, g.t0 + static_cast<double>(r.i0) * dt,
                            g.t0 + static_cast<double>(r.i1 + 1) * dt, g.e0 + static_cast<double>(r.j0) * de,
                            g.e0 + static_cast<double>(r.j1 + 1) * de});
    }

    std::size_t agree = 0;
    double lost = 0.0, total = 0.0;
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < ne; ++j) {
            const std::size_t c = i * ne + j;
            const std::size_t pick = rc.evaluate_cell(i, j);
            if (pick == arg[c]) ++agree;
            lost += best.values[c] - alternatives[pick].values[c];
            total += best.values[c];
        }
    rc.agreement = static_cast<double>(agree) / static_cast<double>(cells);
    rc.loss = lost / static_cast<double>(cells);
    rc.relative_loss = total > 0.0 ? lost / total : 0.0;

    rc.thresholds.assign(ne, {});
    for (std::size_t j = 0; j < ne; ++j)
        for (std::size_t i = 1; i < nt; ++i)
            if (arg[i * ne + j] != arg[(i - 1) * ne + j]) rc.thresholds[j].push_back(g.t0 + static_cast<double>(i) * g.dt());
    return rc;
}

/// Value grids of the alternatives at a branch point of a solved plan.
inline std::vector<ValueGrid> branch_alternative_values(const PlanTree& tree, const OptimalSolution& sol,
                                                        const std::string& branch_point) {
    std::vector<ValueGrid> out;
    if (branch_point == start_point) {
        for (auto r : sol.roots) out.push_back(sol.node_values[r]);
        return out;
    }
    for (std::size_t n = 0; n < tree.size(); ++n)
        if (tree.node(n).branch_id == branch_point) {
            for (auto c : tree.node(n).children) out.push_back(sol.node_values[c]);
            return out;
        }
    throw std::invalid_argument("unknown branch point '" + branch_point + "'");
}

/// Mean utility lost by the rectangle policy at the given start states,
/// relative to the mean cellwise-best utility there.
inline double relative_loss_at(const RectCondition& rc, std::span<const ValueGrid> alternatives,
                               std::span<const State> states) {
    double lost = 0.0, total = 0.0;
    for (const auto& s : states) {
        double best = 0.0;
        for (const auto& a : alternatives) best = std::max(best, a.value_at(s));
        lost += best - alternatives[rc.evaluate(s)].value_at(s);
        total += best;
    }
    return total > 0.0 ? lost / total : 0.0;
}

inline nlohmann::json rect_condition_json(const RectCondition& rc) {
    nlohmann::json j;
    j["branch_point"] = rc.branch_point;
    j["default_alternative"] = rc.default_alternative;
    j["agreement"] = rc.agreement;
    j["loss"] = rc.loss;
    j["relative_loss"] = rc.relative_loss;
    j["rectangles"] = nlohmann::json::array();
    for (const auto& r : rc.rules)
        j["rectangles"].push_back({{"alternative", r.alternative},
                                   {"t_lo_s", r.t_lo},
                                   {"t_hi_s", r.t_hi},
                                   {"e_lo_ah", r.e_lo},
                                   {"e_hi_ah", r.e_hi}});
    j["thresholds"] = nlohmann::json::array();
    for (std::size_t row = 0; row < rc.thresholds.size(); ++row)
        if (!rc.thresholds[row].empty())
            j["thresholds"].push_back({{"e_ah", rc.grid.energy_center(row)}, {"t_s", rc.thresholds[row]}});
    return j;
}

}  // namespace jicplan
