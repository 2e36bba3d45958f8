#pragma once

// Backward dynamic programming over a discretized (time, energy) grid.
//
// Grid semantics shared by every backup:
//  - a state is a cell; its value is taken at the cell center;
//  - an action outcome (d, x) moves time by the offset floor(d/dt + 1/2) and
//    energy down by floor(x/de + 1/2) cells (ties go to the larger offset);
//  - the outcome is exhausted iff x exceeds the cell-center energy (true
//    zero, not the axis minimum); exhausted outcomes earn nothing;
//  - landings past the last time cell are clamped to it, landings below the
//    first energy cell keep the reward but have no downstream value;
//  - an action whose window has not opened waits, at no energy cost, until
//    the cell containing `window.earliest`.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "normal.hpp"
#include "plan.hpp"
#include "plan_tree.hpp"
#include "sim.hpp"

namespace jicplan {

inline constexpr std::size_t default_time_cells = 420;
inline constexpr std::size_t default_energy_cells = 200;

struct Grid {
    double t0 = 0.0, t1 = 1.0;
    std::size_t nt = 2;
    double e0 = 0.0, e1 = 1.0;
    std::size_t ne = 2;

    double dt() const { return (t1 - t0) / static_cast<double>(nt); }
    double de() const { return (e1 - e0) / static_cast<double>(ne); }
    std::size_t cells() const { return nt * ne; }
    double time_center(std::size_t i) const { return t0 + (static_cast<double>(i) + 0.5) * dt(); }
    double energy_center(std::size_t j) const { return e0 + (static_cast<double>(j) + 0.5) * de(); }

    /// Cell containing t, clamped to the grid.
    std::size_t time_cell(double t) const { return clamp_index((t - t0) / dt(), nt); }
    std::size_t energy_cell(double e) const { return clamp_index((e - e0) / de(), ne); }

    bool operator==(const Grid&) const = default;

private:
    static std::size_t clamp_index(double x, std::size_t n) {
        if (!(x > 0.0)) return 0;
        const double f = std::floor(x);
        return f >= static_cast<double>(n - 1) ? n - 1 : static_cast<std::size_t>(f);
    }
};

inline Grid build_grid(double t0, double t1, std::size_t nt, double e0, double e1, std::size_t ne) {
    if (!(t0 < t1)) throw std::invalid_argument("grid: t0 must be < t1");
    if (!(e0 < e1)) throw std::invalid_argument("grid: e0 must be < e1");
    if (nt < 2 || ne < 2) throw std::invalid_argument("grid: nt and ne must be >= 2");
    return Grid{t0, t1, nt, e0, e1, ne};
}

inline Grid default_grid(const ContingentPlan& plan) {
    return build_grid(plan.time_axis.lo, plan.time_axis.hi, default_time_cells, plan.energy_axis.lo,
                      plan.energy_axis.hi, default_energy_cells);
}

/// Cell offset of a continuous displacement on an axis of cell width `width`.
inline long snap_offset(double x, double width) { return static_cast<long>(std::floor(x / width + 0.5)); }

/// Expected utility per cell, stored row-major by time then energy.
struct ValueGrid {
    Grid grid;
    std::vector<double> values;

    explicit ValueGrid(const Grid& g, double fill = 0.0) : grid(g), values(g.cells(), fill) {}

    double& at(std::size_t i, std::size_t j) { return values[i * grid.ne + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * grid.ne + j]; }

    double value_at(const State& s) const { return at(grid.time_cell(s.time), grid.energy_cell(s.energy)); }
};

inline void require_same_grid(const Grid& a, const Grid& b) {
    if (!(a == b)) throw std::invalid_argument("value grids are defined on different grids");
}

/// Discretized outcome distribution of one action. Duration and energy are
/// independent, so the kernel is a product of a time-offset distribution and
/// an energy-offset distribution; the energy side is additionally cut per
/// energy level where draws would take the level below zero.
struct OutcomeKernel {
    long time_first = 0;
    std::vector<double> time_mass;
    long energy_first = 0;
    std::vector<double> energy_mass;
    // Per energy cell j: energy bins [0, cut[j]) never exhaust from this
    // level, bin cut[j] keeps only `partial[j]` of its mass, later bins
    // always exhaust. credit[j] = P(not exhausted), exhaustion[j] = 1 - credit[j].
    std::vector<std::size_t> cut;
    std::vector<double> partial;
    std::vector<double> credit;
    std::vector<double> exhaustion;

    double total_mass(std::size_t j) const {
        double s = exhaustion[j];
        for (std::size_t k = 0; k < cut[j] && k < energy_mass.size(); ++k) s += energy_mass[k];
        return s + partial[j];
    }
};

namespace dp_detail {

inline constexpr double tail_sigmas = 10.0;

struct Bins {
    long first = 0;
    std::vector<double> mass;
    std::vector<double> lo, hi;  // edges in displacement units; first lo = -inf, last hi = +inf
};

inline Bins make_bins(const UncertainQuantity& q, double width) {
    Bins b;
    const TruncatedNormal dist(q);
    if (dist.degenerate()) {
        b.first = snap_offset(q.mean, width);
        b.mass = {1.0};
        b.lo = {-INFINITY};
        b.hi = {INFINITY};
        return b;
    }
    const long first = snap_offset(std::max(0.0, q.mean - tail_sigmas * q.stddev), width);
    const long last = snap_offset(q.mean + tail_sigmas * q.stddev, width);
    b.first = first;
    for (long a = first; a <= last; ++a) {
        const double lo = a == first ? -INFINITY : (static_cast<double>(a) - 0.5) * width;
        const double hi = a == last ? INFINITY : (static_cast<double>(a) + 0.5) * width;
        b.lo.push_back(lo);
        b.hi.push_back(hi);
        b.mass.push_back(dist.probability(lo, hi));
    }
    return b;
}

}  // namespace dp_detail

inline OutcomeKernel discretize_kernel(const Action& action, const Grid& grid) {
    OutcomeKernel k;
    auto tb = dp_detail::make_bins(action.duration, grid.dt());
    k.time_first = tb.first;
    k.time_mass = std::move(tb.mass);

    auto eb = dp_detail::make_bins(action.energy, grid.de());
    k.energy_first = eb.first;
    k.energy_mass = eb.mass;

    const TruncatedNormal dist(action.energy);
    const std::size_t nb = eb.mass.size();
    k.cut.resize(grid.ne);
    k.partial.resize(grid.ne);
    k.credit.resize(grid.ne);
    k.exhaustion.resize(grid.ne);
    for (std::size_t j = 0; j < grid.ne; ++j) {
        const double level = grid.energy_center(j);
        std::size_t c = 0;
        double credit = 0.0;
        if (dist.degenerate()) {
            const bool ok = action.energy.mean <= level;
            c = ok ? 1 : 0;
            credit = ok ? 1.0 : 0.0;
            k.partial[j] = 0.0;
        } else {
            while (c < nb && eb.hi[c] <= level) credit += eb.mass[c++];
            k.partial[j] = (c < nb && level >= 0.0) ? dist.probability(eb.lo[c], level) : 0.0;
            // Point mass at `level` is zero for a continuous draw, so P(x <= level) = P(x < level).
            credit += k.partial[j];
        }
        k.cut[j] = c;
        k.credit[j] = std::min(credit, 1.0);
        k.exhaustion[j] = 1.0 - k.credit[j];
    }
    return k;
}

namespace dp_detail {

// Value of running `action` from every cell, followed by `next` (nullptr
// for a leaf), before applying start preconditions.
inline std::vector<double> run_values(const Action& action, const OutcomeKernel& k, const ValueGrid* next,
                                      const Grid& g) {
    const std::size_t nt = g.nt, ne = g.ne;
    std::vector<double> u(g.cells(), 0.0);
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < ne; ++j) u[i * ne + j] = action.reward * k.credit[j];
    if (!next) return u;

    // Energy side first: w(i, j) = E[next(i, j - b) ; not exhausted].
    std::vector<double> w(g.cells(), 0.0);
    const auto& nv = next->values;
    for (std::size_t j = 0; j < ne; ++j) {
        const std::size_t nb = std::min(k.cut[j], k.energy_mass.size());
        for (std::size_t b = 0; b <= nb && b < k.energy_mass.size(); ++b) {
            const double m = b < nb ? k.energy_mass[b] : k.partial[j];
            if (m == 0.0) continue;
            const long target = static_cast<long>(j) - (k.energy_first + static_cast<long>(b));
            if (target < 0) continue;
            if (target >= static_cast<long>(ne)) throw std::logic_error("negative energy offset");
            for (std::size_t i = 0; i < nt; ++i) w[i * ne + j] += m * nv[i * ne + static_cast<std::size_t>(target)];
        }
    }
    // Then time: u(i, j) += sum_a p_a w(min(i + a, nt - 1), j).
    for (std::size_t i = 0; i < nt; ++i) {
        double* row = &u[i * ne];
        for (std::size_t a = 0; a < k.time_mass.size(); ++a) {
            const double p = k.time_mass[a];
            if (p == 0.0) continue;
            const long ti = static_cast<long>(i) + k.time_first + static_cast<long>(a);
            const std::size_t src = static_cast<std::size_t>(std::clamp<long>(ti, 0, static_cast<long>(nt) - 1));
            const double* wrow = &w[src * ne];
            for (std::size_t j = 0; j < ne; ++j) row[j] += p * wrow[j];
        }
    }
    return u;
}

}  // namespace dp_detail

/// Time cell an action actually starts from when launched at cell `i`
/// (the waiting rule), and the real start time used for the window check.
inline std::pair<std::size_t, double> start_cell(const Action& a, const Grid& g, std::size_t i) {
    const double t = g.time_center(i);
    if (t >= a.window.earliest) return {i, t};
    return {g.time_cell(a.window.earliest), a.window.earliest};
}

inline bool start_feasible(const Action& a, double start_time, double energy) {
    return start_time <= a.window.latest && energy > a.energy_floor;
}

/// One backup step for `action` followed by `next` (nullptr at a leaf).
inline ValueGrid backup(const Action& action, const ValueGrid* next, const Grid& g) {
    if (next) require_same_grid(next->grid, g);
    const OutcomeKernel k = discretize_kernel(action, g);
    const auto u = dp_detail::run_values(action, k, next, g);
    ValueGrid out(g);
    for (std::size_t i = 0; i < g.nt; ++i) {
        const auto [si, st] = start_cell(action, g, i);
        for (std::size_t j = 0; j < g.ne; ++j)
            if (start_feasible(action, st, g.energy_center(j))) out.at(i, j) = u[si * g.ne + j];
    }
    return out;
}

/// Pointwise max with argmax; ties go to the lowest index.
inline std::pair<ValueGrid, std::vector<std::uint32_t>> envelope_with_argmax(std::span<const ValueGrid* const> grids) {
    if (grids.empty()) throw std::invalid_argument("upper envelope of zero grids");
    const Grid& g = grids[0]->grid;
    ValueGrid out = *grids[0];
    std::vector<std::uint32_t> arg(g.cells(), 0);
    for (std::size_t k = 1; k < grids.size(); ++k) {
        require_same_grid(grids[k]->grid, g);
        const auto& v = grids[k]->values;
        for (std::size_t c = 0; c < v.size(); ++c)
            if (v[c] > out.values[c]) {
                out.values[c] = v[c];
                arg[c] = static_cast<std::uint32_t>(k);
            }
    }
    return {std::move(out), std::move(arg)};
}

inline ValueGrid upper_envelope(std::span<const ValueGrid> grids) {
    std::vector<const ValueGrid*> ptrs;
    for (const auto& g : grids) ptrs.push_back(&g);
    return envelope_with_argmax(ptrs).first;
}

/// Backup of a plan node given the value grids of its alternatives
/// (empty for a leaf); branch points take the per-cell best alternative.
inline ValueGrid backup_node(const Action& action, std::span<const ValueGrid> successors, const Grid& g) {
    if (successors.empty()) return backup(action, nullptr, g);
    if (successors.size() == 1) return backup(action, &successors[0], g);
    const ValueGrid next = upper_envelope(successors);
    return backup(action, &next, g);
}

/// Expected utility of executing `lin` from each start cell.
inline ValueGrid solve_commit(const Linearization& lin, const Grid& g) {
    if (lin.actions.empty()) return ValueGrid(g);
    std::optional<ValueGrid> next;
    for (std::size_t k = lin.actions.size(); k-- > 0;) next = backup(lin.actions[k], next ? &*next : nullptr, g);
    return std::move(*next);
}

/// Chosen alternative per cell for every branch point, keyed by branch id.
struct GridPolicy {
    Grid grid;
    std::map<std::string, std::vector<std::uint32_t>> choices;
    std::map<std::string, std::size_t> arity;

    std::optional<std::size_t> choose(const std::string& id, const State& s) const {
        auto it = choices.find(id);
        if (it == choices.end()) return std::nullopt;
        return it->second[grid.time_cell(s.time) * grid.ne + grid.energy_cell(s.energy)];
    }

    /// ExecutionPolicy adapter.
    std::optional<std::size_t> operator()(const BranchPoint& bp, const State& s) const {
        return choose(std::string(bp.id), s);
    }
};

struct OptimalSolution {
    ValueGrid root;
    GridPolicy policy;
    std::vector<ValueGrid> node_values;  // indexed like PlanTree nodes
    std::vector<std::size_t> roots;      // PlanTree indices of the start alternatives
};

/// Single backward pass over the plan tree. Valid because time only advances
/// and energy only depletes, so successors never depend on predecessors.
inline OptimalSolution solve_optimal(const PlanTree& tree, const Grid& g) {
    std::vector<std::optional<ValueGrid>> vals(tree.size());
    GridPolicy policy{g, {}, {}};
    for (std::size_t n = tree.size(); n-- > 0;) {
        const auto& node = tree.node(n);
        if (node.children.empty()) {
            vals[n] = backup(node.action, nullptr, g);
        } else if (node.children.size() == 1) {
            vals[n] = backup(node.action, &*vals[node.children[0]], g);
        } else {
            std::vector<const ValueGrid*> alts;
            for (auto c : node.children) alts.push_back(&*vals[c]);
            auto [next, arg] = envelope_with_argmax(alts);
            policy.choices[node.branch_id] = std::move(arg);
            policy.arity[node.branch_id] = alts.size();
            vals[n] = backup(node.action, &next, g);
        }
    }
    std::vector<const ValueGrid*> starts;
    for (auto r : tree.roots()) starts.push_back(&*vals[r]);
    auto [root, arg] = envelope_with_argmax(starts);
    if (starts.size() >= 2) {
        policy.choices[std::string(start_point)] = std::move(arg);
        policy.arity[std::string(start_point)] = starts.size();
    }
    OptimalSolution sol{std::move(root), std::move(policy), {}, {tree.roots().begin(), tree.roots().end()}};
    for (auto& v : vals) sol.node_values.push_back(std::move(*v));
    return sol;
}

inline OptimalSolution solve_optimal(const ContingentPlan& plan, const Grid& g) { return solve_optimal(PlanTree(plan), g); }

struct Curve {
    double energy = 0.0;  // center of the sliced energy cell
    std::vector<double> times;
    std::vector<double> values;
};

/// Row of the energy cell containing `e`, with cell-center times.
inline Curve slice_energy(const ValueGrid& vg, double e) {
    const Grid& g = vg.grid;
    if (!(e >= g.e0 && e <= g.e1)) throw std::out_of_range("slice energy outside the grid's energy range");
    const std::size_t j = g.energy_cell(e);
    Curve c;
    c.energy = g.energy_center(j);
    for (std::size_t i = 0; i < g.nt; ++i) {
        c.times.push_back(g.time_center(i));
        c.values.push_back(vg.at(i, j));
    }
    return c;
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_value_grid_csv(std::ostream& os, const ValueGrid& vg) {
    const Grid& g = vg.grid;
    os << "t_s,e_ah,value\n";
    for (std::size_t i = 0; i < g.nt; ++i)
        for (std::size_t j = 0; j < g.ne; ++j)
            os << format_number(g.time_center(i)) << ',' << format_number(g.energy_center(j)) << ','
               << format_number(vg.at(i, j)) << '\n';
}

inline void write_curve_csv(std::ostream& os, const Curve& c) {
    os << "t_s,value\n";
    for (std::size_t i = 0; i < c.times.size(); ++i)
        os << format_number(c.times[i]) << ',' << format_number(c.values[i]) << '\n';
}

inline void write_grid_policy_csv(std::ostream& os, const GridPolicy& p) {
    const Grid& g = p.grid;
    os << "branch_point,t_s,e_ah,alternative\n";
    for (const auto& [id, arg] : p.choices)
        for (std::size_t i = 0; i < g.nt; ++i)
            for (std::size_t j = 0; j < g.ne; ++j)
                os << id << ',' << format_number(g.time_center(i)) << ',' << format_number(g.energy_center(j)) << ','
                   << arg[i * g.ne + j] << '\n';
}

/// Reads a policy written by write_grid_policy_csv back onto `g`. Every
/// branch point must list all cells of `g` in the written order.
inline GridPolicy read_grid_policy_csv(std::istream& is, const Grid& g) {
    GridPolicy p{g, {}, {}};
    std::string line;
    if (!std::getline(is, line) || line != "branch_point,t_s,e_ah,alternative")
        throw std::runtime_error("policy file: unexpected header");
    std::map<std::string, std::size_t> filled;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id, ts, es, as;
        if (!std::getline(row, id, ',') || !std::getline(row, ts, ',') || !std::getline(row, es, ',') ||
            !std::getline(row, as))
            throw std::runtime_error("policy file: malformed row '" + line + "'");
        auto& arg = p.choices[id];
        if (arg.empty()) arg.assign(g.cells(), 0);
        std::size_t& n = filled[id];
        if (n >= g.cells()) throw std::runtime_error("policy file: too many rows for branch point " + id);
        const std::size_t i = g.time_cell(std::stod(ts)), j = g.energy_cell(std::stod(es));
        if (i * g.ne + j != n) throw std::runtime_error("policy file: cell order does not match the grid");
        arg[n++] = static_cast<std::uint32_t>(std::stoul(as));
        p.arity[id] = std::max<std::size_t>(p.arity[id], arg[n - 1] + 1);
    }
    for (const auto& [id, n] : filled)
        if (n != g.cells()) throw std::runtime_error("policy file: incomplete grid for branch point " + id);
    return p;
}

}  // namespace jicplan
