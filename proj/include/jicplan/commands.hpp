#pragma once

// Command implementations behind the `jicplan` tool. Each returns the process
// exit status: 0 success, 1 domain validation failure, 2 input or syntax
// failure, 3 internal contract breach.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "contingency.hpp"
#include "dp.hpp"
#include "errors.hpp"
#include "plan.hpp"
#include "plan_tree.hpp"
#include "scenario_io.hpp"
#include "sim.hpp"

namespace jicplan {

enum ExitStatus : int { exit_ok = 0, exit_domain = 1, exit_input = 2, exit_internal = 3 };

struct RunConfig {
    std::string scenario;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    std::size_t samples = 10000;
    std::optional<std::size_t> nt, ne;
    std::optional<double> t0, t1, e0, e1;
    State probe{49500.0, 11.0};
    std::optional<double> energy;  // slice / sweep energy; defaults to the probe energy
    std::string policy = "optimal";
    double confidence = 0.9;
    std::size_t traces = 0;
};

namespace cmd_detail {

/// Raised for bad user input that is not a scenario problem.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Grid config_grid(const RunConfig& cfg, const ContingentPlan& plan) {
    try {
        return build_grid(cfg.t0.value_or(plan.time_axis.lo), cfg.t1.value_or(plan.time_axis.hi),
                          cfg.nt.value_or(default_time_cells), cfg.e0.value_or(plan.energy_axis.lo),
                          cfg.e1.value_or(plan.energy_axis.hi), cfg.ne.value_or(default_energy_cells));
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return std::filesystem::path(cfg.out_dir) / name;
}

template <class Fn>
void write_file(const RunConfig& cfg, const std::string& name, Fn&& fn) {
    std::ofstream os(out_path(cfg, name), std::ios::binary);
    if (!os) throw InputError("cannot write " + out_path(cfg, name).string());
    fn(os);
}

inline std::vector<ValueGrid> commit_grids(const std::vector<Linearization>& lins, const Grid& g) {
    std::vector<ValueGrid> out;
    for (const auto& l : lins) out.push_back(solve_commit(l, g));
    return out;
}

inline void write_linearizations(const RunConfig& cfg, const std::vector<Linearization>& lins) {
    write_file(cfg, "linearizations.csv", [&](std::ostream& os) {
        os << "index,actions\n";
        for (std::size_t k = 0; k < lins.size(); ++k) {
            std::string s = lins[k].label();
            for (auto& ch : s)
                if (ch == ',') ch = ';';
            os << k << ',' << s << '\n';
        }
    });
}

// Shared error mapping for every command.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const SyntaxError& e) {
        err << "syntax error at byte " << e.position() << ": " << e.what() << '\n';
        return exit_input;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << '\n';
        return exit_input;
    } catch (const ValidationError& e) {
        err << e.what() << '\n';
        return exit_domain;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const PlanError& e) {
        err << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const ContractError& e) {
        err << "contract breach: " << e.what() << '\n';
        return exit_internal;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
}

}  // namespace cmd_detail

inline int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return cmd_detail::guarded(err, [&] {
        const ContingentPlan plan = read_plan_document(read_text_file(cfg.scenario));
        const auto report = validate_plan(plan);
        if (report.empty()) {
            out << "ok: " << plan.name << " (" << plan.actions.size() << " actions, " << count_nodes(plan)
                << " nodes, " << count_branch_points(plan) << " branch points)\n";
            return int(exit_ok);
        }
        for (const auto& v : report) out << "violation: " << v.subject << ": " << v.message << '\n';
        return int(exit_domain);
    });
}

/// Writes optimal.csv, commit_<k>.csv, envelope.csv, policy.csv and
/// linearizations.csv; prints the values at the probe state.
inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return cmd_detail::guarded(err, [&] {
        const ContingentPlan plan = load_plan(cfg.scenario);
        const Grid g = cmd_detail::config_grid(cfg, plan);
        const auto sol = solve_optimal(plan, g);
        const auto lins = linearizations(plan);
        const auto commits = cmd_detail::commit_grids(lins, g);
        const ValueGrid env = upper_envelope(commits);

        cmd_detail::write_file(cfg, "optimal.csv", [&](std::ostream& os) { write_value_grid_csv(os, sol.root); });
        for (std::size_t k = 0; k < commits.size(); ++k)
            cmd_detail::write_file(cfg, "commit_" + std::to_string(k) + ".csv",
                                   [&](std::ostream& os) { write_value_grid_csv(os, commits[k]); });
        cmd_detail::write_file(cfg, "envelope.csv", [&](std::ostream& os) { write_value_grid_csv(os, env); });
        cmd_detail::write_file(cfg, "policy.csv", [&](std::ostream& os) { write_grid_policy_csv(os, sol.policy); });
        cmd_detail::write_linearizations(cfg, lins);

        out << "grid: " << g.nt << " x " << g.ne << " cells, " << count_nodes(plan) << " plan nodes, "
            << g.cells() * count_nodes(plan) << " DP states\n";
        out << "probe (" << format_number(cfg.probe.time) << " s, " << format_number(cfg.probe.energy) << " Ah)\n";
        out << "  optimal  " << format_number(sol.root.value_at(cfg.probe)) << '\n';
        out << "  envelope " << format_number(env.value_at(cfg.probe)) << '\n';
        for (std::size_t k = 0; k < commits.size(); ++k)
            out << "  commit_" << k << " [" << lins[k].label() << "] " << format_number(commits[k].value_at(cfg.probe))
                << '\n';
        return int(exit_ok);
    });
}

/// Writes slice.csv with the optimal, envelope and per-commitment curves at
/// one energy level.
inline int cmd_slice(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return cmd_detail::guarded(err, [&] {
        const ContingentPlan plan = load_plan(cfg.scenario);
        const Grid g = cmd_detail::config_grid(cfg, plan);
        const double e = cfg.energy.value_or(cfg.probe.energy);
        if (!(e >= g.e0 && e <= g.e1))
            throw cmd_detail::InputError("energy " + format_number(e) + " outside [" + format_number(g.e0) + ", " +
                                         format_number(g.e1) + "]");
        const auto sol = solve_optimal(plan, g);
        const auto lins = linearizations(plan);
        const auto commits = cmd_detail::commit_grids(lins, g);
        const ValueGrid env = upper_envelope(commits);

        const Curve opt = slice_energy(sol.root, e);
        const Curve envc = slice_energy(env, e);
        std::vector<Curve> cc;
        for (const auto& c : commits) cc.push_back(slice_energy(c, e));
        cmd_detail::write_file(cfg, "slice.csv", [&](std::ostream& os) {
            os << "t_s,optimal,envelope";
            for (std::size_t k = 0; k < cc.size(); ++k) os << ",commit_" << k;
            os << '\n';
            for (std::size_t i = 0; i < opt.times.size(); ++i) {
                os << format_number(opt.times[i]) << ',' << format_number(opt.values[i]) << ','
                   << format_number(envc.values[i]);
                for (const auto& c : cc) os << ',' << format_number(c.values[i]);
                os << '\n';
            }
        });
        cmd_detail::write_linearizations(cfg, lins);
        out << "slice at energy cell " << format_number(opt.energy) << " Ah: " << opt.times.size() << " points\n";
        return int(exit_ok);
    });
}

namespace cmd_detail {

inline std::optional<std::size_t> parse_index(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    return std::stoul(s);
}

inline Linearization pick_linearization(const std::vector<Linearization>& lins, const std::string& spec) {
    if (auto k = parse_index(spec)) {
        if (*k >= lins.size()) throw InputError("commit index " + spec + " out of range");
        return lins[*k];
    }
    for (const auto& l : lins)
        if (l.label() == spec) return l;
    throw InputError("no linearization matches '" + spec + "'");
}

}  // namespace cmd_detail

/// Monte Carlo estimate under a policy: optimal | expected | commit:<k or
/// ids> | grid-policy:<file>. Writes trace_<k>.csv for the first --traces runs.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return cmd_detail::guarded(err, [&] {
        const ContingentPlan plan = load_plan(cfg.scenario);
        const PlanTree tree(plan);
        if (cfg.samples == 0) throw cmd_detail::InputError("--samples must be >= 1");

        auto report = [&](const auto& policy) {
            const UtilityEstimate est = estimate_utility(tree, policy, cfg.probe, cfg.samples, cfg.seed);
            out << "policy " << cfg.policy << " from (" << format_number(cfg.probe.time) << " s, "
                << format_number(cfg.probe.energy) << " Ah)\n";
            out << "  mean " << format_number(est.mean) << "  stderr " << format_number(est.std_error) << "  n "
                << est.n << "  ci95 [" << format_number(est.ci_lo) << ", " << format_number(est.ci_hi) << "]\n";
            for (std::size_t k = 0; k < cfg.traces; ++k) {
                Rng rng(cfg.seed + k);
                Trace t = execute_once(tree, policy, cfg.probe, rng);
                t.seed = cfg.seed + k;
                cmd_detail::write_file(cfg, "trace_" + std::to_string(k) + ".csv",
                                       [&](std::ostream& os) { write_trace_csv(os, t); });
            }
            return int(exit_ok);
        };

        const std::string& spec = cfg.policy;
        if (spec == "optimal") {
            const Grid g = cmd_detail::config_grid(cfg, plan);
            return report(solve_optimal(tree, g).policy);
        }
        if (spec == "expected") return report(CommitPolicy(expected_plan(plan, cfg.probe)));
        if (spec.rfind("commit:", 0) == 0)
            return report(CommitPolicy(cmd_detail::pick_linearization(linearizations(plan), spec.substr(7))));
        if (spec.rfind("grid-policy:", 0) == 0) {
            const std::string file = spec.substr(12);
            std::ifstream is(file);
            if (!is) throw cmd_detail::InputError("cannot open policy file '" + file + "'");
            const Grid g = cmd_detail::config_grid(cfg, plan);
            GridPolicy gp;
            try {
                gp = read_grid_policy_csv(is, g);
            } catch (const std::runtime_error& e) {
                throw cmd_detail::InputError(e.what());
            }
            return report(gp);
        }
        throw cmd_detail::InputError("unknown policy '" + spec + "'");
    });
}

/// Scores every declared single branch, writes candidates.csv (at the probe),
/// sweep.csv (all start times at the sweep energy), failure_profile.csv,
/// augmented.json and rect_condition.json for the inserted branch point.
inline int cmd_improve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return cmd_detail::guarded(err, [&] {
        const ContingentPlan plan = load_plan(cfg.scenario);
        if (!plan.improve) {
            err << "error: scenario declares no primary plan and alternatives (missing \"improve\")\n";
            return int(exit_domain);
        }
        const auto& imp = *plan.improve;
        const Grid g = cmd_detail::config_grid(cfg, plan);
        const ContingentPlan base = primary_plan(plan, imp.primary);
        const StartQuery query = StartQuery::at(cfg.probe);

        auto solved = solve_candidates(base, imp.primary, imp.alternatives, g, query);
        std::vector<std::size_t> order(solved.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return candidate_before(solved[a].candidate, solved[b].candidate); });

        cmd_detail::write_file(cfg, "candidates.csv", [&](std::ostream& os) {
            os << "insertion_point,alternative,score\n";
            for (auto k : order) {
                const auto& c = solved[k].candidate;
                os << c.insertion_point << ',' << c.alternative_name << ',' << format_number(c.score) << '\n';
            }
        });

        const double e = cfg.energy.value_or(cfg.probe.energy);
        if (!(e >= g.e0 && e <= g.e1)) throw cmd_detail::InputError("sweep energy outside the grid");
        const ValueGrid primary_values = solve_optimal(base, g).root;
        cmd_detail::write_file(cfg, "sweep.csv", [&](std::ostream& os) {
            os << "t_s,insertion_point,alternative,score\n";
            const Curve prim = slice_energy(primary_values, e);
            for (std::size_t i = 0; i < g.nt; ++i) {
                os << format_number(prim.times[i]) << ",none,primary," << format_number(prim.values[i]) << '\n';
                for (const auto& cs : solved)
                    os << format_number(prim.times[i]) << ',' << cs.candidate.insertion_point << ','
                       << cs.candidate.alternative_name << ','
                       << format_number(cs.solution.root.at(i, g.energy_cell(e))) << '\n';
            }
        });

        const auto prim_lin = linearizations(base).front();
        const FailureProfile fp = failure_profile(prim_lin, cfg.probe, cfg.samples, cfg.seed);
        cmd_detail::write_file(cfg, "failure_profile.csv", [&](std::ostream& os) {
            os << "action_id,first_failure_probability\n";
            for (std::size_t k = 0; k < fp.action_ids.size(); ++k)
                os << fp.action_ids[k] << ',' << format_number(fp.failure_probability(k)) << '\n';
            os << "success," << format_number(fp.success_probability()) << '\n';
        });
        if (auto ml = fp.most_likely_failure())
            out << "most likely first failure: " << fp.action_ids[*ml] << " ("
                << format_number(fp.failure_probability(*ml)) << ")\n";
        if (cfg.confidence > 0.0 && cfg.confidence <= 1.0) {
            if (auto ap = failure_anticipation_point(prim_lin, cfg.probe, cfg.confidence, cfg.samples, cfg.seed))
                out << "failure predictable with confidence " << format_number(cfg.confidence) << " at: " << ap->label
                    << '\n';
            else
                out << "no boundary reaches failure confidence " << format_number(cfg.confidence) << '\n';
        }

        if (order.empty()) {
            cmd_detail::write_file(cfg, "augmented.json", [&](std::ostream& os) { os << serialize_plan(base); });
            out << "no alternatives declared; plan unchanged\n";
            return int(exit_ok);
        }

        const auto& best = solved[order.front()];
        cmd_detail::write_file(cfg, "augmented.json", [&](std::ostream& os) { os << serialize_plan(best.plan); });
        const std::vector<std::size_t> prefix_path(best.candidate.insertion_rank, 0);
        const std::string bp = branch_point_id(prefix_path);
        const PlanTree tree(best.plan);
        const auto alts = branch_alternative_values(tree, best.solution, bp);
        const RectCondition rc = extract_rect_condition(bp, alts, g);
        cmd_detail::write_file(cfg, "rect_condition.json",
                               [&](std::ostream& os) { os << rect_condition_json(rc).dump(2) << '\n'; });

        out << "best branch: " << best.candidate.alternative_name << " after " << best.candidate.insertion_point
            << " (score " << format_number(best.candidate.score) << ", primary alone "
            << format_number(primary_values.value_at(cfg.probe)) << ")\n";
        out << "branch condition at " << bp << ": " << rc.rules.size() << " rectangle(s), agreement "
            << format_number(rc.agreement) << ", relative loss " << format_number(rc.relative_loss) << '\n';
        return int(exit_ok);
    });
}

}  // namespace jicplan
