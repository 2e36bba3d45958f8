// jicplan: evaluate, optimize and augment contingent activity plans.

#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <jicplan/commands.hpp>

namespace {

bool parse_probe(const std::string& text, jicplan::State& out) {
    std::istringstream in(text);
    char comma = 0;
    double t = 0.0, e = 0.0;
    if (!(in >> t >> comma >> e) || comma != ',') return false;
    in >> std::ws;
    if (!in.eof()) return false;
    out = {t, e};
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contingent plan solver for activities with uncertain duration and energy use"};
    app.require_subcommand(1);

    jicplan::RunConfig cfg;
    std::string probe_text;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario, "Scenario file (JSON)")->required();
        sub->add_option("--out", cfg.out_dir, "Output directory");
        sub->add_option("--seed", cfg.seed, "Random seed")->check(CLI::PositiveNumber);
        sub->add_option("--samples", cfg.samples, "Monte Carlo sample count")->check(CLI::PositiveNumber);
        sub->add_option("--nt", cfg.nt, "Time cells");
        sub->add_option("--ne", cfg.ne, "Energy cells");
        sub->add_option("--t0", cfg.t0, "Grid start time (s of day)");
        sub->add_option("--t1", cfg.t1, "Grid end time (s of day)");
        sub->add_option("--e0", cfg.e0, "Grid minimum energy (Ah)");
        sub->add_option("--e1", cfg.e1, "Grid maximum energy (Ah)");
        sub->add_option("--probe", probe_text, "Start state \"t,e\" (s, Ah)");
        sub->add_option("--energy", cfg.energy, "Slice / sweep energy (Ah)");
        sub->add_option("--policy", cfg.policy, "optimal | expected | commit:<k or ids> | grid-policy:<file>");
        sub->add_option("--confidence", cfg.confidence, "Failure anticipation confidence");
        sub->add_option("--traces", cfg.traces, "Sample traces to write");
    };

    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    auto* solve = app.add_subcommand("solve", "Optimal, commit and envelope value grids plus policy");
    auto* slice = app.add_subcommand("slice", "Value curves at one energy level");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo utility estimate under a policy");
    auto* improve = app.add_subcommand("improve", "Score and insert a single contingent branch");
    for (auto* sub : {validate, solve, slice, simulate, improve}) common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : jicplan::exit_input;
    }

    if (!probe_text.empty() && !parse_probe(probe_text, cfg.probe)) {
        std::cerr << "error: --probe expects \"t,e\"\n";
        return jicplan::exit_input;
    }

    if (validate->parsed()) return jicplan::cmd_validate(cfg, std::cout, std::cerr);
    if (solve->parsed()) return jicplan::cmd_solve(cfg, std::cout, std::cerr);
    if (slice->parsed()) return jicplan::cmd_slice(cfg, std::cout, std::cerr);
    if (simulate->parsed()) return jicplan::cmd_simulate(cfg, std::cout, std::cerr);
    if (improve->parsed()) return jicplan::cmd_improve(cfg, std::cout, std::cerr);
    return jicplan::exit_input;
}
