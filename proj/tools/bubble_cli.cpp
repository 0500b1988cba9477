// Command-line front end: run / sweep / validate / presets.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bubble/equilibrium.hpp"
#include "bubble/output.hpp"
#include "bubble/scenario.hpp"
#include "bubble/validation.hpp"

namespace fs = std::filesystem;
using namespace bubble;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct ScenarioArgs {
    std::string preset = "Default";
    std::string scenario_file;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths, steps, max_iter, entry_grid;
    std::optional<double> damping, tol;
    bool redraw = false;
    std::vector<std::string> params;  // key=value overrides
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
    cmd->add_option("--preset", a.preset, "Named preset")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--scenario", a.scenario_file, "Scenario file (key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", a.seed, "Random seed");
    cmd->add_option("--paths", a.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    cmd->add_option("--steps", a.steps, "Time steps")->check(CLI::PositiveNumber);
    cmd->add_option("--damping", a.damping, "Picard damping in (0,1]");
    cmd->add_option("--tol", a.tol, "Fixed-point tolerance");
    cmd->add_option("--max-iter", a.max_iter, "Maximum Picard iterations")->check(CLI::PositiveNumber);
    cmd->add_option("--entry-grid", a.entry_grid, "Entry-time quadrature points")->check(CLI::PositiveNumber);
    cmd->add_flag("--redraw-paths", a.redraw, "Fresh Monte Carlo paths every iteration");
    cmd->add_option("--set", a.params, "Extra override key=value (repeatable)");
}

Scenario build_scenario(const ScenarioArgs& a) {
    Scenario s = a.scenario_file.empty() ? preset(a.preset) : load_scenario(a.scenario_file);
    auto set = [&](const char* key, const std::string& v) { set_parameter(s, key, v); };
    if (a.seed) s.numerics.seed = *a.seed;
    if (a.paths) s.numerics.n_paths = *a.paths;
    if (a.steps) s.numerics.n_steps = *a.steps;
    if (a.max_iter) s.numerics.max_iter = *a.max_iter;
    if (a.entry_grid) s.entry.n_entry_grid = *a.entry_grid;
    if (a.damping) s.numerics.damping = *a.damping;
    if (a.tol) s.numerics.tol = *a.tol;
    if (a.redraw) s.numerics.redraw_paths = true;
    for (const auto& kv : a.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    s.validate();
    return s;
}

void print_progress(int it, double r, double tau) {
    std::fprintf(stderr, "  iter %3d  residual %.3e  tau_bar %.4f\n", it, r, tau);
}

Equilibrium solve(const Scenario& s, bool quiet) {
    PicardOptions opt;
    if (!quiet) opt.on_iteration = print_progress;
    return picard_solve(s, opt);
}

void print_summary(const RunResult& run) {
    const auto& eq = *run.eq;
    std::printf("scenario      %s (hash %s, seed %llu)\n", eq.scenario.name.c_str(),
                hex_hash(scenario_hash(eq.scenario)).c_str(),
                static_cast<unsigned long long>(eq.scenario.numerics.seed));
    std::printf("converged     %s after %d iterations (best %d, residual %.3e)\n",
                eq.report.converged ? "yes" : "no", eq.report.iterations, eq.report.best_iteration,
                eq.report.residuals[eq.report.best_iteration - 1]);
    std::printf("tau_bar       %.4f\n", eq.flows.tau_bar);
    std::printf("J             %.3f +- %.3f\n", eq.objective.mean, eq.objective.se);
    std::printf("J (wealth)    %.3f +- %.3f  [t*=0 cohort]\n", run.wealth_objective.mean, run.wealth_objective.se);
    std::printf("E[Y0]         %.3f\n", run.tower);
    std::printf("clamp rate    %.4f\n", eq.report.clamp_rate);
    std::printf("concavity     %.3f\n", run.stats.concavity);
    std::printf("wall time     %.1f s\n", eq.report.wall_seconds);
    for (const auto& w : eq.report.warnings) std::printf("warning: %s\n", w.c_str());
}

int cmd_run(const ScenarioArgs& a, const std::string& out_dir, std::size_t export_paths,
            bool dump_coeffs, bool quiet) {
    const Scenario s = build_scenario(a);
    fs::create_directories(out_dir);
    const auto eq = solve(s, quiet);
    const auto run = analyze(eq);
    const fs::path dir(out_dir);
    write_flows_csv((dir / "flows.csv").string(), eq);
    write_stats_csv((dir / "stats.csv").string(), run.stats);
    write_paths_csv((dir / "paths.csv").string(), run, export_paths);
    write_report_json((dir / "report.json").string(), run);
    write_residuals((dir / "residuals.txt").string(), eq.report);
    write_plots_svg((dir / "plots.svg").string(), run);
    if (dump_coeffs) write_coefficients((dir / "coefficients.txt").string(), eq.families);
    {
        std::ofstream cfg(dir / "scenario.txt");
        cfg << to_config_string(s);
    }
    print_summary(run);
    return eq.report.converged ? kExitOk : kExitNotConverged;
}

std::vector<std::string> split_values(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

int cmd_sweep(const ScenarioArgs& a, const std::string& out_dir, const std::string& param,
              const std::string& values_text, bool quiet) {
    const auto values = split_values(values_text);
    if (values.empty()) throw std::invalid_argument("--values is empty");
    const Scenario base = build_scenario(a);
    fs::create_directories(out_dir);
    std::vector<SweepPoint> points;
    std::vector<Equilibrium> runs;
    bool all_converged = true;
    for (const auto& v : values) {
        Scenario s = base;
        set_parameter(s, param, v);
        s.validate();
        if (!quiet) std::fprintf(stderr, "%s = %s\n", param.c_str(), v.c_str());
        auto eq = solve(s, quiet);
        const double conc = concavity_diagnostic(eq.flows.theta_bar, eq.flows.burst_step);
        points.push_back({v, eq.objective.mean, eq.objective.se, eq.flows.tau_bar, conc,
                          eq.report.converged, eq.report.iterations});
        all_converged = all_converged && eq.report.converged;
        eq.bundle = {};  // only flows are kept
        eq.families.clear();
        runs.push_back(std::move(eq));
    }
    const fs::path dir(out_dir);
    write_sweep_csv((dir / "sweep.csv").string(), param, points);
    write_sweep_flows_csv((dir / "sweep_flows.csv").string(), values, runs);

    std::printf("%-12s %10s %8s %8s %10s %9s\n", param.c_str(), "J", "SE", "tau_bar", "concavity", "converged");
    for (const auto& p : points)
        std::printf("%-12s %10.3f %8.3f %8.4f %10.3f %9s\n", p.value.c_str(), p.J, p.se, p.tau_bar,
                    p.concavity, p.converged ? "yes" : "no");
    bool monotone = true, above = false, below = false;
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (k > 0 && points[k].concavity > points[k - 1].concavity) monotone = false;
        above = above || points[k].concavity > 0.5;
        below = below || points[k].concavity < 0.5;
    }
    std::printf("concavity non-increasing over the sweep: %s; crosses 0.5: %s\n", monotone ? "yes" : "no",
                above && below ? "yes" : "no");
    return all_converged ? kExitOk : kExitNotConverged;
}

int cmd_validate(const ValidationOptions& opt, const std::string& out_dir) {
    const auto rows = run_validation_suite(opt);
    bool ok = true;
    std::printf("%-48s %12s %12s  %s\n", "check", "measured", "tolerance", "result");
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        std::printf("%-48s %12.4g %12.4g  %s  %s\n", r.name.c_str(), r.measured, r.tolerance,
                    r.passed ? "PASS" : "FAIL", r.detail.c_str());
        ok = ok && r.passed;
        j.push_back({{"name", r.name}, {"measured", r.measured}, {"tolerance", r.tolerance},
                     {"passed", r.passed}, {"detail", r.detail}});
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "validation.json") << j.dump(2) << '\n';
    }
    return ok ? kExitOk : kExitError;
}

int cmd_presets() {
    for (const auto& name : preset_names()) {
        const Scenario s = preset(name);
        std::printf("%-10s kappa=%g delta=%g k=%g B0=%.6g ell=%g sigma=%g zeta0=%g T=%g c=%g phi=%g P0=%g\n",
                    name.c_str(), s.model.kappa, s.model.delta, s.burst.k, s.bubble.B0, s.bubble.ell,
                    s.model.sigma, s.burst.zeta0, s.model.T, s.model.c, s.model.phi, s.model.P0);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_env();
    CLI::App app{"Mean field game solver for bubble riding with endogenous and exogenous bursts"};
    app.require_subcommand(1);

    ScenarioArgs run_args, sweep_args;
    std::string run_out = "out", sweep_out = "sweep_out", validate_out;
    std::size_t export_paths = 200;
    bool dump_coeffs = false, quiet = false;
    std::string sweep_param = "k", sweep_values;
    ValidationOptions vopt;

    auto* run = app.add_subcommand("run", "Solve one scenario and write artifacts");
    add_scenario_options(run, run_args);
    run->add_option("--out", run_out, "Output directory");
    run->add_option("--export-paths", export_paths, "Number of paths written to paths.csv");
    run->add_flag("--dump-coeffs", dump_coeffs, "Write regression coefficients");
    run->add_flag("-q,--quiet", quiet, "No per-iteration progress");

    auto* sweep = app.add_subcommand("sweep", "Solve a scenario for several values of one parameter");
    add_scenario_options(sweep, sweep_args);
    sweep->add_option("--out", sweep_out, "Output directory");
    sweep->add_option("--param", sweep_param, "Parameter key");
    sweep->add_option("--values", sweep_values, "Comma separated values")->required();
    sweep->add_flag("-q,--quiet", quiet, "No per-iteration progress");

    auto* validate = app.add_subcommand("validate", "Run the oracle validation suite");
    validate->add_option("--out", validate_out, "Directory for validation.json");
    validate->add_option("--seed", vopt.seed, "Random seed");
    validate->add_option("--paths", vopt.equilibrium_paths, "Paths for the equilibrium check");
    validate->add_option("--steps", vopt.equilibrium_steps, "Steps for the equilibrium check");

    auto* presets = app.add_subcommand("presets", "List the named presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    try {
        if (run->parsed()) return cmd_run(run_args, run_out, export_paths, dump_coeffs, quiet);
        if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_out, sweep_param, sweep_values, quiet);
        if (validate->parsed()) return cmd_validate(vopt, validate_out);
        if (presets->parsed()) return cmd_presets();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
