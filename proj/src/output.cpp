#include "bubble/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bubble {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

std::string num(double v) { return format_double(v); }

nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

std::string hex_hash(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunResult analyze(const Equilibrium& eq) {
    const Scenario& s = eq.scenario;
    RunResult r;
    r.eq = &eq;
    if (eq.policies.empty()) throw std::invalid_argument("analyze: equilibrium has no policy");
    r.paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, s);
    r.prices = simulate_price(r.paths, eq.flows, eq.bundle, s);
    r.wealth = simulate_wealth(r.paths, r.prices, eq.flows, eq.bundle, s);
    r.stats = summarize(r.paths, eq.flows, s);
    r.objective_entry0 = r.stats.objective;
    r.wealth_objective = mean_estimate(wealth_objective_samples(r.paths, r.wealth, s));
    r.tower = tower_value(eq.families, eq.entry, NoiseCube::from(eq.bundle));
    return r;
}

void write_flows_csv(const std::string& path, const Equilibrium& eq) {
    auto out = open_out(path);
    out << "t,theta_bar,mu_bar,zeta\n";
    for (int i = 0; i <= eq.grid.n_steps; ++i) {
        const double t = eq.grid.t(i);
        out << num(t) << ',' << num(eq.flows.theta_bar[i]) << ',' << num(eq.flows.mu_bar[i]) << ','
            << num(threshold(t, eq.scenario)) << '\n';
    }
}

void write_stats_csv(const std::string& path, const PathStats& stats) {
    auto out = open_out(path);
    out << "t,mean_x,q05,q25,q50,q75,q95,mean_a,branch\n";
    auto emit = [&](const Bands& b, const char* label) {
        if (b.count == 0) return;
        for (std::size_t i = 0; i < stats.t.size(); ++i) {
            out << num(stats.t[i]) << ',' << num(b.mean_x[i]);
            for (const auto& q : b.qx) out << ',' << num(q[i]);
            out << ',' << num(b.mean_a[i]) << ',' << label << '\n';
        }
    };
    emit(stats.all, "all");
    for (int k = 0; k < 3; ++k) emit(stats.by_branch[k], branch_name(static_cast<Branch>(k)));
}

void write_paths_csv(const std::string& path, const RunResult& run, std::size_t count) {
    const auto& paths = run.paths;
    const std::size_t n1 = static_cast<std::size_t>(paths.n_steps) + 1;
    std::vector<std::size_t> ids;
    for (std::size_t p = 0; p < std::min(count, paths.n_paths); ++p) ids.push_back(p);
    for (std::size_t p : {run.stats.sample_exogenous, run.stats.sample_endogenous})
        if (p < paths.n_paths && p >= count) ids.push_back(p);
    std::sort(ids.begin(), ids.end());

    auto out = open_out(path);
    out << "path_id,branch,t,x,a,p,v\n";
    const double dt = run.eq->grid.dt;
    for (std::size_t p : ids) {
        const char* br = branch_name(paths.branch[p]);
        for (std::size_t i = 0; i < n1; ++i) {
            const double t = i + 1 == n1 ? run.eq->grid.T : i * dt;
            out << p << ',' << br << ',' << num(t) << ',' << num(paths.x[p * n1 + i]) << ','
                << num(paths.a[p * n1 + i]) << ',' << num(run.prices.price[p * n1 + i]) << ','
                << num(run.wealth[p * n1 + i]) << '\n';
        }
    }
}

void write_report_json(const std::string& path, const RunResult& run) {
    const Equilibrium& eq = *run.eq;
    const auto& rep = eq.report;
    nlohmann::json j;
    j["scenario"] = eq.scenario.name;
    j["scenario_hash"] = hex_hash(scenario_hash(eq.scenario));
    j["seed"] = eq.scenario.numerics.seed;
    j["n_paths"] = eq.scenario.numerics.n_paths;
    j["n_steps"] = eq.scenario.numerics.n_steps;
    j["entry_points"] = eq.entry.size();
    j["converged"] = rep.converged;
    j["iterations"] = rep.iterations;
    j["best_iteration"] = rep.best_iteration;
    j["residual"] = rep.residuals.empty() ? nlohmann::json(nullptr)
                                          : json_number(rep.residuals[rep.best_iteration - 1]);
    j["residuals"] = nlohmann::json::array();
    for (double r : rep.residuals) j["residuals"].push_back(json_number(r));
    j["tau_bar"] = eq.flows.tau_bar;
    j["burst_step"] = eq.flows.burst_step;
    j["J"] = json_number(eq.objective.mean);
    j["J_se"] = json_number(eq.objective.se);
    j["J_entry0"] = json_number(run.objective_entry0.mean);
    j["J_entry0_se"] = json_number(run.objective_entry0.se);
    j["J_wealth_entry0"] = json_number(run.wealth_objective.mean);
    j["J_wealth_entry0_se"] = json_number(run.wealth_objective.se);
    j["E_Y0"] = json_number(run.tower);
    j["clamp_rate"] = rep.clamp_rate;
    j["concavity"] = json_number(run.stats.concavity);
    j["branch_counts"] = {{"exogenous", run.stats.by_branch[0].count},
                          {"endogenous", run.stats.by_branch[1].count},
                          {"no_burst", run.stats.by_branch[2].count}};
    j["regression_fits"] = rep.regression_fits;
    j["regression_fallbacks"] = rep.regression_fallbacks;
    j["winsorized"] = rep.winsorized;
    j["wall_seconds"] = rep.wall_seconds;
    j["threads"] = thread_count();
    j["warnings"] = rep.warnings;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_residuals(const std::string& path, const FixedPointReport& report) {
    auto out = open_out(path);
    out << "# iteration residual tau_bar\n";
    for (std::size_t k = 0; k < report.residuals.size(); ++k)
        out << k + 1 << ' ' << num(report.residuals[k]) << ' ' << num(report.tau_history[k]) << '\n';
    out << "# converged " << (report.converged ? "yes" : "no") << ", best iteration "
        << report.best_iteration << '\n';
}

namespace {

struct Series {
    std::vector<double> x, y;
    std::string color;
    std::string label;
};

// One panel: frame, min/max labels, polylines.
void svg_panel(std::ostream& out, double ox, double oy, double w, double h, const std::string& title,
               const std::vector<Series>& series) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmax > xmin)) { xmin = 0.0; xmax = 1.0; }
    if (!(ymax > ymin)) { ymin -= 1.0; ymax += 1.0; }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double x) { return ox + 50 + (w - 60) * (x - xmin) / (xmax - xmin); };
    auto py = [&](double y) { return oy + h - 25 - (h - 45) * (y - ymin) / (ymax - ymin); };

    out << "<rect x='" << ox + 50 << "' y='" << oy + 20 << "' width='" << w - 60 << "' height='" << h - 45
        << "' fill='none' stroke='#888'/>\n";
    out << "<text x='" << ox + 50 << "' y='" << oy + 14 << "' font-size='12'>" << title << "</text>\n";
    out << "<text x='" << ox + 2 << "' y='" << py(ymax) + 10 << "' font-size='10'>" << num(std::round(ymax * 100) / 100)
        << "</text>\n";
    out << "<text x='" << ox + 2 << "' y='" << py(ymin) << "' font-size='10'>" << num(std::round(ymin * 100) / 100)
        << "</text>\n";
    out << "<text x='" << px(xmin) << "' y='" << oy + h - 10 << "' font-size='10'>" << num(xmin) << "</text>\n";
    out << "<text x='" << px(xmax) - 10 << "' y='" << oy + h - 10 << "' font-size='10'>" << num(xmax)
        << "</text>\n";
    double ly = oy + 34;
    for (const auto& s : series) {
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
            out << buf;
        }
        out << "'/>\n";
        out << "<text x='" << ox + w - 150 << "' y='" << ly << "' font-size='10' fill='" << s.color << "'>"
            << s.label << "</text>\n";
        ly += 12;
    }
}

}  // namespace

void write_plots_svg(const std::string& path, const RunResult& run) {
    const Equilibrium& eq = *run.eq;
    const int n = eq.grid.n_steps;
    std::vector<double> t(n + 1), zeta(n + 1);
    for (int i = 0; i <= n; ++i) {
        t[i] = eq.grid.t(i);
        zeta[i] = threshold(t[i], eq.scenario);
    }
    std::vector<Series> inventory{{t, eq.flows.mu_bar, "#1f77b4", "mean inventory"},
                                  {t, zeta, "#d62728", "threshold"}};
    std::vector<Series> rate{{t, eq.flows.theta_bar, "#2ca02c", "mean trading rate"}};
    std::vector<Series> samples_x, samples_a;
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;
    auto add_sample = [&](std::size_t p, const char* color, const char* label) {
        if (p >= run.paths.n_paths) return;
        std::vector<double> x(run.paths.x.begin() + p * n1, run.paths.x.begin() + (p + 1) * n1);
        std::vector<double> a(run.paths.a.begin() + p * n1, run.paths.a.begin() + (p + 1) * n1);
        a.back() = std::numeric_limits<double>::quiet_NaN();
        samples_x.push_back({t, x, color, label});
        samples_a.push_back({t, a, color, label});
    };
    add_sample(run.stats.sample_exogenous, "#ff7f0e", "exogenous burst path");
    add_sample(run.stats.sample_endogenous, "#9467bd", "endogenous burst path");

    auto out = open_out(path);
    const double w = 480, h = 260;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << 2 * w << "' height='" << 2 * h
        << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
    svg_panel(out, 0, 0, w, h, "Mean inventory (tau_bar = " + num(eq.flows.tau_bar) + ")", inventory);
    svg_panel(out, w, 0, w, h, "Mean trading rate", rate);
    svg_panel(out, 0, h, w, h, "Inventory, sample paths", samples_x);
    svg_panel(out, w, h, w, h, "Trading rate, sample paths", samples_a);
    out << "</svg>\n";
}

void write_coefficients(const std::string& path, const std::vector<BsdeFamily>& families) {
    auto out = open_out(path);
    out << "# bubble coefficient dump v1\n";
    out << "# polynomial in u = (x - center) / scale; coefficients c0 c1 ... follow\n";
    out << "entry_step kind step center scale degree coefficients\n";
    auto dump = [&](int entry, const char* kind, const std::vector<PolyFit>& fits, int from) {
        for (int i = from; i < static_cast<int>(fits.size()); ++i) {
            const auto& f = fits[i];
            if (f.coef.empty()) continue;
            out << entry << ' ' << kind << ' ' << i << ' ' << num(f.center) << ' ' << num(f.scale) << ' '
                << f.degree();
            for (double c : f.coef) out << ' ' << num(c);
            out << '\n';
        }
    };
    for (const auto& f : families) {
        dump(f.entry_step, "y0", f.y0, f.entry_step);
        dump(f.entry_step, "z0", f.z0, f.entry_step);
        dump(f.entry_step, "y1", f.y1, f.entry_step);
        dump(f.entry_step, "z1", f.z1, f.entry_step);
    }
}

void write_sweep_csv(const std::string& path, const std::string& param,
                     const std::vector<SweepPoint>& points) {
    auto out = open_out(path);
    out << param << ",J,J_se,tau_bar,concavity,converged,iterations\n";
    for (const auto& p : points)
        out << p.value << ',' << num(p.J) << ',' << num(p.se) << ',' << num(p.tau_bar) << ','
            << num(p.concavity) << ',' << (p.converged ? 1 : 0) << ',' << p.iterations << '\n';
}

void write_sweep_flows_csv(const std::string& path, const std::vector<std::string>& values,
                           const std::vector<Equilibrium>& runs) {
    auto out = open_out(path);
    out << "value,t,theta_bar,mu_bar,zeta\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const auto& eq = runs[k];
        for (int i = 0; i <= eq.grid.n_steps; ++i) {
            const double t = eq.grid.t(i);
            out << values[k] << ',' << num(t) << ',' << num(eq.flows.theta_bar[i]) << ','
                << num(eq.flows.mu_bar[i]) << ',' << num(threshold(t, eq.scenario)) << '\n';
        }
    }
}

}  // namespace bubble
