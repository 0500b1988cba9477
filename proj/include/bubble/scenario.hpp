#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bubble {

// (time, value) pair used by piecewise tables.
struct Knot {
    double t = 0.0;
    double v = 0.0;
};

struct ModelParams {
    double kappa = 0.5;   // temporary impact, cost per squared rate
    double delta = 0.5;   // permanent impact slope, g(theta) = delta * theta
    double phi = 0.1;     // running inventory penalty
    double c = 10.0;      // terminal inventory penalty
    double sigma = 1.0;   // inventory noise
    double sigma0 = 1.0;  // fundamental price noise (display only)
    double P0 = 10.0;
    double T = 1.0;
    double a_lo = -50.0;
    double a_hi = 50.0;
};

// LPPL bubble without oscillation, critical time tc_mult * T.
struct BubbleSpec {
    double B0 = 2.995732273553991;  // log(20)
    double ell = 0.5;
    double tc_mult = 1.1;
    double beta_const = 1.0;
    // Optional monotone piecewise-linear loss amplitude; overrides beta_const when non-empty.
    std::vector<Knot> beta_table;
};

struct BurstSpec {
    double k = 2.0;  // exogenous intensity k_t = k * t
    // Optional piecewise-constant intensity: rate v on [t_j, t_{j+1}). Overrides k when non-empty.
    std::vector<Knot> k_table;
    double zeta0 = 2.0;
    double zeta_slope = 1e-6;
};

enum class EntryKind { fixed, atom_plus_uniform };

struct EntrySpec {
    EntryKind kind = EntryKind::fixed;
    double eta = 0.0;
    double p0 = 1.0;
    int n_entry_grid = 1;
};

struct InitialLaw {
    double mean = 10.0;
    double std = 2.0;
    bool truncate_at_zero = false;
};

struct NumericsSpec {
    int n_steps = 100;
    int n_paths = 20000;
    int basis_degree = 2;
    double damping = 0.5;
    double tol = 1e-3;
    int max_iter = 50;
    std::uint64_t seed = 42;
    bool redraw_paths = false;
    bool antithetic = false;
    double winsor_q = 0.0;  // 0 disables winsorisation of per-path BSDE values
};

struct Scenario {
    std::string name = "Custom";
    ModelParams model;
    BubbleSpec bubble;
    BurstSpec burst;
    EntrySpec entry;
    InitialLaw init;
    NumericsSpec numerics;

    // Throws std::invalid_argument on a violated invariant; returns soft warnings.
    std::vector<std::string> validate() const;
};

// --- model functions, all pure in (t, Scenario) ---

double bubble_component(double t, const Scenario& s);  // gamma_t
double bubble_trend(double t, const Scenario& s);      // b(t) = d gamma / dt
double threshold(double t, const Scenario& s);         // zeta_t
double entry_cdf(double t, const Scenario& s);         // F_T(t)
double loss_amplitude(double t, const Scenario& s);    // beta_t
double burst_loss(double t, const Scenario& s);        // beta_t * gamma_t
double exo_intensity(double t, const Scenario& s);     // k_t
double exo_cumulative_intensity(double t, const Scenario& s);

// f0 (pre_burst) or f1 running cost rate. Throws std::domain_error if a is outside A.
double running_cost(double t, double x, double theta_bar, double a, bool pre_burst,
                    const Scenario& s);
// x_at_burst * beta * gamma(tau*) + c * x_T^2
double terminal_cost(double x_at_burst, double x_T, double tau_star, const Scenario& s);

// --- presets and config files ---

const std::vector<std::string>& preset_names();
Scenario preset(std::string_view name);  // throws std::invalid_argument for unknown names

// Sets a single key from its textual value; throws std::invalid_argument for unknown keys.
void set_parameter(Scenario& s, std::string_view key, std::string_view value);
std::vector<std::string> parameter_keys();

// Flat "key = value" text; '#' starts a comment. An optional "preset = Name" line seeds the
// remaining keys from a preset.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);
std::string to_config_string(const Scenario& s);

// FNV-1a over the canonical config text with the seed excluded.
std::uint64_t scenario_hash(const Scenario& s);

// Locale independent shortest round-trip formatting.
std::string format_double(double v);

}  // namespace bubble
