#include "bubble/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace bubble {

namespace {

double critical_time(const Scenario& s) { return s.bubble.tc_mult * s.model.T; }

double interpolate_linear(const std::vector<Knot>& table, double t) {
    if (t <= table.front().t) return table.front().v;
    if (t >= table.back().t) return table.back().v;
    auto it = std::upper_bound(table.begin(), table.end(), t,
                               [](double x, const Knot& k) { return x < k.t; });
    const Knot& hi = *it;
    const Knot& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return lo.v + w * (hi.v - lo.v);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("scenario: " + what);
}

std::string_view trim(std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
}

double parse_number(std::string_view key, std::string_view text) {
    text = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw std::invalid_argument("scenario: bad number for '" + std::string(key) + "': '" +
                                    std::string(text) + "'");
    return v;
}

long long parse_integer(std::string_view key, std::string_view text) {
    text = trim(text);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw std::invalid_argument("scenario: bad integer for '" + std::string(key) + "': '" +
                                    std::string(text) + "'");
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw std::invalid_argument("scenario: bad flag for '" + std::string(key) + "'");
}

// "t0:v0, t1:v1, ..." ; empty string clears the table
std::vector<Knot> parse_table(std::string_view key, std::string_view text) {
    std::vector<Knot> out;
    text = trim(text);
    while (!text.empty()) {
        auto comma = text.find(',');
        auto item = trim(text.substr(0, comma));
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        if (item.empty()) continue;
        auto colon = item.find(':');
        if (colon == std::string_view::npos)
            throw std::invalid_argument("scenario: table entry needs t:v in '" + std::string(key) +
                                        "'");
        out.push_back({parse_number(key, item.substr(0, colon)),
                       parse_number(key, item.substr(colon + 1))});
    }
    return out;
}

std::string table_string(const std::vector<Knot>& table) {
    std::string out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (i) out += ", ";
        out += format_double(table[i].t) + ":" + format_double(table[i].v);
    }
    return out;
}

struct KeyHandler {
    std::function<void(Scenario&, std::string_view)> set;
    std::function<std::string(const Scenario&)> get;
};

template <class Section, class Field>
KeyHandler real_field(Section Scenario::*section, Field Section::*field) {
    return {[=](Scenario& s, std::string_view v) { (s.*section).*field = parse_number("", v); },
            [=](const Scenario& s) { return format_double((s.*section).*field); }};
}

const std::map<std::string, KeyHandler, std::less<>>& handlers() {
    static const std::map<std::string, KeyHandler, std::less<>> table = [] {
        std::map<std::string, KeyHandler, std::less<>> h;
        h["kappa"] = real_field(&Scenario::model, &ModelParams::kappa);
        h["delta"] = real_field(&Scenario::model, &ModelParams::delta);
        h["phi"] = real_field(&Scenario::model, &ModelParams::phi);
        h["c"] = real_field(&Scenario::model, &ModelParams::c);
        h["sigma"] = real_field(&Scenario::model, &ModelParams::sigma);
        h["sigma0"] = real_field(&Scenario::model, &ModelParams::sigma0);
        h["P0"] = real_field(&Scenario::model, &ModelParams::P0);
        h["T"] = real_field(&Scenario::model, &ModelParams::T);
        h["a_lo"] = real_field(&Scenario::model, &ModelParams::a_lo);
        h["a_hi"] = real_field(&Scenario::model, &ModelParams::a_hi);
        h["B0"] = real_field(&Scenario::bubble, &BubbleSpec::B0);
        h["ell"] = real_field(&Scenario::bubble, &BubbleSpec::ell);
        h["tc_mult"] = real_field(&Scenario::bubble, &BubbleSpec::tc_mult);
        h["beta"] = real_field(&Scenario::bubble, &BubbleSpec::beta_const);
        h["beta_table"] = {
            [](Scenario& s, std::string_view v) { s.bubble.beta_table = parse_table("beta_table", v); },
            [](const Scenario& s) { return table_string(s.bubble.beta_table); }};
        h["k"] = real_field(&Scenario::burst, &BurstSpec::k);
        h["k_table"] = {
            [](Scenario& s, std::string_view v) { s.burst.k_table = parse_table("k_table", v); },
            [](const Scenario& s) { return table_string(s.burst.k_table); }};
        h["zeta0"] = real_field(&Scenario::burst, &BurstSpec::zeta0);
        h["zeta_slope"] = real_field(&Scenario::burst, &BurstSpec::zeta_slope);
        h["eta"] = real_field(&Scenario::entry, &EntrySpec::eta);
        h["p0"] = real_field(&Scenario::entry, &EntrySpec::p0);
        h["entry_kind"] = {
            [](Scenario& s, std::string_view v) {
                v = trim(v);
                if (v == "fixed")
                    s.entry.kind = EntryKind::fixed;
                else if (v == "atom-plus-uniform" || v == "atom_plus_uniform")
                    s.entry.kind = EntryKind::atom_plus_uniform;
                else
                    throw std::invalid_argument("scenario: entry_kind must be fixed or atom-plus-uniform");
            },
            [](const Scenario& s) {
                return std::string(s.entry.kind == EntryKind::fixed ? "fixed" : "atom-plus-uniform");
            }};
        h["n_entry_grid"] = {
            [](Scenario& s, std::string_view v) {
                s.entry.n_entry_grid = static_cast<int>(parse_integer("n_entry_grid", v));
            },
            [](const Scenario& s) { return std::to_string(s.entry.n_entry_grid); }};
        h["init_mean"] = real_field(&Scenario::init, &InitialLaw::mean);
        h["init_std"] = real_field(&Scenario::init, &InitialLaw::std);
        h["truncate_at_zero"] = {
            [](Scenario& s, std::string_view v) { s.init.truncate_at_zero = parse_bool("truncate_at_zero", v); },
            [](const Scenario& s) { return std::string(s.init.truncate_at_zero ? "true" : "false"); }};
        auto int_key = [](int NumericsSpec::*field, const char* name) {
            return KeyHandler{
                [=](Scenario& s, std::string_view v) {
                    s.numerics.*field = static_cast<int>(parse_integer(name, v));
                },
                [=](const Scenario& s) { return std::to_string(s.numerics.*field); }};
        };
        auto bool_key = [](bool NumericsSpec::*field, const char* name) {
            return KeyHandler{
                [=](Scenario& s, std::string_view v) { s.numerics.*field = parse_bool(name, v); },
                [=](const Scenario& s) { return std::string(s.numerics.*field ? "true" : "false"); }};
        };
        h["n_steps"] = int_key(&NumericsSpec::n_steps, "n_steps");
        h["n_paths"] = int_key(&NumericsSpec::n_paths, "n_paths");
        h["basis_degree"] = int_key(&NumericsSpec::basis_degree, "basis_degree");
        h["max_iter"] = int_key(&NumericsSpec::max_iter, "max_iter");
        h["damping"] = real_field(&Scenario::numerics, &NumericsSpec::damping);
        h["tol"] = real_field(&Scenario::numerics, &NumericsSpec::tol);
        h["winsor_q"] = real_field(&Scenario::numerics, &NumericsSpec::winsor_q);
        h["redraw_paths"] = bool_key(&NumericsSpec::redraw_paths, "redraw_paths");
        h["antithetic"] = bool_key(&NumericsSpec::antithetic, "antithetic");
        h["seed"] = {
            [](Scenario& s, std::string_view v) {
                v = trim(v);
                std::uint64_t x = 0;
                auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
                if (ec != std::errc() || ptr != v.data() + v.size())
                    throw std::invalid_argument("scenario: bad seed");
                s.numerics.seed = x;
            },
            [](const Scenario& s) { return std::to_string(s.numerics.seed); }};
        h["name"] = {[](Scenario& s, std::string_view v) { s.name = std::string(trim(v)); },
                     [](const Scenario& s) { return s.name; }};
        return h;
    }();
    return table;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::vector<std::string> Scenario::validate() const {
    std::vector<std::string> warnings;
    const auto& m = model;
    require(m.kappa > 0.0, "kappa must be > 0");
    require(m.c > 0.0, "c must be > 0");
    require(m.phi >= 0.0, "phi must be >= 0");
    require(m.sigma > 0.0, "sigma must be > 0");
    require(m.sigma0 >= 0.0, "sigma0 must be >= 0");
    require(m.T > 0.0, "T must be > 0");
    require(m.a_lo <= 0.0 && 0.0 <= m.a_hi && m.a_lo < m.a_hi, "A = [a_lo, a_hi] must contain 0");

    require(bubble.B0 >= 0.0, "B0 must be >= 0");
    require(bubble.B0 == 0.0 || (bubble.ell > 0.0 && bubble.ell < 1.0), "ell must lie in (0,1)");
    require(bubble.tc_mult > 1.0, "tc_mult must exceed 1 so the critical time lies after T");
    require(bubble.beta_const >= 0.0 && bubble.beta_const <= 1.0, "beta must lie in [0,1]");
    for (std::size_t i = 0; i < bubble.beta_table.size(); ++i) {
        const auto& k = bubble.beta_table[i];
        require(k.v >= 0.0 && k.v <= 1.0, "beta_table values must lie in [0,1]");
        if (i) {
            require(k.t > bubble.beta_table[i - 1].t, "beta_table times must increase");
            require(k.v >= bubble.beta_table[i - 1].v, "beta_table must be non-decreasing");
        }
    }

    require(burst.k >= 0.0, "k must be >= 0");
    for (std::size_t i = 0; i < burst.k_table.size(); ++i) {
        require(burst.k_table[i].v >= 0.0, "k_table rates must be >= 0");
        if (i) require(burst.k_table[i].t > burst.k_table[i - 1].t, "k_table times must increase");
    }
    require(burst.zeta0 > 0.0, "zeta0 must be > 0");
    require(burst.zeta0 < init.mean, "zeta0 must be below the mean initial inventory");
    require(burst.zeta_slope >= 0.0, "zeta_slope must be >= 0");
    if (burst.zeta_slope == 0.0)
        warnings.emplace_back("zeta_slope = 0: threshold is not strictly increasing");

    require(entry.eta >= 0.0 && entry.eta <= m.T, "eta must lie in [0,T]");
    require(entry.p0 > 0.0 && entry.p0 <= 1.0, "p0 must lie in (0,1]");
    require(entry.n_entry_grid >= 1, "n_entry_grid must be >= 1");
    if (entry.kind == EntryKind::fixed) {
        require(entry.p0 == 1.0, "fixed entry requires p0 = 1");
    } else {
        require(entry.p0 < 1.0, "atom-plus-uniform entry requires p0 < 1");
        require(entry.eta > 0.0, "atom-plus-uniform entry requires eta > 0");
        require(entry.n_entry_grid >= 2, "atom-plus-uniform entry requires n_entry_grid >= 2");
    }

    require(init.mean > 0.0, "init_mean must be > 0");
    require(init.std >= 0.0, "init_std must be >= 0");

    const auto& n = numerics;
    require(n.n_steps > 0 && n.n_paths > 0, "n_steps and n_paths must be positive");
    require(n.basis_degree >= 1, "basis_degree must be >= 1");
    require(n.damping > 0.0 && n.damping <= 1.0, "damping must lie in (0,1]");
    require(n.tol > 0.0, "tol must be > 0");
    require(n.max_iter > 0, "max_iter must be > 0");
    require(n.winsor_q >= 0.0 && n.winsor_q < 0.5, "winsor_q must lie in [0,0.5)");
    if (n.antithetic && n.n_paths % 2 != 0)
        warnings.emplace_back("antithetic sampling with an odd path count: last path is unpaired");
    return warnings;
}

double bubble_component(double t, const Scenario& s) {
    const auto& b = s.bubble;
    if (b.B0 == 0.0) return 0.0;
    const double tc = critical_time(s);
    const double expo = b.B0 * (std::pow(tc, b.ell) - std::pow(tc - t, b.ell));
    return s.model.P0 * std::expm1(expo);
}

double bubble_trend(double t, const Scenario& s) {
    const auto& b = s.bubble;
    if (b.B0 == 0.0) return 0.0;
    const double tc = critical_time(s);
    const double level = s.model.P0 * std::exp(b.B0 * (std::pow(tc, b.ell) - std::pow(tc - t, b.ell)));
    return level * b.ell * b.B0 * std::pow(tc - t, b.ell - 1.0);
}

double threshold(double t, const Scenario& s) { return s.burst.zeta0 + s.burst.zeta_slope * t; }

double entry_cdf(double t, const Scenario& s) {
    if (t < 0.0) return 0.0;
    const auto& e = s.entry;
    if (e.kind == EntryKind::fixed || e.eta <= 0.0) return 1.0;
    if (t >= e.eta) return 1.0;
    return e.p0 + (1.0 - e.p0) * (t / e.eta);
}

double loss_amplitude(double t, const Scenario& s) {
    if (s.bubble.beta_table.empty()) return s.bubble.beta_const;
    return interpolate_linear(s.bubble.beta_table, t);
}

double burst_loss(double t, const Scenario& s) { return loss_amplitude(t, s) * bubble_component(t, s); }

double exo_intensity(double t, const Scenario& s) {
    const auto& tab = s.burst.k_table;
    if (tab.empty()) return s.burst.k * t;
    double rate = 0.0;
    for (const auto& k : tab) {
        if (t >= k.t)
            rate = k.v;
        else
            break;
    }
    return rate;
}

double exo_cumulative_intensity(double t, const Scenario& s) {
    const auto& tab = s.burst.k_table;
    if (tab.empty()) return 0.5 * s.burst.k * t * t;
    double total = 0.0;
    for (std::size_t j = 0; j < tab.size(); ++j) {
        const double lo = tab[j].t;
        const double hi = j + 1 < tab.size() ? tab[j + 1].t : t;
        if (t <= lo) break;
        total += tab[j].v * (std::min(t, hi) - lo);
    }
    return total;
}

double running_cost(double t, double x, double theta_bar, double a, bool pre_burst,
                    const Scenario& s) {
    const auto& m = s.model;
    if (!(a >= m.a_lo && a <= m.a_hi))
        throw std::domain_error("running_cost: trading rate outside A");
    double f = m.kappa * a * a + m.phi * x * x - x * m.delta * theta_bar;
    if (pre_burst) f -= x * bubble_trend(t, s);
    return f;
}

double terminal_cost(double x_at_burst, double x_T, double tau_star, const Scenario& s) {
    return x_at_burst * burst_loss(tau_star, s) + s.model.c * x_T * x_T;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"Default", "BigBubble", "NoBubble", "FearExo",
                                                "LowImpact"};
    return names;
}

Scenario preset(std::string_view name) {
    Scenario s;
    s.name = std::string(name);
    const double log20 = std::log(20.0);
    s.bubble.B0 = log20;
    if (name == "Default") {
    } else if (name == "BigBubble") {
        s.bubble.B0 = 1.3 * log20;
        s.bubble.ell = 0.65;
    } else if (name == "NoBubble") {
        s.bubble.B0 = 0.0;
    } else if (name == "FearExo") {
        s.burst.k = 5.0;
    } else if (name == "LowImpact") {
        s.model.kappa = 0.1;
        s.model.delta = 0.3;
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    }
    return s;
}

std::vector<std::string> parameter_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : handlers()) keys.push_back(k);
    return keys;
}

void set_parameter(Scenario& s, std::string_view key, std::string_view value) {
    auto it = handlers().find(trim(key));
    if (it == handlers().end())
        throw std::invalid_argument("scenario: unknown key '" + std::string(key) + "'");
    try {
        it->second.set(s, value);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(e.what()) + " (key '" + std::string(key) + "')");
    }
}

Scenario parse_scenario(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = trim(v);
        if (v.empty()) continue;
        auto eq = v.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("scenario: line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        entries.emplace_back(std::string(trim(v.substr(0, eq))), std::string(trim(v.substr(eq + 1))));
    }
    Scenario s;
    for (const auto& [k, v] : entries)
        if (k == "preset") s = preset(v);
    for (const auto& [k, v] : entries)
        if (k != "preset") set_parameter(s, k, v);
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string to_config_string(const Scenario& s) {
    std::string out;
    for (const auto& [k, h] : handlers()) out += k + " = " + h.get(s) + "\n";
    return out;
}

std::uint64_t scenario_hash(const Scenario& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [k, handler] : handlers()) {
        if (k == "seed" || k == "name") continue;
        const std::string line = k + "=" + handler.get(s) + ";";
        for (unsigned char ch : line) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace bubble
