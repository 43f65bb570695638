#include "sqh/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sqh/oscillator.hpp"
#include "sqh/params.hpp"
#include "sqh/ptf.hpp"
#include "sqh/qpotential.hpp"
#include "sqh/sde.hpp"

namespace sqh::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& s, const std::string& what)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(what + ": '" + s + "' is not a number");
    }
    if (used != s.size()) throw ConfigError(what + ": '" + s + "' is not a number");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::string dashed(std::string key)
{
    for (char& c : key)
        if (c == '_') c = '-';
    return key;
}

// Every setting any subcommand can take, with its default.
struct Settings {
    // physics
    double theta = 0.05;
    double gamma = 0.1;
    double mass = 1.0;
    double hbar = 1.0;
    double omega = 1.0;
    double length = std::numbers::sqrt2;
    double chi_d = 1.0;
    std::string grid = "-8:8:2048";
    std::string out = "out";
    // states
    int j = 0;
    std::string bernoulli_form = "stationary";
    bool exact_variance_report = false;
    std::string coeffs = "1,0:1,0:0,0";
    double t0 = 0.0;
    double tau1 = 0.0, tau2 = 0.0, tau3 = 0.0;
    // runs
    std::string solver = "ptf";
    double dt = 0.05;
    double sde_dt = 0.01;
    double t_end = 10.0;
    std::uint64_t seed = 1;
    std::size_t n_traj = 10000;
    unsigned workers = 0;
    std::size_t trials = 200;
    std::string initial = "gaussian";
    double q0 = 1.0;
    double width2 = 1.0;
    std::string potential = "harmonic";
    bool quantum_potential = true;
    bool second_order_drift = true;
    bool underdamped = false;
    std::size_t resample_every = 1;
    std::string closure = "hermite";
    int closure_order = 4;
    double quantum_support = 1e-4;
    std::size_t snapshot_every = 0;
    double tol = 1e-8;
    int max_refine = 8;
    int max_halvings = 3;
    bool accelerate = true;
    std::string drift_density = "hermite";
    bool stop_when_stationary = false;
    double stationarity_eps = 1e-6;
    // check / params
    double drift_scale = 1.0;
    double kinetics_eps = 0.1;
    double mass_kg = 0.0;
    double temperature_k = 0.0;
};

// Options of one subcommand, remembered so the manifest can echo them.
class Registry {
public:
    explicit Registry(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* option(const std::string& name, T& ref, const std::string& desc)
    {
        values_.emplace_back(name, [&ref] { return json(ref); });
        return app_->add_option("--" + name, ref, desc)->capture_default_str();
    }

    CLI::Option* flag(const std::string& name, bool& ref, const std::string& desc)
    {
        values_.emplace_back(name, [&ref] { return json(ref); });
        return app_->add_flag("--" + name, ref, desc + " (--" + name + "=false to disable)")->capture_default_str();
    }

    json values() const
    {
        json j = json::object();
        for (const auto& [name, get] : values_) j[name] = get();
        return j;
    }

    CLI::App* app() const { return app_; }

private:
    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<json()>>> values_;
};

void add_physics(Registry& r, Settings& s)
{
    r.option("theta", s.theta, "kT/(ħω)");
    r.option("gamma", s.gamma, "dissipation parameter Γ in [0, 1)");
    r.option("mass", s.mass, "particle mass m");
    r.option("hbar", s.hbar, "ħ");
    r.option("omega", s.omega, "trap frequency ω");
    r.option("length", s.length, "physical length 𝓛");
    r.option("chi-d", s.chi_d, "χ_D");
}

void add_grid(Registry& r, Settings& s) { r.option("grid", s.grid, "grid min:max:points"); }
void add_out(Registry& r, Settings& s) { r.option("out", s.out, "output directory"); }

params::PhysicalParams physics(const Settings& s)
{
    params::PhysicalParams raw;
    raw.mass = s.mass;
    raw.hbar = s.hbar;
    raw.omega = s.omega;
    raw.theta = s.theta;
    raw.gamma = s.gamma;
    raw.length = s.length;
    raw.chi_d = s.chi_d;
    const auto bad = params::violations(raw);
    if (!bad.empty()) {
        std::string msg = bad.front();
        for (std::size_t i = 1; i < bad.size(); ++i) msg += "; " + bad[i];
        throw ConfigError(msg);
    }
    return params::derive(raw);
}

json params_json(const params::PhysicalParams& p)
{
    return json{{"mass", p.mass},     {"hbar", p.hbar},         {"omega", p.omega},   {"theta", p.theta},
                {"gamma", p.gamma},   {"length", p.length},     {"chi_d", p.chi_d},   {"kT", p.kT()},
                {"lambda_c", std::isfinite(p.lambda_c) ? json(p.lambda_c) : json("inf")},
                {"diffusion", p.diffusion}, {"beta", p.beta}};
}

// Output directory with the manifest written last, listing what was produced.
class Outputs {
public:
    Outputs(const std::string& dir, std::string sub, json config)
        : dir_(dir), sub_(std::move(sub)), config_(std::move(config))
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    }

    std::ofstream open(const std::string& name)
    {
        files_.push_back(name);
        std::ofstream os(dir_ / name);
        if (!os) throw ConfigError("cannot write " + (dir_ / name).string());
        return os;
    }

    void write_json(const std::string& name, const json& j)
    {
        std::ofstream os = open(name);
        os << j.dump(2) << '\n';
    }

    void manifest(const json& flags)
    {
        json m;
        m["program"] = "sqh";
        m["subcommand"] = sub_;
        m["config"] = config_;
        m["flags"] = flags;
        m["outputs"] = files_;
        std::ofstream os(dir_ / "manifest.json");
        os << m.dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::string sub_;
    json config_;
    std::vector<std::string> files_;
};

void write_fields(std::ostream& os, const numerics::Grid1D& g, const std::vector<std::string>& cols,
                  const std::vector<const std::vector<double>*>& data,
                  std::vector<std::pair<std::string, std::string>> header = {})
{
    auto h = numerics::grid_header(g);
    h.insert(h.end(), header.begin(), header.end());
    std::vector<double> q = g.nodes();
    std::vector<std::string> c{"q"};
    c.insert(c.end(), cols.begin(), cols.end());
    std::vector<const std::vector<double>*> d{&q};
    d.insert(d.end(), data.begin(), data.end());
    numerics::write_csv(os, h, c, d);
}

std::vector<double> as_doubles(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

oscillator::BernoulliOptions bernoulli(const Settings& s)
{
    oscillator::BernoulliOptions b;
    if (s.bernoulli_form == "stationary") b.form = oscillator::BernoulliForm::stationary;
    else if (s.bernoulli_form == "as-printed" || s.bernoulli_form == "as_printed") b.form = oscillator::BernoulliForm::as_printed;
    else throw ConfigError("bernoulli-form must be stationary or as-printed");
    return b;
}

qpotential::PotentialSpec potential(const Settings& s)
{
    if (s.potential == "harmonic") return qpotential::PotentialSpec::harmonic(s.omega);
    if (s.potential == "free") return qpotential::PotentialSpec::free();
    throw ConfigError("potential must be harmonic or free");
}

superposition::SuperpositionSpec superposition_spec(const Settings& s)
{
    superposition::SuperpositionSpec sp;
    sp.coef = parse_coeffs(s.coeffs);
    sp.t0 = s.t0;
    sp.tau = {s.tau1, s.tau2, s.tau3};
    return sp;
}

numerics::DensityField initial_density(const Settings& s, const params::PhysicalParams& p, const numerics::Grid1D& g)
{
    if (s.initial == "gaussian") {
        if (!(s.width2 > 0.0)) throw ConfigError("width2 must be positive");
        return numerics::normalize(
            numerics::sample(g, [&](double q) { return std::exp(-(q - s.q0) * (q - s.q0) / s.width2); }));
    }
    if (s.initial == "quasi") return oscillator::quasi_eigenstate(s.j, p, g, bernoulli(s)).density;
    if (s.initial == "eigenstate") return oscillator::eigenstate(s.j, p, g).density;
    if (s.initial == "superposition") return superposition::initial_density(superposition_spec(s), p, g);
    throw ConfigError("initial must be gaussian, quasi, eigenstate or superposition");
}

void add_initial(Registry& r, Settings& s)
{
    r.option("initial", s.initial, "initial density: gaussian, quasi, eigenstate, superposition");
    r.option("q0", s.q0, "gaussian centre");
    r.option("width2", s.width2, "gaussian n ∝ exp(−(q − q0)²/width2)");
    r.option("j", s.j, "level for quasi/eigenstate initial densities");
    r.option("bernoulli-form", s.bernoulli_form, "correction equation: stationary or as-printed");
    r.option("coeffs", s.coeffs, "superposition coefficients re,im:re,im:re,im");
    r.option("t0", s.t0, "superposition contact time");
}

json fidelity_json(const std::array<double, superposition::kModes>& f) { return json(std::vector<double>(f.begin(), f.end())); }

json class_json(int c) { return c < 0 ? json("unresolved") : json(c); }

// --- subcommands -----------------------------------------------------------

int cmd_params(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    json j;
    j["params"] = params_json(p);
    const auto kw = params::kinetics_window(p, s.drift_scale, s.kinetics_eps);
    j["kinetics"] = {{"t_min", std::isfinite(kw.t_min) ? json(kw.t_min) : json("inf")},
                     {"dt_min_overdamped", std::isfinite(kw.dt_min_overdamped) ? json(kw.dt_min_overdamped) : json("inf")},
                     {"dt_min_noise", kw.dt_min_noise},
                     {"deterministic_limit", kw.deterministic_limit},
                     {"notes", kw.notes}};
    if (s.mass_kg > 0.0 && s.temperature_k > 0.0) {
        const auto u = params::uncertainty_bounds(s.mass_kg, s.temperature_k);
        const double lc = std::sqrt(2.0) * params::si::hbar / std::sqrt(s.mass_kg * params::si::k_B * s.temperature_k);
        j["si"] = {{"mass_kg", s.mass_kg},        {"temperature_k", s.temperature_k}, {"lambda_c_m", lc},
                   {"dt_min_s", u.dt_min},        {"dE_J", u.dE},                     {"dE_dt_over_hbar", u.dE_dt_product / params::si::hbar},
                   {"dp", u.dp},                  {"dL_dp_over_hbar", u.dL_dp_product / params::si::hbar}};
    }
    o.write_json("params.json", j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_eigenstate(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    const auto g = parse_grid(s.grid);
    const auto e = oscillator::eigenstate(s.j, p, g);
    const auto vq = qpotential::vqu(e.density, p);
    const auto V = qpotential::PotentialSpec::harmonic(s.omega).evaluate(g, p);
    const double target = (s.j + 0.5) * p.hbar * p.omega;
    std::vector<double> total(g.n_points);
    double flat = 0.0, hydro = 0.0;
    const double nmax = e.density.max();
    for (std::size_t i = 0; i < g.n_points; ++i) {
        total[i] = V.values[i] + vq.field.values[i];
        if (vq.valid[i] && e.density.values[i] > 1e-8 * nmax) flat = std::max(flat, std::abs(total[i] - target));
    }
    {
        std::vector<double> w(g.n_points);
        for (std::size_t i = 0; i < g.n_points; ++i) w[i] = vq.valid[i] ? e.density.values[i] * total[i] : 0.0;
        hydro = numerics::integrate(g, w);
    }
    const auto valid = as_doubles(vq.valid);
    {
        std::ofstream os = o.open("eigenstate.csv");
        write_fields(os, g, {"n", "V", "V_qu", "V_plus_V_qu", "valid"},
                     {&e.density.values, &V.values, &vq.field.values, &total, &valid},
                     {{"j", std::to_string(s.j)}});
    }
    json j{{"j", s.j},
           {"energy", e.energy},
           {"hydrodynamic_energy", hydro},
           {"flatness_max_dev", flat},
           {"second_moment", e.second_moment},
           {"truncated", e.truncated}};
    o.write_json("eigenstate.json", j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_quasi(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    const auto g = parse_grid(s.grid);
    const auto q = oscillator::quasi_eigenstate(s.j, p, g, bernoulli(s));
    {
        std::ofstream os = o.open("quasi.csv");
        write_fields(os, g, {"n", "f"}, {&q.density.values, &q.f.values}, {{"j", std::to_string(s.j)}});
    }
    json j{{"j", s.j},
           {"energy", q.energy},
           {"variance", q.width2},
           {"second_moment", numerics::moment(q.density, 2)},
           {"delta", q.delta},
           {"energy_hydro", q.energy_hydro},
           {"energy_spread", q.energy_spread}};
    if (s.j == 0) j["energy_spread_model"] = q.energy_spread_model;
    if (s.exact_variance_report) {
        j["variance_exact"] = q.width2_ref;
        j["variance_first_order"] = q.width2_first_order;
    }
    o.write_json("quasi.json", j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

superposition::RelaxOptions relax_options(const Settings& s)
{
    superposition::RelaxOptions r;
    r.solver = superposition::parse_solver(s.solver);
    r.dt = s.dt;
    r.t_end = s.t_end;
    r.seed = s.seed;
    r.n_traj = s.n_traj;
    r.workers = s.workers;
    return r;
}

int cmd_relax(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    const auto g = parse_grid(s.grid);
    const auto spec = superposition_spec(s);
    const auto n0 = superposition::initial_density(spec, p, g);
    const auto v0 = superposition::initial_velocity(spec, p, g);
    const auto r = superposition::relax(spec, p, g, relax_options(s));
    const auto valid = as_doubles(v0.valid);
    {
        std::ofstream os = o.open("relax.csv");
        write_fields(os, g, {"n_initial", "velocity_initial", "velocity_valid", "n_final"},
                     {&n0.values, &v0.field.values, &valid, &r.final_density.values});
    }
    json j{{"classified", class_json(r.classified)},
           {"fidelity", fidelity_json(r.fidelity)},
           {"relaxation_time", r.relaxation_time},
           {"converged", r.converged},
           {"diagnostics", r.diagnostics}};
    o.write_json("relax.json", j);
    out << j.dump(2) << '\n';
    return r.converged ? kExitOk : kExitSolver;
}

int cmd_born(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    const auto g = parse_grid(s.grid);
    const auto coef = parse_coeffs(s.coeffs);
    std::array<double, superposition::kModes> mag{};
    for (int k = 0; k < superposition::kModes; ++k) mag[k] = coef[k].magnitude;
    superposition::BornOptions bo;
    bo.relax = relax_options(s);
    bo.workers = s.workers;
    const auto st = superposition::born_trials(mag, p, g, s.trials, s.seed, bo);

    json j;
    j["trials"] = st.trials;
    j["seed"] = st.seed;
    j["period"] = st.period;
    j["counts"] = st.counts;
    j["unresolved"] = st.unresolved;
    j["frequency"] = st.frequency;
    json ci = json::array();
    for (const auto& c : st.ci) ci.push_back({c.lo, c.hi});
    j["wilson95"] = ci;
    j["target"] = st.target;
    o.write_json("born.json", j);
    {
        std::ofstream os = o.open("trials.csv");
        os << "trial,t0,seed,classified,fidelity_0,fidelity_1,fidelity_2,relaxation_time,converged\n";
        for (const auto& t : st.log) {
            os << t.trial << ',' << numerics::fmt_double(t.t0) << ',' << t.seed << ','
               << (t.classified < 0 ? std::string("unresolved") : std::to_string(t.classified));
            for (double f : t.fidelity) os << ',' << numerics::fmt_double(f);
            os << ',' << numerics::fmt_double(t.relaxation_time) << ',' << (t.converged ? 1 : 0) << '\n';
        }
    }
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_sde(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    const auto g = parse_grid(s.grid);
    const auto n0 = initial_density(s, p, g);
    const auto V = potential(s);
    sde::SdeOptions so;
    so.n_traj = s.n_traj;
    so.dt = s.sde_dt;
    so.t_end = s.t_end;
    so.resample_every = s.resample_every;
    so.snapshot_every = s.snapshot_every;
    so.seed = s.seed;
    so.second_order_drift = s.second_order_drift;
    so.quantum = s.quantum_potential;
    if (s.closure == "hermite") so.closure.kind = sde::Closure::hermite;
    else if (s.closure == "kde") so.closure.kind = sde::Closure::kde;
    else throw ConfigError("closure must be hermite or kde");
    so.closure.order = s.closure_order;
    so.quantum_support = s.quantum_support;
    so.workers = s.workers;

    sde::SdeResult r;
    if (s.underdamped) r = sde::simulate_underdamped(n0, V, p, so);
    else r = sde::simulate_mean_field(n0, V, p, so);

    {
        std::ofstream os = o.open("moments.csv");
        std::vector<double> t, m, v;
        for (const auto& x : r.moments) {
            t.push_back(x.t);
            m.push_back(x.mean);
            v.push_back(x.variance);
        }
        numerics::write_csv(os, {{"n_traj", std::to_string(s.n_traj)}}, {"t", "mean", "variance"}, {&t, &m, &v});
    }
    {
        std::ofstream os = o.open("snapshots.csv");
        std::vector<std::string> cols;
        std::vector<const std::vector<double>*> data;
        for (const auto& sn : r.snapshots) {
            cols.push_back("t=" + numerics::fmt_double(sn.t));
            data.push_back(&sn.density.values);
        }
        write_fields(os, g, cols, data);
    }
    const auto& fin = r.snapshots.back().density;
    json j{{"steps", r.steps},
           {"reflection_rate", r.reflection_rate()},
           {"clip_events", r.clip_events},
           {"final_mean", r.moments.back().mean},
           {"final_variance", r.moments.back().variance},
           {"final_l1_vs_initial", numerics::l1_distance(fin, n0)}};
    o.write_json("sde.json", j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_ptf(const Settings& s, Outputs& o, std::ostream& out)
{
    const auto p = physics(s);
    const auto g = parse_grid(s.grid);
    const auto n0 = initial_density(s, p, g);
    const auto V = potential(s);
    ptf::EvolveOptions eo;
    eo.dt = s.dt;
    eo.t_end = s.t_end;
    eo.save_every = s.snapshot_every;
    eo.stop_when_stationary = s.stop_when_stationary;
    eo.stationarity_eps = s.stationarity_eps;
    eo.step.tol = s.tol;
    eo.step.max_refine = s.max_refine;
    eo.step.max_halvings = s.max_halvings;
    eo.step.accelerate = s.accelerate;
    eo.step.kernel.second_order = s.second_order_drift;
    eo.step.kernel.closure_order = s.closure_order;
    eo.step.kernel.qpot.quantum = s.quantum_potential;
    if (s.drift_density == "hermite") eo.step.kernel.density = ptf::DriftDensity::hermite;
    else if (s.drift_density == "grid") eo.step.kernel.density = ptf::DriftDensity::grid;
    else throw ConfigError("drift-density must be hermite or grid");

    const auto rec = ptf::evolve(n0, V, p, eo);
    {
        std::ofstream os = o.open("snapshots.csv");
        std::vector<std::string> cols;
        std::vector<const std::vector<double>*> data;
        for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
            cols.push_back("t=" + numerics::fmt_double(rec.times[k]));
            data.push_back(&rec.snapshots[k].values);
        }
        write_fields(os, g, cols, data);
    }
    {
        std::ofstream os = o.open("steps.csv");
        os << "step,iterations,last_norm\n";
        for (std::size_t k = 0; k < rec.steps; ++k) {
            const auto& nm = rec.norms[k];
            os << k + 1 << ',' << rec.iterations[k] << ',' << (nm.empty() ? std::string("") : numerics::fmt_double(nm.back()))
               << '\n';
        }
    }
    json j{{"steps", rec.steps},
           {"nonconverged_steps", rec.nonconverged_steps},
           {"monotone_fraction", rec.monotone_fraction()},
           {"stationary", rec.stationary},
           {"stationary_time", rec.stationary ? json(rec.stationary_time) : json(nullptr)},
           {"final_mean", numerics::mean(rec.final_density)},
           {"final_variance", numerics::variance(rec.final_density)},
           {"converged", rec.nonconverged_steps == 0}};
    o.write_json("ptf.json", j);
    out << j.dump(2) << '\n';
    return rec.nonconverged_steps == 0 ? kExitOk : kExitSolver;
}

int cmd_check(const Settings& s, Outputs& o, std::ostream& out, std::ostream& err)
{
    params::PhysicalParams raw;
    raw.mass = s.mass;
    raw.hbar = s.hbar;
    raw.omega = s.omega;
    raw.theta = s.theta;
    raw.gamma = s.gamma;
    raw.length = s.length;
    raw.chi_d = s.chi_d;
    const auto bad = params::violations(raw);
    json j;
    j["violations"] = bad;
    if (!bad.empty()) {
        for (const auto& b : bad) err << "E: config: " << b << '\n';
        o.write_json("check.json", j);
        return kExitConfig;
    }
    const auto p = params::derive(raw);
    const auto g = parse_grid(s.grid);
    j["params"] = params_json(p);
    const auto kw = params::kinetics_window(p, s.drift_scale, s.kinetics_eps);
    j["kinetics_notes"] = kw.notes;
    if (p.theta > 0.0 && p.beta > 0.0) {
        const auto q = oscillator::quasi_eigenstate(0, p, g);
        const auto cl = qpotential::classical_limit_check(q.density, p);
        j["classical_limit"] = {{"ratio", cl.ratio}, {"admissible", cl.admissible}, {"verdict", cl.verdict}};
        const auto res = qpotential::stationarity_residual(q.density, qpotential::PotentialSpec::harmonic(s.omega), p);
        const double nmax = q.density.max();
        double sup = 0.0;
        for (std::size_t i = 0; i < g.n_points; ++i)
            if (res.valid[i] && q.density.values[i] > 1e-8 * nmax) sup = std::max(sup, std::abs(res.field.values[i]));
        j["ground_state_residual"] = sup;
    }
    o.write_json("check.json", j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

numerics::Grid1D parse_grid(const std::string& spec)
{
    const auto parts = split(spec, ':');
    if (parts.size() != 3) throw ConfigError("grid must be min:max:points, got '" + spec + "'");
    const double lo = to_double(parts[0], "grid min");
    const double hi = to_double(parts[1], "grid max");
    const double n = to_double(parts[2], "grid points");
    if (n != std::floor(n) || n < 0.0) throw ConfigError("grid points must be a non-negative integer");
    try {
        return numerics::Grid1D::make(lo, hi, static_cast<std::size_t>(n));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
}

std::array<superposition::Coefficient, superposition::kModes> parse_coeffs(const std::string& spec)
{
    const auto parts = split(spec, ':');
    if (parts.size() != superposition::kModes)
        throw ConfigError("coeffs must be re,im:re,im:re,im, got '" + spec + "'");
    std::array<superposition::Coefficient, superposition::kModes> out{};
    for (int k = 0; k < superposition::kModes; ++k) {
        const auto ri = split(parts[k], ',');
        if (ri.size() != 2) throw ConfigError("coefficient '" + parts[k] + "' must be re,im");
        const std::complex<double> c(to_double(ri[0], "coefficient"), to_double(ri[1], "coefficient"));
        out[k] = {std::abs(c), std::abs(c) > 0.0 ? std::arg(c) : 0.0};
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << is.rdbuf();
    const std::string text = buf.str();
    std::vector<std::pair<std::string, std::string>> out;
    const std::string head = trim(text);
    if (!head.empty() && head.front() == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("config '" + path + "': " + e.what());
        }
        for (const auto& [k, v] : j.items()) {
            std::string val;
            if (v.is_string()) val = v.get<std::string>();
            else if (v.is_boolean()) val = v.get<bool>() ? "true" : "false";
            else if (v.is_number_integer()) val = std::to_string(v.get<long long>());
            else if (v.is_number_unsigned()) val = std::to_string(v.get<unsigned long long>());
            else if (v.is_number()) val = numerics::fmt_double(v.get<double>());
            else throw ConfigError("config key '" + k + "' must be a scalar");
            out.emplace_back(dashed(k), val);
        }
        return out;
    }
    std::istringstream ls(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ls, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config '" + path + "' line " + std::to_string(lineno) + ": expected key=value");
        out.emplace_back(dashed(trim(line.substr(0, eq))), trim(line.substr(eq + 1)));
    }
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    Settings s;
    CLI::App app{"Stochastic quantum hydrodynamics experiments", "sqh"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, Registry> regs;

    auto sub = [&](const std::string& name, const std::string& desc) -> Registry& {
        CLI::App* a = app.add_subcommand(name, desc);
        a->add_option("--config", config_path, "key=value or JSON config file; command-line flags take precedence");
        a->add_option("--set", sets, "override key=value (repeatable), applied after --config");
        return regs.emplace(name, Registry(a)).first->second;
    };

    {
        Registry& r = sub("params", "derived parameters, kinetics window, SI uncertainty products");
        add_physics(r, s);
        add_out(r, s);
        r.option("drift-scale", s.drift_scale, "drift magnitude for the kinetics window");
        r.option("kinetics-eps", s.kinetics_eps, "noise-to-drift tolerance of the kinetics window");
        r.option("mass-kg", s.mass_kg, "SI mass for the uncertainty products (0: skip)");
        r.option("temperature-k", s.temperature_k, "SI temperature for the uncertainty products (0: skip)");
    }
    {
        Registry& r = sub("eigenstate", "deterministic eigenstate density and V + V_qu");
        add_physics(r, s);
        add_grid(r, s);
        add_out(r, s);
        r.option("j", s.j, "level");
    }
    {
        Registry& r = sub("quasi", "noisy quasi-eigenstate");
        add_physics(r, s);
        add_grid(r, s);
        add_out(r, s);
        r.option("j", s.j, "level");
        r.option("bernoulli-form", s.bernoulli_form, "correction equation: stationary or as-printed");
        r.flag("exact-variance-report", s.exact_variance_report, "also report exact and first-order widths");
    }
    auto add_relax = [&](Registry& r) {
        add_physics(r, s);
        add_grid(r, s);
        add_out(r, s);
        r.option("coeffs", s.coeffs, "coefficients re,im:re,im:re,im");
        r.option("solver", s.solver, "ptf or sde");
        r.option("dt", s.dt, "time step");
        r.option("t-end", s.t_end, "relaxation time span");
        r.option("seed", s.seed, "seed");
        r.option("n-traj", s.n_traj, "sde trajectories");
        r.option("workers", s.workers, "worker threads (0: hardware concurrency)");
    };
    {
        Registry& r = sub("relax", "relax one superposition and classify the outcome");
        add_relax(r);
        r.option("t0", s.t0, "contact time");
        r.option("tau1", s.tau1, "phase offset of mode 0");
        r.option("tau2", s.tau2, "phase offset of mode 1");
        r.option("tau3", s.tau3, "phase offset of mode 2");
    }
    {
        Registry& r = sub("born", "Born-rule frequency harness over random contact times");
        add_relax(r);
        r.option("trials", s.trials, "number of trials");
    }
    auto add_run = [&](Registry& r, double& dt) {
        add_physics(r, s);
        add_grid(r, s);
        add_out(r, s);
        add_initial(r, s);
        r.option("potential", s.potential, "harmonic or free");
        r.flag("quantum-potential", s.quantum_potential, "include V_qu in the forces");
        r.flag("second-order-drift", s.second_order_drift, "second-order drift correction");
        r.option("dt", dt, "time step");
        r.option("t-end", s.t_end, "end time");
        r.option("closure-order", s.closure_order, "Gram-Charlier closure order");
        r.option("snapshot-every", s.snapshot_every, "steps between stored densities (0: first and last)");
    };
    {
        Registry& r = sub("sde-run", "mean-field Langevin ensemble");
        add_run(r, s.sde_dt);
        r.option("n-traj", s.n_traj, "trajectories");
        r.option("seed", s.seed, "seed");
        r.option("resample-every", s.resample_every, "steps between density refreshes");
        r.option("closure", s.closure, "hermite or kde");
        r.option("quantum-support", s.quantum_support, "V_qu support threshold relative to max n");
        r.flag("underdamped", s.underdamped, "second-order (inertial) dynamics");
        r.option("workers", s.workers, "worker threads (0: hardware concurrency)");
    }
    {
        Registry& r = sub("ptf-run", "transition-kernel propagation of the density");
        add_run(r, s.dt);
        r.option("tol", s.tol, "refinement tolerance on the drift change");
        r.option("max-refine", s.max_refine, "propagations per step");
        r.option("max-halvings", s.max_halvings, "times an unconverged step may be split in two");
        r.flag("accelerate", s.accelerate, "Anderson mixing of refinements");
        r.option("drift-density", s.drift_density, "hermite or grid");
        r.flag("stop-when-stationary", s.stop_when_stationary, "stop at stationarity");
        r.option("stationarity-eps", s.stationarity_eps, "stationarity threshold on L1/dt");
    }
    {
        Registry& r = sub("check", "validate parameters and report the classical-limit test");
        add_physics(r, s);
        add_grid(r, s);
        add_out(r, s);
        r.option("drift-scale", s.drift_scale, "drift magnitude for the kinetics window");
        r.option("kinetics-eps", s.kinetics_eps, "noise-to-drift tolerance of the kinetics window");
    }
    // Config and --set values are inserted ahead of the explicit arguments;
    // options keep their last value, so the command line wins.
    std::vector<std::string> args(argv, argv + argc);
    std::vector<std::string> injected;
    std::string name;
    try {
        if (args.size() >= 2 && !args[1].empty() && args[1][0] != '-') name = args[1];
        std::vector<std::string> rest;
        for (std::size_t i = 2; i < args.size(); ++i) {
            const std::string& a = args[i];
            auto take = [&](const std::string& flag, std::string& val) {
                if (a == flag) {
                    if (i + 1 >= args.size()) throw ConfigError(flag + " needs a value");
                    val = args[++i];
                    return true;
                }
                if (a.rfind(flag + "=", 0) == 0) {
                    val = a.substr(flag.size() + 1);
                    return true;
                }
                return false;
            };
            std::string val;
            if (take("--config", val)) {
                for (const auto& [k, v] : read_config(val)) injected.push_back("--" + k + "=" + v);
            } else if (take("--set", val)) {
                const auto eq = val.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + val + "'");
                injected.push_back("--" + dashed(trim(val.substr(0, eq))) + "=" + trim(val.substr(eq + 1)));
            } else {
                rest.push_back(a);
            }
        }
        if (!injected.empty()) {
            const auto it = regs.find(name);
            if (it == regs.end()) throw ConfigError("config values need a subcommand");
            for (const auto& inj : injected) {
                const std::string key = inj.substr(0, inj.find('='));
                if (key == "--config" || key == "--set" || !it->second.app()->get_option_no_throw(key))
                    throw ConfigError("unknown config key '" + key.substr(2) + "' for " + name);
            }
        }
        std::vector<std::string> merged = args;
        if (!name.empty()) {
            merged = {args[0], name};
            merged.insert(merged.end(), injected.begin(), injected.end());
            merged.insert(merged.end(), rest.begin(), rest.end());
        }
        for (auto& [n, r] : regs)
            for (CLI::Option* opt : r.app()->get_options())
                if (opt->get_name() != "--set") opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

        std::vector<const char*> cargv;
        for (const auto& m : merged) cargv.push_back(m.c_str());
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "E: config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "E: config: " << e.what() << '\n';
        return kExitConfig;
    }

    const Registry& reg = regs.at(name);
    try {
        json flags = json::object();
        json cfg = reg.values();
        Outputs o(s.out, name, cfg);
        int code = kExitOk;
        if (name == "params") code = cmd_params(s, o, out);
        else if (name == "eigenstate") code = cmd_eigenstate(s, o, out);
        else if (name == "quasi") code = cmd_quasi(s, o, out);
        else if (name == "relax") code = cmd_relax(s, o, out);
        else if (name == "born") code = cmd_born(s, o, out);
        else if (name == "sde-run") code = cmd_sde(s, o, out);
        else if (name == "ptf-run") code = cmd_ptf(s, o, out);
        else if (name == "check") code = cmd_check(s, o, out, err);
        flags["exit_code"] = code;
        flags["solver_nonconvergence"] = code == kExitSolver;
        o.manifest(flags);
        if (code == kExitSolver) err << "E: solver: run did not converge; artifacts written with flags\n";
        return code;
    } catch (const ConfigError& e) {
        err << "E: config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        err << "E: config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "E: solver: " << e.what() << '\n';
        return kExitSolver;
    }
}

}  // namespace sqh::cli
