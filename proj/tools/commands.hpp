#pragma once

#include <pnflat/pnflat.hpp>

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace pnflat::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int schema_version = 1;
inline constexpr const char* version = "1.0.0";

enum Exit { ok = 0, invariant_failed = 1, module_error = 2, config_error = 3 };

// Numbers may be given as JSON numbers or as "p/q" strings.
inline double parse_number(const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) throw ConfigurationError(key + ": expected a number or a \"p/q\" string");
    const std::string s = v.get<std::string>();
    try {
        std::size_t pos = 0;
        const auto slash = s.find('/');
        if (slash == std::string::npos) {
            const double x = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return x;
        }
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        std::size_t pa = 0, pb = 0;
        const double num = std::stod(a, &pa), den = std::stod(b, &pb);
        if (pa != a.size() || pb != b.size() || den == 0) throw std::invalid_argument(s);
        return num / den;
    } catch (const std::invalid_argument&) {
        throw ConfigurationError(key + ": cannot parse \"" + s + "\" as a number");
    } catch (const std::out_of_range&) {
        throw ConfigurationError(key + ": \"" + s + "\" is out of range");
    }
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"kernel", "profile", "solve2d", "stability", "extend", "validate"};
    return s;
}

// Defaults per subcommand; keys not listed here are rejected.
inline json defaults(const std::string& cmd) {
    const json grid = {{"L1", 100.0}, {"L2", 6.4}, {"n1", 512}, {"n2", 32}};
    json d;
    if (cmd == "kernel") {
        d = {{"beta", json::array({0.7, 0.75, 0.9, 1.0, 1.1, "4/3", 1.45})}, {"n_nodes", 512}};
    } else if (cmd == "profile") {
        d = {{"potential", "sinusoidal"}, {"beta_tilde", 1.0}, {"L", 50.0}, {"n", 1024}, {"tol", 1e-8}};
    } else if (cmd == "solve2d") {
        d = grid;
        d.update(json{{"beta", 1.0}, {"potential", "sinusoidal"}, {"amplitude", 0.1}, {"modes", 6}, {"tol", 1e-8},
                      {"flatness_tol", 1e-3}, {"distance_tol", 1e-3}, {"seed", nullptr}});
    } else if (cmd == "stability") {
        d = {{"L1", 100.0}, {"L2", 12.8}, {"n1", 512}, {"n2", 32}, {"beta", 1.0}, {"profile", "straight"},
             {"separation", 2.0}, {"tol", 1e-8}, {"seed", nullptr}, {"radii", json::array()}, {"rho", 2.0}};
    } else if (cmd == "extend") {
        d = grid;
        d.update(json{{"nu", 0.0}, {"G", 0.5}, {"source", "solve2d"}, {"amplitude", 0.1}, {"tol", 1e-8},
                      {"x3", json::array({-2.0, -0.3, -1e-3, 1e-3, 0.3, 2.0})}, {"seed", nullptr}});
    } else if (cmd == "validate") {
        d = {{"seed", nullptr}, {"samples", 10000}};
    } else {
        throw ConfigurationError("unknown subcommand '" + cmd + "'");
    }
    d["schema_version"] = schema_version;
    return d;
}

// File values over defaults, then flag overrides over both.
inline json effective_config(const std::string& cmd, const json& file, const json& overrides) {
    json cfg = defaults(cmd);
    auto merge = [&](const json& src, const char* what) {
        if (src.is_null()) return;
        if (!src.is_object()) throw ConfigurationError(std::string(what) + ": expected a JSON object");
        for (const auto& [k, v] : src.items()) {
            if (!cfg.contains(k)) throw ConfigurationError(std::string(what) + ": unknown key '" + k + "' for " + cmd);
            cfg[k] = v;
        }
    };
    if (!file.is_null() && (!file.contains("schema_version") || file["schema_version"] != schema_version))
        throw ConfigurationError("config: schema_version must be " + std::to_string(schema_version));
    merge(file, "config");
    merge(overrides, "flags");
    return cfg;
}

inline json load_config_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigurationError("config: cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError(std::string("config: ") + e.what());
    }
}

class Output {
public:
    Output(fs::path dir, std::string cmd, json config)
        : dir_(std::move(dir)), cmd_(std::move(cmd)), config_(std::move(config)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigurationError("--out: cannot create " + dir_.string() + ": " + ec.message());
    }

    const fs::path& dir() const { return dir_; }
    const json& config() const { return config_; }
    std::string config_hash() const { return hex64(fnv1a(config_.dump())); }

    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows) {
        std::ofstream f(dir_ / name, std::ios::binary);
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << r[i];
            f << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        files_.push_back(name);
    }

    // Little-endian f64, row-major (index i * n2 + j), with a JSON sidecar.
    void field(const std::string& stem, const Grid2D& g, const std::vector<double>& v, const std::string& what) {
        static_assert(std::endian::native == std::endian::little, "field files are written in host order");
        std::ofstream f(dir_ / (stem + ".f64"), std::ios::binary);
        f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
        json side = {{"file", stem + ".f64"},
                     {"quantity", what},
                     {"dtype", "float64"},
                     {"endianness", "little"},
                     {"layout", "row-major, index i*n2 + j, x1 = -L1/2 + i*h1, x2 = -L2/2 + j*h2"},
                     {"shape", {g.n1, g.n2}},
                     {"L1", g.L1},
                     {"L2", g.L2},
                     {"config", config_}};
        write_json(stem + ".json", side);
        files_.push_back(stem + ".f64");
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream f(dir_ / name, std::ios::binary);
        f << j.dump(2) << '\n';
        files_.push_back(name);
    }

    void suite(const std::string& name, bool pass) { suites_[name] = pass; }
    bool all_pass() const {
        for (const auto& [k, v] : suites_)
            if (!v) return false;
        return true;
    }

    void manifest() {
        json mods = json::object();
        for (const char* m : {"core", "kernel", "symbols", "operator", "profile1d", "solver2d", "stability", "elastic3d",
                              "cli"})
            mods[m] = version;
        json m = {{"subcommand", cmd_}, {"config_hash", "fnv1a64:" + config_hash()}, {"module_versions", mods},
                  {"suites", suites_},  {"pass", all_pass()},                        {"files", files_},
                  {"config", config_}};
        std::ofstream f(dir_ / "manifest.json", std::ios::binary);
        f << m.dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::string cmd_;
    json config_;
    std::vector<std::string> files_;
    std::map<std::string, bool> suites_;
};

namespace detail {

inline std::uint64_t require_seed(const json& cfg) {
    if (!cfg.contains("seed") || cfg["seed"].is_null())
        throw ConfigurationError("a random seed is required (--seed N or \"seed\" in the config)");
    if (!cfg["seed"].is_number_integer() || cfg["seed"].get<long long>() < 0)
        throw ConfigurationError("seed must be a non-negative integer");
    return cfg["seed"].get<std::uint64_t>();
}

inline int get_int(const json& cfg, const std::string& k) {
    if (!cfg[k].is_number_integer()) throw ConfigurationError(k + ": expected an integer");
    return cfg[k].get<int>();
}

inline double get_num(const json& cfg, const std::string& k) { return parse_number(cfg[k], k); }

inline std::string get_str(const json& cfg, const std::string& k) {
    if (!cfg[k].is_string()) throw ConfigurationError(k + ": expected a string");
    return cfg[k].get<std::string>();
}

inline std::vector<double> get_list(const json& cfg, const std::string& k) {
    std::vector<double> out;
    if (cfg[k].is_array()) {
        for (const auto& v : cfg[k]) out.push_back(parse_number(v, k));
    } else {
        out.push_back(parse_number(cfg[k], k));
    }
    return out;
}

inline Grid2D get_grid(const json& cfg) {
    const double L1 = get_num(cfg, "L1"), L2 = get_num(cfg, "L2");
    const int n1 = get_int(cfg, "n1"), n2 = get_int(cfg, "n2");
    if (!(L1 > 0 && L2 > 0)) throw ConfigurationError("grid: L1 and L2 must be positive");
    if (n1 < 8 || n2 < 8 || n1 % 2 || n2 % 2) throw ConfigurationError("grid: n1 and n2 must be even and >= 8");
    if (0.5 * L1 < 50) throw ConfigurationError("grid: L1 must be >= 100 (background half-width >= 50)");
    return Grid2D(L1, L2, n1, n2);
}

inline MisfitPotential get_potential(const json& cfg) {
    const std::string k = get_str(cfg, "potential");
    if (k == "sinusoidal") return sinusoidal_potential();
    if (k == "double_well") return double_well_potential();
    throw ConfigurationError("potential: expected \"sinusoidal\" or \"double_well\", got \"" + k + "\"");
}

inline double get_positive_beta(const json& cfg) {
    const double b = get_num(cfg, "beta");
    if (!beta_in_positive_range(b))
        throw ConfigurationError("beta = " + num(b) + " is outside the kernel-positive range (2/3, 3/2)");
    return b;
}

inline void history_csv(Output& out, const std::string& name, const std::vector<double>& h) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < h.size(); ++i) rows.push_back({std::to_string(i), num(h[i])});
    out.csv(name, {"iteration", "residual"}, rows);
}

inline bool report(std::ostream& err, const std::string& what, bool pass, double value, double bound) {
    if (!pass) err << "FAILED " << what << ": " << num(value) << " (bound " << num(bound) << ")\n";
    return pass;
}

}  // namespace detail

inline int cmd_kernel(Output& out, std::ostream& err) {
    using namespace detail;
    const json& cfg = out.config();
    const std::vector<double> betas = get_list(cfg, "beta");
    const int n = get_int(cfg, "n_nodes");
    if (betas.empty()) throw ConfigurationError("beta: empty list");
    for (double b : betas)
        if (!(b >= 0.5 && b <= 2.0)) throw ConfigurationError("beta = " + num(b) + " must lie in [1/2, 2]");
    if (n < 64 || n % 2) throw ConfigurationError("n_nodes must be even and >= 64");

    std::vector<std::vector<std::string>> summary;
    bool all = true;
    for (std::size_t b = 0; b < betas.size(); ++b) {
        const AngularKernel ak = solve_angular(betas[b], n);
        std::vector<std::vector<std::string>> rows;
        for (int j = 0; j < n; ++j) rows.push_back({num(ak.theta_nodes[j]), num(ak.v_values[j])});
        out.csv("kernel_" + std::to_string(b) + ".csv", {"theta", "v"}, rows);
        bool pass = true;
        for (const auto& c : kernel_invariants(ak))
            pass &= report(err, "kernel beta=" + num(ak.beta) + " " + c.name, c.pass, c.value, c.bound);
        all &= pass;
        summary.push_back({num(ak.beta), num(ak.v_values[0]), num(ak.v_values[n / 2]), num(ak.v0),
                           num(ak.v_half_pi), num(ak.c_beta), num(ode_residual(ak)),
                           beta_in_positive_range(ak.beta) ? "true" : "false", pass ? "true" : "false"});
    }
    out.csv("summary.csv",
            {"beta", "v0", "v_half_pi", "v0_closed", "v_half_pi_closed", "c_beta", "ode_residual", "kernel_positive",
             "pass"},
            summary);
    out.suite("kernel_invariants", all);
    return all ? ok : invariant_failed;
}

inline int cmd_profile(Output& out, std::ostream& err) {
    using namespace detail;
    const json& cfg = out.config();
    const MisfitPotential W = get_potential(cfg);
    const double bt = get_num(cfg, "beta_tilde"), L = get_num(cfg, "L"), tol = get_num(cfg, "tol");
    const int n = get_int(cfg, "n");
    if (!(bt > 0)) throw ConfigurationError("beta_tilde must be positive");
    if (!(L >= 50)) throw ConfigurationError("L must be >= 50");
    if (n < 64 || n % 2) throw ConfigurationError("n must be even and >= 64");
    if (!(tol > 0)) throw ConfigurationError("tol must be positive");
    const Grid1D g(L, n);

    std::vector<double> hist;
    ProfileSolveOptions opt;
    opt.history = &hist;
    Profile1D phi;
    try {
        phi = solve_profile(W, bt, g, tol, opt);
    } catch (const NumericalError& e) {
        history_csv(out, "residual_history.csv", e.history.empty() ? hist : e.history);
        err << "profile solver failed: " << e.what() << "\n";
        out.suite("profile_solve", false);
        return module_error;
    }
    history_csv(out, "residual_history.csv", hist);
    const TailFit tf = fit_tail_detail(phi);
    const double c_expected = 2 / (pi * bt * W.second_deriv(1.0));
    const double tail_err = std::abs(tf.c - c_expected) / c_expected;
    const bool sinus = W.kind == PotentialKind::sinusoidal;

    std::vector<std::vector<std::string>> rows;
    double dist = 0;
    for (int j = 0; j < n; ++j) {
        std::vector<std::string> r{num(g.x(j)), num(phi.values[j])};
        if (sinus) {
            const double o = 2 / pi * std::atan(bt * g.x(j));
            dist = std::max(dist, std::abs(phi.values[j] - o));
            r.push_back(num(o));
        }
        rows.push_back(r);
    }
    out.csv("profile.csv", sinus ? std::vector<std::string>{"x", "phi", "oracle"} : std::vector<std::string>{"x", "phi"},
            rows);
    json meta = {{"beta_tilde", bt},
                 {"residual", phi.residual},
                 {"tail_coefficient", tf.c},
                 {"tail_expected", c_expected},
                 {"tail_relative_error", tail_err},
                 {"tail_warning", tf.warning},
                 {"config", cfg}};
    bool pass = report(err, "tail coefficient within 2%", tail_err <= 0.02, tail_err, 0.02);
    if (sinus) {
        meta["oracle_distance"] = dist;
        pass &= report(err, "oracle distance", dist <= 1e-4, dist, 1e-4);
    }
    meta["pass"] = pass;
    out.write_json("metadata.json", meta);
    out.suite("profile", pass);
    return pass ? ok : invariant_failed;
}

struct Solve2DResult {
    Field2D field;
    Profile1D phi;
    SolveReport report;
};

inline Solve2DResult solve2d_from_config(const json& cfg, const MisfitPotential& W, double beta) {
    using namespace detail;
    const Grid2D g = get_grid(cfg);
    const std::uint64_t seed = require_seed(cfg);
    const double amp = get_num(cfg, "amplitude"), tol = get_num(cfg, "tol");
    const int modes = get_int(cfg, "modes");
    if (!(amp >= 0)) throw ConfigurationError("amplitude must be >= 0");
    if (!(tol > 0)) throw ConfigurationError("tol must be positive");
    if (modes < 1) throw ConfigurationError("modes must be >= 1");
    Solve2DResult r;
    r.phi = solve_profile(W, beta, background_grid(g), 1e-8);
    const Field2D init = noisy_straight_field(r.phi, g, amp, seed, modes);
    r.field = solve_reduced(W, params_from_beta(beta), init, tol, &r.report);
    return r;
}

inline int cmd_solve2d(Output& out, std::ostream& err) {
    using namespace detail;
    const json& cfg = out.config();
    const double beta = get_positive_beta(cfg);
    const MisfitPotential W = get_potential(cfg);
    const double ftol = get_num(cfg, "flatness_tol"), dtol = get_num(cfg, "distance_tol");
    Solve2DResult r;
    try {
        r = solve2d_from_config(cfg, W, beta);
    } catch (const NumericalError& e) {
        history_csv(out, "residual_history.csv", e.history);
        err << "2D solver failed: " << e.what() << "\n";
        out.suite("solve2d", false);
        return module_error;
    }
    history_csv(out, "residual_history.csv", r.report.residual_history);
    const Grid2D& g = r.field.grid();
    out.field("field", g, r.field.composite(), "u = background + perturbation");
    const double flat = flatness_metric(r.field);
    const TranslateFit tf = distance_to_translate(r.field, r.phi);
    bool pass = report(err, "flatness_metric", flat <= ftol, flat, ftol);
    pass &= report(err, "distance to translate", tf.distance <= dtol, tf.distance, dtol);
    out.write_json("summary.json", {{"flatness", flat},
                                    {"distance_to_translate", tf.distance},
                                    {"shift", tf.shift},
                                    {"residual", r.report.residual},
                                    {"flow_steps", r.report.flow_steps},
                                    {"newton_steps", r.report.newton_steps},
                                    {"energy_monotone", r.report.energy_monotone},
                                    {"pass", pass},
                                    {"config", cfg}});
    out.suite("rigidity", pass);
    return pass ? ok : invariant_failed;
}

inline int cmd_stability(Output& out, std::ostream& err) {
    using namespace detail;
    const json& cfg = out.config();
    const double beta = get_positive_beta(cfg);
    const Grid2D g = get_grid(cfg);
    const std::string kind = get_str(cfg, "profile");
    if (kind != "straight" && kind != "saddle") throw ConfigurationError("profile: expected \"straight\" or \"saddle\"");
    const double d = get_num(cfg, "separation"), tol = get_num(cfg, "tol"), rho = get_num(cfg, "rho");
    const std::vector<double> radii = get_list(cfg, "radii");
    EigenOptions eo;
    eo.seed = require_seed(cfg);
    eo.tol = tol;
    for (double R : radii)
        if (!(R > 0 && R < 0.5 * std::min(g.L1, g.L2))) throw ConfigurationError("radii must lie in (0, min(L1,L2)/2)");

    const auto W = sinusoidal_potential();
    const auto p = params_from_beta(beta);
    const Profile1D phi = solve_profile(W, beta, background_grid(g), 1e-8);
    const Field2D u = kind == "straight" ? embed_profile(phi, 0.0, g) : two_front_saddle(phi, g, d);
    const StabilityReport s = min_eig_linearization(u, p, W, eo);
    out.field("eigenvector", g, s.eigenvector.samples, "lowest eigenvector of the linearization");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < s.ritz_history.size(); ++i) rows.push_back({std::to_string(i), num(s.ritz_history[i])});
    out.csv("ritz_history.csv", {"iteration", "ritz_value"}, rows);

    bool pass = report(err, "eigen residual", s.residual <= 10 * tol, s.residual, tol * 10);
    if (kind == "straight")
        pass &= report(err, "min eigenvalue in [-1e-2, 1e-2]", std::abs(s.min_eigenvalue) <= 1e-2, s.min_eigenvalue,
                       1e-2);
    else
        pass &= report(err, "saddle min eigenvalue < -1e-2", s.min_eigenvalue < -1e-2, s.min_eigenvalue, -1e-2);

    json summary = {{"profile", kind},         {"min_eigenvalue", s.min_eigenvalue}, {"residual", s.residual},
                    {"iterations", s.iterations}, {"periodic_cell_only", s.periodic_cell_only}};
    if (!radii.empty()) {
        const auto ke = make_kernel_eval(p, 512);
        EnergyOptions o;
        o.rho = rho;
        std::vector<std::vector<std::string>> rr;
        bool finite = true;
        for (const auto& r : ratio_trends(u, radii, ke, W, 0.1, o)) {
            rr.push_back({num(r.R), num(r.energy), num(r.second_variation_ratio), num(r.bv_ratio),
                          num(r.envelope_ratio)});
            finite &= std::isfinite(r.energy) && std::isfinite(r.second_variation_ratio) &&
                      std::isfinite(r.bv_ratio) && std::isfinite(r.envelope_ratio);
        }
        out.csv("ratios.csv", {"R", "energy", "second_variation", "bv", "envelope"}, rr);
        pass &= report(err, "ratio trends finite", finite, finite, 1);
    }
    summary["pass"] = pass;
    summary["config"] = cfg;
    out.write_json("summary.json", summary);
    out.suite("stability", pass);
    return pass ? ok : invariant_failed;
}

inline BoundaryData random_boundary_data(const Grid2D& g, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    auto u1 = SpectralField2D::from_function(g, [&](double, double) { return amplitude * N(rng); });
    auto u2 = SpectralField2D::from_function(g, [&](double, double) { return amplitude * N(rng); });
    return boundary_data(u1, u2);
}

inline int cmd_extend(Output& out, std::ostream& err) {
    using namespace detail;
    const json& cfg = out.config();
    const double nu = get_num(cfg, "nu"), G = get_num(cfg, "G");
    if (!(nu >= -1 && nu < 0.5)) throw ConfigurationError("nu must lie in [-1, 1/2)");
    if (!(G > 0)) throw ConfigurationError("G must be positive");
    const ElasticParams p = make_elastic_params(nu, G);
    const Grid2D g = get_grid(cfg);
    const std::string src = get_str(cfg, "source");
    const std::vector<double> x3 = get_list(cfg, "x3");
    for (double z : x3)
        if (z == 0) throw ConfigurationError("x3 samples must be nonzero");

    const auto W = sinusoidal_potential();
    BoundaryData bd;
    std::optional<Profile1D> background;
    if (src == "solve2d") {
        if (!p.kernel_positive) throw ConfigurationError("source solve2d needs beta = 1 - nu in (2/3, 3/2)");
        json c2 = cfg;
        c2["potential"] = "sinusoidal";
        c2["modes"] = 6;
        const Solve2DResult r = solve2d_from_config(c2, W, p.beta);
        bd = lift_traces(r.field, p);
        background = r.field.background;
    } else if (src == "straight") {
        if (!p.kernel_positive) throw ConfigurationError("source straight needs beta = 1 - nu in (2/3, 3/2)");
        const Field2D f = embed_profile(exact_sinusoidal_profile(p.beta, background_grid(g)), 0.0, g);
        bd = lift_traces(f, p);
        background = f.background;
    } else if (src == "random") {
        bd = random_boundary_data(g, get_num(cfg, "amplitude"), require_seed(cfg));
    } else {
        throw ConfigurationError("source: expected \"solve2d\", \"straight\" or \"random\"");
    }

    const HalfSpaceField hs = extend(bd, p);
    const RoundTrip rt = traction_round_trip(hs, bd);
    const double lame = lame_residual(hs, x3);
    const PhysicalTraction pt = physical_traction(hs);
    out.field("sigma13_sum", g, pt.s13_sum, "sigma13(0+) + sigma13(0-)");
    out.field("sigma23_sum", g, pt.s23_sum, "sigma23(0+) + sigma23(0-)");

    bool pass = report(err, "D2N round trip", rt.d2n_defect <= 1e-10, rt.d2n_defect, 1e-10);
    pass &= report(err, "Lame residual", lame <= 1e-10, lame, 1e-10);
    pass &= report(err, "sigma33 continuity", rt.sigma33_jump <= 1e-10, rt.sigma33_jump, 1e-10);
    json summary = {{"d2n_defect", rt.d2n_defect},       {"sigma33_jump", rt.sigma33_jump},
                    {"hermitian_defect", rt.hermitian_defect}, {"lame_residual", lame},
                    {"imag_max", pt.imag_max},           {"nyquist_dropped", hs.nyquist_dropped},
                    {"rigid_offset", hs.rigid_offset}};
    if (background && G == 0.5) {
        const double br = boundary_residual(hs, W, &*background);
        summary["boundary_residual"] = br;
        const double bound = src == "straight" ? 1e-4 : 1e-3;
        pass &= report(err, "boundary residual", br <= bound, br, bound);
    }
    summary["pass"] = pass;
    summary["config"] = cfg;
    out.write_json("summary.json", summary);
    out.suite("extend", pass);
    return pass ? ok : invariant_failed;
}

inline int cmd_validate(Output& out, std::ostream& err) {
    using namespace detail;
    const json& cfg = out.config();
    const std::uint64_t seed = require_seed(cfg);
    const int samples = get_int(cfg, "samples");
    if (samples < 1) throw ConfigurationError("samples must be >= 1");
    std::vector<std::vector<std::string>> rows;
    auto record = [&](const std::string& suite, const std::string& check, bool pass, double value, double bound) {
        rows.push_back({suite, check, num(value), num(bound), pass ? "true" : "false"});
        report(err, suite + " " + check, pass, value, bound);
        return pass;
    };

    bool k_ok = true;
    for (double b : {0.7, 0.75, 0.9, 1.0, 1.1, 4.0 / 3, 1.45}) {
        const AngularKernel ak = solve_angular(b, 512);
        for (const auto& c : kernel_invariants(ak)) k_ok &= record("kernel", c.name + " beta=" + num(b), c.pass, c.value, c.bound);
    }
    out.suite("kernel", k_ok);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-20, 20);
    bool s_ok = true;
    for (double nu : {-0.4, 0.0, 0.25}) {
        const SymbolContext ctx{make_elastic_params(nu)};
        double worst = 0;
        for (int s = 0; s < samples; ++s) {
            const Vec2 k(U(rng), U(rng));
            if (k.norm() == 0) continue;
            const Eigen::Matrix2d A = d2n_matrix(k, ctx);
            const double lhs = A(0, 0) + A(0, 1) * u2_ratio(k, ctx);
            const double rhs = 2 * ctx.params.shear_modulus * scalar_symbol(k, ctx);
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        }
        s_ok &= record("symbols", "elimination nu=" + num(nu), worst <= 1e-12, worst, 1e-12);
    }
    out.suite("symbols", s_ok);

    bool p_ok = true;
    const auto W = sinusoidal_potential();
    for (double bt : {1.0, 7.0 / 6, 4.0 / 3}) {
        const double r = profile_residual(exact_sinusoidal_profile(bt, Grid1D(50, 1024)), W);
        p_ok &= record("profile1d", "exact residual beta_tilde=" + num(bt), r <= 1e-6, r, 1e-6);
    }
    out.suite("profile1d", p_ok);

    const Grid2D g(6.0, 5.0, 16, 16);
    bool e_ok = true;
    for (double nu : {-0.4, 0.0, 0.25}) {
        const auto bd = random_boundary_data(g, 1.0, seed + 1);
        const auto hs = extend(bd, make_elastic_params(nu));
        const RoundTrip rt = traction_round_trip(hs, bd);
        const double lame = lame_residual(hs, {-1.0, 1e-3, 1.0});
        e_ok &= record("elastic3d", "round trip nu=" + num(nu), rt.d2n_defect <= 1e-10, rt.d2n_defect, 1e-10);
        e_ok &= record("elastic3d", "Lame residual nu=" + num(nu), lame <= 1e-10, lame, 1e-10);
        e_ok &= record("elastic3d", "sigma33 jump nu=" + num(nu), rt.sigma33_jump <= 1e-10, rt.sigma33_jump, 1e-10);
    }
    out.suite("elastic3d", e_ok);

    out.csv("checks.csv", {"suite", "check", "value", "bound", "pass"}, rows);
    return out.all_pass() ? ok : invariant_failed;
}

// Runs one subcommand with an already merged config. Module errors map to nonzero exit codes.
inline int run(const std::string& cmd, const json& cfg, const fs::path& out_dir, std::ostream& err) {
    try {
        Output out(out_dir, cmd, cfg);
        int code = ok;
        try {
            if (cmd == "kernel") code = cmd_kernel(out, err);
            else if (cmd == "profile") code = cmd_profile(out, err);
            else if (cmd == "solve2d") code = cmd_solve2d(out, err);
            else if (cmd == "stability") code = cmd_stability(out, err);
            else if (cmd == "extend") code = cmd_extend(out, err);
            else if (cmd == "validate") code = cmd_validate(out, err);
            else throw ConfigurationError("unknown subcommand '" + cmd + "'");
        } catch (const ConfigurationError&) {
            throw;
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            err << cmd << ": " << e.what() << "\n";
            out.suite(cmd, false);
            code = module_error;
        }
        out.manifest();
        return code;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << "\n";
        return config_error;
    } catch (const ValidationError& e) {
        err << "configuration error: " << e.what() << "\n";
        return config_error;
    } catch (const json::exception& e) {
        err << "configuration error: " << e.what() << "\n";
        return config_error;
    }
}

}  // namespace pnflat::cli
