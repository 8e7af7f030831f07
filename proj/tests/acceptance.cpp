// One pass/fail line per acceptance criterion; usage: acceptance <n> (1..11) or acceptance all.
#include <pnflat/pnflat.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace pnflat;

namespace {

const std::vector<double> kBetas{0.7, 0.75, 0.9, 1.0, 1.1, 4.0 / 3, 1.45};

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict closed_forms() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0, flat = 0;
    for (double b : kBetas) {
        const AngularKernel ak = solve_angular(b, 1024);
        const int n = ak.n;
        worst = std::max(worst, std::abs(ak.v_values[0] - (3 - 2 * b) / (9 * std::pow(b, 1.5))));
        worst = std::max(worst, std::abs(ak.v_values[n / 2] - (3 * b - 2) / (9 * b * b)));
        if (b == 1.0)
            for (double v : ak.v_values) flat = std::max(flat, std::abs(v - 1.0 / 9));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-8 && flat <= 1e-10 && t < 5,
            fmt("max anchor error %.3e (<= 1e-8), beta=1 deviation from 1/9 %.3e (<= 1e-10), %.2f s (< 5 s)", worst,
                flat, t)};
}

Verdict ode_residuals() {
    double worst = 0, at = 0;
    for (double b : kBetas) {
        const double r = ode_residual(solve_angular(b, 512));
        if (r > worst) worst = r, at = b;
    }
    return {worst <= 1e-5, fmt("max ODE residual %.3e at beta=%.4g (<= 1e-5, n=512)", worst, at)};
}

Verdict kernel_bounds() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0, 2 * pi), S(0.1, 10);
    double lower = 0, upper = 0, upper_beta = 0, hom = 0, even = 0;
    for (double b : kBetas) {
        if (!beta_in_positive_range(b)) continue;
        const KernelEval ke = make_kernel_eval(params_from_beta(b), 1024);
        const double cb = ke.angular.c_beta;
        for (int s = 0; s < 10000; ++s) {
            const double t = U(rng), r = S(rng);
            const Vec2 y(r * std::cos(t), r * std::sin(t));
            const double k = kernel_bar(y, ke), r3 = r * r * r;
            lower = std::max(lower, (cb / r3 - k) * r3);
            if ((k - 1 / r3) * r3 > upper) upper = (k - 1 / r3) * r3, upper_beta = b;
            even = std::max(even, std::abs(kernel_bar(-y, ke) - k) / k);
            hom = std::max(hom, std::abs(kernel_bar(2.5 * y, ke) * 15.625 - k) / k);
        }
    }
    const bool pass = lower <= 1e-10 && upper <= 1e-10 && hom <= 1e-12 && even <= 1e-12;
    return {pass, fmt("lower-bound violation %.3e, upper-bound violation max (K|y|^3 - 1) = %.4f at beta=%.4g, "
                      "homogeneity %.1e, evenness %.1e (all <= 1e-10/1e-12)",
                      lower, upper, upper_beta, hom, even)};
}

Verdict operator_cross_validation() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid2D g(128, 128, 1024, 1024);
    auto gauss = [](double x, double y) { return std::exp(-(x * x + y * y)); };
    const auto u = SpectralField2D::from_function(g, gauss);
    double worst = 0;
    for (double b : {0.8, 1.0, 1.3}) {
        const KernelEval ke = make_kernel_eval(params_from_beta(b), 1024);
        const auto Lu = apply_spectral(u, SymbolContext{ke.params});
        QuadratureScheme qs;
        qs.far_pair_sum = 0.0;
        for (auto [i, j] : {std::pair{512, 512}, {516, 512}, {512, 518}, {520, 508}, {502, 524}}) {
            const double q =
                apply_quadrature([&](const Vec2& y) { return gauss(y[0], y[1]); }, Vec2(g.x1(i), g.x2(j)), ke, qs);
            worst = std::max(worst, std::abs(q - Lu.at(i, j)) / std::abs(Lu.at(i, j)));
        }
    }
    // single modes at beta = 1: eigenvalue |k|
    const Grid2D gm(2 * pi, 2 * pi, 32, 32);
    const SymbolContext c1{params_from_beta(1.0)};
    double eig = 0;
    for (auto [a, b] : {std::pair{1, 0}, {0, 3}, {2, 5}, {-4, 7}, {9, -1}}) {
        const auto m = SpectralField2D::from_function(gm, [&](double x, double y) { return std::cos(a * x + b * y); });
        const auto Lm = apply_spectral(m, c1);
        const double k = std::hypot(a, b);
        for (std::size_t q = 0; q < m.samples.size(); ++q) eig = std::max(eig, std::abs(Lm.samples[q] - k * m.samples[q]));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-3 && eig <= 1e-10 && t < 60,
            fmt("max relative quadrature/spectral gap %.3e (<= 1e-3), mode eigenvalue error %.3e (<= 1e-10), %.1f s "
                "(< 60 s)",
                worst, eig, t)};
}

Verdict exact_solution() {
    const auto W = sinusoidal_potential();
    const Grid1D g(50, 1024);
    double res = 0, dist = 0, tail = 0;
    for (double bt : {1.0, 7.0 / 6, 4.0 / 3}) {
        res = std::max(res, profile_residual(exact_sinusoidal_profile(bt, g), W));
        std::vector<double> init(g.n);
        for (int j = 0; j < g.n; ++j) {
            const double x = g.x(j);
            init[j] = 2 / pi * std::atan(1.6 * x) + 0.05 * std::exp(-x * x) * std::sin(3 * x);
        }
        ProfileSolveOptions opt;
        opt.initial = &init;
        const Profile1D p = solve_profile(W, bt, g, 1e-8, opt);
        for (int j = 0; j < g.n; ++j) dist = std::max(dist, std::abs(p.values[j] - 2 / pi * std::atan(bt * g.x(j))));
        const double c = fit_tail_detail(p).c, ce = 2 / (pi * bt);
        tail = std::max(tail, std::abs(c - ce) / ce);
    }
    return {res <= 1e-6 && dist <= 1e-4 && tail <= 0.02,
            fmt("exact residual %.3e (<= 1e-6), recovered sup distance %.3e (<= 1e-4), tail constant error %.2f%% "
                "(<= 2%%)",
                res, dist, 100 * tail)};
}

Verdict symbol_identity() {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> N;
    double elim = 0, rot = 0;
    for (double nu : {-0.4, 0.0, 0.25}) {
        const SymbolContext c{make_elastic_params(nu)};
        for (int s = 0; s < 10000; ++s) {
            const double sc = std::exp(3 * N(rng));
            const Vec2 k(sc * N(rng), sc * N(rng));
            const Eigen::Matrix2d A = d2n_matrix(k, c);
            const double lhs = A(0, 0) + A(0, 1) * u2_ratio(k, c), rhs = 2 * c.params.shear_modulus * scalar_symbol(k, c);
            elim = std::max(elim, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        }
    }
    std::uniform_real_distribution<double> A(-1.5, 1.5), T(-50, 50);
    for (double b : {0.8, 1.0, 1.3}) {
        const SymbolContext c{params_from_beta(b)};
        for (int s = 0; s < 10000; ++s) {
            const double a = A(rng), t = T(rng);
            const double m = scalar_symbol(Vec2(t * std::cos(a), t * std::sin(a)), c);
            const double ref = std::abs(t) / (b * std::cos(a) * std::cos(a) + std::sin(a) * std::sin(a));
            rot = std::max(rot, std::abs(m - ref) / std::max(1.0, ref));
        }
    }
    return {elim <= 1e-12 && rot <= 1e-12,
            fmt("elimination identity %.2e, rotated restriction %.2e (both <= 1e-12, 1e4 samples each)", elim, rot)};
}

// Ordered-pair lattice double sum with the interaction radius, written independently of the module.
struct Brute {
    double eu = 0, ev = 0, emin = 0, emax = 0;
};

Brute brute_force(const std::vector<double>& u, const std::vector<double>& v, const Grid2D& g, double R, double rho,
                  const KernelEval& ke) {
    const double h1 = g.h1(), h2 = g.h2(), w = h1 * h2 * h1 * h2;
    const int span = int(std::ceil((R + rho) / std::min(h1, h2))) + 2;
    const int ci = g.n1 / 2, cj = g.n2 / 2;  // node at the origin
    struct P {
        int i, j;
        double u, v;
        bool in;
    };
    std::vector<P> pts;
    for (int i = ci - span; i <= ci + span; ++i)
        for (int j = cj - span; j <= cj + span; ++j) {
            const int ii = ((i % g.n1) + g.n1) % g.n1, jj = ((j % g.n2) + g.n2) % g.n2;
            const double x1 = (i - ci) * h1, x2 = (j - cj) * h2;
            pts.push_back({i, j, u[g.idx(ii, jj)], v[g.idx(ii, jj)], x1 * x1 + x2 * x2 <= R * R});
        }
    std::map<std::pair<int, int>, double> K;
    Brute b;
    for (const P& p : pts)
        for (const P& q : pts) {
            if (!p.in && !q.in) continue;
            const int di = p.i - q.i, dj = p.j - q.j;
            const double dx = di * h1, dy = dj * h2;
            if ((di == 0 && dj == 0) || std::hypot(dx, dy) > rho) continue;
            auto it = K.find({di, dj});
            if (it == K.end()) it = K.emplace(std::pair{di, dj}, kernel_bar(Vec2(dx, dy), ke) * w).first;
            const double k = it->second;
            auto sq = [](double a) { return a * a; };
            b.eu += sq(p.u - q.u) * k;
            b.ev += sq(p.v - q.v) * k;
            b.emin += sq(std::min(p.u, p.v) - std::min(q.u, q.v)) * k;
            b.emax += sq(std::max(p.u, p.v) - std::max(q.u, q.v)) * k;
        }
    return b;
}

Verdict minmax_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid2D g(8.0, 8.0, 32, 32);
    const KernelEval ke = make_kernel_eval(params_from_beta(0.8), 512);
    const double R = 3.0, rho = 1.5;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1, 1);
    double defect = 0, oracle_gap = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(g.size()), b(g.size());
        std::vector<double> blocks(128);
        for (double& x : blocks) x = U(rng);
        for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) {
                a[g.idx(i, j)] = blocks[(i / 4) * 8 + j / 4] + 0.05 * U(rng);
                b[g.idx(i, j)] = blocks[64 + (i / 4) * 8 + j / 4] + 0.05 * U(rng);
            }
        const auto id = minmax_energy_identity(field_from_samples(g, a), field_from_samples(g, b), R, ke, rho);
        const Brute bf = brute_force(a, b, g, R, rho, ke);
        const double scale = 1 + bf.eu + bf.ev;
        defect = std::max(defect, id.defect / (1 + id.lhs));
        // the oracle's own split of the cross term: E(u)+E(v)-E(min)-E(max) must equal the module's 4*cross
        oracle_gap = std::max(oracle_gap, std::abs((bf.eu + bf.ev - bf.emin - bf.emax) - 4 * id.cross) / scale);
        oracle_gap = std::max(oracle_gap, std::abs(id.lhs - (bf.eu + bf.ev)) / scale);
    }
    const double t = seconds_since(t0);
    return {defect <= 1e-8 && oracle_gap <= 1e-8 && t < 30,
            fmt("identity defect %.2e, gap to brute-force oracle %.2e (both <= 1e-8, 100 pairs), %.1f s (< 30 s)",
                defect, oracle_gap, t)};
}

Verdict rigidity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto W = sinusoidal_potential();
    const Grid2D g(100.0, 12.8, 1024, 64);
    double flat = 0, dist = 0, bv = 0;
    int converged = 0, total = 0;
    for (double b : {0.8, 1.0, 1.3}) {
        const Profile1D phi = solve_profile(W, b, background_grid(g), 1e-8);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            ++total;
            Field2D f;
            try {
                f = solve_reduced(W, params_from_beta(b), noisy_straight_field(phi, g, 0.1, seed), 1e-8);
            } catch (const NumericalError&) {
                continue;
            }
            ++converged;
            flat = std::max(flat, flatness_metric(f));
            dist = std::max(dist, distance_to_translate(f, phi).distance);
            for (int d = 0; d < 16; ++d) {
                const double a = pi * d / 16;
                const auto [p, n] = interior_bv_product(f, Vec2(std::cos(a), std::sin(a)));
                bv = std::max(bv, p * n);
            }
        }
    }
    const double t = seconds_since(t0);
    return {converged == total && flat <= 1e-3 && dist <= 1e-3 && bv <= 1e-8 && t < 600,
            fmt("%d/%d converged, flatness %.2e, distance %.2e (<= 1e-3), BV product %.2e (<= 1e-8), %.1f s", converged,
                total, flat, dist, bv, t)};
}

Verdict stability_certificate() {
    const auto W = sinusoidal_potential();
    const Grid2D g(100.0, 12.8, 512, 32);
    double straight_lo = 1e300, straight_hi = -1e300, saddle = -1e300;
    for (double b : {0.8, 1.0, 1.3}) {
        const auto p = params_from_beta(b);
        const Profile1D phi = solve_profile(W, b, background_grid(g), 1e-8);
        const double s = min_eig_linearization(embed_profile(phi, 0.0, g), p, W).min_eigenvalue;
        straight_lo = std::min(straight_lo, s);
        straight_hi = std::max(straight_hi, s);
        saddle = std::max(saddle, min_eig_linearization(two_front_saddle(phi, g, 2.0), p, W).min_eigenvalue);
    }
    return {straight_lo >= -1e-2 && straight_hi <= 1e-2 && saddle < -1e-2,
            fmt("straight profile min eigenvalue in [%.3e, %.3e] (within +-1e-2), saddle max over beta %.3e (< -1e-2)",
                straight_lo, straight_hi, saddle)};
}

Verdict elastic_round_trip() {
    const Grid2D g(20.0, 12.0, 64, 32);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N;
    double d2n = 0, lame = 0, s33 = 0;
    for (double nu : {-0.4, 0.0, 0.25, 0.45}) {
        const auto u1 = SpectralField2D::from_function(g, [&](double, double) { return N(rng); });
        const auto u2 = SpectralField2D::from_function(g, [&](double, double) { return N(rng); });
        const BoundaryData bd = boundary_data(u1, u2);
        const HalfSpaceField hs = extend(bd, make_elastic_params(nu));
        const RoundTrip rt = traction_round_trip(hs, bd);
        d2n = std::max(d2n, rt.d2n_defect);
        s33 = std::max(s33, rt.sigma33_jump);
        lame = std::max(lame, lame_residual(hs, {-3.0, -0.5, -1e-3, 1e-3, 0.5, 3.0}));
    }
    const auto W = sinusoidal_potential();
    const auto p = make_elastic_params(0.0);
    const Grid2D gb(100.0, 6.4, 512, 16);
    const Field2D st = embed_profile(exact_sinusoidal_profile(1.0, background_grid(gb)), 0.0, gb);
    const double br = boundary_residual(extend(lift_traces(st, p), p), W, &st.background);
    return {d2n <= 1e-10 && lame <= 1e-10 && s33 <= 1e-10 && br <= 1e-4,
            fmt("D2N round trip %.2e, Lame residual %.2e, sigma33 jump %.2e (<= 1e-10), boundary residual %.2e "
                "(<= 1e-4)",
                d2n, lame, s33, br)};
}

Verdict ratio_diagnostics() {
    const auto W = sinusoidal_potential();
    const auto p = params_from_beta(1.0);
    const Grid2D g(100.0, 48.0, 512, 192);
    const Field2D u = embed_profile(exact_sinusoidal_profile(1.0, background_grid(g)), 0.0, g);
    EnergyOptions o;
    o.rho = 2.0;
    const auto rows = ratio_trends(u, {5, 10, 20}, make_kernel_eval(p, 512), W, 0.1, o);
    const char* path = "acceptance_ratio_trends.csv";
    std::ofstream f(path);
    f << "R,energy,second_variation,bv,envelope\n";
    bool finite = rows.size() == 3;
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.R, r.energy, r.second_variation_ratio,
                      r.bv_ratio, r.envelope_ratio);
        f << line;
        finite = finite && std::isfinite(r.energy) && std::isfinite(r.second_variation_ratio) &&
                 std::isfinite(r.bv_ratio) && std::isfinite(r.envelope_ratio);
    }
    f.close();
    std::string d = fmt("wrote %s; envelope ratios", path);
    for (const auto& r : rows) d += fmt(" R=%g:%.4g", r.R, r.envelope_ratio);
    return {finite && bool(f), d + (finite ? " (all finite)" : " (non-finite entry)")};
}

const std::map<int, std::pair<const char*, std::function<Verdict()>>>& criteria() {
    static const std::map<int, std::pair<const char*, std::function<Verdict()>>> c{
        {1, {"kernel closed forms", closed_forms}},
        {2, {"angular ODE residual", ode_residuals}},
        {3, {"kernel bounds", kernel_bounds}},
        {4, {"operator cross-validation", operator_cross_validation}},
        {5, {"exact 1D solution", exact_solution}},
        {6, {"symbol elimination", symbol_identity}},
        {7, {"min/max energy identity", minmax_identity}},
        {8, {"2D rigidity", rigidity}},
        {9, {"stability certificate", stability_certificate}},
        {10, {"elastic round trip", elastic_round_trip}},
        {11, {"ratio diagnostics", ratio_diagnostics}},
    };
    return c;
}

bool run_one(int n) {
    const auto& [name, fn] = criteria().at(n);
    Verdict v;
    try {
        v = fn();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s; %s\n", n, v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
    return v.pass;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string arg = argc > 1 ? argv[1] : "all";
    if (arg == "all") {
        bool ok = true;
        for (const auto& [n, c] : criteria()) ok &= run_one(n);
        return ok ? 0 : 1;
    }
    int n = 0;
    try {
        n = std::stoi(arg);
    } catch (const std::exception&) {
    }
    if (!criteria().count(n)) {
        std::fprintf(stderr, "usage: acceptance <1..11|all>\n");
        return 2;
    }
    return run_one(n) ? 0 : 1;
}
