#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "core.hpp"
#include "operator.hpp"
#include "profile1d.hpp"
#include "symbols.hpp"

namespace pnflat {

// Periodic 4x4 Lagrange interpolation of grid samples.
inline double interp_periodic(const SpectralField2D& f, double x1, double x2) {
    const Grid2D& g = f.grid;
    auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
    auto weights = [](double t, double w[4]) {
        w[0] = -(t - 1) * (t - 2) * (t - 3) / 6;
        w[1] = t * (t - 2) * (t - 3) / 2;
        w[2] = -t * (t - 1) * (t - 3) / 2;
        w[3] = t * (t - 1) * (t - 2) / 6;
    };
    const double s1 = (x1 + 0.5 * g.L1) / g.h1(), s2 = (x2 + 0.5 * g.L2) / g.h2();
    const int i0 = int(std::floor(s1)) - 1, j0 = int(std::floor(s2)) - 1;
    double w1[4], w2[4];
    weights(s1 - i0, w1);
    weights(s2 - j0, w2);
    double acc = 0;
    for (int a = 0; a < 4; ++a) {
        const int i = wrap(i0 + a, g.n1);
        double row = 0;
        for (int b = 0; b < 4; ++b) row += w2[b] * f.at(i, wrap(j0 + b, g.n2));
        acc += w1[a] * row;
    }
    return acc;
}

// u = background(x1) + perturbation(x1, x2) on a periodic cell.
struct Field2D {
    Profile1D background;
    SpectralField2D perturbation;
    double mean_pin = 0.0;
    bool periodic = true;
    bool barred = false;  // coordinates (x1/sqrt(beta), x2)
    std::function<double(double, double)> exact;  // set for non-periodic embeddings

    const Grid2D& grid() const { return perturbation.grid; }

    std::vector<double> composite() const {
        const Grid2D& g = grid();
        std::vector<double> u(perturbation.samples);
        for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) u[g.idx(i, j)] += background.values[i];
        return u;
    }

    SpectralField2D composite_field() const { return SpectralField2D(grid(), composite()); }

    double value(double x1, double x2) const {
        if (exact) return exact(x1, x2);
        return background.eval(x1) + interp_periodic(perturbation, x1, x2);
    }
};

inline Grid1D background_grid(const Grid2D& g) { return Grid1D(0.5 * g.L1, g.n1); }

inline Field2D make_field(const Profile1D& bg, const SpectralField2D& w, double mean_pin = 0.0) {
    const Grid1D expect = background_grid(w.grid);
    if (bg.grid.n != expect.n || std::abs(bg.grid.L - expect.L) > 1e-12 * expect.L)
        throw ValidationError("make_field: background grid must be Grid1D(L1/2, n1) of the cell");
    Field2D f;
    f.background = bg;
    f.perturbation = w;
    f.mean_pin = mean_pin;
    return f;
}

// Reduced operator split into the periodic part and the precomputed background image.
class ReducedOperator {
public:
    ReducedOperator(const Field2D& f, double beta)
        : grid_(f.grid()), beta_(beta), fft_(grid_.n1, grid_.n2),
          mult_(symbol_table_half(grid_, beta, f.barred)) {
        const auto hl = halflap_1d(f.background);
        // x2-invariant action: |k1|/beta, or |k1|/beta^2 in the rescaled coordinates
        const double s = f.barred ? 1.0 / (beta * beta) : 1.0 / beta;
        bg_image_.resize(hl.size());
        for (std::size_t i = 0; i < hl.size(); ++i) bg_image_[i] = s * hl[i];
        bg_ = f.background.values;
        potential_scale_ = f.barred ? 1.0 / std::sqrt(beta) : 1.0;
    }

    const Grid2D& grid() const { return grid_; }
    const std::vector<double>& multiplier() const { return mult_; }
    const std::vector<double>& background_image() const { return bg_image_; }
    double potential_scale() const { return potential_scale_; }
    FFT2& fft() { return fft_; }

    std::vector<double> apply_periodic(const std::vector<double>& w) { return apply_multiplier(w, mult_, fft_); }

    // L u + s W'(u) with u = background + w; s = 1/sqrt(beta) in rescaled coordinates.
    std::vector<double> residual(const std::vector<double>& w, const MisfitPotential& W) {
        std::vector<double> r = apply_periodic(w);
        for (int i = 0; i < grid_.n1; ++i)
            for (int j = 0; j < grid_.n2; ++j) {
                const std::size_t k = grid_.idx(i, j);
                r[k] += bg_image_[i] + potential_scale_ * W.deriv(bg_[i] + w[k]);
            }
        return r;
    }

    // Cell energy relative to the background: 1/2 <w, L w> + <L bg, w> + s int (W(u) - W(bg)).
    double energy(const std::vector<double>& w, const MisfitPotential& W) {
        const std::vector<double> Lw = apply_periodic(w);
        double e = 0;
        for (int i = 0; i < grid_.n1; ++i) {
            const double wb = W.value(bg_[i]);
            for (int j = 0; j < grid_.n2; ++j) {
                const std::size_t k = grid_.idx(i, j);
                e += 0.5 * w[k] * Lw[k] + bg_image_[i] * w[k] + potential_scale_ * (W.value(bg_[i] + w[k]) - wb);
            }
        }
        return e * grid_.cell_area();
    }

    double background_value(int i) const { return bg_[i]; }

private:
    Grid2D grid_;
    double beta_;
    FFT2 fft_;
    std::vector<double> mult_;
    std::vector<double> bg_image_, bg_;
    double potential_scale_ = 1.0;
};

inline SpectralField2D reduced_residual(const MisfitPotential& W, const ElasticParams& params, const Field2D& f) {
    ReducedOperator op(f, params.beta);
    return SpectralField2D(f.grid(), op.residual(f.perturbation.samples, W));
}

struct SolveOptions {
    int max_flow_steps = 5000;
    int max_newton = 40;
    double newton_switch = 1e-2;
    double dt0 = 1.0;
    double dt_max = 1e3;
    bool newton = true;
    // Measure convergence modulo the mean (the multiplier of the mean pin).
    bool constrained_residual = false;
};

struct SolveReport {
    std::vector<double> residual_history;
    std::vector<double> energy_history;  // accepted flow steps, then Newton iterates
    int flow_steps = 0, rejected_steps = 0, newton_steps = 0, cg_iterations = 0;
    double residual = 0;
    double mean_multiplier = 0;  // mean of the residual (Lagrange multiplier of the mean pin)
    bool energy_monotone = true;
};

namespace detail {

inline double sup_norm(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

inline Field2D solve_reduced(const MisfitPotential& W, const ElasticParams& params, const Field2D& init, double tol,
                             SolveReport* report = nullptr, const SolveOptions& opt = {}) {
    if (!beta_in_positive_range(params.beta))
        throw ConfigurationError("solve_reduced: beta must lie in (2/3, 3/2) for a positive kernel");
    if (!init.periodic) throw ConfigurationError("solve_reduced: initial field must be periodic");
    using detail::mean;
    using detail::sup_norm;

    ReducedOperator op(init, params.beta);
    const Grid2D& g = op.grid();
    const std::size_t N = g.size();
    const auto& mult = op.multiplier();
    const double s = op.potential_scale();
    SolveReport rep;

    double S = 0;  // stabilization, half the sup of |W''| on the sampled range
    for (int k = 0; k <= 400; ++k) S = std::max(S, std::abs(W.second_deriv(-2.0 + 4.0 * k / 400)));
    S = std::max(0.5 * s * S, 1e-3);

    std::vector<double> w = init.perturbation.samples;
    {
        const double shift = init.mean_pin - mean(w);
        for (double& x : w) x += shift;
    }
    auto projected = [&](std::vector<double> r) {
        const double m = mean(r);
        for (double& x : r) x -= m;
        return r;
    };

    std::vector<double> r = op.residual(w, W);
    double E = op.energy(w, W);
    rep.energy_history.push_back(E);
    rep.residual_history.push_back(sup_norm(r));
    double dt = opt.dt0;
    std::vector<cplx> spec;

    // Stabilized semi-implicit gradient flow on the mean-pinned space.
    while (sup_norm(projected(r)) > std::max(opt.newton ? opt.newton_switch : tol, tol) &&
           rep.flow_steps < opt.max_flow_steps) {
        op.fft().forward(r, spec);
        for (std::size_t k = 1; k < spec.size(); ++k) spec[k] *= dt / (1 + dt * (S + mult[k]));
        spec[0] = 0;
        std::vector<double> dw;
        op.fft().inverse(spec, dw);
        std::vector<double> trial(N);
        for (std::size_t k = 0; k < N; ++k) trial[k] = w[k] - dw[k];
        const double Et = op.energy(trial, W);
        if (Et <= E + 1e-12 * std::max(1.0, std::abs(E))) {
            w = std::move(trial);
            E = Et;
            r = op.residual(w, W);
            rep.energy_history.push_back(E);
            rep.residual_history.push_back(sup_norm(r));
            ++rep.flow_steps;
            dt = std::min(dt * 1.5, opt.dt_max);
        } else {
            ++rep.rejected_steps;
            dt *= 0.5;
            if (dt < 1e-10) break;
        }
    }

    // Newton-CG on the mean-zero subspace with the (m + sigma)^{-1} preconditioner.
    if (opt.newton) {
        for (int it = 0; it < opt.max_newton && sup_norm(projected(r)) > 0.1 * tol; ++it) {
            std::vector<double> d2(N);
            double sigma = 0;
            for (int i = 0; i < g.n1; ++i)
                for (int j = 0; j < g.n2; ++j) {
                    const std::size_t k = g.idx(i, j);
                    d2[k] = s * W.second_deriv(op.background_value(i) + w[k]);
                    sigma += d2[k];
                }
            sigma = std::max(sigma / N, 0.1);
            auto J = [&](const std::vector<double>& v) {
                std::vector<double> out = op.apply_periodic(v);
                for (std::size_t k = 0; k < N; ++k) out[k] += d2[k] * v[k];
                return projected(out);
            };
            auto precond = [&](const std::vector<double>& v) {
                op.fft().forward(v, spec);
                for (std::size_t k = 1; k < spec.size(); ++k) spec[k] /= (mult[k] + sigma);
                spec[0] = 0;
                std::vector<double> out;
                op.fft().inverse(spec, out);
                return out;
            };
            const std::vector<double> F = projected(r);
            const double fn = std::sqrt(detail::dot(F, F));
            std::vector<double> x(N, 0.0), res(F.size());
            for (std::size_t k = 0; k < N; ++k) res[k] = -F[k];
            std::vector<double> z = precond(res), p = z;
            double rz = detail::dot(res, z);
            const double target = std::min(0.1, fn) * fn;
            for (int cg = 0; cg < 300; ++cg) {
                const std::vector<double> Ap = J(p);
                const double pAp = detail::dot(p, Ap);
                if (!(pAp > 0)) break;  // negative curvature: keep the current iterate
                const double a = rz / pAp;
                for (std::size_t k = 0; k < N; ++k) {
                    x[k] += a * p[k];
                    res[k] -= a * Ap[k];
                }
                ++rep.cg_iterations;
                if (std::sqrt(detail::dot(res, res)) <= target) break;
                z = precond(res);
                const double rz2 = detail::dot(res, z);
                for (std::size_t k = 0; k < N; ++k) p[k] = z[k] + rz2 / rz * p[k];
                rz = rz2;
            }
            bool accepted = false;
            for (double step = 1; step >= 1.0 / 64; step /= 2) {
                std::vector<double> trial(N);
                for (std::size_t k = 0; k < N; ++k) trial[k] = w[k] + step * x[k];
                std::vector<double> rt = op.residual(trial, W);
                const std::vector<double> Ft = projected(rt);
                if (std::sqrt(detail::dot(Ft, Ft)) <= (1 - 1e-4 * step) * fn) {
                    w = std::move(trial);
                    r = std::move(rt);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
            ++rep.newton_steps;
            rep.energy_history.push_back(op.energy(w, W));
            rep.residual_history.push_back(sup_norm(r));
        }
    }

    for (std::size_t i = 1; i < rep.energy_history.size() && i <= std::size_t(rep.flow_steps); ++i)
        if (rep.energy_history[i] > rep.energy_history[i - 1] + 1e-12 * std::max(1.0, std::abs(rep.energy_history[i - 1])))
            rep.energy_monotone = false;
    rep.mean_multiplier = mean(r);
    rep.residual = opt.constrained_residual ? sup_norm(projected(r)) : sup_norm(r);
    if (report) *report = rep;
    if (!(rep.residual <= tol))
        throw NumericalError("solve_reduced: no convergence", rep.residual, rep.residual_history);

    Field2D out = init;
    out.perturbation = SpectralField2D(g, w);
    return out;
}

// ---------------------------------------------------------------- construction helpers

inline Profile1D resample_profile(const Profile1D& phi, const Grid1D& g) {
    if (phi.grid.n == g.n && std::abs(phi.grid.L - g.L) <= 1e-12 * g.L) return phi;
    Profile1D p = phi;
    p.grid = g;
    p.values.resize(g.n);
    for (int j = 0; j < g.n; ++j) p.values[j] = phi.eval(g.x(j));
    return p;
}

inline Field2D embed_profile(const Profile1D& phi, double alpha, const Grid2D& grid) {
    if (!(std::abs(alpha) < pi / 2)) throw DomainError("embed_profile: alpha must lie in (-pi/2, pi/2)");
    Field2D f;
    f.background = resample_profile(phi, background_grid(grid));
    f.perturbation = SpectralField2D(grid);
    if (alpha != 0.0) {
        const double c = std::cos(alpha), s = std::sin(alpha);
        const Profile1D ref = phi;
        f.exact = [ref, c, s](double x1, double x2) { return ref.eval(c * x1 + s * x2); };
        for (int i = 0; i < grid.n1; ++i)
            for (int j = 0; j < grid.n2; ++j)
                f.perturbation.at(i, j) = f.exact(grid.x1(i), grid.x2(j)) - f.background.values[i];
        f.periodic = false;
        f.mean_pin = f.perturbation.mean();
    }
    return f;
}

// Straight profile plus band-limited noise scaled to the given sup norm; zero mean.
inline Field2D noisy_straight_field(const Profile1D& phi, const Grid2D& grid, double amplitude, std::uint64_t seed,
                                    int modes = 6) {
    Field2D f = embed_profile(phi, 0.0, grid);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::vector<cplx> spec(grid.size(), cplx(0, 0));
    auto put = [&](int a, int b, cplx v) {
        const int i = (a + grid.n1) % grid.n1, j = (b + grid.n2) % grid.n2;
        spec[grid.idx(i, j)] += v;
        const int ic = (grid.n1 - i) % grid.n1, jc = (grid.n2 - j) % grid.n2;
        spec[grid.idx(ic, jc)] += std::conj(v);
    };
    for (int a = -modes; a <= modes; ++a)
        for (int b = 0; b <= modes; ++b) {
            if (b == 0 && a <= 0) continue;
            put(a, b, cplx(N(rng), N(rng)));
        }
    auto w = SpectralField2D::inverse(grid, spec);
    const double m = w.sup_norm();
    for (double& x : w.samples) x *= amplitude / m;
    f.perturbation = w;
    f.mean_pin = 0.0;
    return f;
}

// ---------------------------------------------------------------- diagnostics

namespace detail {

// Zero crossing of a nondecreasing-ish row by linear interpolation around the sign change nearest 0.
inline double zero_crossing(const std::vector<double>& row, const Grid2D& g) {
    int best = -1;
    double bestd = 1e300;
    for (int i = 0; i + 1 < g.n1; ++i)
        if ((row[i] <= 0 && row[i + 1] > 0) || (row[i] >= 0 && row[i + 1] < 0)) {
            const double d = std::abs(g.x1(i));
            if (d < bestd) {
                bestd = d;
                best = i;
            }
        }
    if (best < 0) return 0.0;
    const double t = row[best] / (row[best] - row[best + 1]);
    return g.x1(best) + t * g.h1();
}

inline double row_eval(const std::vector<double>& row, const Grid2D& g, double x) {
    double s = (x - g.x1(0)) / g.h1();
    const int j = std::clamp(int(std::floor(s)) - 1, 0, g.n1 - 4);
    const double t = s - j;
    const double w0 = -(t - 1) * (t - 2) * (t - 3) / 6, w1 = t * (t - 2) * (t - 3) / 2;
    const double w2 = -t * (t - 1) * (t - 3) / 2, w3 = t * (t - 1) * (t - 2) / 6;
    return w0 * row[j] + w1 * row[j + 1] + w2 * row[j + 2] + w3 * row[j + 3];
}

}  // namespace detail

// Max over x1-columns of the x2-oscillation after removing an affine shift of the level line.
inline double flatness_metric(const Field2D& f) {
    const Grid2D& g = f.grid();
    const std::vector<double> u = f.composite();
    std::vector<std::vector<double>> rows(g.n2, std::vector<double>(g.n1));
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) rows[j][i] = u[g.idx(i, j)];
    std::vector<double> z(g.n2);
    double mx = 0, mz = 0;
    for (int j = 0; j < g.n2; ++j) {
        z[j] = detail::zero_crossing(rows[j], g);
        mx += g.x2(j);
        mz += z[j];
    }
    mx /= g.n2;
    mz /= g.n2;
    double sxx = 0, sxz = 0;
    for (int j = 0; j < g.n2; ++j) {
        sxx += (g.x2(j) - mx) * (g.x2(j) - mx);
        sxz += (g.x2(j) - mx) * (z[j] - mz);
    }
    const double slope = sxz / sxx;
    double metric = 0;
    const double margin = std::abs(slope) * 0.5 * g.L2 + 2 * g.h1();
    for (int i = 0; i < g.n1; ++i) {
        const double x = g.x1(i);
        if (x < g.x1(0) + margin || x > g.x1(g.n1 - 1) - margin) continue;
        double lo = 1e300, hi = -1e300;
        for (int j = 0; j < g.n2; ++j) {
            const double v = slope == 0 ? rows[j][i] : detail::row_eval(rows[j], g, x + slope * (g.x2(j) - mx));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        metric = std::max(metric, hi - lo);
    }
    return metric;
}

struct TranslateFit {
    double shift;
    double distance;
};

// min over s of sup |u(x) - phi(x1 - s)|, golden section around the level-line estimate.
inline TranslateFit distance_to_translate(const Field2D& f, const Profile1D& phi) {
    const Grid2D& g = f.grid();
    const std::vector<double> u = f.composite();
    std::vector<double> avg(g.n1, 0.0);
    for (int i = 0; i < g.n1; ++i) {
        for (int j = 0; j < g.n2; ++j) avg[i] += u[g.idx(i, j)];
        avg[i] /= g.n2;
    }
    const double s0 = detail::zero_crossing(avg, g);
    std::vector<double> prof(g.n1);
    auto dist = [&](double s) {
        for (int i = 0; i < g.n1; ++i) prof[i] = phi.eval(g.x1(i) - s);
        double m = 0;
        for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) m = std::max(m, std::abs(u[g.idx(i, j)] - prof[i]));
        return m;
    };
    double a = s0 - 2 * g.h1(), b = s0 + 2 * g.h1();
    const double gr = 0.5 * (std::sqrt(5.0) - 1);
    double c = b - gr * (b - a), d = a + gr * (b - a), fc = dist(c), fd = dist(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = dist(d);
        }
    }
    const double s = 0.5 * (a + b);
    return {s, dist(s)};
}

enum class BarDirection { to_bar, from_bar };

// ubar(xbar1, x2) = u(sqrt(beta) xbar1, x2): same samples on a rescaled cell.
inline Field2D rescale_bar_coordinates(const Field2D& f, const ElasticParams& params, BarDirection dir) {
    const double s = dir == BarDirection::to_bar ? 1 / std::sqrt(params.beta) : std::sqrt(params.beta);
    if (dir == BarDirection::to_bar && f.barred) throw ValidationError("rescale_bar_coordinates: already barred");
    if (dir == BarDirection::from_bar && !f.barred) throw ValidationError("rescale_bar_coordinates: not barred");
    Field2D out = f;
    const Grid2D& g = f.grid();
    const Grid2D ng(g.L1 * s, g.L2, g.n1, g.n2);
    out.perturbation = SpectralField2D(ng, f.perturbation.samples);
    out.background.grid = Grid1D(f.background.grid.L * s, f.background.grid.n);
    if (f.background.tail_coefficient) out.background.tail_coefficient = *f.background.tail_coefficient * s;
    out.background.tail_center = f.background.tail_center * s;
    out.barred = dir == BarDirection::to_bar;
    if (f.exact) {
        auto e = f.exact;
        out.exact = [e, s](double x1, double x2) { return e(x1 / s, x2); };
    }
    return out;
}

// Reflection x2 -> -x2 on the periodic cell.
inline Field2D reflect_x2(const Field2D& f) {
    Field2D out = f;
    const Grid2D& g = f.grid();
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) out.perturbation.at(i, j) = f.perturbation.at(i, (g.n2 - j) % g.n2);
    return out;
}

}  // namespace pnflat
