#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "core.hpp"
#include "operator.hpp"
#include "profile_type.hpp"

namespace pnflat {

inline Profile1D exact_sinusoidal_profile(double beta_tilde, const Grid1D& grid) {
    if (!(beta_tilde > 0)) throw ValidationError("exact_sinusoidal_profile: beta_tilde must be positive");
    Profile1D p;
    p.grid = grid;
    p.beta_tilde = beta_tilde;
    p.tail_coefficient = 2 / (pi * beta_tilde);
    p.values.resize(grid.n);
    for (int j = 0; j < grid.n; ++j) p.values[j] = 2 / pi * std::atan(beta_tilde * grid.x(j));
    return p;
}

// (-Delta)^{1/2} phi + beta_tilde W'(phi) at every node.
inline std::vector<double> profile_residual_vector(const Profile1D& p, const MisfitPotential& W) {
    auto r = halflap_1d(p);
    for (int j = 0; j < p.grid.n; ++j) r[j] += p.beta_tilde * W.deriv(p.values[j]);
    return r;
}

// Sup of the residual over |x - tail_center| <= L/2.
inline double profile_residual(const Profile1D& p, const MisfitPotential& W) {
    const auto r = profile_residual_vector(p, W);
    double m = 0;
    for (int j = 0; j < p.grid.n; ++j)
        if (std::abs(p.grid.x(j) - p.tail_center) <= p.grid.L / 2) m = std::max(m, std::abs(r[j]));
    return m;
}

struct TailFit {
    double c = 0;
    double relative_residual = 0;
    double c_inner = 0, c_outer = 0;
    bool warning = false;
};

inline TailFit fit_tail_detail(const Profile1D& p) {
    const Grid1D& g = p.grid;
    auto fit = [&](double lo, double hi) {
        double num = 0, den = 0;
        for (int j = 0; j < g.n; ++j) {
            const double y = g.x(j) - p.tail_center, a = std::abs(y);
            if (a < lo || a >= hi) continue;
            const double r = y > 0 ? p.far_plus - p.values[j] : p.values[j] - p.far_minus;
            num += r / a;
            den += 1 / (a * a);
        }
        return den > 0 ? num / den : 0.0;
    };
    TailFit t;
    const double L = g.L, inf = 1e300;
    t.c = fit(0.75 * L, inf);
    t.c_inner = fit(0.75 * L, 0.875 * L);
    t.c_outer = fit(0.875 * L, inf);
    double res = 0, norm = 0;
    for (int j = 0; j < g.n; ++j) {
        const double y = g.x(j) - p.tail_center, a = std::abs(y);
        if (a < 0.75 * L) continue;
        const double r = y > 0 ? p.far_plus - p.values[j] : p.values[j] - p.far_minus;
        res += (r - t.c / a) * (r - t.c / a);
        norm += r * r;
    }
    t.relative_residual = norm > 0 ? std::sqrt(res / norm) : 1.0;
    t.warning = !(t.c > 0) || t.relative_residual > 0.05 || std::abs(t.c_inner - t.c_outer) > 0.05 * std::abs(t.c);
    return t;
}

// Least squares fit of far -+ phi ~ c/|x| over the outer quarter of the grid; stored in the profile.
inline double fit_tail(Profile1D& p) {
    const TailFit t = fit_tail_detail(p);
    p.tail_coefficient = t.c;
    p.tail_warning = t.warning;
    return t.c;
}

struct ProfileSolveOptions {
    double gauge_x = 0.0;   // phi(gauge_x) = 0; must be a grid node
    int max_iter = 60;
    std::vector<double>* history = nullptr;
    const std::vector<double>* initial = nullptr;
};

inline Profile1D solve_profile(const MisfitPotential& W, double beta_tilde, const Grid1D& grid, double tol = 1e-8,
                               const ProfileSolveOptions& opt = {}) {
    if (!(beta_tilde > 0)) throw ValidationError("solve_profile: beta_tilde must be positive");
    if (grid.L < 50) throw ValidationError("solve_profile: grid half-width must be >= 50");
    if (!W.validated) validate_potential(W);
    const int n = grid.n;
    const double sg = (opt.gauge_x + grid.L) / grid.h;
    const int gi = int(std::lround(sg));
    if (std::abs(sg - gi) > 1e-9 || gi < 0 || gi >= n) throw ValidationError("solve_profile: gauge point must be a node");

    const double w2 = W.second_deriv(1.0);
    const double c = 2 / (pi * beta_tilde * w2);
    HalfLaplacian1D op(grid, c, opt.gauge_x);
    const Eigen::MatrixXd M = op.matrix();
    const Eigen::Map<const Eigen::VectorXd> b(op.affine_part().data(), n);

    Eigen::VectorXd phi(n);
    if (opt.initial) {
        if (int(opt.initial->size()) != n) throw ValidationError("solve_profile: initial guess size mismatch");
        phi = Eigen::Map<const Eigen::VectorXd>(opt.initial->data(), n);
    } else {
        for (int j = 0; j < n; ++j) phi[j] = 2 / pi * std::atan(beta_tilde * w2 * (grid.x(j) - opt.gauge_x));
    }

    auto residual = [&](const Eigen::VectorXd& f) {
        Eigen::VectorXd r = M * f + b;
        for (int j = 0; j < n; ++j) r[j] += beta_tilde * W.deriv(f[j]);
        return r;
    };
    auto gauged = [&](Eigen::VectorXd r, const Eigen::VectorXd& f) {
        r[gi] = f[gi];
        return r;
    };
    auto interior = [&](const Eigen::VectorXd& r) {
        double m = 0;
        for (int j = 0; j < n; ++j)
            if (std::abs(grid.x(j) - opt.gauge_x) <= grid.L / 2) m = std::max(m, std::abs(r[j]));
        return m;
    };

    std::vector<double> hist;
    Eigen::VectorXd F = gauged(residual(phi), phi);
    double fnorm = F.norm();
    bool done = false;
    for (int it = 0; it < opt.max_iter && !done; ++it) {
        hist.push_back(interior(residual(phi)));
        if (F.lpNorm<Eigen::Infinity>() <= 1e-3 * tol) break;
        Eigen::MatrixXd J = M;
        for (int j = 0; j < n; ++j) J(j, j) += beta_tilde * W.second_deriv(phi[j]);
        J.row(gi).setZero();
        J(gi, gi) = 1;
        Eigen::VectorXd step = J.partialPivLu().solve(-F);
        bool accepted = false;
        if (step.allFinite()) {
            for (double s = 1; s >= 1.0 / 1024; s /= 2) {
                Eigen::VectorXd trial = phi + s * step;
                Eigen::VectorXd Ft = gauged(residual(trial), trial);
                if (Ft.norm() <= (1 - 1e-4 * s) * fnorm || Ft.lpNorm<Eigen::Infinity>() <= 1e-3 * tol) {
                    phi = trial;
                    F = Ft;
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) {
            // Fallback: preconditioned gradient flow, then re-center on the gauge node.
            double S = 0;
            for (int j = 0; j < n; ++j) S = std::max(S, beta_tilde * std::abs(W.second_deriv(phi[j])));
            Eigen::MatrixXd P = M;
            P.diagonal().array() += S + 1e-12;
            auto lu = P.partialPivLu();
            const double before = fnorm;
            for (int k = 0; k < 50; ++k) phi -= lu.solve(residual(phi));
            phi.array() -= phi[gi];
            F = gauged(residual(phi), phi);
            if (!(F.norm() < before)) done = true;
        }
        const double prev = fnorm;
        fnorm = F.norm();
        if (accepted && fnorm > 0.999 * prev && F.lpNorm<Eigen::Infinity>() > 1e-3 * tol) {
            // stagnation at the discretization floor
            done = true;
        }
    }
    phi[gi] = 0.0;
    const double res = interior(residual(phi));
    hist.push_back(res);
    if (opt.history) *opt.history = hist;
    if (!(res <= tol)) throw NumericalError("solve_profile: no convergence", res, hist);

    Profile1D p;
    p.grid = grid;
    p.beta_tilde = beta_tilde;
    p.values.assign(phi.data(), phi.data() + n);
    p.tail_coefficient = c;
    p.tail_center = opt.gauge_x;
    p.residual = res;
    for (int j = 1; j < n; ++j)
        if (p.values[j] < p.values[j - 1] - 1e-10)
            throw InvariantViolation("solve_profile: converged iterate is not monotone at x=" +
                                     std::to_string(grid.x(j)));
    for (double v : p.values)
        if (std::abs(v) > 1 + 1e-8) throw InvariantViolation("solve_profile: |phi| exceeds 1");
    return p;
}

}  // namespace pnflat
