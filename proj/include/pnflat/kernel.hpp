#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "quadrature.hpp"

namespace pnflat {

using Vec2 = Eigen::Vector2d;

inline double forcing_f(double theta, double beta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return std::pow(beta * c * c + s * s, -2.5);
}

inline double v0_closed(double beta) { return (3 - 2 * beta) / (9 * std::pow(beta, 1.5)); }
inline double v_half_pi_closed(double beta) { return (3 * beta - 2) / (9 * beta * beta); }
inline double c_beta_closed(double beta) {
    return std::min((3 * beta - 2) / (beta * beta), (3 - 2 * beta) / std::pow(beta, 1.5));
}

// Periodic cubic spline on uniform nodes t_j = j*h, period n*h.
class PeriodicSpline {
public:
    PeriodicSpline() = default;
    PeriodicSpline(std::vector<double> y, double h) : y_(std::move(y)), h_(h) {
        const int n = int(y_.size());
        // M_{j-1} + 4 M_j + M_{j+1} = 6/h^2 (y_{j+1} - 2y_j + y_{j-1}), cyclic; Sherman-Morrison.
        std::vector<double> rhs(n);
        for (int j = 0; j < n; ++j)
            rhs[j] = 6.0 / (h * h) * (y_[(j + 1) % n] - 2 * y_[j] + y_[(j + n - 1) % n]);
        const double gamma = -4.0;
        std::vector<double> diag(n, 4.0);
        diag[0] -= gamma;
        diag[n - 1] -= 1.0 / gamma;
        std::vector<double> u(n, 0.0);
        u[0] = gamma;
        u[n - 1] = 1.0;
        auto solve = [&](std::vector<double> d) {
            std::vector<double> c(n), b = diag;
            c[0] = 1.0 / b[0];
            d[0] /= b[0];
            for (int i = 1; i < n; ++i) {
                const double m = b[i] - c[i - 1];
                c[i] = 1.0 / m;
                d[i] = (d[i] - d[i - 1]) / m;
            }
            for (int i = n - 2; i >= 0; --i) d[i] -= c[i] * d[i + 1];
            return d;
        };
        std::vector<double> x = solve(rhs), z = solve(u);
        const double fac = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
        m_.resize(n);
        for (int i = 0; i < n; ++i) m_[i] = x[i] - fac * z[i];
    }

    double operator()(double t) const {
        const int n = int(y_.size());
        const double period = n * h_;
        t = std::fmod(t, period);
        if (t < 0) t += period;
        int j = int(t / h_);
        if (j >= n) j = n - 1;
        const double a = (t - j * h_) / h_, b = 1 - a;
        const int k = (j + 1) % n;
        return b * y_[j] + a * y_[k] + h_ * h_ / 6.0 * ((b * b * b - b) * m_[j] + (a * a * a - a) * m_[k]);
    }

private:
    std::vector<double> y_, m_;
    double h_ = 1;
};

struct AngularKernel {
    double beta = 1;
    int n = 0;
    int quad_order = 0;
    std::vector<double> theta_nodes;
    std::vector<double> v_values;
    double v0 = 0, v_half_pi = 0, c_beta = 0;
    double quadrature_difference = 0;  // last refinement change
    PeriodicSpline spline;

    double h() const { return pi / n; }
};

inline AngularKernel solve_angular(double beta, int n_nodes = 1024, int quad_order = 10) {
    if (!(beta >= 0.5 && beta <= 2.0)) throw ValidationError("solve_angular: beta must lie in [1/2, 2]");
    if (n_nodes < 64 || n_nodes % 2) throw ValidationError("solve_angular: n_nodes must be even and >= 64");
    if (quad_order < 2) throw ValidationError("solve_angular: quad_order must be >= 2");

    AngularKernel ak;
    ak.beta = beta;
    ak.n = n_nodes;
    ak.quad_order = quad_order;
    const double h = pi / n_nodes;
    const GaussRule g = gauss_legendre(quad_order);
    auto g1 = [beta](double x) { return std::cos(3 * x) * forcing_f(x, beta); };
    auto g2 = [beta](double x) { return std::sin(3 * x) * forcing_f(x, beta); };

    // Cumulative integrals from 0 to theta_j, each node interval split into `panels`.
    auto tables = [&](int panels) {
        std::vector<double> c1(n_nodes + 1, 0.0), c2(n_nodes + 1, 0.0);
        for (int j = 0; j < n_nodes; ++j) {
            c1[j + 1] = c1[j] + integrate(g, g1, j * h, (j + 1) * h, panels);
            c2[j + 1] = c2[j] + integrate(g, g2, j * h, (j + 1) * h, panels);
        }
        std::vector<double> v(n_nodes);
        const double total2 = c2[n_nodes / 2];
        for (int j = 0; j < n_nodes; ++j) {
            const double t = j * h;
            v[j] = std::sin(3 * t) / 3 * c1[j] + std::cos(3 * t) / 3 * (total2 - c2[j]);
        }
        return v;
    };

    const double tol = 1e-10;
    std::vector<double> prev = tables(1);
    double diff = 0;
    bool converged = false;
    for (int panels = 2; panels <= 64; panels *= 2) {
        std::vector<double> cur = tables(panels);
        diff = 0;
        for (int j = 0; j < n_nodes; ++j) diff = std::max(diff, std::abs(cur[j] - prev[j]));
        prev = std::move(cur);
        if (diff < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("solve_angular: quadrature did not converge", diff);

    ak.quadrature_difference = diff;
    ak.v_values = std::move(prev);
    ak.theta_nodes.resize(n_nodes);
    for (int j = 0; j < n_nodes; ++j) ak.theta_nodes[j] = j * h;
    ak.v0 = v0_closed(beta);
    ak.v_half_pi = v_half_pi_closed(beta);
    ak.c_beta = c_beta_closed(beta);
    ak.spline = PeriodicSpline(ak.v_values, h);
    return ak;
}

inline double angular_value(const AngularKernel& ak, double theta) { return ak.spline(theta); }

// Max |D^2 v + 9v - f| over the periodic table, 4th-order centered second difference.
inline double ode_residual(const AngularKernel& ak) {
    const int n = ak.n;
    const double h = ak.h();
    const auto& v = ak.v_values;
    double r = 0;
    for (int j = 0; j < n; ++j) {
        auto at = [&](int o) { return v[(j + o + n) % n]; };
        const double d2 = (-at(-2) + 16 * at(-1) - 30 * at(0) + 16 * at(1) - at(2)) / (12 * h * h);
        r = std::max(r, std::abs(d2 + 9 * v[j] - forcing_f(j * h, ak.beta)));
    }
    return r;
}

struct CheckResult {
    std::string name;
    bool pass;
    double value;
    double bound;
};

// Invariant checks on a constructed table; the upper bound is the attained max(v(0), v(pi/2)).
inline std::vector<CheckResult> kernel_invariants(const AngularKernel& ak) {
    std::vector<CheckResult> out;
    const int n = ak.n;
    const auto& v = ak.v_values;
    out.push_back({"anchor_v0", std::abs(v[0] - ak.v0) <= 1e-8, std::abs(v[0] - ak.v0), 1e-8});
    const double dh = std::abs(v[n / 2] - ak.v_half_pi);
    out.push_back({"anchor_v_half_pi", dh <= 1e-8, dh, 1e-8});
    double sym = 0;
    for (int j = 1; j < n; ++j) sym = std::max(sym, std::abs(v[j] - v[n - j]));
    out.push_back({"symmetry", sym <= 1e-8, sym, 1e-8});
    const double seam = std::abs(v[0] - (2 * v[n - 1] - v[n - 2]));
    const double seam_bound = 2 * ak.h() * ak.h() * 10;  // second-order extrapolation, |v''| < 10
    out.push_back({"seam_continuity", seam <= seam_bound, seam, seam_bound});
    const bool increasing = ak.beta >= 1;
    double worst = 0;
    for (int j = 0; j < n / 2; ++j) {
        const double d = v[j + 1] - v[j];
        worst = std::max(worst, increasing ? -d : d);
    }
    out.push_back({"monotone_half_interval", worst <= 1e-10, worst, 1e-10});
    const double res = ode_residual(ak);
    out.push_back({"ode_residual", res <= 1e-5, res, 1e-5});
    if (beta_in_positive_range(ak.beta)) {
        const double lo = ak.c_beta / 9, hi = std::max(ak.v0, ak.v_half_pi);
        double below = 0, above = 0;
        for (double x : v) {
            below = std::max(below, lo - x);
            above = std::max(above, x - hi);
        }
        out.push_back({"lower_bound_c_beta_over_9", below <= 1e-10 * lo, below, 1e-10 * lo});
        out.push_back({"upper_bound_attained_max", above <= 1e-10, above, 1e-10});
    }
    return out;
}

struct KernelEval {
    ElasticParams params;
    AngularKernel angular;
};

inline KernelEval make_kernel_eval(const ElasticParams& p, int n_nodes = 1024) {
    return KernelEval{p, solve_angular(p.beta, n_nodes)};
}

// 9 v(theta)/|y|^3 in the rescaled coordinates.
inline double kernel_bar(const Vec2& y, const KernelEval& ke) {
    const double r = y.norm();
    if (r == 0) throw DomainError("kernel_bar: y = 0 is the kernel singularity");
    return 9 * angular_value(ke.angular, std::atan2(y[1], y[0])) / (r * r * r);
}

inline double kernel_unbarred(const Vec2& y, const KernelEval& ke) {
    if (y.norm() == 0) throw DomainError("kernel_unbarred: y = 0 is the kernel singularity");
    const Vec2 yb(y[0] / std::sqrt(ke.params.beta), y[1]);
    const double r = yb.norm();
    return 9 * angular_value(ke.angular, std::atan2(yb[1], yb[0])) / (r * r * r);
}

// Angular profile r^3 K(r e_theta) of the unbarred kernel.
inline double kernel_unbarred_angular(double theta, const KernelEval& ke) {
    const double b = ke.params.beta, c = std::cos(theta), s = std::sin(theta);
    const double q = c * c / b + s * s;
    return 9 * angular_value(ke.angular, std::atan2(s, c / std::sqrt(b))) / std::pow(q, 1.5);
}

inline Eigen::Matrix2d matrix_kernel_G(const Vec2& x, const ElasticParams& p) {
    const double r = x.norm();
    if (r == 0) throw DomainError("matrix_kernel_G: x = 0 is the kernel singularity");
    if (!(p.nu > -1.0 && p.nu < 0.5)) throw ValidationError("matrix_kernel_G: nu must lie in (-1, 1/2)");
    const Vec2 e = x / r;
    const double a = (1 - 2 * p.nu) / (1 - p.nu), b = 3 * p.nu / (1 - p.nu);
    return (a * Eigen::Matrix2d::Identity() + b * e * e.transpose()) / (r * r * r);
}

// Empirical constants C with |grad K|.|y|^4 <= C and |d_ee K|.|y|^5 <= C over sampled directions.
struct DerivativeConstants {
    double first = 0, second = 0;
};

inline DerivativeConstants kernel_derivative_constants(const KernelEval& ke, int directions = 720) {
    DerivativeConstants dc;
    const double d = 1e-4;
    for (int i = 0; i < directions; ++i) {
        const double t = 2 * pi * i / directions;
        const Vec2 y(std::cos(t), std::sin(t));
        for (const Vec2& e : {Vec2(1, 0), Vec2(0, 1), y}) {
            const double kp = kernel_bar(y + d * e, ke), km = kernel_bar(y - d * e, ke), k0 = kernel_bar(y, ke);
            dc.first = std::max(dc.first, std::abs(kp - km) / (2 * d));
            dc.second = std::max(dc.second, std::abs(kp - 2 * k0 + km) / (d * d));
        }
    }
    return dc;
}

}  // namespace pnflat
