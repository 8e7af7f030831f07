#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "kernel.hpp"
#include "solver2d.hpp"

namespace pnflat {

// Profile identically equal to c, with matching far states; a neutral background.
inline Profile1D constant_profile(const Grid1D& g, double c = 0.0) {
    Profile1D p;
    p.grid = g;
    p.values.assign(g.n, c);
    p.far_minus = p.far_plus = c;
    p.tail_coefficient = 0.0;
    return p;
}

inline Field2D field_from_samples(const Grid2D& g, const std::vector<double>& u) {
    Field2D f;
    f.background = constant_profile(background_grid(g));
    f.perturbation = SpectralField2D(g, u);
    return f;
}

namespace detail {

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

// Composite value on the lattice extended to Z^2: periodic in x2, background tail model in x1.
struct Lattice {
    const Field2D& f;
    const Grid2D& g;
    explicit Lattice(const Field2D& fld) : f(fld), g(fld.grid()) {}
    double operator()(int i, int j) const {
        const int jj = wrap(j, g.n2);
        if (i >= 0 && i < g.n1) return f.background.values[i] + f.perturbation.at(i, jj);
        return f.background.eval(g.x1(0) + i * g.h1()) + f.perturbation.at(wrap(i, g.n1), jj);
    }
};

}  // namespace detail

// 4th-order centered differences of the composite (2nd order at the x1 edges).
inline std::pair<SpectralField2D, SpectralField2D> gradient_fields(const Field2D& f) {
    const Grid2D& g = f.grid();
    detail::Lattice u(f);
    SpectralField2D d1(g), d2(g);
    const double h1 = g.h1(), h2 = g.h2();
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            if (i >= 2 && i < g.n1 - 2)
                d1.at(i, j) = (8 * (u(i + 1, j) - u(i - 1, j)) - (u(i + 2, j) - u(i - 2, j))) / (12 * h1);
            else if (i >= 1 && i < g.n1 - 1)
                d1.at(i, j) = (u(i + 1, j) - u(i - 1, j)) / (2 * h1);
            d2.at(i, j) = (8 * (u(i, j + 1) - u(i, j - 1)) - (u(i, j + 2) - u(i, j - 2))) / (12 * h2);
        }
    return {d1, d2};
}

// ---------------------------------------------------------------- ball energy

struct EnergyOptions {
    double rho = 3.0;          // pairs closer than rho are summed on the lattice
    int n_angular = 512;       // far-field rays
    bool diagonal_correction = true;
    bool far_tail = true;
};

struct EnergyReport {
    double nonlocal_part = 0;  // E(u; B_R)
    double local_part = 0;     // F(u; B_R)
    double total = 0;
    double radius = 0;
    double rho = 0;
    double pair_part = 0, diagonal_part = 0, tail_part = 0;
};

namespace detail {

struct PairTable {
    std::vector<int> da, db;
    std::vector<double> K;
    double D11 = 0, D12 = 0, D22 = 0;  // continuum minus lattice for the quadratic integrand
};

inline PairTable pair_table(const Grid2D& g, double rho, const KernelEval& ke) {
    PairTable t;
    const double h1 = g.h1(), h2 = g.h2();
    const int A = int(std::ceil(rho / h1)), B = int(std::ceil(rho / h2));
    double l11 = 0, l12 = 0, l22 = 0;
    for (int a = -A; a <= A; ++a)
        for (int b = -B; b <= B; ++b) {
            if (a == 0 && b == 0) continue;
            const Vec2 z(a * h1, b * h2);
            if (z.norm() > rho) continue;
            const double k = kernel_bar(z, ke);
            t.da.push_back(a);
            t.db.push_back(b);
            t.K.push_back(k);
            l11 += k * z[0] * z[0];
            l12 += k * z[0] * z[1];
            l22 += k * z[1] * z[1];
        }
    const int m = 4096;
    double c11 = 0, c12 = 0, c22 = 0;
    for (int q = 0; q < m; ++q) {
        const double th = 2 * pi * q / m, v = 9 * angular_value(ke.angular, th);
        c11 += v * std::cos(th) * std::cos(th);
        c12 += v * std::cos(th) * std::sin(th);
        c22 += v * std::sin(th) * std::sin(th);
    }
    const double s = rho * 2 * pi / m, a = h1 * h2;
    t.D11 = c11 * s - l11 * a;
    t.D12 = c12 * s - l12 * a;
    t.D22 = c22 * s - l22 * a;
    return t;
}

inline bool in_ball(const Grid2D& g, int i, int j, double R) {
    const double x1 = g.x1(0) + i * g.h1(), x2 = g.x2(0) + j * g.h2();
    return x1 * x1 + x2 * x2 <= R * R;
}

// int_{|z| > rho} c(x+z) (u - sigma(x+z))^2 Kbar(z) dz with u replaced by its far states.
inline double far_tail(const Vec2& x, double ux, double R, double rho, const Profile1D& bg, const KernelEval& ke,
                       int na) {
    double acc = 0;
    const double dth = 2 * pi / na;
    for (int q = 0; q < na; ++q) {
        const double th = (q + 0.5) * dth;
        const Vec2 e(std::cos(th), std::sin(th));
        std::vector<double> br{rho};
        if (e[0] != 0) {
            const double rs = (bg.tail_center - x[0]) / e[0];
            if (rs > rho) br.push_back(rs);
        }
        // exit of the ray from B_R
        const double xe = x.dot(e), disc = xe * xe - (x.squaredNorm() - R * R);
        if (disc > 0) {
            const double re = -xe + std::sqrt(disc);
            if (re > rho) br.push_back(re);
        }
        std::sort(br.begin(), br.end());
        br.push_back(INFINITY);
        double ray = 0;
        for (std::size_t k = 0; k + 1 < br.size(); ++k) {
            const double a = br[k], b = br[k + 1];
            const double mid = std::isinf(b) ? 2 * a + 1 : 0.5 * (a + b);
            const Vec2 y = x + mid * e;
            const double sig = y[0] > bg.tail_center ? bg.far_plus : bg.far_minus;
            const double c = y.squaredNorm() <= R * R ? 1.0 : 2.0;
            ray += c * (ux - sig) * (ux - sig) * (1 / a - (std::isinf(b) ? 0.0 : 1 / b));
        }
        acc += 9 * angular_value(ke.angular, th) * ray * dth;
    }
    return acc;
}

}  // namespace detail

// E(u;B_R) = int int over pairs not both outside B_R of |u(x)-u(y)|^2 Kbar(x-y); coordinates are the rescaled ones.
inline EnergyReport ball_energy(const Field2D& u, double R, const KernelEval& ke, const MisfitPotential& W,
                                const EnergyOptions& opt = {}) {
    const Grid2D& g = u.grid();
    if (!(R > 0)) throw ValidationError("ball_energy: R must be positive");
    if (!(R < 0.5 * std::min(g.L1, g.L2))) throw DomainError("ball_energy: ball exceeds half the cell");
    if (!(opt.rho > 0)) throw ValidationError("ball_energy: rho must be positive");
    const detail::PairTable tab = detail::pair_table(g, opt.rho, ke);
    detail::Lattice lat(u);
    std::pair<SpectralField2D, SpectralField2D> grad;
    if (opt.diagonal_correction) grad = gradient_fields(u);
    const double a = g.cell_area();
    EnergyReport rep;
    rep.radius = R;
    rep.rho = opt.rho;
    double F = 0;
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            if (!detail::in_ball(g, i, j, R)) continue;
            const double ux = lat(i, j);
            double s = 0;
            for (std::size_t k = 0; k < tab.K.size(); ++k) {
                const int i2 = i + tab.da[k], j2 = j + tab.db[k];
                const double d = ux - lat(i2, j2);
                s += (detail::in_ball(g, i2, j2, R) ? 1.0 : 2.0) * d * d * tab.K[k];
            }
            rep.pair_part += s * a * a;
            if (opt.diagonal_correction) {
                const double g1 = grad.first.at(i, j), g2 = grad.second.at(i, j);
                rep.diagonal_part += (g1 * g1 * tab.D11 + 2 * g1 * g2 * tab.D12 + g2 * g2 * tab.D22) * a;
            }
            if (opt.far_tail)
                rep.tail_part +=
                    detail::far_tail(Vec2(g.x1(i), g.x2(j)), ux, R, opt.rho, u.background, ke, opt.n_angular) * a;
            F += W.value(ux) * a;
        }
    rep.nonlocal_part = rep.pair_part + rep.diagonal_part + rep.tail_part;
    rep.local_part = F / std::sqrt(ke.params.beta);
    rep.total = QuadratureScheme::C_d / 4 * rep.nonlocal_part + rep.local_part;
    return rep;
}

// ---------------------------------------------------------------- min/max identity

struct MinMaxIdentity {
    double lhs = 0, rhs = 0;
    double cross = 0;           // int int (v-u)_+(x) (v-u)_-(y) Kbar over the pair region
    double defect = 0;          // |E(u)+E(v) - E(min) - E(max) - 4 cross|
    double literal_defect = 0;  // same with coefficient 2 on the cross term
};

// Pair-sum quadrature on both sides (no diagonal expansion, no far tail), so the identity is exact per pair.
inline MinMaxIdentity minmax_energy_identity(const Field2D& u, const Field2D& v, double R, const KernelEval& ke,
                                             double rho = 3.0) {
    if (!u.grid().same_as(v.grid())) throw ValidationError("minmax_energy_identity: grids differ");
    const Grid2D& g = u.grid();
    if (!(R < 0.5 * std::min(g.L1, g.L2))) throw DomainError("minmax_energy_identity: ball exceeds half the cell");
    const detail::PairTable tab = detail::pair_table(g, rho, ke);
    detail::Lattice lu(u), lv(v);
    double eu = 0, ev = 0, emin = 0, emax = 0, cross = 0;
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            if (!detail::in_ball(g, i, j, R)) continue;
            const double ux = lu(i, j), vx = lv(i, j);
            const double mx = std::min(ux, vx), Mx = std::max(ux, vx), dx = vx - ux;
            for (std::size_t k = 0; k < tab.K.size(); ++k) {
                const int i2 = i + tab.da[k], j2 = j + tab.db[k];
                const double uy = lu(i2, j2), vy = lv(i2, j2), dy = vy - uy;
                const double w = (detail::in_ball(g, i2, j2, R) ? 1.0 : 2.0) * tab.K[k];
                eu += w * (ux - uy) * (ux - uy);
                ev += w * (vx - vy) * (vx - vy);
                emin += w * (mx - std::min(uy, vy)) * (mx - std::min(uy, vy));
                emax += w * (Mx - std::max(uy, vy)) * (Mx - std::max(uy, vy));
                // symmetrized d+(x) d-(y), valid under the pair weighting
                cross += w * 0.5 * (std::max(dx, 0.0) * std::max(-dy, 0.0) + std::max(dy, 0.0) * std::max(-dx, 0.0));
            }
        }
    const double a2 = g.cell_area() * g.cell_area();
    MinMaxIdentity r;
    r.lhs = (eu + ev) * a2;
    r.cross = cross * a2;
    r.rhs = (emin + emax) * a2 + 4 * r.cross;
    r.defect = std::abs(r.lhs - r.rhs);
    r.literal_defect = std::abs(r.lhs - (emin + emax) * a2 - 2 * r.cross);
    return r;
}

inline double minmax_energy_identity_check(const Field2D& u, const Field2D& v, double R, const KernelEval& ke) {
    return minmax_energy_identity(u, v, R, ke).defect;
}

// ---------------------------------------------------------------- second variation

struct LinearizedOperator {
    Grid2D grid;
    FFT2 fft;
    std::vector<double> mult, diag;

    LinearizedOperator(const Field2D& u, const ElasticParams& p, const MisfitPotential& W)
        : grid(u.grid()), fft(grid.n1, grid.n2), mult(symbol_table_half(grid, p.beta, u.barred)) {
        const double s = u.barred ? 1 / std::sqrt(p.beta) : 1.0;
        const auto c = u.composite();
        diag.resize(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) diag[k] = s * W.second_deriv(c[k]);
    }

    std::vector<double> apply(const std::vector<double>& v) {
        auto out = apply_multiplier(v, mult, fft);
        for (std::size_t k = 0; k < v.size(); ++k) out[k] += diag[k] * v[k];
        return out;
    }
};

// int (L v + s W''(u) v) v over the cell; s = 1/sqrt(beta) in rescaled coordinates.
inline double stability_form(const Field2D& u, const SpectralField2D& v, const ElasticParams& p,
                             const MisfitPotential& W) {
    if (!u.grid().same_as(v.grid)) throw ValidationError("stability_form: grids differ");
    LinearizedOperator op(u, p, W);
    const auto Av = op.apply(v.samples);
    double s = 0;
    for (std::size_t k = 0; k < Av.size(); ++k) s += Av[k] * v.samples[k];
    return s * u.grid().cell_area();
}

inline double pushforward_cutoff(const Vec2& z, double R) {
    const double r = z.norm();
    if (r <= R / 2) return 1.0;
    if (r >= R) return 0.0;
    return 2 - 2 * r / R;
}

// u(psi^{-1}(x)) with psi(z) = z + t cutoff(z) v; Newton inversion per node.
inline Field2D pushforward(const Field2D& u, double t, const Vec2& direction, double R) {
    if (!(R > 0)) throw ValidationError("pushforward: R must be positive");
    if (!(std::abs(t) < R / 4)) throw DomainError("pushforward: |t| must be below R/4 for invertibility");
    const Vec2 v = direction.normalized();
    Field2D out = u;
    out.exact = nullptr;
    const Grid2D& g = u.grid();
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            const Vec2 x(g.x1(i), g.x2(j));
            if (pushforward_cutoff(x, R) == 0 && x.norm() >= R + std::abs(t)) continue;
            Vec2 z = x - t * pushforward_cutoff(x, R) * v;
            for (int it = 0; it < 50; ++it) {
                const Vec2 F = z + t * pushforward_cutoff(z, R) * v - x;
                if (F.norm() <= 1e-15 * (1 + x.norm())) break;
                Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
                const double r = z.norm();
                if (r > R / 2 && r < R) J += t * v * (-(2 / R) * z / r).transpose();
                z -= J.partialPivLu().solve(F);
            }
            out.perturbation.at(i, j) = u.value(z[0], z[1]) - u.background.values[i];
        }
    return out;
}

inline double discrete_second_variation(const Field2D& u, double t, const Vec2& direction, double R,
                                        const KernelEval& ke, const MisfitPotential& W,
                                        const EnergyOptions& opt = {}) {
    const double ep = ball_energy(pushforward(u, t, direction, R), R, ke, W, opt).total;
    const double em = ball_energy(pushforward(u, -t, direction, R), R, ke, W, opt).total;
    const double e0 = ball_energy(u, R, ke, W, opt).total;
    return ep + em - 2 * e0;
}

// (int_{B_1/2} (d_v u)_+, int_{B_1/2} (d_v u)_-) by a midpoint rule on an n x n sub-grid.
inline std::pair<double, double> interior_bv_product(const Field2D& u, const Vec2& direction, int n = 64) {
    const Vec2 v = direction.normalized();
    const auto [d1, d2] = gradient_fields(u);
    const double d = 1.0 / n;
    double pos = 0, neg = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double x1 = -0.5 + (a + 0.5) * d, x2 = -0.5 + (b + 0.5) * d;
            if (x1 * x1 + x2 * x2 > 0.25) continue;
            const double dv = v[0] * interp_periodic(d1, x1, x2) + v[1] * interp_periodic(d2, x1, x2);
            if (dv > 0)
                pos += dv * d * d;
            else
                neg -= dv * d * d;
        }
    return {pos, neg};
}

// ---------------------------------------------------------------- eigenvalue certificate

struct StabilityReport {
    double min_eigenvalue = 0;
    double residual = 0;  // ||(A - lambda) psi|| / ||psi||
    SpectralField2D eigenvector;
    int iterations = 0;
    std::vector<double> ritz_history;
    bool periodic_cell_only = true;  // certifies against cell-supported perturbations only
};

struct EigenOptions {
    int block = 3;
    int max_iter = 1000;
    double tol = 1e-8;
    double shift = 1.0;  // preconditioner (m(k) + shift)^{-1}
    std::uint64_t seed = 1;
};

// Smallest eigenvalue of L + s W''(u) on the cell by preconditioned LOBPCG.
inline StabilityReport min_eig_linearization(const Field2D& u, const ElasticParams& p, const MisfitPotential& W,
                                             const EigenOptions& opt = {}) {
    LinearizedOperator op(u, p, W);
    const Grid2D& g = op.grid;
    const int N = int(g.size()), k = opt.block;
    using Mat = Eigen::MatrixXd;
    auto applyA = [&](const Mat& X) {
        Mat Y(N, X.cols());
        std::vector<double> col(N);
        for (int c = 0; c < X.cols(); ++c) {
            Eigen::Map<Eigen::VectorXd>(col.data(), N) = X.col(c);
            auto r = op.apply(col);
            Y.col(c) = Eigen::Map<Eigen::VectorXd>(r.data(), N);
        }
        return Y;
    };
    auto precond = [&](const Mat& X) {
        Mat Y(N, X.cols());
        std::vector<double> col(N), r;
        std::vector<cplx> spec;
        for (int c = 0; c < X.cols(); ++c) {
            Eigen::Map<Eigen::VectorXd>(col.data(), N) = X.col(c);
            op.fft.forward(col, spec);
            for (std::size_t q = 0; q < spec.size(); ++q) spec[q] /= (op.mult[q] + opt.shift);
            op.fft.inverse(spec, r);
            Y.col(c) = Eigen::Map<Eigen::VectorXd>(r.data(), N);
        }
        return Y;
    };
    auto orthonormalize = [&](const Mat& S) {
        Eigen::ColPivHouseholderQR<Mat> qr(S);
        qr.setThreshold(1e-10);
        const int r = int(qr.rank());
        Mat Q = qr.householderQ() * Mat::Identity(N, r);
        return Q;
    };

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    Mat X(N, k);
    {
        const auto [d1, d2] = gradient_fields(u);
        X.col(0) = Eigen::Map<const Eigen::VectorXd>(d1.samples.data(), N);
        for (int c = 1; c < k; ++c)
            for (int q = 0; q < N; ++q) X(q, c) = nd(rng);
        if (X.col(0).norm() == 0)
            for (int q = 0; q < N; ++q) X(q, 0) = nd(rng);
    }
    X = orthonormalize(X);
    Mat P;
    StabilityReport rep;
    Eigen::VectorXd lam;
    for (int it = 0; it < opt.max_iter; ++it) {
        Mat AX = applyA(X);
        Eigen::SelfAdjointEigenSolver<Mat> small(X.transpose() * AX);
        X = X * small.eigenvectors();
        AX = AX * small.eigenvectors();
        lam = small.eigenvalues();
        Mat Rm = AX - X * lam.asDiagonal();
        rep.ritz_history.push_back(lam[0]);
        rep.iterations = it + 1;
        rep.residual = Rm.col(0).norm() / X.col(0).norm();
        if (rep.residual <= opt.tol) break;
        Mat Wm = precond(Rm);
        Mat S(N, X.cols() + Wm.cols() + P.cols());
        if (P.cols() > 0)
            S << X, Wm, P;
        else
            S << X, Wm;
        Mat Q = orthonormalize(S);
        Mat AQ = applyA(Q);
        Eigen::SelfAdjointEigenSolver<Mat> rr(Q.transpose() * AQ);
        const Mat C = rr.eigenvectors().leftCols(std::min<int>(k, int(Q.cols())));
        Mat Xn = Q * C;
        P = Xn - X * (X.transpose() * Xn);
        X = orthonormalize(Xn);
    }
    if (!(rep.residual <= opt.tol))
        throw NumericalError("min_eig_linearization: eigensolver stagnated", rep.residual, rep.ritz_history);
    rep.min_eigenvalue = lam[0];
    std::vector<double> ev(X.col(0).data(), X.col(0).data() + N);
    rep.eigenvector = SpectralField2D(g, ev);
    return rep;
}

// Two-front configuration phi(x1 + d) - phi(x1 - d) - 1: a front and an anti-front facing each other.
inline Field2D two_front_saddle(const Profile1D& phi, const Grid2D& grid, double d) {
    Field2D f = embed_profile(phi, 0.0, grid);
    for (int i = 0; i < grid.n1; ++i) {
        const double x = grid.x1(i);
        const double u = phi.eval(x + d) - phi.eval(x - d) - 1;
        for (int j = 0; j < grid.n2; ++j) f.perturbation.at(i, j) = u - f.background.values[i];
    }
    return f;
}

// ---------------------------------------------------------------- monitored ratios

struct RatioRow {
    double R = 0;
    double energy = 0;            // E(u; B_R)
    double second_variation = 0;  // Delta^t_vv with v = e1
    double second_variation_ratio = 0;  // Delta / (t^2/R^2 E)
    double bv_product = 0;
    double bv_ratio = 0;          // product / (E/R^2)
    double envelope_ratio = 0;    // E / (R log^2(e R))
};

inline std::vector<RatioRow> ratio_trends(const Field2D& u, const std::vector<double>& radii, const KernelEval& ke,
                                          const MisfitPotential& W, double t = 0.1, const EnergyOptions& opt = {}) {
    std::vector<RatioRow> rows;
    const auto bv = interior_bv_product(u, Vec2(1, 0));
    for (double R : radii) {
        RatioRow r;
        r.R = R;
        r.energy = ball_energy(u, R, ke, W, opt).nonlocal_part;
        r.second_variation = discrete_second_variation(u, t, Vec2(1, 0), R, ke, W, opt);
        r.second_variation_ratio = r.second_variation / (t * t / (R * R) * r.energy);
        r.bv_product = bv.first * bv.second;
        r.bv_ratio = r.bv_product / (r.energy / (R * R));
        const double l = std::log(std::exp(1.0) * R);
        r.envelope_ratio = r.energy / (R * l * l);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace pnflat
