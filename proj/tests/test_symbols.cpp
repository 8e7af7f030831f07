#include <catch_amalgamated.hpp>

#include <pnflat/symbols.hpp>

#include <random>

using namespace pnflat;
using Catch::Approx;

TEST_CASE("d2n_matrix", "[symbols]") {
    SymbolContext c0{make_elastic_params(0.0, 0.5)};
    REQUIRE((d2n_matrix(Vec2(1, 0), c0) - Eigen::Matrix2d::Identity()).norm() < 1e-15);
    REQUIRE((d2n_matrix(Vec2(0, 3), c0) - 3 * Eigen::Matrix2d::Identity()).norm() < 1e-14);

    SymbolContext c{make_elastic_params(0.25, 0.5)};
    auto A = d2n_matrix(Vec2(1, 1), c);
    const double s2 = std::sqrt(2.0);
    REQUIRE(A(0, 0) == Approx((1 + 4.0 / 3) / s2).epsilon(1e-14));
    REQUIRE(A(0, 1) == Approx((1.0 / 3) / s2).epsilon(1e-14));
    REQUIRE(A(0, 0) == Approx(1.649916).epsilon(1e-6));
    REQUIRE(A(0, 1) == Approx(0.235702).epsilon(1e-5));
    REQUIRE(A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0) > 0);
    REQUIRE_THROWS_AS(d2n_matrix(Vec2(0, 0), c), DomainError);
}

TEST_CASE("d2n_matrix is positive definite", "[symbols]") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    for (double nu : {-0.9, -0.5, 0.0, 0.25, 0.45}) {
        SymbolContext c{make_elastic_params(nu)};
        for (int i = 0; i < 1000; ++i) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(d2n_matrix(Vec2(N(rng), N(rng)), c));
            REQUIRE(es.eigenvalues().minCoeff() > 0);
        }
    }
}

TEST_CASE("u2_ratio", "[symbols]") {
    REQUIRE(u2_ratio(Vec2(1, 0), SymbolContext{make_elastic_params(0.3)}) == 0.0);
    REQUIRE(u2_ratio(Vec2(1, 1), SymbolContext{make_elastic_params(0.0)}) == 0.0);
    REQUIRE(u2_ratio(Vec2(1, 1), SymbolContext{make_elastic_params(0.25)}) == Approx(-1.0 / 7).epsilon(1e-15));
    REQUIRE_THROWS_AS(u2_ratio(Vec2(0, 0), SymbolContext{make_elastic_params(0.25)}), DomainError);
}

TEST_CASE("u2_ratio solves the second D2N row", "[symbols]") {
    // zero shear traction along x2: A21 + A22 r = 0
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N;
    SymbolContext c{make_elastic_params(0.3)};
    for (int i = 0; i < 100; ++i) {
        Vec2 k(N(rng), N(rng));
        auto A = d2n_matrix(k, c);
        REQUIRE(std::abs(A(1, 0) + A(1, 1) * u2_ratio(k, c)) <= 1e-12 * A.norm());
    }
}

TEST_CASE("scalar_symbol", "[symbols]") {
    SymbolContext c1{params_from_beta(1.0)};
    REQUIRE(scalar_symbol(Vec2(3, 4), c1) == Approx(5.0).epsilon(1e-15));
    SymbolContext c43{params_from_beta(4.0 / 3)};
    REQUIRE(scalar_symbol(Vec2(1, 0), c43) == Approx(0.75).epsilon(1e-15));
    REQUIRE(scalar_symbol(Vec2(0, 5), c43) == Approx(5.0).epsilon(1e-15));
    REQUIRE(scalar_symbol(Vec2(0, 0), c43) == 0.0);
}

TEST_CASE("symbol bracket and elimination identity", "[symbols]") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> N;
    for (double nu : {-1.0, -0.4, 0.0, 0.25, 0.5}) {
        SymbolContext c{make_elastic_params(nu)};
        for (int i = 0; i < 2000; ++i) {
            Vec2 k(N(rng), N(rng));
            const double m = scalar_symbol(k, c), r = k.norm();
            REQUIRE(m >= r / 2 * (1 - 1e-14));
            REQUIRE(m <= 2 * r * (1 + 1e-14));
            if (nu < 0.5) {
                auto A = d2n_matrix(k, c);
                const double lhs = A(0, 0) + A(0, 1) * u2_ratio(k, c);
                REQUIRE(std::abs(lhs - 2 * c.params.shear_modulus * m) <= 1e-12 * std::max(1.0, lhs));
            }
        }
    }
}

TEST_CASE("effective_beta and rotated restriction", "[symbols]") {
    SymbolContext c{params_from_beta(4.0 / 3)};
    REQUIRE(effective_beta(0.0, c) == Approx(4.0 / 3));
    REQUIRE(effective_beta(pi / 2 - 1e-9, c) == Approx(1.0).epsilon(1e-12));
    REQUIRE(effective_beta(pi / 4, c) == Approx(7.0 / 6).epsilon(1e-14));
    REQUIRE_THROWS_AS(effective_beta(pi / 2, c), DomainError);

    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> A(-1.5, 1.5), T(-20, 20);
    for (double beta : {0.6, 0.8, 1.3, 1.9}) {
        SymbolContext cb{params_from_beta(beta)};
        for (int i = 0; i < 1000; ++i) {
            const double a = A(rng), t = T(rng);
            const double bt = effective_beta(a, cb);
            REQUIRE(bt >= std::min(beta, 1.0) - 1e-15);
            REQUIRE(bt <= std::max(beta, 1.0) + 1e-15);
            const double m = scalar_symbol(Vec2(t * std::cos(a), t * std::sin(a)), cb);
            REQUIRE(std::abs(m - std::abs(t) / bt) <= 1e-12 * std::abs(t));
        }
    }
}
