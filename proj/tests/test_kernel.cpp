// W_q kernel calculus against hand-derived closed forms and the structural
// identities every provider must satisfy.

#include <catch_amalgamated.hpp>

#include <cmath>

#include <ddlab/bessel3.hpp>
#include <ddlab/brownian.hpp>
#include <ddlab/model.hpp>

using namespace ddlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("driftless kernel matches sinh closed form") {
    // mu=0, sigma=1, q=0.5 gives gamma=1; with the s(x)=2x normalization
    // W_q(x,y) = 2 sinh(x-y)
    auto m = bm_provider({0.0, 1.0});
    QKernel k(m, 0.5);
    CHECK_THAT(k.w(1.0, 0.0), WithinRel(2.3504023872876028, 1e-13));
    CHECK_THAT(k.w1(1.0, 0.0) / k.w(1.0, 0.0), WithinRel(1.3130352854993312, 1e-13));
    CHECK_THAT(k.w2(1.0, 0.0), WithinRel(-2.3504023872876028, 1e-13));
}

TEST_CASE("drifted kernel matches exponential closed form") {
    // mu=1, sigma=1, q=1.5: delta=1, gamma=2, evaluated at (0.7, -0.3)
    auto m = bm_provider({1.0, 1.0});
    QKernel k(m, 1.5);
    CHECK_THAT(k.w(0.7, -0.3), WithinRel(2.4311572355528512, 1e-12));
    CHECK_THAT(k.w1(0.7, -0.3), WithinRel(2.612593142131676, 1e-12));
    CHECK_THAT(k.w2(0.7, -0.3), WithinRel(-7.293471706658554, 1e-12));
}

TEST_CASE("bessel3 kernel pins") {
    auto m = bes3_provider();
    QKernel k(m, 0.5);  // nu = 1
    CHECK_THAT(k.wronskian(), WithinRel(2.3130352854993315, 1e-12));
    CHECK_THAT(k.w(2.0, 1.0), WithinRel(0.5876005968219007, 1e-12));
    CHECK_THAT(k.w1(2.0, 1.0) / k.w(2.0, 1.0), WithinRel(0.8130352854993314, 1e-12));
}

TEST_CASE("kernel structural identities hold for every provider") {
    struct Case {
        DiffusionModel model;
        double xa, xb;
    };
    const Case cases[] = {
        {bm_provider({-1.0, 1.0}), 0.8, -0.4},
        {bm_provider({0.0, 1.0}), 1.3, 0.2},
        {bm_provider({1.0, 2.0}), -0.6, 0.9},
        {bes3_provider(), 2.2, 0.7},
    };
    for (const auto& c : cases) {
        for (double q : {0.2, 1.0, 3.7}) {
            QKernel k(c.model, q);
            INFO(c.model.name << " q=" << q);

            // antisymmetry
            CHECK(k.w(c.xa, c.xb) == -k.w(c.xb, c.xa));

            // diagonal derivative identity W1(y,y) = s'(y)
            CHECK_THAT(k.w1(c.xa, c.xa), WithinRel(k.s_deriv(c.xa), 1e-12));

            // Wronskian constant across the state space
            const double w_at = (k.phi_plus_deriv(c.xa) * k.phi_minus(c.xa) -
                                 k.phi_minus_deriv(c.xa) * k.phi_plus(c.xa)) /
                                k.s_deriv(c.xa);
            CHECK_THAT(w_at, WithinRel(k.wronskian(), 1e-9));

            // normalization at kappa
            CHECK_THAT(k.phi_plus(c.model.kappa), WithinAbs(1.0, 1e-14));
            CHECK_THAT(k.phi_minus(c.model.kappa), WithinAbs(1.0, 1e-14));
        }

        // q -> 0 recovers the scale-difference kernel
        QKernel k0(c.model, 1e-9);
        QKernel kz(c.model, 0.0);
        const double s_diff = kz.w(c.xa, c.xb);
        if (std::abs(s_diff) > 1e-8)
            CHECK_THAT(k0.w(c.xa, c.xb), WithinRel(s_diff, 1e-5));
    }
}

TEST_CASE("q = 0 branch is exact scale calculus, not a limit") {
    auto m = bm_provider({0.3, 1.0});
    QKernel k(m, 0.0);
    CHECK(k.w(0.9, 0.1) == m.scale(0.9) - m.scale(0.1));
    CHECK(k.w1(0.9, 0.1) == m.scale_deriv(0.9));
    CHECK(k.w2(0.9, 0.1) == 0.0);
}

TEST_CASE("kernel normalization is provider-scale invariant") {
    // a provider returning 7*phi+ and 0.2*phi- must give the same kernel
    auto base = bm_provider({0.5, 1.0});
    DiffusionModel scaled = base;
    auto inner = base.eigen_provider;
    scaled.eigen_provider = [inner](double q) {
        EigenPair p = inner(q);
        auto plus = p.plus, minus = p.minus, dplus = p.dplus, dminus = p.dminus;
        p.plus = [plus](double x) { return 7.0 * plus(x); };
        p.minus = [minus](double x) { return 0.2 * minus(x); };
        if (dplus) p.dplus = [dplus](double x) { return 7.0 * dplus(x); };
        if (dminus) p.dminus = [dminus](double x) { return 0.2 * dminus(x); };
        p.d2plus = nullptr;
        p.d2minus = nullptr;
        return p;
    };
    QKernel ka(base, 1.2), kb(scaled, 1.2);
    CHECK_THAT(kb.w(0.8, -0.2), WithinRel(ka.w(0.8, -0.2), 1e-12));
    CHECK_THAT(kb.w1(0.8, -0.2), WithinRel(ka.w1(0.8, -0.2), 1e-12));
    CHECK_THAT(kb.wronskian(), WithinRel(ka.wronskian(), 1e-12));
}

TEST_CASE("coincident-argument expansion avoids catastrophic cancellation") {
    auto m = bm_provider({0.3, 1.0});
    QKernel k(m, 2.0);
    const double y = 0.4;
    // just inside the coincidence window the kernel follows s'(y)(x - y)
    const double h = 1e-9;
    CHECK_THAT(k.w(y + h, y), WithinRel(k.s_deriv(y) * h, 1e-6));
    CHECK_THAT(k.w1(y + h, y), WithinRel(k.s_deriv(y), 1e-6));
}

TEST_CASE("kernel rejects invalid construction") {
    auto m = bm_provider({0.0, 1.0});
    CHECK_THROWS_AS(QKernel(m, -0.5), DomainViolation);
    DiffusionModel broken = m;
    broken.eigen_provider = nullptr;
    CHECK_THROWS_AS(QKernel(broken, 1.0), EigenfunctionUnavailable);
    CHECK_THROWS_AS(bm_provider({0.0, 0.0}), NonPositiveDiffusion);
    CHECK_THROWS_AS(bm_provider({0.0, -2.0}), NonPositiveDiffusion);
}

TEST_CASE("stable coth helper") {
    CHECK_THAT(detail::coth_stable(1.0), WithinRel(1.3130352854993312, 1e-14));
    // large arguments saturate at 1 instead of overflowing
    CHECK(detail::coth_stable(800.0) == 1.0);
    CHECK(std::isfinite(detail::coth_stable(1e-8)));
    CHECK_THAT(detail::coth_stable(1e-8) * 1e-8, WithinRel(1.0, 1e-10));
}
