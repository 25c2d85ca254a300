// Occupation-time transforms: frozen oracle pins (independent reference
// implementation), the identity in law, and the limit/degeneration laws
// that tie the five functionals together.

#include <catch_amalgamated.hpp>

#include <cmath>

#include <ddlab/bessel3.hpp>
#include <ddlab/brownian.hpp>
#include <ddlab/occupation.hpp>
#include <ddlab/passage.hpp>

using namespace ddlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const DiffusionModel bm0 = bm_provider({0.0, 1.0});
const DiffusionModel bm3 = bm_provider({0.3, 1.0});
const DiffusionModel bes3 = bes3_provider();
}

TEST_CASE("corridor occupation before exit, both start branches") {
    // q=0.5 occupation weight below y=0.4, p=0.25 on the exit time, corridor (0,1)
    CHECK_THAT(occ_exit_up(bm0, 0.5, 0.25, 0.5, 0.4, 0.0, 1.0),
               WithinRel(0.4612759995350835, 1e-9));
    CHECK_THAT(occ_exit_up(bm0, 0.5, 0.25, 0.3, 0.4, 0.0, 1.0),
               WithinRel(0.2672312065284998, 1e-9));
    // downward exit, no time weight, y=0.6
    CHECK_THAT(occ_exit_down(bm0, 0.5, 0.5, 0.6, 0.0, 1.0),
               WithinRel(0.4520620131373169, 1e-9));
    CHECK_THAT(occ_exit_down(bm0, 0.5, 0.7, 0.6, 0.0, 1.0),
               WithinRel(0.27006597644270897, 1e-9));
}

TEST_CASE("occupation below a level until the one-sided passage up") {
    CHECK_THAT(occ_below_until_up(bm0, 0.5, 0.25, 0.5, 0.2, 1.0),
               WithinRel(0.6338820576879596, 1e-9));
}

TEST_CASE("occupation below the start point until the drawdown time") {
    CHECK_THAT(occ_below_start_until_dd(bm0, 0.5, 0.0, 1.0).value,
               WithinRel(0.8830577701548181, 1e-8));
}

TEST_CASE("occupation of deep drawdown until the drawdown time, identity pin") {
    // q=0.5, y=0.5, a=1: same law as a fresh drawdown time to 0.5, so 1/cosh(0.5)
    CHECK_THAT(occ_dd_above_until_dd(bm0, 0.5, 0.0, 0.5, 1.0).value,
               WithinRel(0.8868188839700739, 1e-8));
}

TEST_CASE("occupation of small drawup until the drawdown time") {
    CHECK_THAT(occ_du_below_until_dd(bm0, 0.5, 0.0, 1.0, 1.0).value,
               WithinRel(0.7404632571910656, 1e-8));
}

TEST_CASE("drawdown occupation at an exponential horizon") {
    CHECK_THAT(occ_dd_above_at_exp(bm0, 0.5, 0.25, 0.0, 0.5).value,
               WithinRel(0.7853752783674586, 1e-8));
}

TEST_CASE("identity in law across models and rates") {
    // occupation of {Y > y} until sigma_a has the same law as a fresh
    // drawdown time to a - y from the same start point
    struct Case {
        const DiffusionModel* m;
        double x;
    };
    const DiffusionModel bmm = bm_provider({-1.0, 1.0});
    const DiffusionModel bmp = bm_provider({1.0, 1.0});
    const Case cases[] = {
        {&bmm, 0.0}, {&bm0, 0.0}, {&bmp, 0.0}, {&bes3, 1.5}, {&bes3, 2.0}, {&bes3, 4.0},
    };
    const double a = 1.0, y = 0.4;
    for (const auto& c : cases) {
        for (double q : {0.1, 0.5, 1.0, 2.0, 5.0}) {
            INFO(c.m->name << " x=" << c.x << " q=" << q);
            const double lhs = occ_dd_above_until_dd(*c.m, q, c.x, y, a).value;
            const double rhs = drawdown_transform(*c.m, q, c.x, a - y).value;
            CHECK_THAT(lhs, WithinRel(rhs, 1e-6));
        }
    }
    // bessel closed form for the right-hand side at one pin
    CHECK_THAT(occ_dd_above_until_dd(bes3, 0.5, 2.0, 0.4, 1.0).value,
               WithinRel(bes3_drawdown_lt(2.0, 0.5, 0.6), 1e-6));
}

TEST_CASE("corridor occupation degenerates to the plain exit transform") {
    // occupied region covering the whole corridor folds q into the time weight
    const double q = 0.6, p = 0.4, x = 0.3, a = -0.5, b = 0.9;
    const double full = occ_exit_up(bm3, q, p, x, b, a, b);
    const double plain = exit_transform(bm3, q + p, x, b, a);
    CHECK_THAT(full, WithinRel(plain, 1e-9));
    // occupied region empty leaves only the p-weight
    const double none = occ_exit_up(bm3, q, p, x, a, a, b);
    const double plain_p = exit_transform(bm3, p, x, b, a);
    CHECK_THAT(none, WithinRel(plain_p, 1e-9));
}

TEST_CASE("two-sided exit transform sanity") {
    // driftless q=0.5 (gamma=1): E_x[e^{-q tau_b}; tau_b < tau_a] =
    // sinh(x-a)/sinh(b-a)
    const double x = 0.3, a = -0.5, b = 0.9;
    CHECK_THAT(exit_transform(bm0, 0.5, x, b, a),
               WithinRel(std::sinh(x - a) / std::sinh(b - a), 1e-10));
    // q=0 reduces to the scale-ratio exit probability
    CHECK_THAT(exit_transform(bm0, 0.0, x, b, a), WithinRel((x - a) / (b - a), 1e-10));
    // degenerate starts
    CHECK(exit_transform(bm0, 0.5, b, b, a) == 1.0);
    CHECK(exit_transform(bm0, 0.5, a, b, a) == 0.0);
}

TEST_CASE("occupation transforms are monotone in the weights") {
    double prev = 1.0;
    for (double q : {0.2, 0.6, 1.5, 4.0}) {
        const double v = occ_below_start_until_dd(bm3, q, 0.0, 1.0).value;
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
    prev = 1.0;
    for (double p : {0.2, 0.6, 1.5, 4.0}) {
        const double v = occ_dd_above_at_exp(bm3, 0.8, p, 0.0, 0.4).value;
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
}

TEST_CASE("exponential-horizon occupation collapses as the weight explodes") {
    // p -> inf kills every path that spends any time in deep drawdown, so the
    // transform tends to P(E = 0) = P(sigma_y > e_q)
    const double q = 1.5, y = 0.4;
    const double lim = 1.0 - drawdown_transform(bm0, q, 0.0, y).value;
    const double big_p = occ_dd_above_at_exp(bm0, q, 1e4, 0.0, y).value;
    CHECK_THAT(big_p, WithinAbs(lim, 5e-3));
    // and p -> 0 recovers total mass 1
    const double small_p = occ_dd_above_at_exp(bm0, q, 1e-8, 0.0, y).value;
    CHECK_THAT(small_p, WithinAbs(1.0, 1e-6));
}

TEST_CASE("deep-drawdown occupation until sigma_a shrinks with the level") {
    // higher y means less of the drawdown range counts, so the transform grows
    double prev = 0.0;
    for (double y : {0.2, 0.4, 0.6, 0.8}) {
        const double v = occ_dd_above_until_dd(bm3, 0.8, 0.0, y, 1.0).value;
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("geometry preconditions carry precise messages") {
    CHECK_THROWS_AS(occ_below_until_up(bm0, 0.5, 0.25, 0.0, 0.2, 1.0), GeometryViolation);
    CHECK_THROWS_AS(occ_dd_above_until_dd(bm0, 0.5, 0.0, 1.5, 1.0), Error);
    CHECK_THROWS_AS(occ_exit_up(bm0, 0.5, 0.25, 1.5, 0.4, 0.0, 1.0), Error);
    CHECK_THROWS_AS(occ_du_below_until_dd(bm0, 0.5, 0.0, 0.5, 1.0), Error);
}
