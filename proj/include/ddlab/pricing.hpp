#pragma once

// Applications layer: default probabilities under regime-switched hazard
// rates, digital options on the drawdown occupation time (Parisian-style
// trigger), and alpha-quantile drawdown options.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "errors.hpp"
#include "inversion.hpp"
#include "model.hpp"
#include "occupation.hpp"
#include "passage.hpp"

namespace ddlab {

// Default intensity switched on by the named regime. `rate` is the kill
// intensity while the regime is active; `level` is the regime parameter
// (ignored for constant_rate, the level y for the corridor Y > y and the
// deficit Yhat < y variants; below_start keys off the starting point).
struct HazardSpec {
    enum class Variant { constant_rate, drawdown_corridor, below_start, drawup_deficit };
    Variant variant = Variant::constant_rate;
    double rate = 0.0;
    double level = 0.0;
};

struct PricingSpec {
    double barrier = 0.0;   // occupation barrier y on the drawdown
    double strike = 0.0;    // occupation strike K, in time units
    double maturity = 0.0;  // T
    double rate = 0.0;      // discount rate r
    double alpha = 1.0;     // quantile level
    std::function<double(double)> payoff;        // f, absolutely continuous, f(0) = 0
    std::function<double(double)> payoff_deriv;  // f', supplied, never differenced
    // support bound for f': the quantile integral stops at min(cap, decay
    // point). Unbounded payoffs must be capped by the caller; there is no
    // decay assumption to lean on.
    double cap = std::numeric_limits<double>::infinity();
};

// P_x(default strikes before the drawdown reaches a). Default arrives at
// the hazard rate while its regime is active, so survival is the matching
// occupation transform and this is its complement.
inline double default_before_drawdown(const DiffusionModel& model, double x,
                                      const HazardSpec& hazard, double a) {
    if (!(hazard.rate > 0.0)) throw DomainViolation("hazard rate must be positive");
    if (!(a > 0.0)) throw GeometryViolation("drawdown threshold a must be positive");
    switch (hazard.variant) {
    case HazardSpec::Variant::constant_rate:
        return 1.0 - drawdown_transform(model, hazard.rate, x, a).value;
    case HazardSpec::Variant::drawdown_corridor:
        if (!(hazard.level > 0.0 && hazard.level < a))
            throw GeometryViolation("corridor hazard requires 0 < level < a");
        return 1.0 - occ_dd_above_until_dd(model, hazard.rate, x, hazard.level, a).value;
    case HazardSpec::Variant::below_start:
        return 1.0 - occ_below_start_until_dd(model, hazard.rate, x, a).value;
    case HazardSpec::Variant::drawup_deficit:
        if (!(hazard.level >= a))
            throw GeometryViolation("drawup-deficit hazard requires level >= a");
        return 1.0 - occ_du_below_until_dd(model, hazard.rate, x, hazard.level, a).value;
    }
    throw DomainViolation("unknown hazard variant");
}

// P_x(drawdown of a before drawup of b, both before an independent
// exponential default clock at rate q).
inline double dd_before_du_before_default(const DiffusionModel& model, double x, double q,
                                          double a, double b) {
    return dd_before_du(model, q, x, a, b).probability;
}

// P_x( int_0^T 1{Y_t > y} dt <= K ): occupation-time distribution of the
// drawdown corridor at a fixed horizon, recovered from the double transform
// (1/q)(1/p) E_x{e^{-p E_y^q}} by iterated inversion. Near the cdf's
// boundary layers (y or K extreme) the working order can disagree with
// itself; backing off the order trades truncation error for noise there, so
// retry downward before giving up.
inline double parisian_occupation_cdf(const DiffusionModel& model, double x, double y,
                                      double T, double K, int order = 12) {
    auto F2 = [&model, x, y](double q, double p) {
        return occ_dd_above_at_exp(model, q, p, x, y).value / (q * p);
    };
    for (int ord = order; ord >= 8; ord -= 2) {
        try {
            return invert2(F2, T, K, ord, /*is_probability=*/true).value;
        } catch (const DivergentAcceleration&) {
            if (ord == 8) throw;
        }
    }
    throw DivergentAcceleration("occupation cdf inversion failed at every order");
}

// Digital call paying 1 at T if the drawdown spends more than K time units
// above y by maturity.
inline double parisian_digital_price(const DiffusionModel& model, double x,
                                     const PricingSpec& spec) {
    if (!(spec.barrier > 0.0)) throw GeometryViolation("barrier y must be positive");
    if (!(spec.strike > 0.0 && spec.strike < spec.maturity))
        throw DomainViolation("digital requires 0 < K < T");
    if (spec.rate < 0.0) throw DomainViolation("discount rate must be nonnegative");
    const double disc = std::exp(-spec.rate * spec.maturity);
    const double cdf = parisian_occupation_cdf(model, x, spec.barrier, spec.maturity, spec.strike);
    return disc - disc * cdf;
}

// P_x( int_0^T 1{Y_t > u} dt > K ). K = 0 degenerates to the plain
// first-passage cdf P(sigma_u <= T), done by single inversion; u = 0 is
// identically 1 since the drawdown is positive at a.e. time.
inline double quantile_exceedance(const DiffusionModel& model, double x, double u, double T,
                                  double K, int order = 12) {
    if (u < 0.0) throw GeometryViolation("quantile level u must be nonnegative");
    if (u == 0.0) return 1.0;
    if (K <= 0.0) {
        // LT of the cdf t -> P(sigma_u <= t) is E[e^{-q sigma_u}] / q
        TransformFn F;
        F.f = [&model, x, u](double q) {
            return drawdown_transform(model, q, x, u).value / q;
        };
        F.is_probability = true;
        return invert(F, T).value;
    }
    return 1.0 - parisian_occupation_cdf(model, x, u, T, K, order);
}

// Price of f(Y_T^alpha): integrate f'(u) against the exceedance probability
// of the alpha-quantile of the drawdown. Each probability costs a full
// double inversion, so evaluations are cached by node and the grid is
// refined dyadically (every refinement reuses all previous nodes).
inline double alpha_quantile_price(const DiffusionModel& model, double x,
                                   const PricingSpec& spec, double tol = 5e-4) {
    if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw DomainViolation("alpha must lie in (0, 1]");
    if (!(spec.maturity > 0.0)) throw DomainViolation("maturity must be positive");
    if (spec.rate < 0.0) throw DomainViolation("discount rate must be nonnegative");
    if (!spec.payoff_deriv) throw DomainViolation("payoff derivative f' is required");
    const double T = spec.maturity;
    const double K = (1.0 - spec.alpha) * T;

    std::map<double, double> cache;
    auto P = [&](double u) {
        auto it = cache.find(u);
        if (it != cache.end()) return it->second;
        const double v = quantile_exceedance(model, x, u, T, K);
        cache.emplace(u, v);
        return v;
    };

    // truncate where the exceedance tail is dead. The exceedance itself is
    // too noisy near zero to threshold (inversion floor ~1e-5), so use the
    // Markov bound P(sigma_u <= T) <= e * E[e^{-sigma_u / T}], which is one
    // clean quadrature, then clip by the payoff support.
    double U = std::max(model.diffusion(x) * std::sqrt(T) + std::abs(model.drift(x)) * T, 1e-3);
    int doublings = 0;
    const double e1 = std::exp(1.0);
    while (e1 * drawdown_transform(model, 1.0 / T, x, U).value > 1e-7) {
        U *= 2.0;
        if (++doublings > 40)
            throw TailNotDecaying("quantile exceedance did not decay by u = " + std::to_string(U));
    }
    if (!(spec.cap > 0.0)) throw DomainViolation("payoff cap must be positive");
    U = std::min(U, spec.cap);

    auto simpson = [&](int n) {
        const double h = U / n;
        double acc = spec.payoff_deriv(0.0) * P(0.0) + spec.payoff_deriv(U) * P(U);
        for (int i = 1; i < n; ++i)
            acc += (i % 2 == 1 ? 4.0 : 2.0) * spec.payoff_deriv(i * h) * P(i * h);
        return acc * h / 3.0;
    };
    double prev = simpson(8), integral = prev;
    for (int n = 16; n <= 1024; n *= 2) {
        integral = simpson(n);
        if (std::abs(integral - prev) <= std::max(tol, tol * std::abs(integral)))
            return std::exp(-spec.rate * T) * integral;
        prev = integral;
    }
    throw NonConvergence("quantile price grid did not settle at 1024 panels");
}

} // namespace ddlab
