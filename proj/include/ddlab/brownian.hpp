#pragma once

#include <cmath>
#include <string>

#include "model.hpp"

namespace ddlab {

// Brownian motion with drift: dX = mu dt + sigma dB on I = (-inf, inf).
// delta = mu/sigma^2, gamma(q) = sqrt(delta^2 + 2q/sigma^2);
// phi_q^+ = e^{(gamma-delta)x}, phi_q^- = e^{-(gamma+delta)x},
// s(x) = (1 - e^{-2 delta x})/delta with the driftless limit s(x) = 2x.
struct BrownianParams {
    double mu = 0.0;
    double sigma = 1.0;

    double delta() const { return mu / (sigma * sigma); }
    double gamma(double q) const {
        const double d = delta();
        return std::sqrt(d * d + 2.0 * q / (sigma * sigma));
    }
};

namespace detail {
// coth via exponentials of differences so gamma*a ~ 1e3 cannot overflow
inline double coth_stable(double z) {
    if (z > 350.0) return 1.0;
    if (z < -350.0) return -1.0;
    return 1.0 + 2.0 / std::expm1(2.0 * z);
}
} // namespace detail

inline DiffusionModel bm_provider(const BrownianParams& p) {
    if (!(p.sigma > 0.0)) throw NonPositiveDiffusion("bm_provider: sigma must be positive");
    const double mu = p.mu, sigma = p.sigma;
    const double d = p.delta();

    DiffusionModel m;
    m.name = "bm";
    m.drift = [mu](double) { return mu; };
    m.diffusion = [sigma](double) { return sigma; };
    m.left_boundary = -std::numeric_limits<double>::infinity();
    m.kappa = 0.0;
    m.kappa_prime = 0.0;
    if (d == 0.0) {
        m.scale = [](double x) { return 2.0 * x; };
        m.scale_deriv = [](double) { return 2.0; };
    } else {
        m.scale = [d](double x) { return -std::expm1(-2.0 * d * x) / d; };
        m.scale_deriv = [d](double x) { return 2.0 * std::exp(-2.0 * d * x); };
    }
    m.eigen_provider = [p, d](double q) {
        const double g = p.gamma(q);
        const double cp = g - d, cm = g + d;
        EigenPair e;
        e.plus = [cp](double x) { return std::exp(cp * x); };
        e.minus = [cm](double x) { return std::exp(-cm * x); };
        e.dplus = [cp](double x) { return cp * std::exp(cp * x); };
        e.dminus = [cm](double x) { return -cm * std::exp(-cm * x); };
        e.d2plus = [cp](double x) { return cp * cp * std::exp(cp * x); };
        e.d2minus = [cm](double x) { return cm * cm * std::exp(-cm * x); };
        e.logd_plus = [cp](double) { return cp; };
        return e;
    };
    return m;
}

// E{e^{-q sigma_a}} = gamma e^{-delta a} / (gamma cosh(gamma a) - delta sinh(gamma a)),
// computed through scaled exponentials so large gamma*a stays finite
inline double bm_drawdown_lt(const BrownianParams& p, double q, double a) {
    if (!(a > 0.0)) throw DomainViolation("a must be positive");
    if (q < 0.0) throw DomainViolation("q must be nonnegative");
    if (q == 0.0) return 1.0;
    const double d = p.delta(), g = p.gamma(q);
    const double ga = g * a;
    const double em = std::exp(-2.0 * ga);
    // multiply numerator and denominator by 2 e^{-gamma a}
    return 2.0 * g * std::exp(-(d + g) * a) / (g * (1.0 + em) - d * (1.0 - em));
}

inline double bm_drawup_lt(const BrownianParams& p, double q, double b) {
    BrownianParams flip{-p.mu, p.sigma};
    return bm_drawdown_lt(flip, q, b);
}

struct BmOrdering {
    double dd_before_du = 0.0;  // P_0(sigma_a < sigmahat_b and e_q)
    double du_before_dd = 0.0;  // P_0(sigmahat_b < sigma_a and e_q)
};

// both ordering probabilities with their a-vs-b branches
inline BmOrdering bm_prob_dd_before_du(const BrownianParams& p, double q, double a, double b) {
    if (!(a > 0.0)) throw DomainViolation("a must be positive");
    if (!(b > 0.0)) throw DomainViolation("b must be positive");
    if (!(q > 0.0)) throw DomainViolation("q must be positive");
    const double d = p.delta(), g = p.gamma(q);
    const double s2 = p.sigma * p.sigma;

    // Q_dn(a,b) is the dd-first probability for a >= b; Q_up is its drawup
    // mirror (delta -> -delta) for b >= a
    auto Q_dn = [&](double aa, double bb) {
        const double cth = detail::coth_stable(g * bb);
        const double sh = std::sinh(g * bb);
        return s2 * g / (2.0 * q) *
               (std::exp(-d * bb) * (g * cth + d) / sh - g / (sh * sh)) *
               std::exp(-(aa - bb) * (d + g * cth));
    };
    auto Q_up = [&](double aa, double bb) {
        const double cth = detail::coth_stable(g * aa);
        const double sh = std::sinh(g * aa);
        return s2 * g / (2.0 * q) *
               (std::exp(d * aa) * (g * cth - d) / sh - g / (sh * sh)) *
               std::exp(-(bb - aa) * (-d + g * cth));
    };

    BmOrdering out;
    out.dd_before_du = (a >= b) ? Q_dn(a, b) : (1.0 - Q_up(a, b)) * bm_drawdown_lt(p, q, a);
    out.du_before_dd = (b >= a) ? Q_up(a, b) : (1.0 - Q_dn(a, b)) * bm_drawup_lt(p, q, b);
    return out;
}

// driftless special case P_0(sigma_a < sigmahat_a and e_q) = 1/(cosh(sqrt(2q) a/sigma) + 1)
inline double bm_symmetric_ordering(double sigma, double q, double a) {
    if (!(sigma > 0.0)) throw NonPositiveDiffusion("sigma must be positive");
    if (!(a > 0.0) || !(q > 0.0)) throw DomainViolation("a and q must be positive");
    return 1.0 / (std::cosh(std::sqrt(2.0 * q) * a / sigma) + 1.0);
}

} // namespace ddlab
