#pragma once

#include <cmath>

#include "model.hpp"

namespace ddlab {

// 3-dimensional Bessel process: dX = (1/X) dt + dB on I = (0, inf), 0 entrance.
// With nu = sqrt(2q) and normalization point kappa = 1:
//   phi_q^+(x) = sinh(nu x)/(x sinh nu),  phi_q^-(x) = e^{-nu(x-1)}/x,
//   s(x) = -1/x, s'(x) = 1/x^2.
inline DiffusionModel bes3_provider() {
    DiffusionModel m;
    m.name = "bes3";
    m.drift = [](double x) { return 1.0 / x; };
    m.diffusion = [](double) { return 1.0; };
    m.left_boundary = 0.0;
    m.kappa = 1.0;
    m.kappa_prime = 1.0;
    m.scale = [](double x) { return -1.0 / x; };
    m.scale_deriv = [](double x) { return 1.0 / (x * x); };
    m.eigen_provider = [](double q) {
        const double nu = std::sqrt(2.0 * q);
        EigenPair e;
        e.plus = [nu](double x) { return std::sinh(nu * x) / (x * std::sinh(nu)); };
        e.dplus = [nu](double x) {
            return (nu * std::cosh(nu * x) - std::sinh(nu * x) / x) / (x * std::sinh(nu));
        };
        e.minus = [nu](double x) { return std::exp(-nu * (x - 1.0)) / x; };
        e.dminus = [nu](double x) {
            return -std::exp(-nu * (x - 1.0)) * (nu + 1.0 / x) / x;
        };
        // second derivatives from the ODE: (1/2) f'' + (1/x) f' = q f
        auto f = e.plus, df = e.dplus, g = e.minus, dg = e.dminus;
        e.d2plus = [nu, f, df](double x) { return nu * nu * f(x) - 2.0 * df(x) / x; };
        e.d2minus = [nu, g, dg](double x) { return nu * nu * g(x) - 2.0 * dg(x) / x; };
        e.logd_plus = [nu](double x) { return nu / std::tanh(nu * x) - 1.0 / x; };
        return e;
    };
    return m;
}

// E_x{e^{-q sigma_a}} for x > a:
//   (1/cosh(nu a)) * ((x-a)/x + tanh(nu a)/(nu x))
inline double bes3_drawdown_lt(double x, double q, double a) {
    if (!(x > 0.0)) throw DomainViolation("bes3 state must be positive");
    if (!(a > 0.0)) throw DomainViolation("a must be positive");
    if (!(x > a)) throw DomainViolation("bes3 closed form requires x > a");
    if (q < 0.0) throw DomainViolation("q must be nonnegative");
    if (q == 0.0) return 1.0;
    const double nu = std::sqrt(2.0 * q);
    return ((x - a) / x + std::tanh(nu * a) / (nu * x)) / std::cosh(nu * a);
}

} // namespace ddlab
