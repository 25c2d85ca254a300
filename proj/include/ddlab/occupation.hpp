#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "model.hpp"
#include "numerics.hpp"
#include "passage.hpp"

namespace ddlab {

namespace detail {

// Shared skeleton for the ratchet laws: integrals of the form
//   int_x0^inf numer(m) e^{-int_x0^m hazard} dm
// truncated by the survival witness, with a plateau test so genuinely
// defective laws stop instead of spinning.
struct RatchetResult {
    double integral = 0.0;
    double defect = 0.0;      // survival mass beyond the truncation point
    double truncation = 0.0;
    double error = 0.0;
};

inline RatchetResult ratchet_integral(std::function<double(double)> hazard,
                                      std::function<double(double)> numer, double x0,
                                      double scale, double tol = 1e-10,
                                      double mass_tol = 1e-12) {
    auto H = std::make_shared<ExponentAccumulator>(std::move(hazard), x0, 0.25 * scale, tol);
    auto Hp = H;
    ExponentAccumulator G(
        [numer, Hp](double u) { return numer(u) * std::exp(-Hp->value(u)); }, x0,
        0.25 * scale, tol);

    RatchetResult out;
    double M = x0 + 4.0 * scale;
    double wit_prev = 1.0;
    for (int round = 0; round < 60; ++round) {
        const double wit = std::exp(-H->value(M));
        if (wit <= mass_tol) {
            out.defect = wit;
            out.error = wit + tol;
            out.truncation = M;
            out.integral = G.value(M);
            return out;
        }
        if (wit_prev - wit <= 1e-9 * wit) {
            out.defect = wit;
            out.error = std::max(0.0, wit_prev - wit) + tol;
            out.truncation = M;
            out.integral = G.value(M);
            return out;
        }
        wit_prev = wit;
        M = x0 + 2.0 * (M - x0);
    }
    throw TailNotDecaying("ratchet integral: survival witness not decaying by M=" +
                          std::to_string(M));
}

} // namespace detail

// E_x{e^{-q A_y^{a,b} - p tau_b^+}; tau_b^+ < tau_a^-}: occupation below y
// inside the corridor (a,b) weighted by q, stopped at the upper exit.
inline double occ_exit_up(const DiffusionModel& model, double q, double p, double x, double y,
                          double a, double b) {
    if (!(a < y && y < b)) throw GeometryViolation("occ_exit_up requires a < y < b");
    if (!(x > a && x < b)) throw GeometryViolation("occ_exit_up requires x in (a,b)");
    if (q < 0.0 || p < 0.0) throw DomainViolation("rates q, p must be nonnegative");
    model.require_in_interval(a, "a");
    if (q == 0.0) {
        // A-weight vanishes; plain two-sided exit at rate p
        QKernel kp(model, p);
        return kp.w(x, a) / kp.w(b, a);
    }
    QKernel kp(model, p), kqp(model, q + p);
    const double D = kp.w1(y, b) + kp.w(b, y) * kqp.w1(y, a) / kqp.w(y, a);
    const double f = kp.s_deriv(y) / D;
    if (x <= y) return kqp.w(x, a) / kqp.w(y, a) * f;
    return kp.w(x, y) / kp.w(b, y) + kp.w(b, x) / kp.w(b, y) * f;
}

// E_x{e^{-q A_y^{a,b}}; tau_a^- < tau_b^+}: same occupation, lower exit.
inline double occ_exit_down(const DiffusionModel& model, double q, double x, double y, double a,
                            double b) {
    if (!(a < y && y < b)) throw GeometryViolation("occ_exit_down requires a < y < b");
    if (!(x > a && x < b)) throw GeometryViolation("occ_exit_down requires x in (a,b)");
    if (q < 0.0) throw DomainViolation("rate q must be nonnegative");
    model.require_in_interval(a, "a");
    QKernel k(model, q);
    if (q == 0.0) return (k.s(b) - k.s(x)) / (k.s(b) - k.s(a));
    if (x <= y) {
        const double D = k.w1(y, a) + k.s_deriv(y) * k.w(y, a) / (k.s(b) - k.s(y));
        return k.w(y, x) / k.w(y, a) + k.w(x, a) / k.w(y, a) * k.s_deriv(y) / D;
    }
    return (k.s(b) - k.s(x)) * k.s_deriv(y) /
           ((k.s(b) - k.s(y)) * k.w1(y, a) + k.s_deriv(y) * k.w(y, a));
}

// E_x{exp(-q int_0^{tau_b^+} 1{X<y} dt - p tau_b^+)}: the a -> l limit of
// occ_exit_up, with the lower-exit kernel replaced by the logarithmic
// derivative of phi_{q+p}^+.
inline double occ_below_until_up(const DiffusionModel& model, double q, double p, double x,
                                 double y, double b) {
    if (!(y < x && x < b)) throw GeometryViolation("occ_below_until_up requires y < x < b");
    if (!(p > 0.0)) throw DomainViolation("rate p must be positive");
    if (q < 0.0) throw DomainViolation("rate q must be nonnegative");
    model.require_in_interval(y, "y");
    QKernel kp(model, p), kqp(model, q + p);
    const double D = kp.w1(y, b) + kp.w(b, y) * kqp.logderiv_plus(y);
    return kp.w(x, y) / kp.w(b, y) + kp.w(b, x) / kp.w(b, y) * kp.s_deriv(y) / D;
}

// E_x{e^{-q B_x^a}} with B the occupation below the start level until the
// drawdown reaches a. Survival term plus completion-density integral; the
// occupied level stays frozen at x while the max m ranges over (x, x+a).
inline LawResult occ_below_start_until_dd(const DiffusionModel& model, double q, double x,
                                          double a, double tol = 1e-10) {
    if (!(a > 0.0)) throw GeometryViolation("drawdown threshold a must be positive");
    if (q < 0.0) throw DomainViolation("rate q must be nonnegative");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - a, "x - a");
    QKernel k(model, q);
    const double sx = k.s(x), sdx = k.s_deriv(x);
    // denominators cleared of W_q(x, u-a), which vanishes at u = x+a; the
    // ratio forms are finite there analytically but 0/0 in floating point
    auto den_cleared = [&k, x, a, sx, sdx](double u) {
        return sdx * k.w(x, u - a) + (k.s(u) - sx) * k.w1(x, u - a);
    };
    auto H = std::make_shared<ExponentAccumulator>(
        [&k, x, a, den_cleared](double u) {
            return k.s_deriv(u) * k.w1(x, u - a) / den_cleared(u);
        },
        x, 0.25 * a, tol);
    const double survival = std::exp(-H->value(x + a));
    auto g = [&k, x, a, sdx, den_cleared, H](double u) {
        return k.s_deriv(u) * sdx / den_cleared(u) * std::exp(-H->value(u));
    };
    auto integral = integrate(g, x, x + a, tol);
    LawResult out;
    out.value = survival + integral.value;
    out.error = integral.error + tol;
    out.refinements = integral.refinements;
    out.method = "quadrature";
    return out;
}

// E_x{e^{-q C_y^a}; sigma_a < inf} with C the time the drawdown spends above
// y before reaching a. Outer integral over the terminal max m.
inline LawResult occ_dd_above_until_dd(const DiffusionModel& model, double q, double x,
                                       double y, double a, double tol = 1e-10) {
    if (!(y > 0.0 && y < a)) throw GeometryViolation("occ_dd_above_until_dd requires 0 < y < a");
    if (q < 0.0) throw DomainViolation("rate q must be nonnegative");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - a, "x - a");
    QKernel k(model, q);
    // same cleared-denominator trick as in occ_below_start_until_dd
    auto den_cleared = [k, y, a](double u) {
        return k.s_deriv(u - y) * k.w(u - y, u - a) +
               (k.s(u) - k.s(u - y)) * k.w1(u - y, u - a);
    };
    auto hazard = [k, y, a, den_cleared](double u) {
        return k.s_deriv(u) * k.w1(u - y, u - a) / den_cleared(u);
    };
    auto numer = [k, y, a, den_cleared](double m) {
        return k.s_deriv(m) * k.s_deriv(m - y) / den_cleared(m);
    };
    auto res = detail::ratchet_integral(hazard, numer, x, a, tol);
    LawResult out;
    out.value = res.integral;
    out.error = res.error;
    out.truncation = res.truncation;
    out.method = "quadrature";
    out.defect = res.defect;
    return out;
}

// E_x{e^{-q D_y^a}; sigma_a < inf} with D the time the drawup stays below y
// until the drawdown reaches a; stated for y >= a only.
inline LawResult occ_du_below_until_dd(const DiffusionModel& model, double q, double x,
                                       double y, double a, double tol = 1e-10) {
    if (!(a > 0.0)) throw GeometryViolation("drawdown threshold a must be positive");
    if (y < a) throw DomainViolation("occ_du_below_until_dd requires y >= a");
    if (!(q > 0.0)) throw DomainViolation("rate q must be positive");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - a, "x - a");

    // paths where sigma_a comes before any drawup of size y contribute their
    // full transform; the rest restart at the max m = u with the drawup
    // freshly at y, i.e. at state u + y - a... see the density coupling below
    auto first = dd_before_du(model, q, x, a, y, tol);

    QKernel k(model, q);
    auto H = std::make_shared<ExponentAccumulator>(
        [k, a](double v) { return k.w1(v, v - a) / k.w(v, v - a); }, x, 0.25 * a, tol);
    auto g = [&](double u) {
        const double wua = k.w(u, u - a);
        const double expo = H->value(u) - H->value(u + y - a);
        const double dens = k.s_deriv(u - a) * k.w(u, x) / (wua * wua) * std::exp(expo);
        return dens * occ_below_start_until_dd(model, q, u + y - a, a, tol).value;
    };
    auto second = integrate(g, x, x + a, std::max(tol, 1e-9));

    LawResult out;
    out.value = first.probability.value + second.value;
    out.error = first.probability.error + second.error;
    out.truncation = first.probability.truncation;
    out.refinements = second.refinements;
    out.method = "quadrature";
    out.defect = first.probability.defect;
    return out;
}

// E_x{e^{-p E_y^q}} with E the time the drawdown spends above y before an
// independent exponential clock e_q. Three terms combined as
// 1 - survival - integral in extended precision (both subtractions are the
// cancellation risk here).
inline LawResult occ_dd_above_at_exp(const DiffusionModel& model, double q, double p, double x,
                                     double y, double tol = 1e-10) {
    if (!(y > 0.0)) throw GeometryViolation("level y must be positive");
    if (!(p > 0.0)) throw DomainViolation("rate p must be positive");
    if (q < 0.0) throw DomainViolation("rate q must be nonnegative");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - y, "x - y");
    LawResult out;
    out.method = "quadrature";
    if (q == 0.0) {
        // e_0 = inf and the drawdown recurs above y forever for every model
        // in scope, so the occupation diverges and the transform vanishes
        out.value = 0.0;
        out.error = 0.0;
        return out;
    }
    QKernel kq(model, q), kqp(model, q + p);
    auto hazard = [kq, kqp, y](double u) {
        const double G = kqp.logderiv_plus(u - y);
        const double den = kq.w1(u - y, u) + kq.w(u, u - y) * G;
        return (kq.w2(u - y, u) + kq.w1(u, u - y) * G) / den;
    };
    const double weight = p / (q + p);
    auto numer = [kq, kqp, y, weight](double m) {
        const double G = kqp.logderiv_plus(m - y);
        const double den = kq.w1(m - y, m) + kq.w(m, m - y) * G;
        return weight * kq.s_deriv(m) * G / den;
    };
    auto res = detail::ratchet_integral(hazard, numer, x, y, tol);
    const long double value =
        1.0L - static_cast<long double>(res.defect) - static_cast<long double>(res.integral);
    out.value = static_cast<double>(value);
    out.error = res.error;
    out.truncation = res.truncation;
    out.defect = res.defect;
    return out;
}

} // namespace ddlab
