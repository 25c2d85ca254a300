#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "model.hpp"
#include "numerics.hpp"

namespace ddlab {

namespace detail {

// Cumulative machinery for the drawdown transform seen from x0:
//   H(u)  = int_x0^u W_{q,1}(v,v-a)/W_q(v,v-a) dv   (the hazard of the running max)
//   G(u)  = int_x0^u s'(v)/W_q(v,v-a) e^{-H(v)} dv  (collected completion mass)
// so that E_s{e^{-q sigma_a}} = e^{H(s)} (G(inf) - G(s)) for any s >= x0.
// One instance serves a whole family of restart points, which keeps the
// composite ordering laws linear instead of quadratic in quadrature nodes.
class DrawdownTail {
  public:
    DrawdownTail(const QKernel& k, double x0, double a, double tol = 1e-10,
                 double mass_tol = 1e-12)
        : x0_(x0), a_(a) {
        QKernel kc = k;
        H_ = std::make_shared<ExponentAccumulator>(
            [kc, a](double v) { return kc.w1(v, v - a) / kc.w(v, v - a); }, x0,
            0.25 * a, tol);
        auto Hp = H_;
        G_ = std::make_shared<ExponentAccumulator>(
            [kc, a, Hp](double u) {
                return kc.s_deriv(u) / kc.w(u, u - a) * std::exp(-Hp->value(u));
            },
            x0, 0.25 * a, tol);

        double M = x0 + 4.0 * a;
        double wit_prev = 1.0;
        bool settled = false;
        for (int round = 0; round < 60; ++round) {
            const double wit = std::exp(-H_->value(M));
            if (wit <= mass_tol) {
                defect_ = wit;
                tail_err_ = wit;
                settled = true;
                break;
            }
            if (wit_prev - wit <= 1e-9 * wit) {
                // hazard integral has converged: genuinely defective law
                defect_ = wit;
                tail_err_ = std::max(0.0, wit_prev - wit);
                settled = true;
                break;
            }
            wit_prev = wit;
            M = x0 + 2.0 * (M - x0);
        }
        if (!settled)
            throw TailNotDecaying("drawdown transform: survival witness not decaying by M=" +
                                  std::to_string(M));
        truncation_ = M;
        G_inf_ = G_->value(M);
    }

    // E_s{e^{-q sigma_a}} restricted to sigma_a < inf, for s >= x0
    double value_from(double s) const {
        const double v = std::exp(H_->value(s)) * (G_inf_ - G_->value(s));
        return std::max(v, 0.0);
    }
    // P_s(max before sigma_a and e_q exceeds the truncation point)
    double defect_from(double s) const { return std::min(1.0, std::exp(H_->value(s)) * defect_); }
    double hazard_to(double u) const { return H_->value(u); }
    double collected_to(double u) const { return G_->value(u); }
    double collected_inf() const { return G_inf_; }
    double truncation() const { return truncation_; }
    double tail_error() const { return tail_err_; }
    std::shared_ptr<ExponentAccumulator> hazard_cache() const { return H_; }

  private:
    double x0_, a_;
    std::shared_ptr<ExponentAccumulator> H_, G_;
    double G_inf_ = 0.0, defect_ = 0.0, truncation_ = 0.0, tail_err_ = 0.0;
};

// Mirror for the drawup transform seen from x0 looking toward the left
// boundary. Everything is accumulated in the reflected coordinate
// tau = x0 - u so the panel caches still grow rightward:
//   A(u)  = int_u^x0 W_{q,1}(v,v+b)/W_q(v,v+b) dv   (<= 0, the min hazard)
//   Gm(u) = int_u^x0 s'(v)/W_q(v+b,v) e^{A(v)} dv
// so that E_s{e^{-q sigmahat_b}} = e^{-A(s)} (Gm(l) - Gm(s)) for s <= x0.
class DrawupTail {
  public:
    DrawupTail(const QKernel& k, double x0, double b, double left_boundary,
               double tol = 1e-10, double mass_tol = 1e-12)
        : x0_(x0), b_(b) {
        QKernel kc = k;
        A_ = std::make_shared<ExponentAccumulator>(
            [kc, b, x0](double tau) {
                const double v = x0 - tau;
                return kc.w1(v, v + b) / kc.w(v, v + b);
            },
            0.0, 0.25 * b, tol);
        auto Ap = A_;
        G_ = std::make_shared<ExponentAccumulator>(
            [kc, b, x0, Ap](double tau) {
                const double v = x0 - tau;
                // A(v) = A_(tau); the accumulator already carries the sign
                return kc.s_deriv(v) / kc.w(v + b, v) * std::exp(Ap->value(tau));
            },
            0.0, 0.25 * b, tol);

        double M = std::isfinite(left_boundary) ? left_boundary + 0.5 * (x0 - left_boundary)
                                                : x0 - 4.0 * b;
        double wit_prev = 1.0;
        bool settled = false;
        for (int round = 0; round < 60; ++round) {
            const double witness = std::exp(A_->value(x0 - M));
            if (witness <= mass_tol) {
                defect_ = witness;
                tail_err_ = witness;
                settled = true;
                break;
            }
            if (wit_prev - witness <= 1e-9 * witness) {
                defect_ = witness;
                tail_err_ = std::max(0.0, wit_prev - witness);
                settled = true;
                break;
            }
            wit_prev = witness;
            M = std::isfinite(left_boundary) ? left_boundary + 0.5 * (M - left_boundary)
                                             : x0 - 2.0 * (x0 - M);
        }
        if (!settled)
            throw TailNotDecaying("drawup transform: survival witness not decaying by M=" +
                                  std::to_string(M));
        truncation_ = M;
        G_l_ = G_->value(x0 - M);
    }

    // E_s{e^{-q sigmahat_b}} restricted to sigmahat_b < inf, for s <= x0
    double value_from(double s) const {
        const double As = A_->value(x0_ - s);  // int_s^x0 r_du, nonpositive
        const double v = std::exp(-As) * (G_l_ - G_->value(x0_ - s));
        return std::max(v, 0.0);
    }
    // P_s(min before sigmahat_b and e_q goes below the truncation point)
    double defect_from(double s) const {
        return std::min(1.0, defect_ * std::exp(-A_->value(x0_ - s)));
    }
    // int_u^x0 of the drawup hazard (nonpositive)
    double hazard_from(double u) const { return A_->value(x0_ - u); }
    double collected_to(double u) const { return G_->value(x0_ - u); }
    double collected_left() const { return G_l_; }
    double truncation() const { return truncation_; }
    double tail_error() const { return tail_err_; }
    std::shared_ptr<ExponentAccumulator> hazard_cache() const { return A_; }
    double base() const { return x0_; }

  private:
    double x0_, b_;
    std::shared_ptr<ExponentAccumulator> A_, G_;
    double G_l_ = 0.0, defect_ = 0.0, truncation_ = 0.0, tail_err_ = 0.0;
};

} // namespace detail

// E_x{e^{-q tau_y}; tau_y < tau_z} = W_q(x,z)/W_q(y,z), either orientation.
inline double exit_transform(const DiffusionModel& m, double q, double x, double y, double z) {
    m.require_in_interval(x, "x");
    m.require_in_interval(y, "y");
    m.require_in_interval(z, "z");
    if (x == y) return 1.0;
    if (x == z) return 0.0;
    if (!((x - y) * (z - x) > 0.0))
        throw GeometryViolation("exit_transform requires x strictly between y and z");
    QKernel k(m, q);
    return k.w(x, z) / k.w(y, z);
}

// P_m(tau_n^- < sigmahat_b and e_q) = exp(+int_n^m W_{q,1}(v,v+b)/W_q(v,v+b) dv)
inline double down_before_drawup(const DiffusionModel& model, double q, double m, double n,
                                 double b) {
    if (!(b > 0.0)) throw GeometryViolation("drawup threshold b must be positive");
    if (n > m) throw GeometryViolation("down_before_drawup requires n <= m");
    model.require_in_interval(n, "n");
    if (n == m) return 1.0;
    QKernel k(model, q);
    auto r = [&k, b](double v) { return k.w1(v, v + b) / k.w(v, v + b); };
    return std::exp(integrate(r, n, m).value);
}

// P_n(tau_m^+ < sigma_a and e_q) = exp(-int_n^m W_{q,1}(v,v-a)/W_q(v,v-a) dv)
inline double up_before_drawdown(const DiffusionModel& model, double q, double n, double m,
                                 double a) {
    if (!(a > 0.0)) throw GeometryViolation("drawdown threshold a must be positive");
    if (n > m) throw GeometryViolation("up_before_drawdown requires n <= m");
    model.require_in_interval(n - a, "n - a");
    if (n == m) return 1.0;
    QKernel k(model, q);
    auto r = [&k, a](double v) { return k.w1(v, v - a) / k.w(v, v - a); };
    return std::exp(-integrate(r, n, m).value);
}

// P_x(max at sigma_a >= m) = exp(-int_x^m s'(v)/(s(v)-s(v-a)) dv)
inline double max_at_drawdown_survival(const DiffusionModel& model, double x, double m,
                                       double a) {
    if (!(a > 0.0)) throw GeometryViolation("drawdown threshold a must be positive");
    if (m <= x) return 1.0;
    model.require_in_interval(x - a, "x - a");
    QKernel k(model, 0.0);
    auto r = [&k, a](double v) { return k.w1(v, v - a) / k.w(v, v - a); };
    return std::exp(-integrate(r, x, m).value);
}

// E_x{e^{-q sigma_a}}; at q=0 this is P_x(sigma_a < inf) with the mass at
// infinity reported in LawResult.defect rather than renormalized away.
inline LawResult drawdown_transform(const DiffusionModel& model, double q, double x, double a,
                                    double tol = 1e-10) {
    if (!(a > 0.0)) throw GeometryViolation("drawdown threshold a must be positive");
    if (q < 0.0) throw DomainViolation("q must be nonnegative");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - a, "x - a");
    QKernel k(model, q);
    detail::DrawdownTail tail(k, x, a, tol);
    LawResult out;
    out.value = tail.collected_inf();
    out.error = tail.tail_error() + tol;
    out.truncation = tail.truncation();
    out.method = "quadrature";
    out.defect = tail.defect_from(x);
    return out;
}

// E_x{e^{-q sigmahat_b}}, the drawup mirror of the previous law.
inline LawResult drawup_transform(const DiffusionModel& model, double q, double x, double b,
                                  double tol = 1e-10) {
    if (!(b > 0.0)) throw GeometryViolation("drawup threshold b must be positive");
    if (q < 0.0) throw DomainViolation("q must be nonnegative");
    model.require_in_interval(x, "x");
    QKernel k(model, q);
    detail::DrawupTail tail(k, x, b, model.left_boundary, tol);
    LawResult out;
    out.value = tail.value_from(x);
    out.error = tail.tail_error() + tol;
    out.truncation = tail.truncation();
    out.method = "quadrature";
    out.defect = tail.defect_from(x);
    return out;
}

// density over an interval, as produced by the ordering laws
struct PassageDensity {
    double lo = 0.0, hi = 0.0;
    std::function<double(double)> pdf;
    double mass = 0.0;
};

struct OrderingResult {
    LawResult probability;
    PassageDensity density;
    std::string route;  // "lowmark-density" or "transform-restart"
};

// P_x(sigma_a < sigmahat_b and e_q). For a >= b integrates the low-mark
// density over (x-b, x); for b > a subtracts the restarted drawdown
// transforms along the intermediate max density over (x, x+a).
inline OrderingResult dd_before_du(const DiffusionModel& model, double q, double x, double a,
                                   double b, double tol = 1e-10) {
    if (!(a > 0.0) || !(b > 0.0)) throw GeometryViolation("thresholds a, b must be positive");
    if (q < 0.0) throw DomainViolation("q must be nonnegative");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - std::max(a, b), "x - max(a,b)");
    QKernel k(model, q);
    OrderingResult out;

    if (a >= b) {
        // accumulated drawup hazard from tau=0 at u=x going left; needs
        // arguments down to x-a
        auto A = std::make_shared<ExponentAccumulator>(
            [k, b, x](double tau) {
                const double v = x - tau;
                return k.w1(v, v + b) / k.w(v, v + b);
            },
            0.0, 0.25 * b, tol);
        auto dens = [k, A, x, a, b](double u) {
            // exp(+int_{u+b-a}^{u} r_du) with r_du <= 0
            const double expo = -A->value(x - u) + A->value(x - (u + b - a));
            const double wbu = k.w(u + b, u);
            return k.s_deriv(u + b) * k.w(x, u) / (wbu * wbu) * std::exp(expo);
        };
        auto integral = integrate(dens, x - b, x, tol);
        out.probability.value = integral.value;
        out.probability.error = integral.error;
        out.probability.refinements = integral.refinements;
        out.probability.method = "quadrature";
        out.route = "lowmark-density";
        out.density = PassageDensity{x - b, x, dens, integral.value};
        return out;
    }

    // b > a: value = T(x) - int_x^{x+a} lapage(u) T(u+b-a) du where T is the
    // restarted drawdown transform; the exponent e^{H(u+b-a)} inside T cancels
    // the survival factor of the lapage density, so the fused integrand only
    // amplifies by e^{H(u)} over the bounded support
    detail::DrawdownTail tail(k, x, a, tol);
    auto fused = [&k, &tail, x, a, b](double u) {
        const double wua = k.w(u, u - a);
        return k.s_deriv(u - a) * k.w(u, x) / (wua * wua) * std::exp(tail.hazard_to(u)) *
               std::max(0.0, tail.collected_inf() - tail.collected_to(u + b - a));
    };
    auto correction = integrate(fused, x, x + a, tol);
    out.probability.value = tail.collected_inf() - correction.value;
    out.probability.error = tail.tail_error() + correction.error + tol;
    out.probability.truncation = tail.truncation();
    out.probability.refinements = correction.refinements;
    out.probability.method = "quadrature";
    out.probability.defect = tail.defect_from(x);
    out.route = "transform-restart";
    auto H = tail.hazard_cache();
    auto dens = [k, H, x, a, b](double u) {
        const double wua = k.w(u, u - a);
        const double expo = H->value(u) - H->value(u + b - a);
        return k.s_deriv(u - a) * k.w(u, x) / (wua * wua) * std::exp(expo);
    };
    out.density = PassageDensity{x, x + a, dens, integrate(dens, x, x + a, tol).value};
    return out;
}

// P_x(sigmahat_b < sigma_a and e_q), mirror of dd_before_du.
inline OrderingResult du_before_dd(const DiffusionModel& model, double q, double x, double a,
                                   double b, double tol = 1e-10) {
    if (!(a > 0.0) || !(b > 0.0)) throw GeometryViolation("thresholds a, b must be positive");
    if (q < 0.0) throw DomainViolation("q must be nonnegative");
    model.require_in_interval(x, "x");
    model.require_in_interval(x - std::max(a, b), "x - max(a,b)");
    QKernel k(model, q);
    OrderingResult out;

    if (b >= a) {
        auto H = std::make_shared<ExponentAccumulator>(
            [k, a](double v) { return k.w1(v, v - a) / k.w(v, v - a); }, x, 0.25 * a, tol);
        auto dens = [k, H, x, a, b](double u) {
            const double wua = k.w(u, u - a);
            const double expo = H->value(u) - H->value(u + b - a);
            return k.s_deriv(u - a) * k.w(u, x) / (wua * wua) * std::exp(expo);
        };
        auto integral = integrate(dens, x, x + a, tol);
        out.probability.value = integral.value;
        out.probability.error = integral.error;
        out.probability.refinements = integral.refinements;
        out.probability.method = "quadrature";
        out.route = "lowmark-density";
        out.density = PassageDensity{x, x + a, dens, integral.value};
        return out;
    }

    // a > b: value = That(x) - int_{x-b}^x lequal(u) That(u+b-a) du with That
    // the restarted drawup transform; same exponent fusion as above
    detail::DrawupTail tail(k, x, b, model.left_boundary, tol);
    auto fused = [&k, &tail, x, a, b](double u) {
        const double wbu = k.w(u + b, u);
        // lequal(u) * That(u+b-a) with e^{-A(u+b-a)} cancelled
        return k.s_deriv(u + b) * k.w(x, u) / (wbu * wbu) * std::exp(-tail.hazard_from(u)) *
               std::max(0.0, tail.collected_left() - tail.collected_to(u + b - a));
    };
    auto correction = integrate(fused, x - b, x, tol);
    out.probability.value = tail.value_from(x) - correction.value;
    out.probability.error = tail.tail_error() + correction.error + tol;
    out.probability.truncation = tail.truncation();
    out.probability.refinements = correction.refinements;
    out.probability.method = "quadrature";
    out.probability.defect = tail.defect_from(x);
    out.route = "transform-restart";
    QKernel kc = k;
    auto A = tail.hazard_cache();
    auto dens = [kc, A, x, a, b](double u) {
        // exp(+int_{u+b-a}^{u} r_du) via the shared hazard cache
        const double expo = A->value(x - (u + b - a)) - A->value(x - u);
        const double wbu = kc.w(u + b, u);
        return kc.s_deriv(u + b) * kc.w(x, u) / (wbu * wbu) * std::exp(expo);
    };
    out.density = PassageDensity{x - b, x, dens, integrate(dens, x - b, x, tol).value};
    return out;
}

} // namespace ddlab
