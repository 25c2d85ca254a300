#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "errors.hpp"
#include "numerics.hpp"

namespace ddlab {

// one q-slice of eigenfunctions; derivative slots are optional, missing ones
// fall back to finite differences in the kernel
struct EigenPair {
    std::function<double(double)> plus;        // increasing solution
    std::function<double(double)> minus;       // decreasing solution
    std::function<double(double)> dplus;       // optional analytic derivatives
    std::function<double(double)> dminus;
    std::function<double(double)> d2plus;
    std::function<double(double)> d2minus;
    // optional (phi+)'/phi+; lets providers sidestep the inf/inf that raw
    // eigenfunctions hit at large q*x even though the ratio stays tame
    std::function<double(double)> logd_plus;
};

// a one-dimensional regular diffusion on I = (left_boundary, +inf).
// Immutable once built; everything downstream takes it by const ref.
struct DiffusionModel {
    std::string name;
    std::function<double(double)> drift;        // mu(x)
    std::function<double(double)> diffusion;    // sigma(x) > 0
    double left_boundary = -std::numeric_limits<double>::infinity();
    double kappa = 0.0;                          // eigenfunction normalization point
    double kappa_prime = 0.0;                    // scale derivative anchor
    std::function<double(double)> scale;         // s(x)
    std::function<double(double)> scale_deriv;   // s'(x) = exp(-int 2 mu/sigma^2)
    std::function<EigenPair(double)> eigen_provider;

    bool contains(double x) const {
        return x > left_boundary && std::isfinite(x);
    }
    void require_in_interval(double x, const char* what) const {
        if (!contains(x))
            throw DomainViolation(std::string(what) + " outside the state interval");
        if (diffusion(x) <= 0.0)
            throw NonPositiveDiffusion("sigma(x) <= 0 at x in " + std::string(what));
    }
};

// value + diagnostics wrapper every law returns
struct LawResult {
    double value = 0.0;
    double error = 0.0;          // quadrature error estimate
    double truncation = 0.0;     // where an infinite integral was cut
    int refinements = 0;
    std::string method;          // closed-form | quadrature | mc | inversion
    double defect = 0.0;         // mass lost at infinity for transient models

    operator double() const { return value; }
};

// W_q calculus for one fixed rate q. The q = 0 kernel is a separate branch
// built only from the scale function, never a numerical limit.
class QKernel {
  public:
    QKernel(const DiffusionModel& model, double q) : q_(q) {
        if (q < 0.0) throw DomainViolation("kernel rate q must be nonnegative");
        s_ = model.scale;
        sd_ = model.scale_deriv;
        kappa_ = model.kappa;
        if (q == 0.0) {
            wronskian_ = 1.0;  // not used on the q = 0 branch
            return;
        }
        if (!model.eigen_provider)
            throw EigenfunctionUnavailable("model has no eigenfunction provider");
        EigenPair raw = model.eigen_provider(q);
        if (!raw.plus || !raw.minus)
            throw EigenfunctionUnavailable("provider returned incomplete eigenpair");

        // normalize to phi(kappa) = 1 regardless of what the provider scaled to
        const double cp = raw.plus(model.kappa);
        const double cm = raw.minus(model.kappa);
        if (!(cp > 0.0) || !(cm > 0.0))
            throw EigenfunctionUnavailable("eigenfunctions not positive at kappa");
        auto rp = raw.plus, rm = raw.minus;
        phip_ = [rp, cp](double x) { return rp(x) / cp; };
        phim_ = [rm, cm](double x) { return rm(x) / cm; };
        if (raw.dplus) { auto d = raw.dplus; dphip_ = [d, cp](double x) { return d(x) / cp; }; }
        else { auto p = phip_; dphip_ = [p](double x) { return central_derivative(p, x); }; }
        if (raw.dminus) { auto d = raw.dminus; dphim_ = [d, cm](double x) { return d(x) / cm; }; }
        else { auto p = phim_; dphim_ = [p](double x) { return central_derivative(p, x); }; }
        if (raw.d2plus) { auto d = raw.d2plus; d2phip_ = [d, cp](double x) { return d(x) / cp; }; }
        else { auto p = phip_; d2phip_ = [p](double x) { return central_second_derivative(p, x); }; }
        if (raw.d2minus) { auto d = raw.d2minus; d2phim_ = [d, cm](double x) { return d(x) / cm; }; }
        else { auto p = phim_; d2phim_ = [p](double x) { return central_second_derivative(p, x); }; }
        logd_ = raw.logd_plus;  // ratio is normalization-invariant, keep as-is

        wronskian_ = (dphip_(kappa_) * phim_(kappa_) - dphim_(kappa_) * phip_(kappa_)) / sd_(kappa_);
        if (!(wronskian_ > 0.0))
            throw EigenfunctionUnavailable("computed Wronskian is not positive");
    }

    double q() const { return q_; }
    double wronskian() const { return wronskian_; }
    double s(double x) const { return s_(x); }
    double s_deriv(double x) const { return sd_(x); }
    double phi_plus(double x) const { return phip_(x); }
    double phi_minus(double x) const { return phim_(x); }
    double phi_plus_deriv(double x) const { return dphip_(x); }
    double phi_minus_deriv(double x) const { return dphim_(x); }

    // W_q(x,y), first-order expansion near coincident arguments where the
    // determinant cancels catastrophically
    double w(double x, double y) const {
        if (q_ == 0.0) return s_(x) - s_(y);
        if (coincident(x, y)) return sd_(y) * (x - y);
        return (phip_(x) * phim_(y) - phip_(y) * phim_(x)) / wronskian_;
    }

    // W_{q,1} = d/dx W_q
    double w1(double x, double y) const {
        if (q_ == 0.0) return sd_(x);
        if (coincident(x, y)) return sd_(y);
        return (dphip_(x) * phim_(y) - dphim_(x) * phip_(y)) / wronskian_;
    }

    // W_{q,2} = d/dy W_{q,1}
    double w2(double x, double y) const {
        if (q_ == 0.0) return 0.0;
        if (coincident(x, y))
            return (d2phip_(y) * dphim_(y) - d2phim_(y) * dphip_(y)) / wronskian_ * (x - y);
        return (dphip_(x) * dphim_(y) - dphim_(x) * dphip_(y)) / wronskian_;
    }

    // (phi_q^+)'/phi_q^+, the logarithmic derivative used by the one-sided laws
    double logderiv_plus(double x) const {
        if (q_ == 0.0) throw DomainViolation("logderiv_plus undefined at q = 0");
        if (logd_) return logd_(x);
        return dphip_(x) / phip_(x);
    }

  private:
    bool coincident(double x, double y) const {
        return std::abs(x - y) < 1e-7 * std::max(1.0, std::abs(x));
    }

    double q_ = 0.0;
    double wronskian_ = 0.0;
    double kappa_ = 0.0;
    std::function<double(double)> s_, sd_;
    std::function<double(double)> phip_, phim_, dphip_, dphim_, d2phip_, d2phim_;
    std::function<double(double)> logd_;
};

inline QKernel build_kernel(const DiffusionModel& model, double q) {
    return QKernel(model, q);
}

// (W_{q,1}, W_{q,2}) at a point, the only derivative bundle callers need
inline std::pair<double, double> kernel_derivatives(const QKernel& k, double x, double y) {
    return {k.w1(x, y), k.w2(x, y)};
}

} // namespace ddlab
