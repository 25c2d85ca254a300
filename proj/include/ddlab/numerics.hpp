#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "errors.hpp"

namespace ddlab {

struct IntegralResult {
    double value = 0.0;
    double error = 0.0;
    int refinements = 0;
};

namespace detail {

// 15-point Gauss-Kronrod pair (nodes/weights from QUADPACK dqk15),
// symmetric about the midpoint; the embedded 7-point Gauss rule gives
// the error estimate.
inline constexpr double gk15_nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double gk15_wk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double gk15_wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
inline void gk15(const F& f, double a, double b, double& value, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double resk = 0.0, resg = 0.0;
    double fv[8];
    for (int i = 0; i < 8; ++i) {
        const double dx = h * gk15_nodes[i];
        const double f1 = f(c - dx);
        const double f2 = (i == 7) ? 0.0 : f(c + dx);
        fv[i] = f1 + f2;
        resk += gk15_wk[i] * fv[i];
    }
    resg = gk15_wg[3] * fv[7];
    resg += gk15_wg[0] * fv[1] + gk15_wg[1] * fv[3] + gk15_wg[2] * fv[5];
    value = resk * h;
    err = std::abs((resk - resg) * h);
    // QUADPACK-style sharpening of the raw difference
    if (err != 0.0) {
        double reskh = resk * 0.5;
        double asc = 0.0;
        for (int i = 0; i < 8; ++i) asc += gk15_wk[i] * std::abs(fv[i] - 2.0 * reskh);
        asc *= std::abs(h);
        if (asc != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    }
}

struct Interval {
    double a, b, value, error;
    bool operator<(const Interval& o) const { return error < o.error; }
};

} // namespace detail

// adaptive integration: keep bisecting the worst interval until the summed
// error estimate drops under tol*(1+|value|)
template <class F>
IntegralResult integrate(const F& f, double a, double b, double tol = 1e-10,
                         int max_intervals = 2000) {
    IntegralResult res;
    if (a == b) return res;
    double sign = 1.0;
    if (b < a) { std::swap(a, b); sign = -1.0; }

    std::priority_queue<detail::Interval> heap;
    double v, e;
    detail::gk15(f, a, b, v, e);
    heap.push({a, b, v, e});
    double total_v = v, total_e = e;
    int n = 1;
    while (total_e > tol * (1.0 + std::abs(total_v)) && n < max_intervals) {
        detail::Interval worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            // interval collapsed to rounding width, accept what we have
            heap.push(worst);
            break;
        }
        double v1, e1, v2, e2;
        detail::gk15(f, worst.a, mid, v1, e1);
        detail::gk15(f, mid, worst.b, v2, e2);
        total_v += v1 + v2 - worst.value;
        total_e += e1 + e2 - worst.error;
        heap.push({worst.a, mid, v1, e1});
        heap.push({mid, worst.b, v2, e2});
        ++n;
        ++res.refinements;
    }
    if (total_e > tol * (1.0 + std::abs(total_v)) && n >= max_intervals)
        throw MaxDepthExceeded("integrate: subdivision limit reached", sign * total_v, total_e);
    res.value = sign * total_v;
    res.error = total_e;
    return res;
}

// H(u) = int_{base}^{u} h(v) dv cached on an adaptive panel grid. Laws built
// from factors exp(-int_x^m h) query H at many m; caching turns the nested
// integral into one sweep. Panels are accepted when the GK error passes and
// the cubic Hermite interpolant reproduces the panel midpoint, so
// interpolated queries are as good as direct quadrature.
class ExponentAccumulator {
  public:
    ExponentAccumulator(std::function<double(double)> h, double base,
                        double initial_step, double tol = 1e-10)
        : h_(std::move(h)), base_(base), tol_(tol),
          step_hint_(initial_step > 0 ? initial_step : 1.0) {
        us_.push_back(base_);
        Hs_.push_back(0.0);
        hs_.push_back(h_(base_));
    }

    double base() const { return base_; }
    double frontier() const { return us_.back(); }

    // cumulative integral from base to u (u >= base)
    double value(double u) {
        if (u < base_ - 1e-14 * (1.0 + std::abs(base_)))
            throw DomainViolation("ExponentAccumulator: query left of base point");
        if (u <= base_) return 0.0;
        extend(u);
        // binary search for the panel containing u
        auto it = std::upper_bound(us_.begin(), us_.end(), u);
        size_t i = static_cast<size_t>(it - us_.begin());
        if (i >= us_.size()) i = us_.size() - 1;
        if (i == 0) return 0.0;
        const size_t lo = i - 1;
        if (u >= us_.back()) return Hs_.back();
        return hermite(lo, u);
    }

  private:
    void extend(double u_target) {
        while (us_.back() < u_target) {
            const double u0 = us_.back();
            double step = step_hint_;
            // do not create a panel end far past the target
            if (u0 + step > u_target) step = std::max(u_target - u0, 1e-12 * (1.0 + std::abs(u_target)));
            add_panel(u0, u0 + step, 0);
        }
    }

    void add_panel(double a, double b, int depth) {
        if (depth > 48)
            throw MaxDepthExceeded("ExponentAccumulator: panel bisection limit", Hs_.back(), 0.0);
        double v, e;
        detail::gk15(h_, a, b, v, e);
        if (!std::isfinite(v))
            throw NonFiniteState("ExponentAccumulator: integrand not finite on [" +
                                 std::to_string(a) + ", " + std::to_string(b) + "]");
        const double scale = 1.0 + std::abs(Hs_.back()) + std::abs(v);
        bool ok = e <= tol_ * scale;
        if (ok) {
            // verify the Hermite interpolant agrees with direct quadrature at
            // the panel midpoint, otherwise interpolated queries would be
            // worse than the panel integral itself
            const double mid = 0.5 * (a + b);
            double vh, eh;
            detail::gk15(h_, a, mid, vh, eh);
            const double ha = (us_.back() == a) ? hs_.back() : h_(a);
            const double hb = h_(b);
            const double interp = hermite_raw(a, b, 0.0, v, ha, hb, mid);
            ok = std::abs(interp - vh) <= 10.0 * tol_ * scale + 2.0 * (e + eh);
            if (ok) {
                us_.push_back(b);
                Hs_.push_back(Hs_.back() + v);
                hs_.push_back(hb);
                return;
            }
        }
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) {
            us_.push_back(b);
            Hs_.push_back(Hs_.back() + v);
            hs_.push_back(h_(b));
            return;
        }
        add_panel(a, mid, depth + 1);
        add_panel(mid, b, depth + 1);
    }

    // cubic Hermite on panel [us_[i], us_[i+1]] using H values and h = H'
    double hermite(size_t i, double u) const {
        return Hs_[i] + hermite_raw(us_[i], us_[i + 1], 0.0, Hs_[i + 1] - Hs_[i],
                                    hs_[i], hs_[i + 1], u);
    }

    static double hermite_raw(double a, double b, double Ha, double Hb,
                              double ha, double hb, double u) {
        const double w = b - a;
        const double t = (u - a) / w;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        return h00 * Ha + h10 * w * ha + h01 * Hb + h11 * w * hb;
    }

    std::function<double(double)> h_;
    double base_;
    double tol_;
    double step_hint_;
    std::vector<double> us_, Hs_, hs_;
};

// find a truncation point m* with decay_witness(m*) < tol/10 by doubling the
// distance from `a`, then integrate on [a, m*]. The witness is the survival
// factor that multiplies every tail integrand in the laws here, so it is an
// upper envelope of the remaining mass.
template <class F, class W>
IntegralResult integrate_to_inf(const F& f, double a, const W& decay_witness,
                                double tol = 1e-10, double scale_hint = 1.0,
                                int max_intervals = 4000) {
    double m = a + 4.0 * std::max(scale_hint, 1e-8);
    const double target = tol / 10.0;
    int doublings = 0;
    while (decay_witness(m) >= target) {
        m = a + 2.0 * (m - a);
        if (++doublings > 60)
            throw TailNotDecaying("integrate_to_inf: decay witness failed to reach threshold");
    }
    IntegralResult r = integrate(f, a, m, tol, max_intervals);
    ++r.refinements;  // count the truncation search as one refinement stage
    return r;
}

// mirror of integrate_to_inf toward the left boundary l (possibly -inf):
// approach l by halving the remaining gap (finite l) or doubling the
// distance from x (l = -inf)
template <class F, class W>
IntegralResult integrate_to_left_boundary(const F& f, double x, double l,
                                          const W& decay_witness, double tol = 1e-10,
                                          double scale_hint = 1.0,
                                          int max_intervals = 4000) {
    const bool finite = std::isfinite(l);
    double m = finite ? std::max(l + 0.5 * (x - l) / 4.0, x - 4.0 * scale_hint)
                      : x - 4.0 * std::max(scale_hint, 1e-8);
    if (finite && m <= l) m = l + 0.25 * (x - l);
    const double target = tol / 10.0;
    int doublings = 0;
    while (decay_witness(m) >= target) {
        m = finite ? l + 0.5 * (m - l) : x - 2.0 * (x - m);
        if (++doublings > 60)
            throw TailNotDecaying("integrate_to_left_boundary: decay witness failed to reach threshold");
        if (finite && m - l < 1e-300)
            throw TailNotDecaying("integrate_to_left_boundary: witness still large at the boundary");
    }
    return integrate(f, m, x, tol, max_intervals);
}

// central difference first derivative, step balanced between truncation and
// roundoff for double precision
template <class F>
double central_derivative(const F& f, double x) {
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(x));
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// second derivative by nested central differences with a widened step
template <class F>
double central_second_derivative(const F& f, double x) {
    const double h = std::pow(std::numeric_limits<double>::epsilon(), 0.25) * std::max(1.0, std::abs(x));
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

} // namespace ddlab
