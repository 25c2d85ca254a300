#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "model.hpp"
#include "numerics.hpp"

namespace ddlab {

// Numeric eigenfunction provider for models without closed forms.
// Solves (sigma^2/2) f'' + mu f' = q f for the increasing solution phi_q^+
// (shooting from kappa, bisection on f'(kappa)) and the decreasing solution
// phi_q^- (backward integration from a far-field anchor), both sampled on a
// dense grid over [x_lo, x_hi] with cubic Hermite interpolation in between.
struct OdeEigenConfig {
    double x_lo = 0.0;
    double x_hi = 0.0;
    int n_steps = 4000;            // grid intervals across the window
    double rel_tol = 1e-9;         // anchor stabilization target
    double anchor_distance = 0.0;  // initial far-field offset; 0 = auto from decay rate
    int max_anchor_doublings = 24;
    int max_bisections = 200;
    // optional: when set, Wronskian constancy across the window is verified
    std::function<double(double)> scale_deriv;
    double wronskian_tol = 1e-6;
};

namespace detail {

inline double hermite_point(double xa, double xb, double fa, double fb,
                            double da, double db, double x) {
    const double w = xb - xa;
    const double t = (x - xa) / w;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * fa + (t3 - 2 * t2 + t) * w * da +
           (-2 * t3 + 3 * t2) * fb + (t3 - t2) * w * db;
}

inline double hermite_slope(double xa, double xb, double fa, double fb,
                            double da, double db, double x) {
    const double w = xb - xa;
    const double t = (x - xa) / w;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * fa + (3 * t2 - 4 * t + 1) * w * da +
            (-6 * t2 + 6 * t) * fb + (3 * t2 - 2 * t) * w * db) / w;
}

// one sampled solution of the eigen-ODE plus everything needed to evaluate it
struct EigenGrid {
    double x_lo = 0.0, h = 0.0;
    std::vector<double> f, df;
    double q = 0.0;
    std::function<double(double)> mu, sigma;

    double locate(double x) const {
        const double x_hi = x_lo + h * static_cast<double>(f.size() - 1);
        if (x < x_lo - 1e-12 * (1.0 + std::abs(x_lo)) ||
            x > x_hi + 1e-12 * (1.0 + std::abs(x_hi)))
            throw WindowTooWide("eigenfunction requested at x=" + std::to_string(x) +
                                " outside configured window [" + std::to_string(x_lo) +
                                ", " + std::to_string(x_hi) + "]; widen OdeEigenConfig");
        double t = (x - x_lo) / h;
        return std::clamp(t, 0.0, static_cast<double>(f.size() - 1));
    }
    double value(double x) const {
        const double t = locate(x);
        size_t i = std::min(static_cast<size_t>(t), f.size() - 2);
        const double xa = x_lo + h * static_cast<double>(i);
        return hermite_point(xa, xa + h, f[i], f[i + 1], df[i], df[i + 1], x);
    }
    double deriv(double x) const {
        const double t = locate(x);
        size_t i = std::min(static_cast<size_t>(t), f.size() - 2);
        const double xa = x_lo + h * static_cast<double>(i);
        return hermite_slope(xa, xa + h, f[i], f[i + 1], df[i], df[i + 1], x);
    }
    double second(double x) const {
        // exact consequence of the ODE, no extra differentiation
        const double s = sigma(x);
        return 2.0 * (q * value(x) - mu(x) * deriv(x)) / (s * s);
    }
};

struct OdeStepper {
    const std::function<double(double)>& mu;
    const std::function<double(double)>& sigma;
    double q;

    void rhs(double x, double f, double g, double& d1, double& d2) const {
        const double s = sigma(x);
        d1 = g;
        d2 = 2.0 * (q * f - mu(x) * g) / (s * s);
    }
    // one classical RK4 step from x by dx (dx may be negative)
    void step(double x, double dx, double& f, double& g) const {
        double k1f, k1g, k2f, k2g, k3f, k3g, k4f, k4g;
        rhs(x, f, g, k1f, k1g);
        rhs(x + 0.5 * dx, f + 0.5 * dx * k1f, g + 0.5 * dx * k1g, k2f, k2g);
        rhs(x + 0.5 * dx, f + 0.5 * dx * k2f, g + 0.5 * dx * k2g, k3f, k3g);
        rhs(x + dx, f + dx * k3f, g + dx * k3g, k4f, k4g);
        f += dx / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        g += dx / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
    }
};

} // namespace detail

// Builds phi_q^+/phi_q^- for the diffusion with the given coefficients.
// kappa must lie inside [x_lo, x_hi].
inline EigenPair solve_eigenpair(std::function<double(double)> mu,
                                 std::function<double(double)> sigma,
                                 double left_boundary, double kappa, double q,
                                 const OdeEigenConfig& cfg) {
    if (!(q > 0.0)) throw DomainViolation("solve_eigenpair requires q > 0");
    if (!(cfg.x_hi > cfg.x_lo)) throw DomainViolation("eigen window must have x_hi > x_lo");
    if (!(kappa >= cfg.x_lo && kappa <= cfg.x_hi))
        throw DomainViolation("normalization point kappa must lie inside the eigen window");
    if (cfg.n_steps < 16) throw DomainViolation("n_steps too small for the eigen grid");

    const int n = cfg.n_steps;
    const double h = (cfg.x_hi - cfg.x_lo) / static_cast<double>(n);
    detail::OdeStepper ode{mu, sigma, q};

    const double sig_k = sigma(kappa), mu_k = mu(kappa);
    if (!(sig_k > 0.0)) throw NonPositiveDiffusion("sigma(kappa) must be positive");
    const double disc_k = std::sqrt(mu_k * mu_k + 2.0 * q * sig_k * sig_k);
    const double lam_plus = (-mu_k + disc_k) / (sig_k * sig_k);

    // extension past x_lo amplifies any admixture of the decreasing solution so
    // the shoot classifies cleanly; near a finite boundary stop well inside I
    double x_ext;
    if (std::isfinite(left_boundary)) {
        x_ext = left_boundary + 0.05 * (cfg.x_lo - left_boundary);
    } else {
        const double decay_len = sigma(cfg.x_lo) / std::sqrt(2.0 * q);
        x_ext = cfg.x_lo - std::max(cfg.x_hi - cfg.x_lo, 8.0 * decay_len);
    }
    const int n_ext = std::max(1, static_cast<int>(std::ceil((kappa - x_ext) / h)));
    const double h_ext = (kappa - x_ext) / static_cast<double>(n_ext);

    // -1 = f' hit zero (slope too small), +1 = f hit zero (slope too large),
    //  0 = reached x_ext positive and increasing
    auto classify = [&](double theta) -> int {
        double f = 1.0, g = theta, x = kappa;
        for (int i = 0; i < n_ext; ++i) {
            ode.step(x, -h_ext, f, g);
            x = kappa - h_ext * static_cast<double>(i + 1);
            if (!std::isfinite(f) || !std::isfinite(g))
                throw NonConvergence("increasing-solution shoot diverged at x=" + std::to_string(x));
            if (f <= 0.0) return +1;
            if (g <= 0.0) return -1;
        }
        return 0;
    };

    double theta_lo = 0.0;  // f'(kappa)=0 can only bend down going left
    double theta_hi = std::max(lam_plus, 1e-8);
    int c = classify(theta_hi);
    int guard = 0;
    while (c != +1) {
        theta_hi *= 2.0;
        if (++guard > 80)
            throw NonConvergence("could not bracket f'(kappa) for the increasing solution");
        c = classify(theta_hi);
    }
    for (int it = 0; it < cfg.max_bisections; ++it) {
        const double mid = 0.5 * (theta_lo + theta_hi);
        if (mid <= theta_lo || mid >= theta_hi) break;
        (classify(mid) == +1 ? theta_hi : theta_lo) = mid;
    }
    const double theta = 0.5 * (theta_lo + theta_hi);

    // one clean pass over the grid with the converged slope
    auto plus_grid = std::make_shared<detail::EigenGrid>();
    plus_grid->x_lo = cfg.x_lo;
    plus_grid->h = h;
    plus_grid->q = q;
    plus_grid->mu = mu;
    plus_grid->sigma = sigma;
    plus_grid->f.assign(static_cast<size_t>(n) + 1, 0.0);
    plus_grid->df.assign(static_cast<size_t>(n) + 1, 0.0);
    {
        // kappa sits between grid nodes in general; integrate left then right
        const double tk = (kappa - cfg.x_lo) / h;
        const int ik = std::clamp(static_cast<int>(std::floor(tk)), 0, n);
        double f = 1.0, g = theta;
        double x = kappa;
        for (int i = ik; i >= 0; --i) {
            const double xi = cfg.x_lo + h * static_cast<double>(i);
            ode.step(x, xi - x, f, g);
            x = xi;
            plus_grid->f[static_cast<size_t>(i)] = f;
            plus_grid->df[static_cast<size_t>(i)] = g;
        }
        f = 1.0;
        g = theta;
        x = kappa;
        for (int i = ik + 1; i <= n; ++i) {
            const double xi = cfg.x_lo + h * static_cast<double>(i);
            ode.step(x, xi - x, f, g);
            x = xi;
            if (!std::isfinite(f))
                throw NonConvergence("increasing solution overflowed inside the window");
            plus_grid->f[static_cast<size_t>(i)] = f;
            plus_grid->df[static_cast<size_t>(i)] = g;
        }
    }
    for (size_t i = 0; i + 1 < plus_grid->f.size(); ++i) {
        if (!(plus_grid->f[i] > 0.0) || plus_grid->f[i + 1] < plus_grid->f[i] * (1.0 - 1e-12))
            throw NonConvergence("increasing solution lost positivity/monotonicity on the grid");
    }

    // decreasing solution: start at a far-field anchor with the WKB decay
    // slope and integrate back; double the anchor distance until the value
    // at x_hi (normalized at kappa) stops moving
    auto shoot_minus = [&](double delta, std::shared_ptr<detail::EigenGrid>& out) {
        const double x_anchor = cfg.x_hi + delta;
        if (!std::isfinite(x_anchor))
            throw WindowTooWide("far-field anchor left the state interval");
        const double sg = sigma(x_anchor), m = mu(x_anchor);
        if (!(sg > 0.0)) throw NonPositiveDiffusion("sigma(anchor) must be positive");
        const double lam_minus = (-m - std::sqrt(m * m + 2.0 * q * sg * sg)) / (sg * sg);

        // pre-window accuracy only perturbs the (decaying) admixture of the
        // increasing solution, so the step count can be capped safely
        const int n_pre = std::clamp(static_cast<int>(std::ceil(delta / h)), 1, 200000);
        const double h_pre = delta / static_cast<double>(n_pre);
        double f = 1.0, g = lam_minus, x = x_anchor;
        for (int i = 0; i < n_pre; ++i) {
            ode.step(x, -h_pre, f, g);
            x = x_anchor - h_pre * static_cast<double>(i + 1);
            if (!std::isfinite(f) || !std::isfinite(g))
                throw NonConvergence("decreasing-solution shoot diverged before the window");
            if (std::abs(f) > 1e250) { f *= 1e-250; g *= 1e-250; }  // linear ODE, rescale freely
        }
        out = std::make_shared<detail::EigenGrid>();
        out->x_lo = cfg.x_lo;
        out->h = h;
        out->q = q;
        out->mu = mu;
        out->sigma = sigma;
        out->f.assign(static_cast<size_t>(n) + 1, 0.0);
        out->df.assign(static_cast<size_t>(n) + 1, 0.0);
        out->f[static_cast<size_t>(n)] = f;
        out->df[static_cast<size_t>(n)] = g;
        x = cfg.x_hi;
        for (int i = n - 1; i >= 0; --i) {
            const double xi = cfg.x_lo + h * static_cast<double>(i);
            ode.step(x, xi - x, f, g);
            x = xi;
            if (!std::isfinite(f))
                throw NonConvergence("decreasing solution overflowed inside the window");
            if (std::abs(f) > 1e250) {
                for (int j = n; j > i; --j) {
                    out->f[static_cast<size_t>(j)] *= 1e-250;
                    out->df[static_cast<size_t>(j)] *= 1e-250;
                }
                f *= 1e-250;
                g *= 1e-250;
            }
            out->f[static_cast<size_t>(i)] = f;
            out->df[static_cast<size_t>(i)] = g;
        }
        const double at_kappa = out->value(kappa);
        if (!(at_kappa > 0.0))
            throw NonConvergence("decreasing solution not positive at kappa");
        for (auto& v : out->f) v /= at_kappa;
        for (auto& v : out->df) v /= at_kappa;
    };

    double delta = cfg.anchor_distance;
    if (!(delta > 0.0)) {
        const double sg = sigma(cfg.x_hi);
        delta = std::max(4.0 * sg / std::sqrt(2.0 * q), 0.25 * (cfg.x_hi - cfg.x_lo));
    }
    std::shared_ptr<detail::EigenGrid> minus_grid;
    shoot_minus(delta, minus_grid);
    bool stabilized = false;
    for (int d = 0; d < cfg.max_anchor_doublings; ++d) {
        delta *= 2.0;
        std::shared_ptr<detail::EigenGrid> next;
        shoot_minus(delta, next);
        const double prev_v = minus_grid->f.back(), next_v = next->f.back();
        minus_grid = next;
        if (std::abs(next_v - prev_v) <= cfg.rel_tol * std::abs(next_v)) {
            stabilized = true;
            break;
        }
    }
    if (!stabilized)
        throw NonConvergence("far-field anchor did not stabilize the decreasing solution");
    for (size_t i = 0; i + 1 < minus_grid->f.size(); ++i) {
        if (!(minus_grid->f[i] > 0.0) || minus_grid->f[i + 1] > minus_grid->f[i] * (1.0 + 1e-12))
            throw NonConvergence("decreasing solution lost positivity/monotonicity on the grid");
    }

    // normalize the increasing branch at kappa as well
    {
        const double at_kappa = plus_grid->value(kappa);
        for (auto& v : plus_grid->f) v /= at_kappa;
        for (auto& v : plus_grid->df) v /= at_kappa;
    }

    if (cfg.scale_deriv) {
        // (phi+)' phi- - (phi-)' phi+ must equal a constant times s'(x)
        double w_ref = 0.0;
        for (int k = 0; k <= 8; ++k) {
            const double x = cfg.x_lo + (cfg.x_hi - cfg.x_lo) * static_cast<double>(k) / 8.0;
            const double w = (plus_grid->deriv(x) * minus_grid->value(x) -
                              minus_grid->deriv(x) * plus_grid->value(x)) /
                             cfg.scale_deriv(x);
            if (k == 0) {
                w_ref = w;
            } else if (std::abs(w - w_ref) > cfg.wronskian_tol * std::abs(w_ref)) {
                throw NonConvergence("Wronskian drifts across the window; refine the eigen grid");
            }
        }
    }

    EigenPair pair;
    pair.plus = [plus_grid](double x) { return plus_grid->value(x); };
    pair.dplus = [plus_grid](double x) { return plus_grid->deriv(x); };
    pair.d2plus = [plus_grid](double x) { return plus_grid->second(x); };
    pair.minus = [minus_grid](double x) { return minus_grid->value(x); };
    pair.dminus = [minus_grid](double x) { return minus_grid->deriv(x); };
    pair.d2minus = [minus_grid](double x) { return minus_grid->second(x); };
    return pair;
}

// Swaps a model's provider for the numeric one (useful to cross-check closed
// forms, and the backbone of CLI custom models).
inline void attach_numeric_eigen(DiffusionModel& model, OdeEigenConfig cfg) {
    if (!cfg.scale_deriv && model.scale_deriv) cfg.scale_deriv = model.scale_deriv;
    auto mu = model.drift;
    auto sigma = model.diffusion;
    const double l = model.left_boundary, kappa = model.kappa;
    model.eigen_provider = [mu, sigma, l, kappa, cfg](double q) {
        return solve_eigenpair(mu, sigma, l, kappa, q, cfg);
    };
}

// Full numeric model from bare coefficients: scale function and its
// derivative come from s'(x) = exp(-int_kappa^x 2 mu/sigma^2) via lazily
// extended panel caches, eigenfunctions from solve_eigenpair. Evaluation is
// not thread-safe (the caches grow on demand); run within one worker.
inline DiffusionModel make_custom_model(std::string name,
                                        std::function<double(double)> mu,
                                        std::function<double(double)> sigma,
                                        double left_boundary, double kappa,
                                        OdeEigenConfig cfg) {
    DiffusionModel m;
    m.name = std::move(name);
    m.drift = mu;
    m.diffusion = sigma;
    m.left_boundary = left_boundary;
    m.kappa = kappa;
    m.kappa_prime = kappa;

    auto logslope = [mu, sigma](double u) {
        const double s = sigma(u);
        if (!(s > 0.0)) throw NonPositiveDiffusion("sigma must stay positive on the state interval");
        return 2.0 * mu(u) / (s * s);
    };
    const double step0 = 0.25 * std::max(1.0, std::abs(kappa));
    auto log_right = std::make_shared<ExponentAccumulator>(logslope, kappa, step0);
    auto log_left = std::make_shared<ExponentAccumulator>(
        [logslope, kappa](double t) { return logslope(kappa - t); }, 0.0, step0);
    auto sderiv = [log_right, log_left, kappa](double x) {
        const double H = (x >= kappa) ? log_right->value(x) : -log_left->value(kappa - x);
        return std::exp(-H);
    };
    m.scale_deriv = sderiv;
    auto s_right = std::make_shared<ExponentAccumulator>(sderiv, kappa, step0);
    auto s_left = std::make_shared<ExponentAccumulator>(
        [sderiv, kappa](double t) { return sderiv(kappa - t); }, 0.0, step0);
    m.scale = [s_right, s_left, kappa](double x) {
        return (x >= kappa) ? s_right->value(x) : -s_left->value(kappa - x);
    };

    if (!cfg.scale_deriv) cfg.scale_deriv = sderiv;
    m.eigen_provider = [mu, sigma, left_boundary, kappa, cfg](double q) {
        return solve_eigenpair(mu, sigma, left_boundary, kappa, q, cfg);
    };
    return m;
}

} // namespace ddlab
