#pragma once

// Monte Carlo oracle. Everything here is deliberately independent of the
// kernel calculus: plain path simulation with running max/min bookkeeping,
// first-passage detection, occupation accumulators and exponential clocks.
// Reproducibility contract: per-path counter-based substreams, so results
// are bit-identical across runs and across worker counts.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace ddlab {

namespace rng {

struct SplitMix64 {
    std::uint64_t s;
    std::uint64_t next() {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256++, seeded through splitmix64 as its authors recommend
class Xoshiro256pp {
  public:
    Xoshiro256pp() : Xoshiro256pp(0, 0, 0) {}
    Xoshiro256pp(std::uint64_t seed, std::uint64_t path, std::uint64_t salt) {
        SplitMix64 sm{seed ^ (0x9e3779b97f4a7c15ULL * (path + 1)) ^ (0xd1b54a32d192ed03ULL * salt)};
        for (auto& w : s_) w = sm.next();
    }
    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }
    // (0, 1]: strictly positive so log() is always safe
    double uniform() { return ((next() >> 11) + 1) * 0x1.0p-53; }
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double th = 6.283185307179586477 * uniform();
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }
    double exponential(double rate) { return -std::log(uniform()) / rate; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace rng

enum class Scheme { euler, exact_gaussian, exact_norm3d };

struct SimConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    std::int64_t n = 100000;
    std::uint64_t seed = 0x5eedULL;
    Scheme scheme = Scheme::euler;
    bool bridge_correction = false;
    bool antithetic = false;
    bool richardson = true;  // coupled dt/2 companion on a path subset
    int threads = 1;
    // start point; NaN means the model's normalization point kappa
    double x_start = std::numeric_limits<double>::quiet_NaN();
    double start(const DiffusionModel& m) const { return std::isnan(x_start) ? m.kappa : x_start; }

    void validate() const {
        if (!(dt > 0.0)) throw DomainViolation("dt must be positive");
        if (!(horizon > 0.0)) throw DomainViolation("horizon must be positive");
        if (n < 1) throw DomainViolation("path count must be at least 1");
        if (threads < 1) throw DomainViolation("thread count must be at least 1");
    }
};

struct SimEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::int64_t n_effective = 0;  // uncensored observations
    // coupled dt/2 estimate minus dt estimate on the diagnostic subset;
    // NaN when the subset was disabled
    double richardson = std::numeric_limits<double>::quiet_NaN();
    double richardson_se = std::numeric_limits<double>::quiet_NaN();
    double censored_fraction = 0.0;
};

namespace detail_sim {

// noise sources for the engine: a live stream, a recording wrapper (fine
// pass of the Richardson pair) and a replaying wrapper that serves pairwise
// sums (the coarse pass, coupled to the fine one)
struct LiveNoise {
    rng::Xoshiro256pp* src;
    double normal() { return src->normal(); }
};

struct RecordingNoise {
    rng::Xoshiro256pp* src;
    std::vector<double>* buf;
    double normal() {
        const double z = src->normal();
        buf->push_back(z);
        return z;
    }
};

// coarse step over dt consumes the two fine half-steps: z = (z1 + z2)/sqrt2.
// stride = normals per engine step (3 for the norm3d scheme), so slot k of a
// coarse step pairs buf[pos+k] with buf[pos+stride+k].
struct ReplaySumNoise {
    rng::Xoshiro256pp* src;  // extends the buffer if the coarse path outlives the fine one
    std::vector<double>* buf;
    std::size_t pos = 0;
    int stride = 1;
    int call = 0;
    double normal() {
        while (buf->size() < pos + 2 * (std::size_t)stride) buf->push_back(src->normal());
        const double z = ((*buf)[pos + call] + (*buf)[pos + stride + call]) * 0.7071067811865475244;
        if (++call == stride) {
            call = 0;
            pos += 2 * (std::size_t)stride;
        }
        return z;
    }
};

struct Step {
    double x0 = 0.0, x1 = 0.0;
    double hi_end = 0.0, lo_end = 0.0;  // endpoint extremes
    // cached within-step bridge extremes, sampled lazily so the common case
    // (nothing of interest in reach) costs nothing
    double hi = std::numeric_limits<double>::quiet_NaN();
    double lo = std::numeric_limits<double>::quiet_NaN();
};

template <class Noise>
class Engine {
  public:
    Engine(const DiffusionModel& m, Scheme scheme, double dt, bool bridge, bool antithetic,
           double x_start, Noise noise, rng::Xoshiro256pp* aux)
        : m_(m), scheme_(scheme), dt_(dt), sqdt_(std::sqrt(dt)), bridge_(bridge),
          flip_(antithetic ? -1.0 : 1.0), x_(x_start), noise_(noise), aux_(aux) {
        if (scheme == Scheme::exact_gaussian) {
            // constant-coefficient shortcut; exact for Brownian motion
            mu_dt_ = m.drift(x_start) * dt;
            sig_ = m.diffusion(x_start);
            if (!(sig_ > 0.0)) throw NonPositiveDiffusion("diffusion coefficient must be positive");
            sig_sqdt_ = sig_ * sqdt_;
        } else if (scheme == Scheme::exact_norm3d) {
            if (!(x_start > 0.0))
                throw DomainViolation("norm3d scheme needs a positive start point");
            v1_ = x_start;
            sig_ = 1.0;  // the norm moves with unit volatility
            sig_sqdt_ = sqdt_;
        }
        if (!std::isfinite(x_start) || x_start <= m.left_boundary)
            throw DomainViolation("start point outside the state space");
    }

    double x() const { return x_; }
    double t() const { return t_; }
    double dt() const { return dt_; }

    Step advance() {
        Step r;
        r.x0 = x_;
        switch (scheme_) {
        case Scheme::exact_gaussian:
            r.x1 = x_ + mu_dt_ + sig_sqdt_ * (flip_ * noise_.normal());
            break;
        case Scheme::euler: {
            const double mu = m_.drift(x_);
            sig_ = m_.diffusion(x_);
            if (!(sig_ > 0.0)) throw NonPositiveDiffusion("diffusion coefficient must be positive");
            sig_sqdt_ = sig_ * sqdt_;
            r.x1 = x_ + mu * dt_ + sig_sqdt_ * (flip_ * noise_.normal());
            break;
        }
        case Scheme::exact_norm3d:
            v1_ += sqdt_ * (flip_ * noise_.normal());
            v2_ += sqdt_ * (flip_ * noise_.normal());
            v3_ += sqdt_ * (flip_ * noise_.normal());
            r.x1 = std::sqrt(v1_ * v1_ + v2_ * v2_ + v3_ * v3_);
            break;
        }
        if (!std::isfinite(r.x1)) throw NonFiniteState("simulated path produced a non-finite value");
        if (r.x1 <= m_.left_boundary)
            throw NonFiniteState("simulated path left the state space (refine dt or change scheme)");
        if (r.x1 > r.x0) {
            r.hi_end = r.x1;
            r.lo_end = r.x0;
        } else {
            r.hi_end = r.x0;
            r.lo_end = r.x1;
        }
        // a bridge extreme beyond 5 sigma sqrt(dt) of the endpoint hull has
        // probability < exp(-50); levels further out than that cannot be hit
        reach_ = 5.0 * sig_sqdt_;
        x_ = r.x1;
        t_ += dt_;
        return r;
    }

    // could the within-step maximum reach `level`? samples the bridge extreme
    // only when the answer is not decided by the endpoints
    bool reaches_above(Step& r, double level) {
        if (r.hi_end >= level) return true;
        if (!bridge_ || r.hi_end + reach_ < level) return false;
        return hi(r) >= level;
    }
    bool reaches_below(Step& r, double level) {
        if (r.lo_end <= level) return true;
        if (!bridge_ || r.lo_end - reach_ > level) return false;
        return lo(r) <= level;
    }
    // within-step extremes; in bridge mode these are conditional Brownian
    // bridge samples, cached per step so every query sees the same draw.
    // For the norm3d scheme the radial process is treated as a unit-vol
    // scalar across one step, an O(dt) approximation.
    double hi(Step& r) {
        if (!bridge_) return r.hi_end;
        if (std::isnan(r.hi)) {
            const double d = r.x1 - r.x0;
            const double s2 = sig_sqdt_ * sig_sqdt_;
            r.hi = 0.5 * (r.x0 + r.x1 + std::sqrt(d * d - 2.0 * s2 * std::log(aux_->uniform())));
        }
        return r.hi;
    }
    double lo(Step& r) {
        if (!bridge_) return r.lo_end;
        if (std::isnan(r.lo)) {
            const double d = r.x1 - r.x0;
            const double s2 = sig_sqdt_ * sig_sqdt_;
            r.lo = 0.5 * (r.x0 + r.x1 - std::sqrt(d * d - 2.0 * s2 * std::log(aux_->uniform())));
        }
        return r.lo;
    }

  private:
    const DiffusionModel& m_;
    Scheme scheme_;
    double dt_, sqdt_;
    bool bridge_;
    double flip_;
    double x_, t_ = 0.0;
    double mu_dt_ = 0.0, sig_ = 0.0, sig_sqdt_ = 0.0, reach_ = 0.0;
    double v1_ = 0.0, v2_ = 0.0, v3_ = 0.0;
    Noise noise_;
    rng::Xoshiro256pp* aux_;
};

struct PathValue {
    double value = 0.0;
    bool censored = false;
};

struct Partial {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t count = 0, censored = 0;
};

// Deterministic parallel driver: observations are chunked by index, workers
// pull whole chunks, and partials merge in chunk order, so the float
// accumulation tree does not depend on the worker count.
template <class ObsFn>
inline void reduce_observations(std::int64_t n_obs, int threads, std::vector<Partial>& out,
                                ObsFn&& fn) {
    const std::int64_t chunk = 4096;
    const std::int64_t n_chunks = (n_obs + chunk - 1) / chunk;
    out.assign((std::size_t)n_chunks, Partial{});
    std::atomic<std::int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            Partial p;
            const std::int64_t lo = c * chunk, hi = std::min(n_obs, lo + chunk);
            for (std::int64_t i = lo; i < hi; ++i) {
                const PathValue v = fn(i);
                p.sum += v.value;
                p.sumsq += v.value * v.value;
                ++p.count;
                if (v.censored) ++p.censored;
            }
            out[(std::size_t)c] = p;
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve((std::size_t)threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
}

} // namespace detail_sim

// Identifies the path functional a Monte Carlo run estimates. Parameters
// not used by a given kind are ignored.
struct Functional {
    enum class Kind {
        dd_transform,         // E e^{-q sigma_a}
        du_transform,         // E e^{-q sigmahat_b}
        dd_cdf,               // P(sigma_a <= horizon)
        dd_before_du,         // P(sigma_a < sigmahat_b and both before e_q)
        du_before_dd,         // P(sigmahat_b < sigma_a and both before e_q)
        exp_before_both,      // P(e_q < sigma_a ^ sigmahat_b)
        occ_below_exit_up,    // E[e^{-q A_y}; tau_b < tau_a ^ e_p]
        occ_below_exit_down,  // E[e^{-q A_y}; tau_a < tau_b]
        occ_below_until_up,   // E[e^{-q int 1{X<y}}; tau_b < e_p]
        occ_below_start_dd,   // E[e^{-q B}], B = time below start until sigma_a
        occ_dd_above_dd,      // E[e^{-q C}], C = time drawdown above y until sigma_a
        occ_du_below_dd,      // E[e^{-q D}], D = time drawup below y until sigma_a
        occ_dd_above_exp,     // E[e^{-p E}], E = time drawdown above y until e_q
        parisian_indicator,   // P(int_0^T 1{Y > y} dt > K)
        mean_mdd_capped,      // E[min(max drawdown at horizon, cap)]
        quantile_capped,      // E[min(alpha-quantile of the drawdown path, cap)]
    };
    Kind kind = Kind::dd_transform;
    double q = 0.0, p = 0.0;
    double a = 0.0, b = 0.0, y = 0.0;
    double strike = 0.0;  // K for the parisian indicator
    double alpha = 1.0;
    double cap = std::numeric_limits<double>::infinity();
};

namespace detail_sim {

// One path of the requested functional. Discount factors e^{-p tau} are
// realized by exponential clocks instead of weights so that heavy-tailed
// stopping times do not blow the censoring budget: the effective stopping
// time is then bounded by the clock.
template <class Eng>
inline PathValue run_functional(Eng& eng, rng::Xoshiro256pp& clock, const Functional& f,
                                double horizon, std::vector<double>* scratch) {
    using K = Functional::Kind;
    const double dt = eng.dt();
    const double x_start = eng.x();
    double runmax = x_start, runmin = x_start;
    double occ = 0.0;
    const auto steps_to = [dt](double T) { return (std::int64_t)std::ceil(T / dt - 1e-9); };

    switch (f.kind) {
    case K::dd_transform:
    case K::du_transform: {
        const bool up = (f.kind == K::du_transform);
        const double width = up ? f.b : f.a;
        const std::int64_t S = steps_to(horizon);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (up) {
                if (eng.reaches_above(r, runmin + width)) return {std::exp(-f.q * eng.t()), false};
                if (eng.reaches_below(r, runmin)) runmin = std::min(runmin, eng.lo(r));
            } else {
                if (eng.reaches_below(r, runmax - width)) return {std::exp(-f.q * eng.t()), false};
                if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            }
        }
        return {std::exp(-f.q * horizon), true};
    }
    case K::dd_cdf: {
        const std::int64_t S = steps_to(horizon);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (eng.reaches_below(r, runmax - f.a)) return {1.0, false};
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
        }
        return {0.0, false};
    }
    case K::dd_before_du:
    case K::du_before_dd:
    case K::exp_before_both: {
        const double eq = clock.exponential(f.q);
        const std::int64_t S = steps_to(std::min(horizon, eq));
        const bool clock_first_ok = (f.kind == K::exp_before_both);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            const bool dd = eng.reaches_below(r, runmax - f.a);
            const bool du = eng.reaches_above(r, runmin + f.b);
            if (dd || du) {
                if (clock_first_ok) return {0.0, false};
                // simultaneous detections in one step are resolved toward
                // the drawdown; at sane dt the event has negligible mass
                const bool dd_first = dd;
                return {(f.kind == K::dd_before_du) == dd_first ? 1.0 : 0.0, false};
            }
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            if (eng.reaches_below(r, runmin)) runmin = std::min(runmin, eng.lo(r));
        }
        if (eq <= horizon) return {clock_first_ok ? 1.0 : 0.0, false};
        return {0.0, true};
    }
    case K::occ_below_exit_up:
    case K::occ_below_exit_down: {
        const bool want_up = (f.kind == K::occ_below_exit_up);
        const double ep = (want_up && f.p > 0.0) ? clock.exponential(f.p)
                                                 : std::numeric_limits<double>::infinity();
        const double stop = std::min(horizon, ep);
        const std::int64_t S = steps_to(stop);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (r.x0 < f.y) occ += dt;
            const bool down = eng.reaches_below(r, f.a);
            const bool upx = eng.reaches_above(r, f.b);
            if (down || upx) {
                const bool exited_down = down;  // ties resolved downward
                if (want_up) return {exited_down ? 0.0 : std::exp(-f.q * occ), false};
                return {exited_down ? std::exp(-f.q * occ) : 0.0, false};
            }
        }
        if (std::isfinite(ep) && ep <= horizon) return {0.0, false};  // clock beat the exit
        return {0.0, true};
    }
    case K::occ_below_until_up: {
        const double ep = clock.exponential(f.p);
        const double stop = std::min(horizon, ep);
        const std::int64_t S = steps_to(stop);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (r.x0 < f.y) occ += dt;
            if (eng.reaches_above(r, f.b)) return {std::exp(-f.q * occ), false};
        }
        if (ep <= horizon) return {0.0, false};
        return {0.0, true};
    }
    case K::occ_below_start_dd:
    case K::occ_dd_above_dd:
    case K::occ_du_below_dd: {
        const std::int64_t S = steps_to(horizon);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (f.kind == K::occ_below_start_dd) {
                if (r.x0 < x_start) occ += dt;
            } else if (f.kind == K::occ_dd_above_dd) {
                if (runmax - r.x0 > f.y) occ += dt;
            } else {
                if (r.x0 - runmin < f.y) occ += dt;
            }
            if (eng.reaches_below(r, runmax - f.a)) return {std::exp(-f.q * occ), false};
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            if (eng.reaches_below(r, runmin)) runmin = std::min(runmin, eng.lo(r));
        }
        return {std::exp(-f.q * occ), true};
    }
    case K::occ_dd_above_exp: {
        const double eq = clock.exponential(f.q);
        double t = 0.0;
        while (t < eq) {
            Step r = eng.advance();
            if (runmax - r.x0 > f.y) occ += std::min(dt, eq - t);
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            t = eng.t();
            if (t >= horizon && t < eq) return {std::exp(-f.p * occ), true};
        }
        return {std::exp(-f.p * occ), false};
    }
    case K::parisian_indicator: {
        const std::int64_t S = steps_to(horizon);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (runmax - r.x0 > f.y) occ += dt;
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            if (occ > f.strike) return {1.0, false};
        }
        return {0.0, false};
    }
    case K::mean_mdd_capped: {
        double mdd = 0.0;
        const std::int64_t S = steps_to(horizon);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            if (eng.reaches_below(r, runmax - mdd)) mdd = runmax - eng.lo(r);
        }
        return {std::min(mdd, f.cap), false};
    }
    case K::quantile_capped: {
        scratch->clear();
        const std::int64_t S = steps_to(horizon);
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
            scratch->push_back(runmax - r.x1);
        }
        // alpha-quantile of the path's occupation measure of the drawdown
        auto k = (std::size_t)std::min<double>((double)scratch->size() - 1.0,
                                               std::floor(f.alpha * (double)scratch->size()));
        std::nth_element(scratch->begin(), scratch->begin() + (std::ptrdiff_t)k, scratch->end());
        return {std::min((*scratch)[k], f.cap), false};
    }
    }
    throw DomainViolation("unknown functional kind");
}

template <class Noise>
inline PathValue one_path(const DiffusionModel& model, const SimConfig& cfg, const Functional& f,
                          double dt, Noise noise, rng::Xoshiro256pp* aux, rng::Xoshiro256pp* clock,
                          bool anti, std::vector<double>* scratch) {
    Engine<Noise> eng(model, cfg.scheme, dt, cfg.bridge_correction, anti, cfg.start(model), noise,
                      aux);
    return run_functional(eng, *clock, f, cfg.horizon, scratch);
}

} // namespace detail_sim

// Monte Carlo estimate of the requested functional. Censored paths (the
// stopping time outlived the horizon) contribute their bounded remainder and
// are counted; more than 0.1% of them is an error, not a warning.
inline SimEstimate estimate_law(const DiffusionModel& model, const Functional& f,
                                const SimConfig& cfg) {
    cfg.validate();
    using namespace detail_sim;
    const std::int64_t n_obs = cfg.antithetic ? cfg.n / 2 : cfg.n;
    if (n_obs < 1) throw DomainViolation("path count too small for antithetic pairs");

    std::vector<Partial> partials;
    auto observation = [&](std::int64_t i) -> PathValue {
        thread_local std::vector<double> scratch;
        if (!cfg.antithetic) {
            rng::Xoshiro256pp incr(cfg.seed, (std::uint64_t)i, 0);
            rng::Xoshiro256pp aux(cfg.seed, (std::uint64_t)i, 1);
            rng::Xoshiro256pp clock(cfg.seed, (std::uint64_t)i, 2);
            return one_path(model, cfg, f, cfg.dt, LiveNoise{&incr}, &aux, &clock, false, &scratch);
        }
        // antithetic pair shares the increment stream (mirrored) and the
        // clock; the observation is the pair mean
        PathValue out;
        for (int half = 0; half < 2; ++half) {
            rng::Xoshiro256pp incr(cfg.seed, (std::uint64_t)i, 0);
            rng::Xoshiro256pp aux(cfg.seed, 2 * (std::uint64_t)i + (std::uint64_t)half, 1);
            rng::Xoshiro256pp clock(cfg.seed, (std::uint64_t)i, 2);
            const PathValue v = one_path(model, cfg, f, cfg.dt, LiveNoise{&incr}, &aux, &clock,
                                         half == 1, &scratch);
            out.value += 0.5 * v.value;
            out.censored = out.censored || v.censored;
        }
        return out;
    };
    reduce_observations(n_obs, cfg.threads, partials, observation);

    double sum = 0.0, sumsq = 0.0;
    std::int64_t count = 0, censored = 0;
    for (const auto& p : partials) {
        sum += p.sum;
        sumsq += p.sumsq;
        count += p.count;
        censored += p.censored;
    }
    SimEstimate est;
    est.estimate = sum / (double)count;
    const double var = std::max(0.0, sumsq / (double)count - est.estimate * est.estimate);
    est.standard_error = std::sqrt(var / (double)count);
    est.n_effective = count - censored;
    est.censored_fraction = (double)censored / (double)count;
    if (est.censored_fraction > 1e-3)
        throw HorizonTooShort("stopping time right-censored in " +
                              std::to_string(100.0 * est.censored_fraction) +
                              "% of paths (limit 0.1%); raise the horizon");

    if (cfg.richardson && !cfg.antithetic) {
        // coupled dt/2 companion: the fine pass records its normals, the
        // coarse pass replays pairwise sums, so both see the same Brownian
        // path and the difference isolates the discretization shift
        const std::int64_t n_sub = std::max<std::int64_t>(1, n_obs / 16);
        const int stride = (cfg.scheme == Scheme::exact_norm3d) ? 3 : 1;
        std::vector<double> buf, scratch;
        double diff_sum = 0.0, diff_sumsq = 0.0;
        for (std::int64_t i = 0; i < n_sub; ++i) {
            buf.clear();
            rng::Xoshiro256pp incr(cfg.seed, (std::uint64_t)i, 3);
            rng::Xoshiro256pp aux_f(cfg.seed, (std::uint64_t)i, 4);
            rng::Xoshiro256pp aux_c(cfg.seed, (std::uint64_t)i, 5);
            rng::Xoshiro256pp clock_f(cfg.seed, (std::uint64_t)i, 6);
            rng::Xoshiro256pp clock_c(cfg.seed, (std::uint64_t)i, 6);
            const PathValue fine = one_path(model, cfg, f, 0.5 * cfg.dt,
                                            RecordingNoise{&incr, &buf}, &aux_f, &clock_f, false,
                                            &scratch);
            ReplaySumNoise replay{&incr, &buf, 0, stride, 0};
            const PathValue coarse = one_path(model, cfg, f, cfg.dt, replay, &aux_c, &clock_c,
                                              false, &scratch);
            const double d = fine.value - coarse.value;
            diff_sum += d;
            diff_sumsq += d * d;
        }
        est.richardson = diff_sum / (double)n_sub;
        const double dvar =
            std::max(0.0, diff_sumsq / (double)n_sub - est.richardson * est.richardson);
        est.richardson_se = std::sqrt(dvar / (double)n_sub);
    }
    return est;
}

// Streamed per-path functionals for distributional tests. The returned
// vector is ordered by path index, so output is independent of scheduling;
// censored paths (bounded by the 0.1% gate) are dropped.
enum class SampleKind {
    passage_time_dd,   // sigma_a (drawdown first-passage time)
    occ_dd_above_dd,   // C_y^a: time the drawdown spends above y until sigma_a
    terminal_value,    // X at the horizon
};

inline std::vector<double> sample_paths(const DiffusionModel& model, const SimConfig& cfg,
                                        SampleKind kind, double a = 0.0, double y = 0.0) {
    cfg.validate();
    using namespace detail_sim;
    std::vector<double> out((std::size_t)cfg.n);
    std::atomic<std::int64_t> censored{0};
    std::vector<Partial> sink;
    reduce_observations(cfg.n, cfg.threads, sink, [&](std::int64_t i) -> PathValue {
        rng::Xoshiro256pp incr(cfg.seed, (std::uint64_t)i, 0);
        rng::Xoshiro256pp aux(cfg.seed, (std::uint64_t)i, 1);
        Engine<LiveNoise> eng(model, cfg.scheme, cfg.dt, cfg.bridge_correction, false,
                              cfg.start(model), LiveNoise{&incr}, &aux);
        double runmax = cfg.start(model), occ = 0.0;
        const std::int64_t S = (std::int64_t)std::ceil(cfg.horizon / cfg.dt - 1e-9);
        double v = std::numeric_limits<double>::quiet_NaN();
        for (std::int64_t s = 0; s < S; ++s) {
            Step r = eng.advance();
            if (kind == SampleKind::occ_dd_above_dd && runmax - r.x0 > y) occ += cfg.dt;
            if (kind != SampleKind::terminal_value && eng.reaches_below(r, runmax - a)) {
                v = (kind == SampleKind::passage_time_dd) ? eng.t() : occ;
                break;
            }
            if (eng.reaches_above(r, runmax)) runmax = std::max(runmax, eng.hi(r));
        }
        if (kind == SampleKind::terminal_value) v = eng.x();
        if (std::isnan(v) && kind != SampleKind::terminal_value) ++censored;
        out[(std::size_t)i] = v;
        return {0.0, false};
    });
    if ((double)censored.load() > 1e-3 * (double)cfg.n)
        throw HorizonTooShort("sampled stopping time right-censored in more than 0.1% of paths");
    // drop the (gate-bounded) censored entries so downstream order statistics
    // never meet a NaN
    out.erase(std::remove_if(out.begin(), out.end(), [](double v) { return std::isnan(v); }),
              out.end());
    return out;
}

// two-sample Kolmogorov-Smirnov statistic (inputs need not be sorted)
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainViolation("ks_statistic needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        d = std::max(d, std::abs((double)i / a.size() - (double)j / b.size()));
    }
    return d;
}

// critical value c(alpha) * sqrt((n+m)/(n m)); c(0.01) = 1.628
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
    double c;
    if (alpha <= 0.010001) c = 1.628;
    else if (alpha <= 0.05) c = 1.358;
    else c = 1.224;
    return c * std::sqrt((double)(n + m) / ((double)n * (double)m));
}

} // namespace ddlab
