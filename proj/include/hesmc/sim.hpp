#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hesmc/controllers.hpp"
#include "hesmc/gains.hpp"
#include "hesmc/ilf.hpp"
#include "hesmc/iotext.hpp"
#include "hesmc/rng.hpp"

namespace hesmc {

enum class SignalKind { zero, constant, sine, cosine };

inline std::string to_string(SignalKind k) {
    switch (k) {
        case SignalKind::zero: return "zero";
        case SignalKind::constant: return "constant";
        case SignalKind::sine: return "sine";
        case SignalKind::cosine: return "cosine";
    }
    return "unknown";
}

inline SignalKind signal_kind_from_string(const std::string& s) {
    if (s == "zero") return SignalKind::zero;
    if (s == "constant") return SignalKind::constant;
    if (s == "sine" || s == "sin") return SignalKind::sine;
    if (s == "cosine" || s == "cos") return SignalKind::cosine;
    throw std::invalid_argument("unknown signal kind: " + s);
}

struct Signal {
    SignalKind kind = SignalKind::zero;
    double amplitude = 0.0;
    double omega = 0.0;

    double eval(double t) const {
        switch (kind) {
            case SignalKind::zero: return 0.0;
            case SignalKind::constant: return amplitude;
            case SignalKind::sine: return amplitude * std::sin(omega * t);
            case SignalKind::cosine: return amplitude * std::cos(omega * t);
        }
        return 0.0;
    }

    double sup_bound() const { return kind == SignalKind::zero ? 0.0 : std::abs(amplitude); }

    static Signal zero() { return {}; }
    static Signal constant(double c) { return {SignalKind::constant, c, 0.0}; }
    static Signal sine(double amp, double omega) { return {SignalKind::sine, amp, omega}; }
    static Signal cosine(double amp, double omega) { return {SignalKind::cosine, amp, omega}; }
};

/// Disturbance description: matched d(t) bounded by Delta, per-channel
/// mismatched delta(t) with the input channel forced to zero, and per-channel
/// uniform noise amplitudes for w(t).
struct SignalSpec {
    Signal matched;
    double Delta = 0.0;
    std::vector<Signal> mismatched;  // size n, last entry must be the zero signal
    std::vector<double> noise_amps;  // size n, each >= 0

    void validate(int n) const {
        if (!(Delta >= 0.0)) throw std::invalid_argument("SignalSpec: Delta must be >= 0");
        if (matched.sup_bound() > Delta)
            throw std::invalid_argument("SignalSpec: sup|d| exceeds Delta");
        if (static_cast<int>(mismatched.size()) != n)
            throw std::invalid_argument("SignalSpec: mismatched must have n channels");
        if (mismatched.back().sup_bound() != 0.0)
            throw std::invalid_argument(
                "SignalSpec: last mismatched channel must be zero (matched part lives in d)");
        if (static_cast<int>(noise_amps.size()) != n)
            throw std::invalid_argument("SignalSpec: noise must have n channels");
        for (double a : noise_amps)
            if (!(a >= 0.0)) throw std::invalid_argument("SignalSpec: noise amplitudes must be >= 0");
    }

    static SignalSpec quiet(int n) {
        SignalSpec s;
        s.matched = Signal::zero();
        s.Delta = 0.0;
        s.mismatched.assign(n, Signal::zero());
        s.noise_amps.assign(n, 0.0);
        return s;
    }
};

struct SignalSample {
    double d = 0.0;
    Vec delta;
    Vec w;
};

/// d, delta are deterministic in t; w draws one uniform per channel with a
/// positive amplitude (channels with amplitude zero consume no draw).
inline SignalSample eval_signals(double t, const SignalSpec& spec, SplitMix64& rng) {
    const int n = static_cast<int>(spec.mismatched.size());
    SignalSample s;
    s.d = spec.matched.eval(t);
    s.delta = Vec::Zero(n);
    for (int i = 0; i < n; ++i) s.delta(i) = spec.mismatched[i].eval(t);
    s.w = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
        if (spec.noise_amps[i] > 0.0) s.w(i) = spec.noise_amps[i] * rng.uniform01();
    return s;
}

/// xdot = A x + b (u + d) + delta for the integrator chain.
inline Vec plant_derivative(const Vec& x, double u, double d, const Vec& delta) {
    const int n = static_cast<int>(x.size());
    if (delta.size() != n) throw std::invalid_argument("plant_derivative: delta size mismatch");
    if (delta(n - 1) != 0.0)
        throw std::invalid_argument("plant_derivative: delta must vanish on the input channel");
    Vec dx(n);
    for (int i = 0; i + 1 < n; ++i) dx(i) = x(i + 1) + delta(i);
    dx(n - 1) = u + d;
    return dx;
}

struct ScenarioConfig {
    int n = 3;
    double T = 10.0;
    double h = 5e-3;
    Vec x0;
    double eta = 0.1;
    double chi = 1.1;
    ControllerConfig controller;
    GainSet gains;
    SignalSpec signals;
    std::uint64_t seed = 42;

    int delay_steps() const { return static_cast<int>(std::llround(eta / h)); }

    void validate() const {
        if (n < 1) throw std::invalid_argument("ScenarioConfig: n must be >= 1");
        if (!(h > 0.0)) throw std::invalid_argument("ScenarioConfig: h must be > 0");
        if (!(T >= h)) throw std::invalid_argument("ScenarioConfig: T must be >= h");
        if (!(eta >= h)) throw std::invalid_argument("ScenarioConfig: eta must be >= h");
        const double ratio = eta / h;
        if (std::abs(ratio - std::llround(ratio)) > 1e-9 * ratio)
            throw std::invalid_argument("ScenarioConfig: eta must be an integer multiple of h");
        if (x0.size() != n) throw std::invalid_argument("ScenarioConfig: x0 size mismatch");
        if (gains.n != n) throw std::invalid_argument("ScenarioConfig: gains dimension mismatch");
        if (!(chi > 1.0)) throw std::invalid_argument("ScenarioConfig: chi must be > 1");
        controller.validate(n);
        signals.validate(n);
    }
};

/// Time-indexed record of one run; all channels share length floor(T/h)+1.
struct Trajectory {
    std::vector<double> times;
    Mat states;        // (N+1) x n
    Mat measurements;  // (N+1) x n
    std::vector<double> controls;
    std::vector<double> V;    // ILF value of the measurement
    std::vector<double> Psi;  // history functional (equals V for memoryless controllers)
    std::vector<double> d;
    std::vector<double> delta_norm;
    std::vector<double> w_norm;

    // run metadata, enough to interpret and re-check the record
    int n = 0;
    double h = 0.0;
    double eta = 0.0;
    double chi = 0.0;
    double v_min = 0.0;
    std::string controller_kind;
    std::uint64_t seed = 0;
    std::string rng_name;

    std::size_t samples() const { return times.size(); }
};

inline constexpr double kStateOverflowLimit = 1e12;

/// Fixed-step explicit Euler with zero-order-hold control and a delayed
/// history buffer prefilled with the constant extension of x0.
inline Trajectory run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const int n = cfg.n;
    const auto N = static_cast<std::size_t>(std::floor(cfg.T / cfg.h));
    const int m = cfg.delay_steps();

    ControllerConfig ctrl = cfg.controller;
    ctrl.chi = cfg.chi;
    ctrl.eta = cfg.eta;

    const IlfBracketHint hint = IlfBracketHint::from_P(cfg.gains.P);
    IlfSolverSettings solver;

    Trajectory traj;
    traj.times.resize(N + 1);
    traj.states.resize(N + 1, n);
    traj.measurements.resize(N + 1, n);
    traj.controls.resize(N + 1);
    traj.V.resize(N + 1);
    traj.Psi.resize(N + 1);
    traj.d.resize(N + 1);
    traj.delta_norm.resize(N + 1);
    traj.w_norm.resize(N + 1);
    traj.n = n;
    traj.h = cfg.h;
    traj.eta = cfg.eta;
    traj.chi = cfg.chi;
    traj.v_min = ctrl.v_min;
    traj.controller_kind = to_string(ctrl.kind);
    traj.seed = cfg.seed;
    traj.rng_name = SplitMix64::name();

    SplitMix64 rng(cfg.seed);

    // Constant initial history: m+1 samples of V(x0) ending one step before t=0.
    const double V0 = solve_ilf(cfg.x0, cfg.gains.P, hint, solver);
    DelayBuffer buffer(static_cast<std::size_t>(m) + 1);
    for (int i = m; i >= 0; --i) buffer.push(-static_cast<double>(i + 1) * cfg.h, V0);

    Vec x = cfg.x0;
    double st_state = 0.0;  // super-twisting integrator

    for (std::size_t k = 0; k <= N; ++k) {
        const double t = static_cast<double>(k) * cfg.h;
        const SignalSample sig = eval_signals(t, cfg.signals, rng);
        const Vec y = x + sig.w;

        double u = 0.0, Vy = 0.0, Psi = 0.0;
        switch (ctrl.kind) {
            case ControllerKind::finite_time: {
                const IlfControl r = finite_time_control(y, cfg.gains, ctrl.v_min, hint, solver);
                u = r.u;
                Vy = r.V;
                Psi = Vy;
                break;
            }
            case ControllerKind::delayed: {
                const DelayedControl r = delayed_control(y, buffer, cfg.gains, ctrl, hint, solver);
                u = r.u;
                Vy = r.V;
                Psi = r.Psi;
                break;
            }
            case ControllerKind::linear: {
                u = cfg.gains.K.dot(y);
                Vy = solve_ilf(y, cfg.gains.P, hint, solver);
                Psi = Vy;
                break;
            }
            case ControllerKind::smc1: {
                u = smc_first_order(y, ctrl.k, ctrl.a);
                Vy = solve_ilf(y, cfg.gains.P, hint, solver);
                Psi = Vy;
                break;
            }
            case ControllerKind::super_twisting: {
                const double sigma = y(1) + ctrl.a * y(0);
                const SuperTwisting r = super_twisting_step(sigma, st_state, ctrl.ell1, ctrl.ell2, cfg.h);
                u = r.u;
                st_state = r.z_next;
                Vy = solve_ilf(y, cfg.gains.P, hint, solver);
                Psi = Vy;
                break;
            }
        }

        traj.times[k] = t;
        traj.states.row(k) = x.transpose();
        traj.measurements.row(k) = y.transpose();
        traj.controls[k] = u;
        traj.V[k] = Vy;
        traj.Psi[k] = Psi;
        traj.d[k] = sig.d;
        traj.delta_norm[k] = sig.delta.norm();
        traj.w_norm[k] = sig.w.norm();

        if (k < N) {
            x = x + cfg.h * plant_derivative(x, u, sig.d, sig.delta);
            for (int i = 0; i < n; ++i)
                if (!std::isfinite(x(i)) || std::abs(x(i)) > kStateOverflowLimit)
                    throw DivergedError("run_scenario: state overflow at step " + std::to_string(k + 1),
                                        k + 1);
        }
        buffer.push(t, Vy);
    }
    return traj;
}

/// CSV export, header t,x1..xn,y1..yn,u,V,Psi,d,delta_norm,w_norm with
/// 17-significant-digit decimals.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (int i = 1; i <= traj.n; ++i) os << ",x" << i;
    for (int i = 1; i <= traj.n; ++i) os << ",y" << i;
    os << ",u,V,Psi,d,delta_norm,w_norm\n";
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        os << str17(traj.times[k]);
        for (int i = 0; i < traj.n; ++i) os << ',' << str17(traj.states(k, i));
        for (int i = 0; i < traj.n; ++i) os << ',' << str17(traj.measurements(k, i));
        os << ',' << str17(traj.controls[k]) << ',' << str17(traj.V[k]) << ','
           << str17(traj.Psi[k]) << ',' << str17(traj.d[k]) << ',' << str17(traj.delta_norm[k])
           << ',' << str17(traj.w_norm[k]) << '\n';
    }
}

}  // namespace hesmc
