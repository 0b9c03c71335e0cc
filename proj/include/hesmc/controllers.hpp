#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hesmc/gains.hpp"
#include "hesmc/ilf.hpp"

namespace hesmc {

/// Fixed-capacity ring of (time, value) samples realizing the history window
/// [t - eta, t] at the integration step.
class DelayBuffer {
public:
    explicit DelayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ < 1) throw std::invalid_argument("DelayBuffer: capacity must be >= 1");
        times_.reserve(capacity_);
        values_.reserve(capacity_);
    }

    static DelayBuffer for_window(double eta, double h) {
        if (!(eta > 0.0) || !(h > 0.0))
            throw std::invalid_argument("DelayBuffer: eta and h must be positive");
        const auto m = static_cast<std::size_t>(std::llround(eta / h));
        return DelayBuffer(m + 1);
    }

    void push(double t, double v) {
        if (!(v >= 0.0)) throw std::invalid_argument("DelayBuffer: values must be nonnegative");
        if (!times_.empty() && !(t > back_time()))
            throw std::invalid_argument("DelayBuffer: timestamps must be strictly increasing");
        if (times_.size() < capacity_) {
            times_.push_back(t);
            values_.push_back(v);
        } else {
            times_[head_] = t;
            values_[head_] = v;
            head_ = (head_ + 1) % capacity_;
        }
    }

    double max_value() const {
        if (values_.empty()) throw std::logic_error("DelayBuffer: empty");
        double m = values_[0];
        for (double v : values_) m = std::max(m, v);
        return m;
    }

    double back_time() const {
        if (times_.empty()) throw std::logic_error("DelayBuffer: empty");
        return times_.size() < capacity_ ? times_.back()
                                         : times_[(head_ + capacity_ - 1) % capacity_];
    }

    double front_time() const {
        if (times_.empty()) throw std::logic_error("DelayBuffer: empty");
        return times_.size() < capacity_ ? times_.front() : times_[head_];
    }

    std::size_t size() const { return values_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return values_.empty(); }
    bool full() const { return values_.size() == capacity_; }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // oldest slot once full
    std::vector<double> times_;
    std::vector<double> values_;
};

enum class ControllerKind { finite_time, delayed, smc1, super_twisting, linear };

inline std::string to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::finite_time: return "finite_time";
        case ControllerKind::delayed: return "delayed";
        case ControllerKind::smc1: return "smc1";
        case ControllerKind::super_twisting: return "super_twisting";
        case ControllerKind::linear: return "linear";
    }
    return "unknown";
}

inline ControllerKind controller_kind_from_string(const std::string& s) {
    if (s == "finite_time") return ControllerKind::finite_time;
    if (s == "delayed") return ControllerKind::delayed;
    if (s == "smc1") return ControllerKind::smc1;
    if (s == "super_twisting") return ControllerKind::super_twisting;
    if (s == "linear") return ControllerKind::linear;
    throw std::invalid_argument("unknown controller kind: " + s);
}

struct ControllerConfig {
    ControllerKind kind = ControllerKind::delayed;
    double chi = 1.1;    // delayed only
    double eta = 0.1;    // delayed only
    double v_min = 0.1;  // clamp inside the dilation argument
    // first-order sliding baseline
    double k = 5.0;
    double a = 1.0;  // sliding-surface slope, shared with super_twisting
    // super-twisting baseline
    double ell1 = 1.0;
    double ell2 = 1.0;

    void validate(int n) const {
        if (!(v_min >= 0.0)) throw std::invalid_argument("ControllerConfig: v_min must be >= 0");
        if (kind == ControllerKind::delayed) {
            if (!(chi > 1.0)) throw std::invalid_argument("ControllerConfig: chi must be > 1");
            if (!(eta > 0.0)) throw std::invalid_argument("ControllerConfig: eta must be > 0");
        }
        if (kind == ControllerKind::smc1 || kind == ControllerKind::super_twisting) {
            if (n != 2)
                throw std::invalid_argument("ControllerConfig: sliding baselines require n = 2");
            if (!(a > 0.0)) throw std::invalid_argument("ControllerConfig: a must be > 0");
        }
        if (kind == ControllerKind::smc1 && !(k > 0.0))
            throw std::invalid_argument("ControllerConfig: k must be > 0");
        if (kind == ControllerKind::super_twisting && (!(ell1 > 0.0) || !(ell2 > 0.0)))
            throw std::invalid_argument("ControllerConfig: ell1, ell2 must be > 0");
    }
};

/// u = K D(1/Veff) y.  Single code path shared by both gain-scheduled
/// controllers so that equal Veff gives bitwise-equal output.
inline double apply_dilated_gain(const Row& K, const Vec& y, double v_eff) {
    if (!(v_eff > 0.0)) return 0.0;  // whole history at the origin, zero by convention
    return K.dot(dilation_apply(1.0 / v_eff, y));
}

struct IlfControl {
    double u = 0.0;
    double V = 0.0;
};

inline IlfControl finite_time_control(const Vec& y, const GainSet& g, double v_min,
                                      const IlfBracketHint& hint,
                                      const IlfSolverSettings& solver = {}) {
    const double V = solve_ilf(y, g.P, hint, solver);
    return {apply_dilated_gain(g.K, y, std::max(V, v_min)), V};
}

inline IlfControl finite_time_control(const Vec& y, const GainSet& g, double v_min,
                                      const IlfSolverSettings& solver = {}) {
    return finite_time_control(y, g, v_min, IlfBracketHint::from_P(g.P), solver);
}

/// Psi = max(V_now, e^{1-chi} min(M, M^chi)) with M the history-window max.
inline double psi(double V_now, const DelayBuffer& buffer, double chi) {
    if (!(chi > 1.0)) throw std::invalid_argument("psi: chi must be > 1");
    if (!(V_now >= 0.0)) throw std::invalid_argument("psi: V must be nonnegative");
    if (buffer.empty()) throw std::logic_error("psi: empty history buffer");
    const double M = buffer.max_value();
    const double hist = (M == 0.0) ? 0.0 : std::exp(1.0 - chi) * std::min(M, std::pow(M, chi));
    return std::max(V_now, hist);
}

struct DelayedControl {
    double u = 0.0;
    double V = 0.0;
    double Psi = 0.0;
};

/// u = K D(1/max(Psi, v_min)) y; the caller appends V to the buffer after the
/// integration step, so the window seen here ends one sample in the past.
inline DelayedControl delayed_control(const Vec& y, const DelayBuffer& buffer, const GainSet& g,
                                      const ControllerConfig& cfg, const IlfBracketHint& hint,
                                      const IlfSolverSettings& solver = {}) {
    if (cfg.kind != ControllerKind::delayed)
        throw std::invalid_argument("delayed_control: cfg.kind must be delayed");
    const double V = solve_ilf(y, g.P, hint, solver);
    const double Psi = psi(V, buffer, cfg.chi);
    return {apply_dilated_gain(g.K, y, std::max(Psi, cfg.v_min)), V, Psi};
}

inline DelayedControl delayed_control(const Vec& y, const DelayBuffer& buffer, const GainSet& g,
                                      const ControllerConfig& cfg,
                                      const IlfSolverSettings& solver = {}) {
    return delayed_control(y, buffer, g, cfg, IlfBracketHint::from_P(g.P), solver);
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Relay control u = -k sign(y2 + a y1); sign(0) = 0.
inline double smc_first_order(const Vec& y, double k, double a) {
    if (y.size() != 2) throw std::invalid_argument("smc_first_order: expects a 2-vector");
    if (!(k > 0.0) || !(a > 0.0))
        throw std::invalid_argument("smc_first_order: gains must be positive");
    return -k * sign(y(1) + a * y(0));
}

struct SuperTwisting {
    double u = 0.0;
    double z_next = 0.0;
};

/// u = -l1 sqrt(|sigma|) sign(sigma) + z,  z advanced by explicit Euler.
inline SuperTwisting super_twisting_step(double sigma, double z, double ell1, double ell2,
                                         double h) {
    if (!(ell1 > 0.0) || !(ell2 > 0.0) || !(h > 0.0))
        throw std::invalid_argument("super_twisting_step: gains and step must be positive");
    const double s = sign(sigma);
    return {-ell1 * std::sqrt(std::abs(sigma)) * s + z, z - ell2 * s * h};
}

}  // namespace hesmc
