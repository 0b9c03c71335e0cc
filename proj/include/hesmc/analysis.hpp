#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hesmc/gains.hpp"
#include "hesmc/ilf.hpp"
#include "hesmc/sim.hpp"

namespace hesmc {

/// Sum of |u_{k+1} - u_k|; the chattering measure.
inline double total_variation(const std::vector<double>& u) {
    if (u.empty()) throw std::invalid_argument("total_variation: empty sequence");
    double tv = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) tv += std::abs(u[k + 1] - u[k]);
    return tv;
}

/// Least-squares slope of log(-log V) against t on [t_a, t_b].  Positive
/// slope indicates super-exponential decay; a plain exponential fits nearly
/// flat on long windows.
inline double hyperexp_diagnostic(const std::vector<double>& times, const std::vector<double>& V,
                                  double t_a, double t_b) {
    if (times.size() != V.size()) throw std::invalid_argument("hyperexp_diagnostic: size mismatch");
    std::vector<double> ts, zs;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < t_a || times[k] > t_b) continue;
        if (!(V[k] > 0.0) || !(V[k] < 1.0))
            throw std::invalid_argument(
                "hyperexp_diagnostic: V must lie strictly in (0,1) on the window");
        ts.push_back(times[k]);
        zs.push_back(std::log(-std::log(V[k])));
    }
    if (ts.size() < 2) throw std::invalid_argument("hyperexp_diagnostic: window too small");
    double mt = 0.0, mz = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        mt += ts[k];
        mz += zs[k];
    }
    mt /= static_cast<double>(ts.size());
    mz /= static_cast<double>(ts.size());
    double stt = 0.0, stz = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        stt += (ts[k] - mt) * (ts[k] - mt);
        stz += (ts[k] - mt) * (zs[k] - mz);
    }
    if (stt == 0.0) throw std::invalid_argument("hyperexp_diagnostic: degenerate time window");
    return stz / stt;
}

struct IdentificationReport {
    double mean_abs_error = 0.0;
    double correlation = 0.0;  // Pearson correlation of u against -d
};

/// Disturbance-identification quality of u ~ -d on t >= t_start.
inline IdentificationReport identification_error(const std::vector<double>& times,
                                                 const std::vector<double>& u,
                                                 const std::vector<double>& d, double t_start) {
    if (times.size() != u.size() || times.size() != d.size())
        throw std::invalid_argument("identification_error: size mismatch");
    std::vector<double> uu, nd;
    double mae = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < t_start) continue;
        uu.push_back(u[k]);
        nd.push_back(-d[k]);
        mae += std::abs(u[k] + d[k]);
    }
    if (uu.empty()) throw std::invalid_argument("identification_error: empty window");
    mae /= static_cast<double>(uu.size());

    double mu = 0.0, mv = 0.0;
    for (std::size_t k = 0; k < uu.size(); ++k) {
        mu += uu[k];
        mv += nd[k];
    }
    mu /= static_cast<double>(uu.size());
    mv /= static_cast<double>(uu.size());
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (std::size_t k = 0; k < uu.size(); ++k) {
        suu += (uu[k] - mu) * (uu[k] - mu);
        svv += (nd[k] - mv) * (nd[k] - mv);
        suv += (uu[k] - mu) * (nd[k] - mv);
    }
    const double corr = (suu > 0.0 && svv > 0.0) ? suv / std::sqrt(suu * svv) : 0.0;
    return {mae, corr};
}

/// sup |x(t)| over t >= t_start.
inline double steady_state_bound(const Trajectory& traj, double t_start) {
    double best = -1.0;
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        if (traj.times[k] < t_start) continue;
        best = std::max(best, traj.states.row(k).norm());
    }
    if (best < 0.0) throw std::invalid_argument("steady_state_bound: empty window");
    return best;
}

struct MonitorViolation {
    std::size_t step = 0;
    double observed_rate = 0.0;  // forward difference of the true-state ILF
    double required_bound = 0.0;
};

struct MonitorReport {
    std::size_t checked_steps = 0;
    std::size_t triggered_steps = 0;
    std::vector<MonitorViolation> violations;
    double max_violation = 0.0;  // max(observed - bound) over violations, 0 if none
};

/// Certified-decrease monitor.  At each step the Razumikhin frame is
///   (a) Psi_k == V_k (recorded channels, exact),
///   (b) |w_k| <= sqrt(alpha) min(V/xi, (V/xi)^n) with V the true-state ILF,
///   (c) both quadratic-form memberships at the measurement y_k:
///       Q(V/xi, y) >= 0 >= Q(xi V, y),
///   (d) rho_delta(|delta_k|) <= V.
/// Where the frame holds, the forward difference of the true-state ILF must
/// not exceed -(rho1 - rho2 Delta^2)/2 + tol, tol = 2 h (rho1 - rho2 Delta^2).
/// Steps inside the clamp zone (V <= v_min) are excluded from triggering.
inline MonitorReport razumikhin_monitor(const Trajectory& traj, const GainSet& g,
                                        const IssGains& iss, double chi) {
    if (!(chi > 1.0)) throw std::invalid_argument("razumikhin_monitor: chi must be > 1");
    if (!iss.contraction)
        throw std::invalid_argument("razumikhin_monitor: requires a contraction-flagged IssGains");
    if (traj.samples() < 2) throw std::invalid_argument("razumikhin_monitor: trajectory too short");
    if (traj.n != g.n) throw std::invalid_argument("razumikhin_monitor: dimension mismatch");

    const double c = g.decrease_rate();
    const double tol_mon = 2.0 * traj.h * c;
    const double bound = -0.5 * c + tol_mon;
    const IlfBracketHint hint = IlfBracketHint::from_P(g.P);
    IlfSolverSettings solver;

    // true-state ILF, recomputed offline from the recorded states
    std::vector<double> Vx(traj.samples());
    for (std::size_t k = 0; k < traj.samples(); ++k)
        Vx[k] = solve_ilf(traj.states.row(k).transpose(), g.P, hint, solver);

    MonitorReport rep;
    rep.checked_steps = traj.samples() - 1;
    for (std::size_t k = 0; k + 1 < traj.samples(); ++k) {
        const double V = Vx[k];
        if (V <= traj.v_min) continue;  // clamp zone, frame not evaluable
        if (traj.Psi[k] != traj.V[k]) continue;
        const double Vxi = V / iss.xi;
        double pw = Vxi;
        for (int i = 1; i < g.n; ++i) pw *= Vxi;
        if (traj.w_norm[k] > std::sqrt(iss.alpha) * std::min(Vxi, pw)) continue;
        const Vec y = traj.measurements.row(k).transpose();
        if (y.isZero(0.0)) continue;
        if (!(eval_Q(Vxi, y, g.P) >= 0.0 && eval_Q(iss.xi * V, y, g.P) <= 0.0)) continue;
        if (g.n >= 2 && traj.delta_norm[k] > 0.0 &&
            rho_delta(traj.delta_norm[k], iss, g.n) > V)
            continue;

        ++rep.triggered_steps;
        const double rate = (Vx[k + 1] - Vx[k]) / traj.h;
        if (rate > bound) {
            rep.violations.push_back({k, rate, bound});
            rep.max_violation = std::max(rep.max_violation, rate - bound);
        }
    }
    return rep;
}

}  // namespace hesmc
