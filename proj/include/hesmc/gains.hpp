#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hesmc/errors.hpp"
#include "hesmc/ilf.hpp"
#include "hesmc/iotext.hpp"

namespace hesmc {

/// Controller certificate: X, Y solve the gain inequalities, P = X^{-1} is the
/// quadratic-form matrix of the implicit Lyapunov function and K = Y X^{-1}
/// the feedback row.
struct GainSet {
    int n = 0;
    Mat X;
    Row Y;
    Mat P;   // X^{-1}
    Row K;   // Y X^{-1}
    double rho1 = 0.0;
    double rho2 = 0.0;
    double Delta = 0.0;

    static GainSet from_xy(const Mat& X, const Row& Y, double rho1, double rho2, double Delta) {
        GainSet g;
        g.n = static_cast<int>(X.rows());
        g.X = 0.5 * (X + X.transpose());
        g.Y = Y;
        g.rho1 = rho1;
        g.rho2 = rho2;
        g.Delta = Delta;
        g.check_shapes();
        auto [lmin, lmax] = symmetric_eig_range(g.X);
        (void)lmax;
        if (!(lmin > 0.0)) throw std::invalid_argument("GainSet: X is not positive definite");
        g.P = g.X.inverse();
        g.P = 0.5 * (g.P + g.P.transpose()).eval();
        g.K = g.Y * g.P;
        g.check_consistency();
        return g;
    }

    static GainSet from_kp(const Row& K, const Mat& P, double rho1, double rho2, double Delta) {
        GainSet g;
        g.n = static_cast<int>(P.rows());
        g.P = 0.5 * (P + P.transpose());
        g.K = K;
        g.rho1 = rho1;
        g.rho2 = rho2;
        g.Delta = Delta;
        auto [lmin, lmax] = symmetric_eig_range(g.P);
        (void)lmax;
        if (!(lmin > 0.0)) throw std::invalid_argument("GainSet: P is not positive definite");
        g.X = g.P.inverse();
        g.X = 0.5 * (g.X + g.X.transpose()).eval();
        g.Y = g.K * g.X;
        g.check_shapes();
        g.check_consistency();
        return g;
    }

    void check_shapes() const {
        if (n < 1) throw std::invalid_argument("GainSet: n must be >= 1");
        if (X.rows() != n || X.cols() != n || Y.size() != n)
            throw std::invalid_argument("GainSet: dimension mismatch");
        if (!(rho1 > 0.0) || !(rho2 > 0.0) || !(Delta >= 0.0))
            throw std::invalid_argument("GainSet: rho1, rho2 must be positive and Delta >= 0");
        if (!(rho1 > rho2 * Delta * Delta))
            throw std::invalid_argument("GainSet: requires rho1 > rho2 * Delta^2");
    }

    void check_consistency() const {
        const double ident_err = (P * X - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
        if (ident_err > 1e-8)
            throw std::invalid_argument("GainSet: P*X differs from identity by " + str17(ident_err));
        const double k_err = (K - Y * P).cwiseAbs().maxCoeff();
        if (k_err > 1e-8 * (1.0 + K.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("GainSet: K != Y*P");
    }

    /// rho1 - rho2 * Delta^2, the certified decrease rate.
    double decrease_rate() const { return rho1 - rho2 * Delta * Delta; }
};

// ---------------------------------------------------------------------------
// Certificate verification
// ---------------------------------------------------------------------------

struct LmiBlockReport {
    std::string name;
    bool pass = false;
    double min_eig = 0.0;
    double max_eig = 0.0;
    double margin = 0.0;     // >= 0 means satisfied exactly
    double threshold = 0.0;  // margin >= -threshold counts as pass
};

struct LmiReport {
    std::array<LmiBlockReport, 3> blocks;
    bool pass() const {
        return blocks[0].pass && blocks[1].pass && blocks[2].pass;
    }
};

namespace detail {

inline double sym_norm2(const Mat& M) {
    auto [lmin, lmax] = symmetric_eig_range(M);
    return std::max(std::abs(lmin), std::abs(lmax));
}

}  // namespace detail

/// Upsilon = X A' + A X + Y' b' + b Y + rho1 (X G + G X).
inline Mat gain_decrease_block(const GainSet& g) {
    const Mat A = chain_shift_matrix(g.n);
    const Vec b = chain_input_vector(g.n);
    const Mat G = dilation_generator(g.n);
    const Mat Ups = g.X * A.transpose() + A * g.X + g.Y.transpose() * b.transpose() +
                    b * g.Y + g.rho1 * (g.X * G + G * g.X);
    Mat B(g.n + 1, g.n + 1);
    B.topLeftCorner(g.n, g.n) = Ups;
    B.topRightCorner(g.n, 1) = b;
    B.bottomLeftCorner(1, g.n) = b.transpose();
    B(g.n, g.n) = -g.rho2;
    return 0.5 * (B + B.transpose());
}

/// [[X G + G X, X], [X, I]].
inline Mat dilation_norm_block(const GainSet& g) {
    const Mat G = dilation_generator(g.n);
    Mat B(2 * g.n, 2 * g.n);
    B.topLeftCorner(g.n, g.n) = g.X * G + G * g.X;
    B.topRightCorner(g.n, g.n) = g.X;
    B.bottomLeftCorner(g.n, g.n) = g.X;
    B.bottomRightCorner(g.n, g.n) = Mat::Identity(g.n, g.n);
    return 0.5 * (B + B.transpose());
}

/// Checks the three certificate conditions by symmetric eigendecomposition.
/// Eigenvalue threshold per block: eig_tol * (1 + ||block||_2).
inline LmiReport verify_lmi(const GainSet& g, double eig_tol = 1e-8) {
    g.check_shapes();
    LmiReport rep;

    auto fill = [&](LmiBlockReport& r, const std::string& name, const Mat& M, bool want_psd) {
        r.name = name;
        auto [lmin, lmax] = symmetric_eig_range(M);
        r.min_eig = lmin;
        r.max_eig = lmax;
        r.margin = want_psd ? lmin : -lmax;
        r.threshold = eig_tol * (1.0 + std::max(std::abs(lmin), std::abs(lmax)));
        r.pass = r.margin >= -r.threshold;
    };

    fill(rep.blocks[0], "positivity", g.X, true);
    fill(rep.blocks[1], "decrease", gain_decrease_block(g), false);
    fill(rep.blocks[2], "normalization", dilation_norm_block(g), true);
    return rep;
}

// ---------------------------------------------------------------------------
// ISS multipliers and closed-form gains
// ---------------------------------------------------------------------------

struct Gammas {
    double g1 = 0.0;
    double g2 = 0.0;
    double g3 = 0.0;
};

/// Coupling matrix of the dissipation argument, blocks ordered as
/// (dilated state, matched input, dilated noise, dilation mismatch,
/// scaled mismatched perturbation); size (4n+1) x (4n+1).
inline Mat iss_coupling_matrix(const GainSet& g, const Gammas& gm) {
    const int n = g.n;
    const Mat A = chain_shift_matrix(n);
    const Vec b = chain_input_vector(n);
    const Mat G = dilation_generator(n);
    const Mat Pi = A.transpose() * g.P + g.P * A + g.P * b * g.K +
                   g.K.transpose() * b.transpose() * g.P + g.rho1 * (g.P * G + G * g.P);
    const Vec Pb = g.P * b;
    const Mat PbK = Pb * g.K;

    const int N = 4 * n + 1;
    Mat Q = Mat::Zero(N, N);
    Q.block(0, 0, n, n) = Pi;
    Q(n, n) = -g.rho2;
    Q.block(n + 1, n + 1, n, n) = -gm.g1 * Mat::Identity(n, n);
    Q.block(2 * n + 1, 2 * n + 1, n, n) = -gm.g2 * Mat::Identity(n, n);
    Q.block(3 * n + 1, 3 * n + 1, n, n) = -gm.g3 * Mat::Identity(n, n);
    Q.block(0, n, n, 1) = Pb;
    Q.block(n, 0, 1, n) = Pb.transpose();
    Q.block(0, n + 1, n, n) = PbK;
    Q.block(n + 1, 0, n, n) = PbK.transpose();
    Q.block(0, 2 * n + 1, n, n) = PbK;
    Q.block(2 * n + 1, 0, n, n) = PbK.transpose();
    Q.block(0, 3 * n + 1, n, n) = g.P;
    Q.block(3 * n + 1, 0, n, n) = g.P;
    return 0.5 * (Q + Q.transpose());
}

/// Smallest multipliers (geometric grid 2^-4..2^40, then per-coordinate
/// bisection to 1% relative) with lambda_max of the coupling matrix <= eig_tol.
inline Gammas find_gammas(const GainSet& g, double eig_tol = 1e-6) {
    auto lam_max = [&](const Gammas& gm) {
        auto [lmin, lmax] = symmetric_eig_range(iss_coupling_matrix(g, gm));
        (void)lmin;
        return lmax;
    };
    auto feasible = [&](const Gammas& gm) { return lam_max(gm) <= eig_tol; };

    const double grid_lo = std::pow(2.0, -4);
    double uniform = -1.0;
    double best_seen = std::numeric_limits<double>::infinity();
    for (int k = -4; k <= 40; ++k) {
        const double c = std::pow(2.0, k);
        const double lm = lam_max({c, c, c});
        best_seen = std::min(best_seen, lm);
        if (lm <= eig_tol) {
            uniform = c;
            break;
        }
    }
    if (uniform < 0.0)
        throw InfeasibleError(
            "find_gammas: no feasible multipliers up to 2^40; smallest achieved eigenvalue " +
                str17(best_seen),
            best_seen);

    std::array<double, 3> gs = {uniform, uniform, uniform};
    for (int i = 0; i < 3; ++i) {
        auto with = [&](double v) {
            std::array<double, 3> t = gs;
            t[i] = v;
            return Gammas{t[0], t[1], t[2]};
        };
        // Walk down by halving while still feasible.
        double hi = gs[i];
        while (hi > grid_lo && feasible(with(hi * 0.5))) hi *= 0.5;
        double lo = hi * 0.5;
        if (hi > grid_lo && !feasible(with(lo))) {
            while ((hi - lo) / hi > 0.01) {
                const double mid = 0.5 * (lo + hi);
                if (feasible(with(mid)))
                    hi = mid;
                else
                    lo = mid;
            }
        }
        gs[i] = std::max(hi, grid_lo);
    }
    return Gammas{gs[0], gs[1], gs[2]};
}

/// Robustness constants derived from a feasible multiplier triple.
struct IssGains {
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0;
    double alpha = 0.0;            // noise-admissibility level
    double xi = 0.0;               // dilation mismatch bound, > 1
    double chi = 0.0;              // history exponent, > 1
    double rhoV_coeff = 0.0;       // e^{1-chi} xi^{chi+1}
    double rho_delta_coeff = 0.0;  // 6 gamma3 lmax(P) / (rho1 - rho2 Delta^2)
    bool contraction = false;      // rhoV_coeff < 1
};

inline IssGains compute_iss_constants(const GainSet& g, const Gammas& gm, double chi) {
    if (!(chi > 1.0)) throw std::invalid_argument("compute_iss_constants: chi must be > 1");
    const double c = g.decrease_rate();
    const Mat G = dilation_generator(g.n);
    auto [pgmin, pgmax] = symmetric_eig_range(g.P * G + G * g.P);
    (void)pgmax;
    auto [pmin, pmax] = symmetric_eig_range(g.P);
    (void)pmin;

    IssGains out;
    out.gamma1 = gm.g1;
    out.gamma2 = gm.g2;
    out.gamma3 = gm.g3;
    out.chi = chi;
    const double q = c / (4.0 * gm.g2);
    out.xi = 1.0 + std::min(std::sqrt(q), std::pow(q, 1.0 / (2.0 * g.n)));
    out.alpha = c / (4.0 * gm.g1) * pgmin / pmax;
    out.rhoV_coeff = std::exp(1.0 - chi) * std::pow(out.xi, chi + 1.0);
    out.rho_delta_coeff = 6.0 * gm.g3 * pmax / c;
    out.contraction = out.rhoV_coeff < 1.0;
    return out;
}

/// rho_V(s) = e^{1-chi} xi^{chi+1} min(s, s^chi).
inline double rho_V(double s, const IssGains& iss) {
    if (!(s >= 0.0)) throw std::invalid_argument("rho_V: s must be nonnegative");
    if (s == 0.0) return 0.0;
    return iss.rhoV_coeff * std::min(s, std::pow(s, iss.chi));
}

/// rho_delta(s) = max(sqrt(c s^2), (c s^2)^{1/(2(n-1))}), n >= 2.
inline double rho_delta(double s, const IssGains& iss, int n) {
    if (n < 2) throw std::invalid_argument("rho_delta: requires n >= 2 (no mismatched channel)");
    if (!(s >= 0.0)) throw std::invalid_argument("rho_delta: s must be nonnegative");
    if (s == 0.0) return 0.0;
    const double v = iss.rho_delta_coeff * s * s;
    return std::max(std::sqrt(v), std::pow(v, 1.0 / (2.0 * (n - 1))));
}

// ---------------------------------------------------------------------------
// Heuristic synthesis
// ---------------------------------------------------------------------------

namespace detail {

/// Feedback row placing the closed-loop poles of the integrator chain at
/// -beta, -2 beta, ..., -n beta.
inline Row pole_placement_row(int n, double beta = 1.0) {
    std::vector<double> coef = {1.0};  // ascending
    for (int i = 1; i <= n; ++i) {
        std::vector<double> next(coef.size() + 1, 0.0);
        for (std::size_t j = 0; j < coef.size(); ++j) {
            next[j] += beta * i * coef[j];
            next[j + 1] += coef[j];
        }
        coef = next;
    }
    Row K(n);
    for (int j = 0; j < n; ++j) K(j) = -coef[j];
    return K;
}

/// Solves Acl X + X Acl' = -I via the Kronecker linear system (n <= 8).
inline Mat lyapunov_gramian(const Mat& Acl) {
    const int n = static_cast<int>(Acl.rows());
    Mat M = Mat::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                M(i * n + j, k * n + j) += Acl(i, k);
                M(i * n + j, i * n + k) += Acl(j, k);
            }
    Vec rhs = Vec::Zero(n * n);
    for (int i = 0; i < n; ++i) rhs(i * n + i) = -1.0;
    Vec x = M.fullPivLu().solve(rhs);
    Mat X(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) X(i, j) = x(i * n + j);
    return 0.5 * (X + X.transpose());
}

struct SynthState {
    Mat X;
    Row Y;
};

}  // namespace detail

/// Best-effort feasibility search over (X, Y): spectral subgradient ascent on
/// the smallest certificate margin (the margins are concave in (X, Y)), with
/// exact line-search polish along coordinate and scaling directions.
/// verify_lmi is the sole acceptance oracle.
inline GainSet synthesize_gains(int n, double rho1, double rho2, double Delta,
                                int max_iter = 30000) {
    if (n < 1) throw std::invalid_argument("synthesize_gains: n must be >= 1");
    if (!(rho1 > rho2 * Delta * Delta) || !(rho2 > 0.0))
        throw std::invalid_argument("synthesize_gains: requires rho1 > rho2*Delta^2 > 0");

    const Mat A = chain_shift_matrix(n);
    const Vec b = chain_input_vector(n);
    const Mat G = dilation_generator(n);

    auto margins = [&](const Mat& X, const Row& Y, Mat* B2out = nullptr, Mat* B3out = nullptr) {
        const Mat Ups = X * A.transpose() + A * X + Y.transpose() * b.transpose() + b * Y +
                        rho1 * (X * G + G * X);
        Mat B2(n + 1, n + 1);
        B2.topLeftCorner(n, n) = Ups;
        B2.topRightCorner(n, 1) = b;
        B2.bottomLeftCorner(1, n) = b.transpose();
        B2(n, n) = -rho2;
        B2 = 0.5 * (B2 + B2.transpose()).eval();
        Mat B3(2 * n, 2 * n);
        B3.topLeftCorner(n, n) = X * G + G * X;
        B3.topRightCorner(n, n) = X;
        B3.bottomLeftCorner(n, n) = X;
        B3.bottomRightCorner(n, n) = Mat::Identity(n, n);
        B3 = 0.5 * (B3 + B3.transpose()).eval();
        if (B2out) *B2out = B2;
        if (B3out) *B3out = B3;
        auto [x_min, x_max] = symmetric_eig_range(X);
        (void)x_max;
        auto [b2_min, b2_max] = symmetric_eig_range(B2);
        (void)b2_min;
        auto [b3_min, b3_max] = symmetric_eig_range(B3);
        (void)b3_max;
        return std::array<double, 3>{x_min, -b2_max, b3_min};
    };

    auto gmin = [&](const Mat& X, const Row& Y) {
        auto m = margins(X, Y);
        return std::min({m[0], m[1], m[2]});
    };

    auto ternary_along = [&](Mat& X, Row& Y, const Mat& dX, const Row& dY) {
        const double base = gmin(X, Y);
        double lo = -0.5, hi = 0.5;
        for (int i = 0; i < 30 && gmin(X + hi * dX, Y + hi * dY) > base; ++i) hi *= 2.0;
        for (int i = 0; i < 30 && gmin(X + lo * dX, Y + lo * dY) > base; ++i) lo *= 2.0;
        double a = lo, c = hi;
        for (int i = 0; i < 50; ++i) {
            const double q1 = a + (c - a) / 3.0, q2 = c - (c - a) / 3.0;
            if (gmin(X + q1 * dX, Y + q1 * dY) < gmin(X + q2 * dX, Y + q2 * dY))
                a = q1;
            else
                c = q2;
        }
        const double t = 0.5 * (a + c);
        if (gmin(X + t * dX, Y + t * dY) > base) {
            X += t * dX;
            Y += t * dY;
            return true;
        }
        return false;
    };

    auto polish = [&](Mat& X, Row& Y, int rounds) {
        for (int r = 0; r < rounds; ++r) {
            bool improved = false;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    Mat dX = Mat::Zero(n, n);
                    dX(i, j) = 1.0;
                    dX(j, i) = 1.0;
                    improved |= ternary_along(X, Y, dX, Row::Zero(n));
                }
            for (int j = 0; j < n; ++j) {
                Row dY = Row::Zero(n);
                dY(j) = 1.0;
                improved |= ternary_along(X, Y, Mat::Zero(n, n), dY);
            }
            improved |= ternary_along(X, Y, Mat(X), Row(Y));  // joint scaling
            if (!improved) break;
        }
    };

    std::vector<detail::SynthState> starts;
    starts.push_back({Mat::Identity(n, n), detail::pole_placement_row(n)});
    for (double beta : {1.0, 2.0, 4.0}) {
        const Row K0 = detail::pole_placement_row(n, beta);
        const Mat Acl = A + b * K0;
        const Mat X0 = detail::lyapunov_gramian(Acl);
        auto [lmin, lmax] = symmetric_eig_range(X0);
        (void)lmax;
        if (lmin > 0.0) starts.push_back({X0, K0 * X0});
    }

    Mat bestX;
    Row bestY;
    double best_val = -std::numeric_limits<double>::infinity();

    for (auto& s : starts) {
        Mat X = s.X;
        Row Y = s.Y;
        double local_best = gmin(X, Y);
        Mat Xb = X;
        Row Yb = Y;
        double target_gap = 0.05;
        for (int it = 0; it < max_iter; ++it) {
            Mat B2, B3;
            auto m = margins(X, Y, &B2, &B3);
            const double val = std::min({m[0], m[1], m[2]});
            if (val > local_best) {
                local_best = val;
                Xb = X;
                Yb = Y;
            }
            if (val > 0.02) break;

            // epsilon-active margins: average their ascent directions.
            const double spread = std::max({m[0], m[1], m[2]}) - val;
            const double eps = std::max(0.05 * spread, 1e-6);
            Mat gX = Mat::Zero(n, n);
            Row gY = Row::Zero(n);
            int active = 0;
            if (m[0] <= val + eps) {
                Eigen::SelfAdjointEigenSolver<Mat> es(X);
                const Vec v = es.eigenvectors().col(0);
                gX += v * v.transpose();
                ++active;
            }
            if (m[1] <= val + eps) {
                Eigen::SelfAdjointEigenSolver<Mat> es(B2);
                const Vec v = es.eigenvectors().col(n);
                const Vec p = v.head(n);
                const Vec u = A.transpose() * p + rho1 * (G * p);
                gX -= p * u.transpose() + u * p.transpose();
                gY -= 2.0 * (b.dot(p)) * p.transpose();
                ++active;
            }
            if (m[2] <= val + eps) {
                Eigen::SelfAdjointEigenSolver<Mat> es(B3);
                const Vec v = es.eigenvectors().col(0);
                const Vec w1 = v.head(n);
                const Vec w2 = v.tail(n);
                const Vec gw = G * w1;
                gX += gw * w1.transpose() + w1 * gw.transpose() + w1 * w2.transpose() +
                      w2 * w1.transpose();
                ++active;
            }
            gX /= active;
            gY /= active;
            const double gn2 = gX.squaredNorm() + gY.squaredNorm();
            if (gn2 < 1e-18) break;
            const double target = local_best + target_gap;
            double step = (target - val) / gn2;
            step = std::min(step, 2.0 / std::sqrt(gn2));
            X += step * gX;
            X = 0.5 * (X + X.transpose()).eval();
            Y += step * gY;

            if ((it + 1) % 1500 == 0) {
                polish(X, Y, 1);
                const double v2 = gmin(X, Y);
                if (v2 > local_best) {
                    local_best = v2;
                    Xb = X;
                    Yb = Y;
                }
                target_gap *= 0.7;
            }
        }
        polish(Xb, Yb, 3);
        const double v = gmin(Xb, Yb);
        if (v > best_val) {
            best_val = v;
            bestX = Xb;
            bestY = Yb;
        }
        if (best_val > 0.02) break;
    }

    if (!(best_val > 0.0))
        throw SynthesisError("synthesize_gains: search stagnated at margin " + str17(best_val));
    GainSet g = GainSet::from_xy(bestX, bestY, rho1, rho2, Delta);
    if (!verify_lmi(g).pass())
        throw SynthesisError("synthesize_gains: candidate failed verification");
    return g;
}

// ---------------------------------------------------------------------------
// Serialization: field names exactly n, X, Y, rho1, rho2, Delta.
// ---------------------------------------------------------------------------

inline std::string gainset_to_json(const GainSet& g) {
    std::string s = "{\n";
    s += "  \"n\": " + std::to_string(g.n) + ",\n";
    s += "  \"X\": " + json_matrix17(g.X) + ",\n";
    s += "  \"Y\": " + json_array17(g.Y) + ",\n";
    s += "  \"rho1\": " + str17(g.rho1) + ",\n";
    s += "  \"rho2\": " + str17(g.rho2) + ",\n";
    s += "  \"Delta\": " + str17(g.Delta) + "\n";
    s += "}\n";
    return s;
}

inline GainSet gainset_from_json(const nlohmann::json& j) {
    const int n = j.at("n").get<int>();
    if (n < 1) throw std::invalid_argument("gainset_from_json: n must be >= 1");
    const auto& jx = j.at("X");
    if (!jx.is_array() || static_cast<int>(jx.size()) != n)
        throw std::invalid_argument("gainset_from_json: X must be an n-row matrix");
    Mat X(n, n);
    for (int i = 0; i < n; ++i) {
        const auto& row = jx.at(i);
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw std::invalid_argument("gainset_from_json: X rows must have n entries");
        for (int k = 0; k < n; ++k) X(i, k) = row.at(k).get<double>();
    }
    const auto& jy = j.at("Y");
    if (!jy.is_array() || static_cast<int>(jy.size()) != n)
        throw std::invalid_argument("gainset_from_json: Y must have n entries");
    Row Y(n);
    for (int k = 0; k < n; ++k) Y(k) = jy.at(k).get<double>();
    return GainSet::from_xy(X, Y, j.at("rho1").get<double>(), j.at("rho2").get<double>(),
                            j.at("Delta").get<double>());
}

inline GainSet gainset_from_json(const std::string& text) {
    return gainset_from_json(nlohmann::json::parse(text));
}

}  // namespace hesmc
