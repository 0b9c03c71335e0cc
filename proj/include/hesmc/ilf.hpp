#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "hesmc/errors.hpp"

namespace hesmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Row = Eigen::RowVectorXd;

/// Weighted-dilation exponents r = (n, n-1, ..., 1) for an n-integrator chain.
struct DilationWeights {
    int n;

    static DilationWeights chain(int n) {
        if (n < 1) throw std::invalid_argument("DilationWeights: n must be >= 1");
        return DilationWeights{n};
    }

    /// r_i, 0-based index.
    int weight(int i) const { return n - i; }
};

/// Shift matrix of the integrator chain (ones on the superdiagonal).
inline Mat chain_shift_matrix(int n) {
    Mat A = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
    return A;
}

/// Input direction: last unit vector.
inline Vec chain_input_vector(int n) {
    Vec b = Vec::Zero(n);
    b(n - 1) = 1.0;
    return b;
}

/// G = diag(r_1, ..., r_n).
inline Mat dilation_generator(int n) {
    Mat G = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) G(i, i) = static_cast<double>(n - i);
    return G;
}

/// Applies diag(lambda^{r_1}, ..., lambda^{r_n}) to y.
/// Powers are built by repeated multiplication (integer exponents only).
inline Vec dilation_apply(double lambda, const Vec& y) {
    if (!(lambda > 0.0)) throw std::invalid_argument("dilation_apply: lambda must be positive");
    const int n = static_cast<int>(y.size());
    if (n < 1) throw std::invalid_argument("dilation_apply: empty vector");
    Vec z(n);
    // Work upward from weight 1 at the last coordinate.
    double p = 1.0;
    for (int i = n - 1; i >= 0; --i) {
        p *= lambda;          // p = lambda^{r_i}
        z(i) = p * y(i);
    }
    // Recompute with interleaved products so that huge lambda^{r_i} does not
    // overflow before the multiplication with a tiny y_i.
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(z(i))) {
            double zi = y(i);
            const int r = n - i;
            for (int k = 0; k < r; ++k) zi *= lambda;
            z(i) = zi;
        }
    }
    return z;
}

struct IlfSolverSettings {
    double rel_tol = 1e-12;
    double abs_q_tol = 1e-10;
    int max_iter = 200;
    double v_floor = 1e-300;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_q_tol > 0.0) || max_iter < 1 || !(v_floor > 0.0))
            throw std::invalid_argument("IlfSolverSettings: invalid tolerances");
    }
};

/// Q(V, y) = y' D(1/V) P D(1/V) y - 1.  Strictly decreasing in V when
/// P G + G P is positive definite.
inline double eval_Q(double V, const Vec& y, const Mat& P) {
    if (!(V > 0.0)) throw std::invalid_argument("eval_Q: V must be positive");
    if (y.size() == 0 || y.isZero(0.0)) throw std::invalid_argument("eval_Q: y must be nonzero");
    if (P.rows() != y.size() || P.cols() != y.size())
        throw std::invalid_argument("eval_Q: dimension mismatch");
    const Vec z = dilation_apply(1.0 / V, y);
    double q = z.dot(P * z) - 1.0;
    if (std::isnan(q)) {
        // inf - inf from extreme dilation arguments; the form is a sum of
        // products z_i P_ij z_j, recompute termwise treating overflow as +inf.
        long double acc = 0.0L;
        for (int i = 0; i < y.size(); ++i)
            for (int j = 0; j < y.size(); ++j) acc += static_cast<long double>(z(i)) * P(i, j) * z(j);
        q = static_cast<double>(acc) - 1.0;
    }
    return q;
}

/// Extreme eigenvalues of a symmetric matrix.
inline std::pair<double, double> symmetric_eig_range(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

/// Norm bounds on the level set Q(V, y) = 0, with X = P^{-1}:
///   sqrt(lmin(X)) * min(V, V^n) <= |y| <= sqrt(lmax(X)) * max(V, V^n).
inline std::pair<double, double> ilf_bounds(double V, const Mat& X) {
    if (!(V > 0.0)) throw std::invalid_argument("ilf_bounds: V must be positive");
    auto [lmin, lmax] = symmetric_eig_range(X);
    if (!(lmin > 0.0)) throw std::invalid_argument("ilf_bounds: X must be positive definite");
    const int n = static_cast<int>(X.rows());
    double Vn = 1.0;
    for (int k = 0; k < n; ++k) Vn *= V;
    return {std::sqrt(lmin) * std::min(V, Vn), std::sqrt(lmax) * std::max(V, Vn)};
}

/// Precomputed spectral range of X = P^{-1}, reused across solver calls.
struct IlfBracketHint {
    double lam_min_X;
    double lam_max_X;

    static IlfBracketHint from_P(const Mat& P) {
        auto [pmin, pmax] = symmetric_eig_range(P);
        if (!(pmin > 0.0)) throw SolverError("ilf: P is not positive definite");
        return {1.0 / pmax, 1.0 / pmin};
    }
};

/// Root of Q(V, y) = 0 for y != 0, and 0 for y = 0.  Bracket comes from the
/// level-set norm bounds, expanded geometrically, then bisected until
/// |Q| <= abs_q_tol.
inline double solve_ilf(const Vec& y, const Mat& P, const IlfBracketHint& hint,
                        const IlfSolverSettings& settings = {}) {
    settings.validate();
    if (y.size() == 0) throw std::invalid_argument("solve_ilf: empty vector");
    if (y.isZero(0.0)) return 0.0;

    const int n = static_cast<int>(y.size());
    const double ny = y.norm();
    const double m = ny / std::sqrt(hint.lam_max_X);
    const double t = ny / std::sqrt(hint.lam_min_X);
    double lo = (m <= 1.0) ? m : std::pow(m, 1.0 / n);
    double hi = (t >= 1.0) ? t : std::pow(t, 1.0 / n);
    lo = std::max(lo, settings.v_floor);
    hi = std::max(hi, lo);

    int expand = 0;
    while (eval_Q(lo, y, P) < 0.0) {
        lo *= 0.5;
        if (++expand > settings.max_iter || lo < settings.v_floor)
            throw SolverError("solve_ilf: no lower bracket (is P valid?)");
    }
    while (eval_Q(hi, y, P) > 0.0) {
        hi *= 2.0;
        if (++expand > settings.max_iter || !std::isfinite(hi))
            throw SolverError("solve_ilf: no upper bracket (is P valid?)");
    }

    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < settings.max_iter; ++it) {
        mid = 0.5 * (lo + hi);
        const double q = eval_Q(mid, y, P);
        if (std::abs(q) <= settings.abs_q_tol) return mid;
        if (q > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double q = eval_Q(mid, y, P);
    if (std::abs(q) <= settings.abs_q_tol) return mid;
    throw SolverError("solve_ilf: bisection did not certify |Q| <= abs_q_tol after " +
                      std::to_string(settings.max_iter) + " iterations");
}

inline double solve_ilf(const Vec& y, const Mat& P, const IlfSolverSettings& settings = {}) {
    return solve_ilf(y, P, IlfBracketHint::from_P(P), settings);
}

}  // namespace hesmc
