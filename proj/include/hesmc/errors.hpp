#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hesmc {

/// Root bracketing / bisection could not certify a solution.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// No feasible multiplier triple exists up to the search cap.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what, double best_eig = 0.0)
        : std::runtime_error(what), best_eigenvalue(best_eig) {}
    double best_eigenvalue;
};

/// Gain synthesis stagnated without reaching a verified certificate.
class SynthesisError : public std::runtime_error {
public:
    explicit SynthesisError(const std::string& what) : std::runtime_error(what) {}
};

/// Simulated state left the admissible region.
class DivergedError : public std::runtime_error {
public:
    DivergedError(const std::string& what, std::size_t step)
        : std::runtime_error(what), step(step) {}
    std::size_t step;
};

}  // namespace hesmc
