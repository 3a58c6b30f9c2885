#pragma once

#include <stdexcept>
#include <string>

namespace kmcap {

/// Shared accuracy contract for series and continued-fraction evaluation.
struct AccuracySpec {
    double rel_tol = 1e-12;
    int max_iterations = 10000;

    void validate() const {
        if (!(rel_tol > 0.0)) throw std::invalid_argument("AccuracySpec: rel_tol must be > 0");
        if (max_iterations < 1) throw std::invalid_argument("AccuracySpec: max_iterations must be >= 1");
    }
};

/// Argument outside the supported domain.
class domain_error : public std::domain_error {
  public:
    explicit domain_error(const std::string& what) : std::domain_error(what) {}
};

/// A series, continued fraction, or quadrature failed to reach the requested tolerance.
class convergence_error : public std::runtime_error {
  public:
    explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kmcap
