#pragma once

#include <functional>
#include <vector>

#include "kmcap/accuracy.hpp"

namespace kmcap {

/// Adaptive Gauss-Kronrod (7,15) integration on [a,b] to a relative tolerance.
/// Bisects intervals whose Kronrod-Gauss discrepancy exceeds the local budget.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-11, int max_subdiv = 4000);

/// Integral over [a, inf). `hints` are interior breakpoints (peaks, kinks);
/// past the last hint the tail is summed in geometrically growing blocks until
/// two consecutive blocks contribute below rel_tol of the running total.
double integrate_semi_inf(const std::function<double(double)>& f, double a,
                          double rel_tol = 1e-11,
                          std::vector<double> hints = {}, int max_blocks = 200);

}  // namespace kmcap
