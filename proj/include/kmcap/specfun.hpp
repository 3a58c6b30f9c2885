#pragma once

#include <cstdint>
#include <boost/multiprecision/cpp_int.hpp>

#include "kmcap/accuracy.hpp"

namespace kmcap::specfun {

using bigint = boost::multiprecision::cpp_int;

/// ln Gamma(x), x > 0.
double ln_gamma(double x);

/// Digamma psi(x) and higher polygamma psi^(m)(x), m <= 3, x > 0.
double digamma(double x);
double polygamma(int m, double x);

/// Upper incomplete gamma Gamma(alpha, b) = int_b^inf t^(alpha-1) e^(-t) dt.
double upper_inc_gamma(double alpha, double b, const AccuracySpec& acc = {});

/// e^b * Gamma(alpha, b); stays representable for large b.
double upper_inc_gamma_scaled(double alpha, double b, const AccuracySpec& acc = {});

/// int_b^inf ln^n(t) t^(alpha-1) e^(-t) dt — the n-th derivative of
/// Gamma(alpha, b) with respect to alpha. Adaptive quadrature, split at t=1
/// where ln changes sign.
double log_power_upper_gamma(double alpha, double b, int n, const AccuracySpec& acc = {});

/// e^b * log_power_upper_gamma(alpha, b, n), via the shift t = b + u.
double log_power_upper_gamma_scaled(double alpha, double b, int n, const AccuracySpec& acc = {});

/// int_0^inf ln^n(t) t^(alpha-1) e^(-t) dt = d^n Gamma / d alpha^n.
/// Quadrature path; for n <= 4 `log_power_gamma_bell` evaluates the closed
/// digamma/Bell-polynomial chain (Gamma' = Gamma psi, ...) for cross-checks.
double log_power_gamma(double alpha, int n, const AccuracySpec& acc = {});
double log_power_gamma_bell(double alpha, int n);

/// Gamma^(n)(alpha) / Gamma(alpha) through the complete Bell polynomials in
/// psi, psi', psi'', psi''' (n <= 4). Overflow-free for large alpha.
double gamma_log_derivative_ratio(double alpha, int n);

/// Modified Bessel function of the first kind, ascending series.
double bessel_i(double nu, double x, const AccuracySpec& acc = {});
/// e^(-x) I_nu(x); safe where e^x would overflow.
double bessel_i_scaled(double nu, double x, const AccuracySpec& acc = {});

/// Kummer confluent hypergeometric 1F1(a, b; x).
double hyp1f1(double a, double b, double x, const AccuracySpec& acc = {});

/// Gauss hypergeometric 2F1(a, b; c; x) for 0 <= x < 1.
double hyp2f1(double a, double b, double c, double x, const AccuracySpec& acc = {});

/// Signed Stirling number of the first kind s(N, k), exact.
bigint stirling_first_signed(int N, int k);

/// n! * s(N, n) / N!  — the coefficient of z^N in the expansion of ln^n(1+z).
/// Computed by a scaled double recurrence (usable far beyond bigint ranges).
double stirling_log_coeff(int N, int n);

/// Pochhammer (a)_q = a(a+1)...(a+q-1); (a)_0 = 1.
double pochhammer(double a, int q);

/// Generalized Laguerre polynomial L_k^v(y), finite series form.
double laguerre_generalized(int k, double v, double y);

}  // namespace kmcap::specfun
