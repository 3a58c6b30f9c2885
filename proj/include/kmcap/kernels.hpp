#pragma once

#include <memory>
#include <vector>

#include "kmcap/accuracy.hpp"

namespace kmcap::kernels {

/// Parameter bundle for the auxiliary integral kernels.
struct KernelRequest {
    double a = 1.0;    ///< shape exponent, > 0
    double b = 1.0;    ///< exponential rate, > 0
    int n = 0;         ///< log-power order, >= 0
    double delta = 0;  ///< power offset (Theta only)

    void validate() const {
        if (!(a > 0.0)) throw domain_error("KernelRequest: a must be > 0");
        if (!(b > 0.0)) throw domain_error("KernelRequest: b must be > 0");
        if (n < 0) throw domain_error("KernelRequest: n must be >= 0");
    }
};

/// Gaussian rule for the weight e^(-x^2) on [0, inf): nodes, weights, and logs.
struct HalfHermiteRule {
    std::vector<double> t, w, log_t, log_w;
};

/// N-point rule, generated by a discretized Stieltjes procedure and cached.
const HalfHermiteRule& half_hermite_rule(int n_points);

/// Theta_delta(a, b) = int_0^inf (1+x)^delta x^(a-1) e^(-bx) dx for integer a,
/// via the binomial/incomplete-gamma expansion of (x)^(a-1) = ((1+x)-1)^(a-1).
double theta(double delta, int a, double b, const AccuracySpec& acc = {});

/// J(a, b, n) = int_0^inf ln^n(1+x) x^(a-1) e^(-bx) dx.
/// Integer a (within 1e-9): Leibniz chain over log-power incomplete gammas,
/// with a cancellation guard; otherwise (or on guard trip) the Gauss-rule path.
double kernel_J(double a, double b, int n, const AccuracySpec& acc = {});

/// J(a, b, n) * b^a / Gamma(a) — the mean of ln^n(1+X) under X ~ Gamma(a, 1/b).
/// Bounded for all argument sizes; the form the capacity series consume.
double kernel_J_scaled(double a, double b, int n, const AccuracySpec& acc = {});

/// K(nu, mu, a) = int_0^inf ln^nu(1+x) e^(-ax) x^mu dx by the substitution
/// ax = y^2 and an N-point half-range Gauss rule, doubling N until two
/// successive evaluations agree to rel_tol (cap N = 960).
double kernel_K(int nu, double mu_exp, double a, int n_points = 15,
                const AccuracySpec& acc = {});

/// Q(a, b, n) = d^n/da^n [ Gamma(a+1) / b^(a+1) ], Leibniz split into
/// ln-powers of b times gamma derivatives.
double kernel_Q(double a, double b, int n, const AccuracySpec& acc = {});

/// Q(alpha-1, b, n) * b^alpha / Gamma(alpha): the scaled high-SNR kernel,
/// sum_k C(n,k) (-ln b)^(n-k) Gamma^(k)(alpha)/Gamma(alpha).
double kernel_Q_scaled(double alpha, double b, int n);

/// Reusable evaluation context for J at fixed (b, max order): shares the
/// log-power incomplete-gamma recurrence table across shapes a, which the
/// capacity series sweep in unit steps.
class JKernelContext {
  public:
    JKernelContext(double b, int n_max, AccuracySpec acc = {});
    ~JKernelContext();
    JKernelContext(JKernelContext&&) noexcept;
    JKernelContext& operator=(JKernelContext&&) noexcept;

    /// J(a, b, n) * b^a / Gamma(a); n <= n_max.
    double jhat(double a, int n);

    double b() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace kmcap::kernels
