#include "kmcap/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "kmcap/quadrature.hpp"
#include "kmcap/specfun.hpp"

namespace kmcap::kernels {

namespace {

// ---------------------------------------------------------------------------
// Gauss-Legendre helper for the Stieltjes discretization
// ---------------------------------------------------------------------------

struct GlRule {
    std::vector<double> x, w;  // on [-1, 1]
};

const GlRule& gauss_legendre_48() {
    static GlRule rule = [] {
        const int n = 48;
        GlRule r;
        r.x.resize(n);
        r.w.resize(n);
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            r.x[i] = -z;
            r.x[n - 1 - i] = z;
            r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
        return r;
    }();
    return rule;
}

// Symmetric tridiagonal eigenvalues, QL with implicit shifts (values only).
void tridiag_eigenvalues(std::vector<long double>& d, std::vector<long double>& e) {
    const int n = (int)d.size();
    e.push_back(0.0L);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const long double dd = fabsl(d[m]) + fabsl(d[m + 1]);
                if (fabsl(e[m]) <= 1e-19L * dd) break;
            }
            if (m != l) {
                if (iter++ == 80) throw convergence_error("tridiag_eigenvalues: too many iterations");
                long double g = (d[l + 1] - d[l]) / (2.0L * e[l]);
                long double r = hypotl(g, 1.0L);
                g = d[m] - d[l] + e[l] / (g + (g >= 0 ? r : -r));
                long double s = 1.0L, c = 1.0L, p = 0.0L;
                bool underflow = false;
                for (int i = m - 1; i >= l; --i) {
                    long double f = s * e[i];
                    const long double bb = c * e[i];
                    r = hypotl(f, g);
                    e[i + 1] = r;
                    if (r == 0.0L) {
                        d[i + 1] -= p;
                        e[m] = 0.0L;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0L * c * bb;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - bb;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0L;
            }
        } while (m != l);
    }
    std::sort(d.begin(), d.end());
}

HalfHermiteRule build_half_hermite(int n) {
    // Discretization grid for inner products against w(x) = e^{-x^2} on [0, R]
    const double R = std::sqrt(2.0 * n) + 9.0;
    const int panels = std::max(24, (int)std::ceil(R / 0.6));
    const auto& gl = gauss_legendre_48();
    std::vector<long double> xs, ws;
    xs.reserve(panels * gl.x.size());
    ws.reserve(panels * gl.x.size());
    for (int p = 0; p < panels; ++p) {
        const double a = R * p / panels, b = R * (p + 1) / panels;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (size_t i = 0; i < gl.x.size(); ++i) {
            const long double x = mid + half * gl.x[i];
            xs.push_back(x);
            ws.push_back((long double)(half * gl.w[i]) * expl(-x * x));
        }
    }
    const size_t m = xs.size();

    // Stieltjes: three-term recurrence coefficients of the orthogonal polynomials
    std::vector<long double> alpha(n), beta(n);  // beta[0] = total mass
    std::vector<long double> p_prev(m, 0.0L), p_cur(m, 1.0L);
    long double norm_prev = 0.0L, norm_cur = 0.0L, xmom = 0.0L;
    for (size_t i = 0; i < m; ++i) {
        norm_cur += ws[i];
        xmom += ws[i] * xs[i];
    }
    beta[0] = norm_cur;
    alpha[0] = xmom / norm_cur;
    for (int k = 1; k < n; ++k) {
        for (size_t i = 0; i < m; ++i) {
            const long double p_next =
                (xs[i] - alpha[k - 1]) * p_cur[i] - (k >= 2 ? beta[k - 1] : 0.0L) * p_prev[i];
            p_prev[i] = p_cur[i];
            p_cur[i] = p_next;
        }
        norm_prev = norm_cur;
        norm_cur = 0.0L;
        xmom = 0.0L;
        for (size_t i = 0; i < m; ++i) {
            const long double t = ws[i] * p_cur[i] * p_cur[i];
            norm_cur += t;
            xmom += t * xs[i];
        }
        beta[k] = norm_cur / norm_prev;
        alpha[k] = xmom / norm_cur;
    }

    // Golub-Welsch: nodes = eigenvalues of the Jacobi matrix
    std::vector<long double> d(alpha), e(n - 1);
    for (int k = 1; k < n; ++k) e[k - 1] = sqrtl(beta[k]);
    tridiag_eigenvalues(d, e);

    // weights via the reciprocal Christoffel sum of orthonormal polynomials
    HalfHermiteRule rule;
    rule.t.resize(n);
    rule.w.resize(n);
    rule.log_t.resize(n);
    rule.log_w.resize(n);
    for (int i = 0; i < n; ++i) {
        const long double x = d[i];
        long double q_prev = 0.0L, q_cur = 1.0L / sqrtl(beta[0]);
        long double s = q_cur * q_cur;
        for (int k = 1; k < n; ++k) {
            const long double q_next =
                ((x - alpha[k - 1]) * q_cur - (k >= 2 ? sqrtl(beta[k - 1]) : 0.0L) * q_prev) / sqrtl(beta[k]);
            q_prev = q_cur;
            q_cur = q_next;
            s += q_cur * q_cur;
        }
        const long double w = 1.0L / s;
        rule.t[i] = (double)x;
        rule.w[i] = (double)w;
        rule.log_t[i] = (double)logl(x);
        rule.log_w[i] = (double)logl(w);
    }
    return rule;
}

}  // namespace

const HalfHermiteRule& half_hermite_rule(int n_points) {
    if (n_points < 1 || n_points > 2048) throw domain_error("half_hermite_rule: N out of range");
    static std::mutex mu;
    static std::map<int, std::unique_ptr<HalfHermiteRule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n_points];
    if (!slot) slot = std::make_unique<HalfHermiteRule>(build_half_hermite(n_points));
    return *slot;
}

// ---------------------------------------------------------------------------
// Theta
// ---------------------------------------------------------------------------

double theta(double delta, int a, double b, const AccuracySpec& acc) {
    if (a < 1) throw domain_error("theta: a must be a positive integer");
    if (!(b > 0.0)) throw domain_error("theta: b must be > 0");
    // e^b sum_k C(a-1,k) (-1)^(a-k-1) b^-(delta+k+1) Gamma(delta+k+1, b)
    long double sum = 0.0L, comp = 0.0L, maxterm = 0.0L;
    for (int k = 0; k <= a - 1; ++k) {
        const double g = specfun::upper_inc_gamma_scaled(delta + k + 1.0, b, acc);
        const long double mag =
            expl((long double)(std::lgamma((double)a) - std::lgamma((double)k + 1.0) -
                               std::lgamma((double)(a - k)) - (delta + k + 1.0) * std::log(b) + std::log(g)));
        const long double term = (((a - k - 1) % 2) ? -mag : mag);
        maxterm = std::max(maxterm, fabsl(term));
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    if (maxterm > 1e12L * fabsl(sum)) {
        // alternating sum lost too many digits; integrate the definition instead
        auto f = [&](double x) {
            return std::pow(1.0 + x, delta) * std::exp((a - 1.0) * std::log(x) - b * x);
        };
        const double peak = std::max((a - 1.0) / b, 0.5);
        return integrate_semi_inf(f, 0.0, acc.rel_tol, {0.5 * peak, peak, 2 * peak, 8 * peak});
    }
    return (double)sum;
}

// ---------------------------------------------------------------------------
// J kernel
// ---------------------------------------------------------------------------

struct JKernelContext::Impl {
    double b;
    long double lnb;
    int nmax;
    AccuracySpec acc;
    // lam[p][alpha-1] = e^b * int_b^inf ln^p(t) t^(alpha-1) e^(-t) dt / Gamma(alpha)
    std::vector<std::vector<long double>> lam;
    int gauss_start = 15;

    Impl(double b_, int nmax_, AccuracySpec acc_) : b(b_), lnb(logl((long double)b_)), nmax(nmax_), acc(acc_) {
        if (!(b > 0.0)) throw domain_error("JKernelContext: b must be > 0");
        if (nmax < 0 || nmax > 7) throw domain_error("JKernelContext: n_max must be in 0..7");
        lam.resize(nmax + 1);
        for (int p = 0; p <= nmax; ++p)
            lam[p].push_back((long double)specfun::log_power_upper_gamma_scaled(1.0, b, p, acc));
    }

    // extend rows to alpha = amax (1-indexed shapes; lam[p][alpha-1])
    void extend(long long amax) {
        const long long have = (long long)lam[0].size();
        for (long long alpha = have; alpha < amax; ++alpha) {
            // lam_p(alpha+1) = ln^p b e^{alpha ln b - lnGamma(alpha+1)} + (p/alpha) lam_{p-1}(alpha) + lam_p(alpha)
            const long double base = expl(alpha * lnb - lgammal((long double)alpha + 1.0L));
            for (int p = 0; p <= nmax; ++p) {
                long double v = powl(lnb, p) * base + lam[p][alpha - 1];
                if (p > 0) v += (long double)p / (long double)alpha * lam[p - 1][alpha - 1];
                lam[p].push_back(v);
            }
        }
    }

    // Leibniz chain; NaN when the alternating sum loses too many digits.
    double jhat_integer(long long a, int n) {
        extend(a);
        // Jhat = sum_k (-1)^(a-1-k) exp[ lnGamma(a) - lnGamma(a-k) + (a-1-k) ln b - lnGamma(a) ]
        //        * Gamma(k+1)/Gamma(k+1) * pbar_k   collapsed below
        long double binpow[8];  // C(n,p)(-ln b)^(n-p), n <= nmax <= 7
        for (int p = 0; p <= n; ++p) {
            long double c = expl(lgammal((long double)n + 1) - lgammal((long double)p + 1) -
                                 lgammal((long double)(n - p) + 1));
            for (int i = 0; i < n - p; ++i) c *= -lnb;
            binpow[p] = c;
        }
        long double sum = 0.0L, comp = 0.0L, maxterm = 0.0L;
        for (long long k = 0; k < a; ++k) {
            long double pbar = 0.0L;  // sum_p C(n,p)(-ln b)^(n-p) lam_p(k+1)
            for (int p = 0; p <= n; ++p) pbar += binpow[p] * lam[p][k];
            if (pbar == 0.0L) continue;
            const long double lmag = -lgammal((long double)(a - k)) +
                                     (long double)(a - 1 - k) * lnb + logl(fabsl(pbar));
            long double term = expl(lmag);
            if (((a - 1 - k) % 2) != 0) term = -term;
            if (pbar < 0) term = -term;
            maxterm = std::max(maxterm, fabsl(term));
            const long double y = term - comp;
            const long double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        if (!(sum > 0.0L) || maxterm > 1e9L * sum || !std::isfinite((double)sum))
            return std::numeric_limits<double>::quiet_NaN();
        return (double)sum;
    }

    double jhat_gauss_once(double a, int n, int N) {
        const auto& rule = half_hermite_rule(N);
        // Jhat = (2/Gamma(a)) sum_i w_i ln^n(1+t_i^2/b) t_i^(2a-1)
        const double lga = std::lgamma(a);
        long double sum = 0.0L;
        for (size_t i = 0; i < rule.t.size(); ++i) {
            const double l1p = std::log1p(rule.t[i] * rule.t[i] / b);
            if (l1p <= 0.0) continue;
            const double e = rule.log_w[i] + (2.0 * a - 1.0) * rule.log_t[i] - lga + M_LN2 +
                             n * std::log(l1p);
            sum += expl((long double)e);
        }
        return (double)sum;
    }

    double jhat_gauss(double a, int n) {
        double prev = jhat_gauss_once(a, n, gauss_start);
        for (int N = gauss_start * 2; N <= 960; N *= 2) {
            const double cur = jhat_gauss_once(a, n, N);
            if (std::abs(cur - prev) <= acc.rel_tol * std::abs(cur) * 10.0 + 1e-300) {
                gauss_start = std::max(15, N / 2);
                return cur;
            }
            prev = cur;
        }
        throw convergence_error("kernel_K: did not stabilize by N = 960");
    }

    double jhat(double a, int n) {
        if (!(a > 0.0)) throw domain_error("kernel_J: a must be > 0");
        if (n < 0 || n > nmax) throw domain_error("JKernelContext: order outside n_max");
        if (n == 0) return 1.0;  // int x^(a-1) e^(-bx) = Gamma(a)/b^a exactly
        const double r = std::round(a);
        if (std::abs(a - r) < 1e-9 && r >= 1.0 && r < 20000.0) {
            const double v = jhat_integer((long long)r, n);
            if (std::isfinite(v)) return v;
        }
        return jhat_gauss(a, n);
    }
};

JKernelContext::JKernelContext(double b, int n_max, AccuracySpec acc)
    : impl_(std::make_unique<Impl>(b, n_max, acc)) {}
JKernelContext::~JKernelContext() = default;
JKernelContext::JKernelContext(JKernelContext&&) noexcept = default;
JKernelContext& JKernelContext::operator=(JKernelContext&&) noexcept = default;

double JKernelContext::jhat(double a, int n) { return impl_->jhat(a, n); }
double JKernelContext::b() const { return impl_->b; }

double kernel_J_scaled(double a, double b, int n, const AccuracySpec& acc) {
    JKernelContext ctx(b, n, acc);
    return ctx.jhat(a, n);
}

double kernel_J(double a, double b, int n, const AccuracySpec& acc) {
    // unscaled: Jhat * Gamma(a) / b^a
    const double jh = kernel_J_scaled(a, b, n, acc);
    return jh * std::exp(std::lgamma(a) - a * std::log(b));
}

double kernel_K(int nu, double mu_exp, double a, int n_points, const AccuracySpec& acc) {
    if (nu < 0) throw domain_error("kernel_K: nu must be >= 0");
    if (!(mu_exp > -1.0)) throw domain_error("kernel_K: mu must be > -1");
    if (!(a > 0.0)) throw domain_error("kernel_K: a must be > 0");
    if (n_points < 1) throw domain_error("kernel_K: N must be >= 1");
    auto eval = [&](int N) {
        const auto& rule = half_hermite_rule(N);
        // (2/a^(mu+1)) sum w_k ln^nu(1+t_k^2/a) t_k^(2 mu + 1)
        long double s = 0.0L;
        for (size_t i = 0; i < rule.t.size(); ++i) {
            const double l1p = std::log1p(rule.t[i] * rule.t[i] / a);
            const double e = rule.log_w[i] + (2.0 * mu_exp + 1.0) * rule.log_t[i] +
                             (nu > 0 ? nu * std::log(l1p) : 0.0);
            if (nu > 0 && l1p <= 0.0) continue;
            s += expl((long double)e);
        }
        return (double)(2.0L * s * expl((long double)(-(mu_exp + 1.0) * std::log(a))));
    };
    double prev = eval(n_points);
    for (int N = n_points * 2; N <= 960; N *= 2) {
        const double cur = eval(N);
        if (std::abs(cur - prev) <= acc.rel_tol * std::abs(cur) * 10.0 + 1e-300) return cur;
        prev = cur;
    }
    throw convergence_error("kernel_K: did not stabilize by N = 960");
}

double kernel_Q_scaled(double alpha, double b, int n) {
    if (!(alpha > 0.0)) throw domain_error("kernel_Q: shape must be > 0");
    if (!(b > 0.0)) throw domain_error("kernel_Q: b must be > 0");
    if (n < 0) throw domain_error("kernel_Q: n must be >= 0");
    const double mlnb = -std::log(b);
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double binom = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
        sum += binom * std::pow(mlnb, n - k) * specfun::gamma_log_derivative_ratio(alpha, k);
    }
    return sum;
}

double kernel_Q(double a, double b, int n, const AccuracySpec& acc) {
    (void)acc;
    if (!(a > -1.0)) throw domain_error("kernel_Q: a must be > -1");
    return kernel_Q_scaled(a + 1.0, b, n) * std::exp(std::lgamma(a + 1.0) - (a + 1.0) * std::log(b));
}

}  // namespace kmcap::kernels
