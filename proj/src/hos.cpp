#include "kmcap/hos.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "kmcap/kernels.hpp"
#include "kmcap/quadrature.hpp"
#include "kmcap/specfun.hpp"

namespace kmcap::hos {

namespace {

constexpr double kLn2 = 0.6931471805599453094;

// ---------------------------------------------------------------------------
// Unified outer-series description: Lambda_n = (1/ln^n 2) sum_j w_j K(a_j),
// where K is the scaled J (exact) or scaled Q (high-SNR) kernel, the weights
// are nonnegative with unit mass, and the shapes step by one.
//
//   iid kappa-mu:        w = Poisson(mu kappa M),         a_j = mu M + j
//   inid kappa-mu:       w = gamma-mixture e_q,           a_j = U + j
//   iid shadowed:        w = NegBin(mM, mu k/(mu k + m)), a_j = mu M + j
//   correlated shadowed: outer weight A delta_k times an inner NegBin(mM+k)
//                        average of K(U + q) — handled separately.
// ---------------------------------------------------------------------------

struct SeriesSpec {
    double b = 1.0;       // exponential rate of the kernel
    double shape0 = 1.0;  // a_0
    std::function<double(int)> weight;  // w_j, consumed in order
};

struct OuterSums {
    double value_nats = 0.0;
    int terms_used = 0;
    double tail = 0.0;
};

// Shared summation loop: spec stopping rule (consecutive relatively-small
// terms) for termination; table-convention count (first term below tol in
// nats after the peak) reported as terms_used.
template <typename TermFn>
OuterSums sum_outer(TermFn&& term_fn, const SeriesControl& ctrl, const char* who) {
    ctrl.validate();
    double sum = 0.0;
    int small = 0;
    std::vector<double> terms;
    terms.reserve(64);
    bool stopped = false;
    for (int j = 0; j < ctrl.max_terms; ++j) {
        const double t = term_fn(j);
        terms.push_back(t);
        sum += t;
        if (std::abs(t) < ctrl.tol * std::max(std::abs(sum), 1e-300)) {
            if (++small >= ctrl.consecutive_small) {
                stopped = true;
                break;
            }
        } else {
            small = 0;
        }
    }
    if (!stopped)
        throw convergence_error(std::string(who) + ": outer series exceeded max_terms");
    // geometric tail bound from the ratio of the last two terms
    double tail = 0.0;
    if (terms.size() >= 2) {
        const double t_last = std::abs(terms[terms.size() - 1]);
        const double t_prev = std::abs(terms[terms.size() - 2]);
        const double r = std::min(0.95, t_prev > 0.0 ? t_last / t_prev : 0.0);
        tail = t_last * r / (1.0 - r);
    }
    // table-convention count: first |term| < tol after the largest term
    size_t peak = 0;
    for (size_t i = 1; i < terms.size(); ++i)
        if (std::abs(terms[i]) > std::abs(terms[peak])) peak = i;
    int count = (int)terms.size();
    for (size_t i = peak; i < terms.size(); ++i) {
        if (std::abs(terms[i]) < ctrl.tol) {
            count = (int)i;
            break;
        }
    }
    return {sum, count, tail};
}

SeriesSpec make_series(const fading::IidKappaMu& m) {
    m.band.validate();
    const double lam = m.band.mu * m.band.kappa * m.M;
    auto w = [lam, cur = 0.0, first = true](int j) mutable {
        if (first) {
            cur = std::exp(-lam);
            first = false;
        } else {
            cur *= lam / j;
        }
        return cur;
    };
    return {m.band.mu * (1.0 + m.band.kappa) / m.band.omega, m.band.mu * m.M, w};
}

SeriesSpec make_series(const fading::IidKappaMuShadowed& m) {
    m.band.validate();
    m.shadow.validate();
    const double z = m.band.mu * m.band.kappa / (m.band.mu * m.band.kappa + m.shadow.m);
    const double mM = m.shadow.m * m.M;
    auto w = [z, mM, cur = 0.0, first = true](int j) mutable {
        if (first) {
            cur = std::exp(mM * std::log1p(-z));
            first = false;
        } else {
            cur *= (mM + j - 1.0) * z / j;
        }
        return cur;
    };
    return {m.band.mu * m.M * (1.0 + m.band.kappa) / m.gamma_bar, m.band.mu * m.M, w};
}

int order_check(int n) {
    if (n < 0) throw domain_error("hos: order n must be >= 0");
    if (n > 6) throw domain_error("hos: order n must be <= 6");
    return n;
}

HosResult finish(OuterSums s, int n, Regime r) {
    HosResult out;
    out.value = s.value_nats / std::pow(kLn2, n);
    out.n = n;
    out.terms_used = s.terms_used;
    out.tail_estimate = s.tail / std::pow(kLn2, n);
    out.regime = r;
    return out;
}

// kernel dispatch shared by exact/high paths
using KernelFn = std::function<double(double /*shape*/)>;

OuterSums run_simple_series(const SeriesSpec& spec, const KernelFn& kern,
                            const SeriesControl& ctrl, const char* who) {
    return sum_outer([&](int j) { return spec.weight(j) * kern(spec.shape0 + j); }, ctrl, who);
}

OuterSums run_corr_series(const fading::CorrelatedKappaMuShadowed& m, const KernelFn& kern,
                          const SeriesControl& ctrl, const char* who) {
    auto co = fading::corr_coeffs(m.bands, m.shadow, m.correlation);
    const double lam = co.lambda_min();
    const double z = lam / (1.0 + lam);
    const double mM = m.shadow.m * co.M();
    // cache kernel values over the inner shape ladder U + q
    std::vector<double> kcache;
    auto kval = [&](int q) {
        while ((int)kcache.size() <= q) kcache.push_back(kern(co.U() + kcache.size()));
        return kcache[q];
    };
    auto term = [&](int k) {
        const double wk = co.weight(k);
        // inner negative-binomial(mM+k, z) average of kernel values
        double w = std::exp((mM + k) * std::log1p(-z));
        double inner = 0.0, mass = 0.0;
        for (int q = 0; q < 100000; ++q) {
            mass += w;
            inner += w * kval(q);
            if (1.0 - mass < 1e-12 && w < 1e-12) break;
            w *= (mM + k + q) * z / (q + 1.0);
        }
        return wk * inner;
    };
    return sum_outer(term, ctrl, who);
}

}  // namespace

ChannelModel with_snr(const ChannelModel& model, double snr_linear) {
    if (!(snr_linear > 0.0)) throw domain_error("with_snr: SNR must be > 0");
    ChannelModel out = model;
    std::visit(
        [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, fading::IidKappaMu>) {
                m.band.omega = snr_linear;
            } else if constexpr (std::is_same_v<T, fading::InidKappaMu>) {
                m.bands.front().omega = snr_linear;
            } else {
                m.gamma_bar = snr_linear;
            }
        },
        out);
    return out;
}

HosResult hos_exact(const ChannelModel& model, int n, const SeriesControl& ctrl) {
    order_check(n);
    fading::validate(model);
    if (n == 0) return {1.0, 0, 0, 0.0, Regime::exact};
    return std::visit(
        [&](const auto& m) -> HosResult {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, fading::IidKappaMu> ||
                          std::is_same_v<T, fading::IidKappaMuShadowed>) {
                SeriesSpec spec = make_series(m);
                kernels::JKernelContext ctx(spec.b, n, AccuracySpec{1e-11, 10000});
                KernelFn kern = [&](double a) { return ctx.jhat(a, n); };
                return finish(run_simple_series(spec, kern, ctrl, "hos_exact"), n, Regime::exact);
            } else if constexpr (std::is_same_v<T, fading::InidKappaMu>) {
                auto co = fading::inid_coeffs(m.bands, m.xi, m.beta);
                const double b = 1.0 / (2.0 * co.beta());
                SeriesSpec spec{b, co.U(), [&co](int q) { return co.mix(q); }};
                kernels::JKernelContext ctx(b, n, AccuracySpec{1e-11, 10000});
                KernelFn kern = [&](double a) { return ctx.jhat(a, n); };
                return finish(run_simple_series(spec, kern, ctrl, "hos_exact"), n, Regime::exact);
            } else {
                const double b = [&] {
                    auto co = fading::corr_coeffs(m.bands, m.shadow, m.correlation);
                    return co.eta() / m.gamma_bar;
                }();
                kernels::JKernelContext ctx(b, n, AccuracySpec{1e-11, 10000});
                KernelFn kern = [&](double a) { return ctx.jhat(a, n); };
                return finish(run_corr_series(m, kern, ctrl, "hos_exact"), n, Regime::exact);
            }
        },
        model);
}

HosResult ergodic_capacity(const ChannelModel& model, const SeriesControl& ctrl) {
    return hos_exact(model, 1, ctrl);
}

double ergodic_capacity_iid_km_gamma_chain(const fading::IidKappaMu& model,
                                           const SeriesControl& ctrl) {
    model.band.validate();
    SeriesControl c = ctrl;
    c.validate();
    const double b = model.band.mu * (1.0 + model.band.kappa) / model.band.omega;
    const double lam = model.band.mu * model.band.kappa * model.M;
    const long long a0 = (long long)std::llround(model.band.mu * model.M);
    if (std::abs(model.band.mu * model.M - (double)a0) > 1e-9)
        throw domain_error("gamma_chain: needs integer mu*M");
    const double lnb = std::log(b);
    // per shape a: sum_k C(a-1,k)(-1)^(a-k-1) b^(a-1-k) [dGamma/dalpha - ln b Gamma](k+1, b),
    // scaled by 1/Gamma(a); the bracket is the G-function column of the chain.
    AccuracySpec acc{1e-12, 20000};
    std::vector<double> dg, g;  // scaled: e^b * values
    auto extend_to = [&](long long amax) {
        while ((long long)g.size() < amax) {
            const double alpha = (double)g.size() + 1.0;
            g.push_back(specfun::upper_inc_gamma_scaled(alpha, b, acc));
            dg.push_back(specfun::log_power_upper_gamma_scaled(alpha, b, 1, acc));
        }
    };
    double sum = 0.0, w = std::exp(-lam);
    int small = 0;
    for (int i = 0; i < c.max_terms; ++i) {
        const long long a = a0 + i;
        extend_to(a);
        long double acc_sum = 0.0L;
        for (long long k = 0; k < a; ++k) {
            // Jhat(a,b,1) = sum_k (-1)^(a-1-k) b^(a-1-k) / (Gamma(a-k) Gamma(k+1))
            //               * e^b [dGamma/dalpha - ln b Gamma](k+1, b)
            const long double lmag = -lgammal((long double)(a - k)) - lgammal((long double)k + 1) +
                                     (long double)(a - 1 - k) * lnb;
            const long double bracket = (long double)dg[k] - (long double)lnb * (long double)g[k];
            long double term = expl(lmag) * bracket;
            if (((a - 1 - k) % 2) != 0) term = -term;
            acc_sum += term;
        }
        const double jhat1 = (double)acc_sum;  // equals Jhat(a, b, 1)
        const double t = w * jhat1;
        sum += t;
        if (std::abs(t) < c.tol * 1e-3 * std::max(std::abs(sum), 1e-300)) {
            if (++small >= c.consecutive_small) break;
        } else {
            small = 0;
        }
        w *= lam / (i + 1.0);
    }
    return sum / kLn2;
}

HosResult hos_high_snr(const ChannelModel& model, int n, const SeriesControl& ctrl) {
    order_check(n);
    fading::validate(model);
    if (n == 0) return {1.0, 0, 0, 0.0, Regime::high_snr};
    if (n > 4) throw domain_error("hos_high_snr: n must be <= 4 (gamma derivative chain)");
    return std::visit(
        [&](const auto& m) -> HosResult {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, fading::IidKappaMu> ||
                          std::is_same_v<T, fading::IidKappaMuShadowed>) {
                SeriesSpec spec = make_series(m);
                KernelFn kern = [&](double a) { return kernels::kernel_Q_scaled(a, spec.b, n); };
                return finish(run_simple_series(spec, kern, ctrl, "hos_high_snr"), n,
                              Regime::high_snr);
            } else if constexpr (std::is_same_v<T, fading::InidKappaMu>) {
                auto co = fading::inid_coeffs(m.bands, m.xi, m.beta);
                const double b = 1.0 / (2.0 * co.beta());
                SeriesSpec spec{b, co.U(), [&co](int q) { return co.mix(q); }};
                KernelFn kern = [&](double a) { return kernels::kernel_Q_scaled(a, b, n); };
                return finish(run_simple_series(spec, kern, ctrl, "hos_high_snr"), n,
                              Regime::high_snr);
            } else {
                auto co = fading::corr_coeffs(m.bands, m.shadow, m.correlation);
                const double b = co.eta() / m.gamma_bar;
                KernelFn kern = [&](double a) { return kernels::kernel_Q_scaled(a, b, n); };
                return finish(run_corr_series(m, kern, ctrl, "hos_high_snr"), n, Regime::high_snr);
            }
        },
        model);
}

// ---------------------------------------------------------------------------
// low-SNR path: n! sum_k S(k+n, n)/(k+n)! E[gamma^(k+n)] / ln^n 2, with the
// model moments in their per-family closed forms.
// ---------------------------------------------------------------------------

namespace {

// E[gamma^N] cast as exp-of-log for each family; all are finite positive.
class MomentProvider {
  public:
    explicit MomentProvider(const ChannelModel& model) : model_(model) {
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, fading::InidKappaMu>) {
                    co_inid_.emplace(fading::inid_coeffs(m.bands, m.xi, m.beta));
                } else if constexpr (std::is_same_v<T, fading::CorrelatedKappaMuShadowed>) {
                    co_corr_.emplace(fading::corr_coeffs(m.bands, m.shadow, m.correlation));
                }
            },
            model_);
    }

    double operator()(int N) const {
        return std::visit(
            [&](const auto& m) -> double {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, fading::IidKappaMu>) {
                    // Poisson-weighted gamma moments; Kummer-collapsed finite sum:
                    // E = b^-N (muM)_N e^-lam 1F1(N+muM; muM; lam) = b^-N (muM)_N 1F1(-N; muM; -lam)
                    const double b = m.band.mu * (1.0 + m.band.kappa) / m.band.omega;
                    const double lam = m.band.mu * m.band.kappa * m.M;
                    const double muM = m.band.mu * m.M;
                    return std::exp(-N * std::log(b) + std::lgamma(muM + N) - std::lgamma(muM)) *
                           kummer_poly(N, muM, lam);
                } else if constexpr (std::is_same_v<T, fading::IidKappaMuShadowed>) {
                    // 2F1 form: (m/(m+k mu))^mM (muM)_N b^-N 2F1(mM, N+muM; muM; mu k/(mu k + m))
                    const double muM = m.band.mu * m.M;
                    const double mM = m.shadow.m * m.M;
                    const double x = m.band.mu * m.band.kappa / (m.band.mu * m.band.kappa + m.shadow.m);
                    const double b = muM * (1.0 + m.band.kappa) / m.gamma_bar;
                    return std::exp(mM * std::log1p(-x) - N * std::log(b) + std::lgamma(muM + N) -
                                    std::lgamma(muM)) *
                           specfun::hyp2f1(mM, N + muM, muM, x);
                } else if constexpr (std::is_same_v<T, fading::InidKappaMu>) {
                    // elementary: sum_q e_q (U+q)_N (2 beta)^N
                    const auto& co = *co_inid_;
                    const double l2b = std::log(2.0 * co.beta());
                    double s = 0.0, mass = 0.0;
                    for (int q = 0; q < 200000; ++q) {
                        const double w = co.mix(q);
                        mass += w;
                        s += w * std::exp(N * l2b + std::lgamma(co.U() + q + N) -
                                          std::lgamma(co.U() + q));
                        if (1.0 - mass < 1e-13 && w < 1e-13) break;
                    }
                    return s;
                } else {
                    // sum_k A delta_k (1+lam)^(p...) 2F1 collapsed: weights x NB moments
                    const auto& co = *co_corr_;
                    const double lam = co.lambda_min();
                    const double z = lam / (1.0 + lam);
                    const double mM = m.shadow.m * co.M();
                    const double b = co.eta() / m.gamma_bar;
                    double s = 0.0, mass = 0.0;
                    for (int k = 0; k < 200000; ++k) {
                        const double wk = co.weight(k);
                        mass += wk;
                        if (wk > 0.0) {
                            // E over inner NB(mM+k, z) of (U+q)_N / b^N
                            double w = std::exp((mM + k) * std::log1p(-z));
                            double inner = 0.0, imass = 0.0;
                            for (int q = 0; q < 200000; ++q) {
                                imass += w;
                                inner += w * std::exp(-N * std::log(b) +
                                                      std::lgamma(co.U() + q + N) -
                                                      std::lgamma(co.U() + q));
                                if (1.0 - imass < 1e-13 && w < 1e-13) break;
                                w *= (mM + k + q) * z / (q + 1.0);
                            }
                            s += wk * inner;
                        }
                        if (1.0 - mass < 1e-13 && wk < 1e-13) break;
                    }
                    return s;
                }
            },
            model_);
    }

  private:
    // 1F1(-N; b; -x): finite positive Kummer polynomial
    static double kummer_poly(int N, double b, double x) {
        double term = 1.0, sum = 1.0;
        for (int q = 0; q < N; ++q) {
            term *= (double)(N - q) / ((b + q) * (q + 1.0)) * x;
            sum += term;
        }
        return sum;
    }

    ChannelModel model_;
    std::optional<fading::InidCoeffs> co_inid_;
    std::optional<fading::CorrCoeffs> co_corr_;
};

}  // namespace

HosResult hos_low_snr(const ChannelModel& model, int n, const SeriesControl& ctrl) {
    order_check(n);
    fading::validate(model);
    ctrl.validate();
    if (n == 0) return {1.0, 0, 0, 0.0, Regime::low_snr};
    MomentProvider moments(model);
    double nfact = 1.0;
    for (int i = 2; i <= n; ++i) nfact *= i;
    double sum = 0.0;
    int small = 0, growth = 0;
    double prev_abs = std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    for (int k = 0; k < ctrl.max_terms; ++k) {
        const int N = k + n;
        const double coeff = specfun::stirling_log_coeff(N, n);  // n! s(N,n)/N!
        const double t = coeff * moments(N);
        terms.push_back(t);
        sum += t;
        const double at = std::abs(t);
        if (at > prev_abs) {
            if (++growth >= 5)
                throw convergence_error(
                    "hos_low_snr: series diverges at this SNR (asymptote valid near zero only)");
        } else {
            growth = 0;
        }
        prev_abs = at;
        if (at < ctrl.tol * std::max(std::abs(sum), 1e-300)) {
            if (++small >= ctrl.consecutive_small) {
                // table-convention count
                size_t peak = 0;
                for (size_t i = 1; i < terms.size(); ++i)
                    if (std::abs(terms[i]) > std::abs(terms[peak])) peak = i;
                int count = (int)terms.size();
                for (size_t i = peak; i < terms.size(); ++i)
                    if (std::abs(terms[i]) < ctrl.tol) {
                        count = (int)i;
                        break;
                    }
                const double r = std::min(0.9, at / std::max(prev_abs, 1e-300));
                HosResult out;
                out.value = sum / std::pow(kLn2, n);
                out.n = n;
                out.terms_used = count;
                out.tail_estimate = at * r / (1.0 - r) / std::pow(kLn2, n);
                out.regime = Regime::low_snr;
                return out;
            }
        } else {
            small = 0;
        }
    }
    throw convergence_error("hos_low_snr: series exceeded max_terms");
}

HosResult hos_oracle(const ChannelModel& model, int n, double quad_tol) {
    order_check(n);
    fading::validate(model);
    if (!(quad_tol > 0.0)) throw domain_error("hos_oracle: quad_tol must be > 0");
    if (n == 0) return {1.0, 0, 0, 0.0, Regime::oracle};
    fading::SeriesControl pctrl;
    pctrl.tol = std::min(quad_tol * 1e-2, 1e-7);
    pctrl.max_terms = 4000;
    const double mean = fading::aggregate_mean_snr(model);
    auto integrand = [&](double g) {
        const double l = std::log1p(g) / kLn2;
        return std::pow(l, n) * fading::pdf(model, g, pctrl);
    };
    double hi = std::max(50.0 * mean, 50.0);
    double value = integrate(integrand, 0.0, hi, quad_tol * 0.1, 20000);
    // extend the upper cut until the increment is negligible (tail bound)
    double tail = 0.0;
    for (int rounds = 0; rounds < 40; ++rounds) {
        const double inc = integrate(integrand, hi, 2.0 * hi, quad_tol * 0.1, 20000);
        value += inc;
        hi *= 2.0;
        if (std::abs(inc) < 0.25 * quad_tol * std::max(std::abs(value), 1e-300)) {
            tail = std::abs(inc);
            break;
        }
        if (rounds == 39) throw convergence_error("hos_oracle: tail bound not reached");
    }
    HosResult out;
    out.value = value;
    out.n = n;
    out.terms_used = 0;
    out.tail_estimate = tail;
    out.regime = Regime::oracle;
    return out;
}

std::vector<ConvergenceRow> convergence_report(const ChannelModel& model, int n,
                                               const std::vector<double>& snr_grid_db,
                                               const SeriesControl& ctrl) {
    std::vector<ConvergenceRow> rows;
    rows.reserve(snr_grid_db.size());
    for (double db : snr_grid_db) {
        ConvergenceRow row;
        row.snr_db = db;
        try {
            const auto res = hos_exact(with_snr(model, std::pow(10.0, db / 10.0)), n, ctrl);
            row.terms_used = res.terms_used;
            row.value = res.value;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace kmcap::hos
