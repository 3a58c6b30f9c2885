#include "kmcap/fading.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "kmcap/specfun.hpp"

namespace kmcap::fading {

namespace {
std::mutex g_lazy_mutex;  // guards all lazy coefficient extensions

double gamma_log_pdf(double shape, double rate, double x) {
    return shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - std::lgamma(shape);
}

// Upper bound on the Gamma(shape, rate) density at fixed x over all shapes:
// the maximizing shape puts the mode at x, where the density is ~ rate/sqrt(2 pi rate x).
double gamma_pdf_shape_bound(double rate, double x) {
    return rate / std::sqrt(2.0 * M_PI * std::max(rate * x, 0.5));
}

// Sum of w_q * GammaPDF(shape0 + q, rate)(x) for nonnegative weights with
// total mass <= 1. `next_weight` yields w_q in order. Terminates once the
// remaining weight mass cannot matter at the requested tolerance.
template <typename WeightFn>
double mixture_pdf(WeightFn&& next_weight, double shape0, double rate, double x,
                   const SeriesControl& ctrl, const char* who) {
    const double gmax = gamma_pdf_shape_bound(rate, x);
    double sum = 0.0, mass = 0.0;
    const int cap = std::max(ctrl.max_terms * 40, 20000);
    for (int q = 0; q < cap; ++q) {
        const double w = next_weight(q);
        if (w < 0.0) throw convergence_error(std::string(who) + ": negative mixture weight (bad xi/beta?)");
        mass += w;
        if (w > 0.0) sum += w * std::exp(gamma_log_pdf(shape0 + q, rate, x));
        const double remaining = std::max(0.0, 1.0 - mass) * gmax;
        if (remaining < ctrl.tol * 1e-4 * sum + 1e-300) return sum;
    }
    throw convergence_error(std::string(who) + ": mixture did not exhaust its mass");
}
}  // namespace

void BandParams::validate() const {
    if (!(kappa >= 0.0)) throw domain_error("BandParams: kappa must be >= 0");
    if (!(mu > 0.0)) throw domain_error("BandParams: mu must be > 0");
    if (!(omega > 0.0)) throw domain_error("BandParams: omega must be > 0");
}

void ShadowParams::validate() const {
    if (!(m > 0.0)) throw domain_error("ShadowParams: m must be > 0");
}

void SeriesControl::validate() const {
    if (!(tol > 0.0)) throw domain_error("SeriesControl: tol must be > 0");
    if (max_terms < 1) throw domain_error("SeriesControl: max_terms must be >= 1");
    if (consecutive_small < 1) throw domain_error("SeriesControl: consecutive_small must be >= 1");
}

std::vector<std::vector<double>> CorrelationSpec::build_c_matrix(int M) const {
    std::vector<std::vector<double>> C(M, std::vector<double>(M, 0.0));
    for (int p = 0; p < M; ++p) C[p][p] = 1.0;
    if (rho_matrix) {
        const auto& R = *rho_matrix;
        if ((int)R.size() != M) throw domain_error("CorrelationSpec: matrix size mismatch");
        for (int p = 0; p < M; ++p) {
            if ((int)R[p].size() != M) throw domain_error("CorrelationSpec: matrix not square");
            for (int q = 0; q < M; ++q) {
                const double r = R[p][q];
                if (!(r >= 0.0 && r <= 1.0))
                    throw domain_error("CorrelationSpec: rho entries must lie in [0,1]");
                if (p == q && std::abs(r - 1.0) > 1e-12)
                    throw domain_error("CorrelationSpec: diagonal must be 1");
                if (std::abs(r - R[q][p]) > 1e-12)
                    throw domain_error("CorrelationSpec: matrix must be symmetric");
                if (p != q) C[p][q] = std::sqrt(r);
            }
        }
    } else if (exponential_rho) {
        const double rho = *exponential_rho;
        if (!(rho >= 0.0 && rho <= 1.0))
            throw domain_error("CorrelationSpec: exponential rho must lie in [0,1]");
        for (int p = 0; p < M; ++p)
            for (int q = 0; q < M; ++q)
                if (p != q) C[p][q] = std::sqrt(std::pow(rho, std::abs(p - q)));
    } else {
        throw domain_error("CorrelationSpec: no correlation given");
    }
    return C;
}

void CorrelationSpec::validate(int M) const { (void)build_c_matrix(M); }

void validate(const ChannelModel& model) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IidKappaMu>) {
                m.band.validate();
                if (m.M < 1) throw domain_error("IidKappaMu: M must be >= 1");
            } else if constexpr (std::is_same_v<T, InidKappaMu>) {
                if (m.bands.empty()) throw domain_error("InidKappaMu: at least one band");
                for (const auto& b : m.bands) b.validate();
            } else if constexpr (std::is_same_v<T, IidKappaMuShadowed>) {
                m.band.validate();
                m.shadow.validate();
                if (m.M < 1) throw domain_error("IidKappaMuShadowed: M must be >= 1");
                if (!(m.gamma_bar > 0.0)) throw domain_error("gamma_bar must be > 0");
            } else {
                if (m.bands.empty()) throw domain_error("CorrelatedKappaMuShadowed: bands empty");
                for (const auto& b : m.bands) b.validate();
                m.shadow.validate();
                m.correlation.validate((int)m.bands.size());
                if (!(m.gamma_bar > 0.0)) throw domain_error("gamma_bar must be > 0");
            }
        },
        model);
}

int band_count(const ChannelModel& model) {
    return std::visit(
        [](const auto& m) -> int {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IidKappaMu>) return m.M;
            else if constexpr (std::is_same_v<T, InidKappaMu>) return (int)m.bands.size();
            else if constexpr (std::is_same_v<T, IidKappaMuShadowed>) return m.M;
            else return (int)m.bands.size();
        },
        model);
}

double aggregate_mean_snr(const ChannelModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IidKappaMu>) return m.M * m.band.omega;
            else if constexpr (std::is_same_v<T, InidKappaMu>) {
                double s = 0.0;
                for (const auto& b : m.bands) s += b.omega;
                return s;
            } else
                return m.gamma_bar;  // shadowed models parameterize the total directly
        },
        model);
}

// ---------------------------------------------------------------------------
// InidCoeffs
// ---------------------------------------------------------------------------

InidCoeffs::InidCoeffs(std::vector<BandParams> bands, double xi, double beta, int k_max)
    : bands_(std::move(bands)), xi_(xi), beta_(beta) {
    if (bands_.empty()) throw domain_error("InidCoeffs: no bands");
    U_ = 0.0;
    for (const auto& b : bands_) {
        b.validate();
        U_ += b.mu;
        chi_.push_back(2.0 * b.mu * b.kappa);
        a_.push_back(b.omega / (2.0 * b.mu * (1.0 + b.kappa)));
    }
    if (!(xi_ > 0.0) || !(beta_ > 0.0)) throw domain_error("InidCoeffs: xi, beta must be > 0");
    for (double ai : a_) nh_.push_back(1.0 - beta_ / ai);

    // mixture seed: e_0 = prod (beta/a_i)^mu_i * exp(-sum chi_i / 2)
    double le0 = 0.0;
    for (size_t i = 0; i < a_.size(); ++i)
        le0 += bands_[i].mu * std::log(beta_ / a_[i]) - 0.5 * chi_[i];
    mix_.push_back(std::exp(le0));
    mix_mass_ = mix_[0];
    g_.push_back(0.0);  // g is 1-indexed

    // c_0 of the Laguerre form
    double lc0 = U_ * std::log(U_ / xi_);
    for (size_t i = 0; i < a_.size(); ++i) {
        const double B = beta_ * xi_ + a_[i] * (U_ - xi_);
        lc0 += -0.5 * chi_[i] * a_[i] * (U_ - xi_) / B -
               bands_[i].mu * std::log(1.0 + (a_[i] / beta_) * (U_ / xi_ - 1.0));
    }
    c_.push_back(std::exp(lc0));

    if (k_max > 0) {
        extend_c(k_max);
        extend_mix(k_max);
    }
}

double InidCoeffs::d(int j) const {
    if (j < 1) throw domain_error("InidCoeffs::d: j must be >= 1");
    double s1 = 0.0, s2 = 0.0;
    for (size_t i = 0; i < a_.size(); ++i) {
        const double B = beta_ * xi_ + a_[i] * (U_ - xi_);
        const double r = xi_ * (beta_ - a_[i]) / B;
        s1 += chi_[i] * a_[i] * std::pow(beta_ - a_[i], j - 1) * std::pow(xi_ / B, j + 1);
        s2 += bands_[i].mu * std::pow(r, j);
    }
    return -0.5 * j * beta_ * U_ / xi_ * s1 + s2;
}

void InidCoeffs::extend_c(int k) const {
    std::lock_guard<std::mutex> lock(g_lazy_mutex);
    while ((int)c_.size() <= k) {
        const int kk = (int)c_.size();
        double s = 0.0;
        for (int j = 0; j < kk; ++j) s += c_[j] * d(kk - j);
        const double ck = s / kk;
        if (std::abs(ck) > std::abs(c_.back())) {
            if (++c_growth_streak_ >= 10) divergence_ = true;
        } else {
            c_growth_streak_ = 0;
        }
        c_.push_back(ck);
    }
}

double InidCoeffs::c(int k) const {
    if (k < 0) throw domain_error("InidCoeffs::c: k must be >= 0");
    if (k >= (int)c_.size()) extend_c(k);
    return c_[k];
}

bool InidCoeffs::divergence_flagged() const { return divergence_; }

void InidCoeffs::extend_mix(int q) const {
    std::lock_guard<std::mutex> lock(g_lazy_mutex);
    while ((int)g_.size() <= q) {
        const int j = (int)g_.size();
        double s = 0.0;
        for (size_t i = 0; i < a_.size(); ++i)
            s += bands_[i].mu * std::pow(nh_[i], j) +
                 0.5 * chi_[i] * j * (beta_ / a_[i]) * std::pow(nh_[i], j - 1);
        g_.push_back(s);
    }
    while ((int)mix_.size() <= q) {
        const int qq = (int)mix_.size();
        double s = 0.0;
        for (int j = 1; j <= qq; ++j) s += g_[j] * mix_[qq - j];
        mix_.push_back(s / qq);
        mix_mass_ += mix_.back();
    }
}

double InidCoeffs::mix(int q) const {
    if (q < 0) throw domain_error("InidCoeffs::mix: q must be >= 0");
    if (q >= (int)mix_.size() || (int)g_.size() <= q) extend_mix(q);
    return mix_[q];
}

int InidCoeffs::mix_terms_for_tail(double tol, int cap) const {
    for (int q = 0; q < cap; ++q) {
        (void)mix(q);
        if (1.0 - mix_mass_ <= tol) return q + 1;
    }
    return cap;
}

InidCoeffs inid_coeffs(const std::vector<BandParams>& bands, std::optional<double> xi,
                       std::optional<double> beta, int k_max) {
    double U = 0.0, amin = 1e300;
    for (const auto& b : bands) {
        b.validate();
        U += b.mu;
        amin = std::min(amin, b.omega / (2.0 * b.mu * (1.0 + b.kappa)));
    }
    return InidCoeffs(bands, xi.value_or(U), beta.value_or(amin), k_max);
}

// ---------------------------------------------------------------------------
// CorrCoeffs
// ---------------------------------------------------------------------------

std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> a, double rel_tol) {
    const int n = (int)a.size();
    for (auto& row : a)
        if ((int)row.size() != n) throw domain_error("symmetric_eigenvalues: matrix not square");
    for (int sweep = 0; sweep < 120; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (int p = 0; p < n; ++p) {
            diag += std::abs(a[p][p]);
            for (int q = p + 1; q < n; ++q) off += std::abs(a[p][q]);
        }
        if (off <= rel_tol * std::max(diag, 1e-300)) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) <= 1e-300) continue;
                const double theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const double app = a[p][p], aqq = a[q][q], apq = a[p][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = a[q][p] = 0.0;
                for (int j = 0; j < n; ++j) {
                    if (j == p || j == q) continue;
                    const double ajp = a[j][p], ajq = a[j][q];
                    a[j][p] = a[p][j] = c * ajp - s * ajq;
                    a[j][q] = a[q][j] = s * ajp + c * ajq;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end());
    return ev;
}

CorrCoeffs::CorrCoeffs(std::vector<BandParams> bands, ShadowParams shadow, CorrelationSpec corr)
    : bands_(std::move(bands)), m_(shadow.m) {
    shadow.validate();
    const int M = (int)bands_.size();
    if (M < 1) throw domain_error("CorrCoeffs: no bands");
    C_ = corr.build_c_matrix(M);
    U_ = 0.0;
    eta_ = 0.0;
    std::vector<double> dsqrt(M);
    for (int i = 0; i < M; ++i) {
        bands_[i].validate();
        if (bands_[i].kappa < 1e-9)
            throw domain_error(
                "CorrCoeffs: kappa = 0 makes diag(mu_i kappa_i / m) singular; use kappa >= 1e-6");
        U_ += bands_[i].mu;
        eta_ += bands_[i].mu * (1.0 + bands_[i].kappa);
        dsqrt[i] = std::sqrt(bands_[i].mu * bands_[i].kappa / m_);
    }
    // eigenvalues of DC via the symmetric similarity D^(1/2) C D^(1/2)
    std::vector<std::vector<double>> S(M, std::vector<double>(M));
    for (int p = 0; p < M; ++p)
        for (int q = 0; q < M; ++q) S[p][q] = dsqrt[p] * C_[p][q] * dsqrt[q];
    lambdas_ = symmetric_eigenvalues(S);
    if (lambdas_.front() <= 0.0)
        throw domain_error("CorrCoeffs: correlation matrix is not positive definite");
    lambda_min_ = lambdas_.front();
    double lA = 0.0;
    for (double l : lambdas_) lA += m_ * std::log(lambda_min_ / l);
    A_ = std::exp(lA);
    for (double l : lambdas_) powsum_base_.push_back(1.0 - lambda_min_ / l);
    delta_.push_back(1.0);
}

void CorrCoeffs::extend(int k) const {
    std::lock_guard<std::mutex> lock(g_lazy_mutex);
    // powsums_[q] = sum_i (1 - lambda/lambda_i)^q, built incrementally
    while ((int)delta_.size() <= k) {
        const int kk = (int)delta_.size();
        while ((int)powsums_.size() <= kk) {
            const int q = (int)powsums_.size();
            if (q == 0) {
                powsums_.push_back((double)powsum_base_.size());
                cur_pow_ = std::vector<double>(powsum_base_.size(), 1.0);
            } else {
                double s = 0.0;
                for (size_t i = 0; i < powsum_base_.size(); ++i) {
                    cur_pow_[i] *= powsum_base_[i];
                    s += cur_pow_[i];
                }
                powsums_.push_back(s);
            }
        }
        double s = 0.0;
        for (int q = 1; q <= kk; ++q) s += powsums_[q] * delta_[kk - q];
        delta_.push_back(m_ / kk * s);
    }
}

double CorrCoeffs::delta(int k) const {
    if (k < 0) throw domain_error("CorrCoeffs::delta: k must be >= 0");
    if (k >= (int)delta_.size()) extend(k);
    return delta_[k];
}

double CorrCoeffs::D(int k) const {
    const double mM = m_ * M();
    return delta(k) * std::exp(-(mM + k) * std::log(lambda_min_) - std::lgamma(U_) -
                               (mM + k) * std::log1p(1.0 / lambda_min_));
}

double CorrCoeffs::weight(int k) const { return A_ * delta(k); }

CorrCoeffs corr_coeffs(const std::vector<BandParams>& bands, const ShadowParams& shadow,
                       const CorrelationSpec& correlation) {
    return CorrCoeffs(bands, shadow, correlation);
}

// ---------------------------------------------------------------------------
// PDFs
// ---------------------------------------------------------------------------

double pdf_iid_km(double gamma, const BandParams& band, int M, const SeriesControl& ctrl) {
    band.validate();
    ctrl.validate();
    if (M < 1) throw domain_error("pdf_iid_km: M must be >= 1");
    if (gamma < 0.0) throw domain_error("pdf_iid_km: gamma must be >= 0");
    if (gamma == 0.0) gamma = 1e-300;
    const double rate = band.mu * (1.0 + band.kappa) / band.omega;
    const double lam = band.mu * band.kappa * M;
    double lw = -lam;
    double w = std::exp(lw);
    return mixture_pdf(
        [&, first = true](int q) mutable {
            if (!first) w *= lam / q;
            first = false;
            return w;
        },
        band.mu * M, rate, gamma, ctrl, "pdf_iid_km");
}

double pdf_inid_km(double gamma, const InidCoeffs& coeffs, const SeriesControl& ctrl) {
    ctrl.validate();
    if (gamma < 0.0) throw domain_error("pdf_inid_km: gamma must be >= 0");
    if (gamma == 0.0) gamma = 1e-300;
    const double rate = 1.0 / (2.0 * coeffs.beta());
    return mixture_pdf([&](int q) { return coeffs.mix(q); }, coeffs.U(), rate, gamma, ctrl,
                       "pdf_inid_km");
}

double pdf_iid_kms(double gamma, const BandParams& band, const ShadowParams& shadow, int M,
                   double gamma_bar, const SeriesControl& ctrl) {
    band.validate();
    shadow.validate();
    ctrl.validate();
    if (M < 1) throw domain_error("pdf_iid_kms: M must be >= 1");
    if (!(gamma_bar > 0.0)) throw domain_error("pdf_iid_kms: gamma_bar must be > 0");
    if (gamma < 0.0) throw domain_error("pdf_iid_kms: gamma must be >= 0");
    if (gamma == 0.0) gamma = 1e-300;
    const double rate = band.mu * M * (1.0 + band.kappa) / gamma_bar;
    const double z = band.mu * band.kappa / (band.mu * band.kappa + shadow.m);
    const double mM = shadow.m * M;
    double w = std::exp(mM * std::log1p(-z));
    return mixture_pdf(
        [&, first = true](int q) mutable {
            if (!first) w *= (mM + q - 1.0) * z / q;
            first = false;
            return w;
        },
        band.mu * M, rate, gamma, ctrl, "pdf_iid_kms");
}

double pdf_corr_kms(double gamma, const CorrCoeffs& coeffs, double gamma_bar,
                    const ShadowParams& shadow, int M, const SeriesControl& ctrl) {
    ctrl.validate();
    if (M != coeffs.M()) throw domain_error("pdf_corr_kms: M mismatch");
    if (std::abs(shadow.m - coeffs.m()) > 1e-12) throw domain_error("pdf_corr_kms: m mismatch");
    if (!(gamma_bar > 0.0)) throw domain_error("pdf_corr_kms: gamma_bar must be > 0");
    if (gamma < 0.0) throw domain_error("pdf_corr_kms: gamma must be >= 0");
    if (gamma == 0.0) gamma = 1e-300;
    const double rate = coeffs.eta() / gamma_bar;
    const double lam = coeffs.lambda_min();
    const double z = lam / (1.0 + lam);
    const double mM = shadow.m * M;
    const double gmax = gamma_pdf_shape_bound(rate, gamma);

    double sum = 0.0, outer_mass = 0.0;
    const int cap = std::max(ctrl.max_terms * 40, 40000);
    for (int k = 0; k < cap; ++k) {
        const double wk = coeffs.weight(k);
        outer_mass += wk;
        if (wk > 0.0) {
            // inner: negative-binomial(mM+k, z) mixture over shapes U+q
            double w = std::exp((mM + k) * std::log1p(-z));
            double inner = 0.0, mass = 0.0;
            for (int q = 0; q < 1000000; ++q) {
                mass += w;
                inner += w * std::exp(gamma_log_pdf(coeffs.U() + q, rate, gamma));
                if ((1.0 - mass) * gmax < ctrl.tol * 1e-4 * std::max(inner, sum) + 1e-300) break;
                w *= (mM + k + q) * z / (q + 1.0);
            }
            sum += wk * inner;
        }
        if ((1.0 - outer_mass) * gmax < ctrl.tol * 1e-4 * sum + 1e-300) return sum;
    }
    throw convergence_error("pdf_corr_kms: outer series did not exhaust its mass");
}

double pdf(const ChannelModel& model, double gamma, const SeriesControl& ctrl) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IidKappaMu>) {
                return pdf_iid_km(gamma, m.band, m.M, ctrl);
            } else if constexpr (std::is_same_v<T, InidKappaMu>) {
                auto co = inid_coeffs(m.bands, m.xi, m.beta);
                return pdf_inid_km(gamma, co, ctrl);
            } else if constexpr (std::is_same_v<T, IidKappaMuShadowed>) {
                return pdf_iid_kms(gamma, m.band, m.shadow, m.M, m.gamma_bar, ctrl);
            } else {
                auto co = corr_coeffs(m.bands, m.shadow, m.correlation);
                return pdf_corr_kms(gamma, co, m.gamma_bar, m.shadow, (int)m.bands.size(), ctrl);
            }
        },
        model);
}

}  // namespace kmcap::fading
