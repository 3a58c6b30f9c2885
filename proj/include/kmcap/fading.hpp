#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "kmcap/accuracy.hpp"

namespace kmcap::fading {

/// Per-band kappa-mu parameters. `omega` is the band's average SNR (linear).
struct BandParams {
    double kappa = 1.0;  ///< dominant-to-scattered power ratio, >= 0
    double mu = 1.0;     ///< number-of-clusters parameter, > 0 (real)
    double omega = 1.0;  ///< average SNR of the band, > 0

    void validate() const;
};

/// Nakagami-m power shadowing of the dominant components.
struct ShadowParams {
    double m = 1.0;  ///< shadowing shape, > 0

    void validate() const;
};

/// Dominant-component correlation. Either a full symmetric matrix of rho_pq
/// (unit diagonal) or an exponential profile rho_pq = rho^|p-q|.
struct CorrelationSpec {
    std::optional<std::vector<std::vector<double>>> rho_matrix;
    std::optional<double> exponential_rho;

    /// The M x M matrix C of Gaussian correlations, entries sqrt(rho_pq).
    std::vector<std::vector<double>> build_c_matrix(int M) const;
    void validate(int M) const;
};

struct IidKappaMu {
    BandParams band;
    int M = 1;
};

struct InidKappaMu {
    std::vector<BandParams> bands;
    std::optional<double> xi;    ///< expansion regrouping parameter; default U
    std::optional<double> beta;  ///< expansion scale/2; default min_i a_i
};

struct IidKappaMuShadowed {
    BandParams band;  ///< band.omega unused; gamma_bar carries the SNR
    ShadowParams shadow;
    int M = 1;
    double gamma_bar = 1.0;  ///< average SNR of the aggregate sum (linear)
};

struct CorrelatedKappaMuShadowed {
    std::vector<BandParams> bands;  ///< per-band kappa, mu; omegas unused
    ShadowParams shadow;
    CorrelationSpec correlation;
    double gamma_bar = 1.0;  ///< average SNR of the aggregate sum (linear)
};

using ChannelModel =
    std::variant<IidKappaMu, InidKappaMu, IidKappaMuShadowed, CorrelatedKappaMuShadowed>;

void validate(const ChannelModel& model);
int band_count(const ChannelModel& model);
/// Mean of the aggregate SNR implied by the model parameters.
double aggregate_mean_snr(const ChannelModel& model);

/// Truncation control for the infinite series (shared with the capacity
/// engine; duplicated alias there).
struct SeriesControl {
    double tol = 1e-5;          ///< truncation accuracy P_e
    int max_terms = 500;        ///< outer-series cap
    int consecutive_small = 3;  ///< stopping streak

    void validate() const;
};

// ---------------------------------------------------------------------------
// i.n.i.d. coefficient machinery
// ---------------------------------------------------------------------------

/// Laguerre-expansion coefficients for the sum of independent, non-identical
/// squared kappa-mu variables, plus the reordered nonnegative gamma-mixture
/// weights actually used for evaluation (t = 1 Taylor regrouping of the same
/// series; exact rearrangement, stable for beta <= min_i a_i).
class InidCoeffs {
  public:
    InidCoeffs(std::vector<BandParams> bands, double xi, double beta, int k_max = 0);

    double xi() const { return xi_; }
    double beta() const { return beta_; }
    double U() const { return U_; }
    const std::vector<double>& chi() const { return chi_; }
    const std::vector<double>& a_seq() const { return a_; }

    /// c_k of the Laguerre form (c_k = (1/k) sum c_j d_{k-j}); lazily extended.
    double c(int k) const;
    /// d_j weights of the c recursion, j >= 1.
    double d(int j) const;
    /// true once |c_k| has grown for 10 consecutive k (bad xi/beta choice).
    bool divergence_flagged() const;

    /// Gamma-mixture weight e_q: density = sum_q e_q * GammaPDF(U+q, scale 2 beta).
    double mix(int q) const;
    /// Number of mixture weights needed for tail mass <= tol (cap respected).
    int mix_terms_for_tail(double tol, int cap) const;

  private:
    void extend_c(int k) const;
    void extend_mix(int q) const;

    std::vector<BandParams> bands_;
    double xi_, beta_, U_;
    std::vector<double> chi_, a_;
    std::vector<double> nh_;  // 1 - beta/a_i
    mutable std::vector<double> c_, mix_;
    mutable std::vector<double> g_;  // mixture log-derivative coefficients
    mutable double mix_mass_ = 0.0;
    mutable int c_growth_streak_ = 0;
    mutable bool divergence_ = false;
};

/// Build coefficients with the defaults (xi = U, beta = min_i a_i).
InidCoeffs inid_coeffs(const std::vector<BandParams>& bands,
                       std::optional<double> xi = std::nullopt,
                       std::optional<double> beta = std::nullopt, int k_max = 0);

// ---------------------------------------------------------------------------
// correlated shadowed machinery
// ---------------------------------------------------------------------------

class CorrCoeffs {
  public:
    CorrCoeffs(std::vector<BandParams> bands, ShadowParams shadow, CorrelationSpec corr);

    const std::vector<double>& lambdas() const { return lambdas_; }
    double lambda_min() const { return lambda_min_; }
    double A() const { return A_; }
    double eta() const { return eta_; }
    double U() const { return U_; }
    double m() const { return m_; }
    int M() const { return (int)bands_.size(); }

    /// delta_k of the Moschopoulos recursion; lazily extended.
    double delta(int k) const;
    /// D_k = delta_k (1+1/lambda)^-(mM+k) / (lambda^(mM+k) Gamma(U)).
    double D(int k) const;
    /// Normalized outer weight A * delta_k (sums to 1 over k).
    double weight(int k) const;

    const std::vector<std::vector<double>>& c_matrix() const { return C_; }

  private:
    void extend(int k) const;

    std::vector<BandParams> bands_;
    double m_;
    std::vector<std::vector<double>> C_;
    std::vector<double> lambdas_;
    double lambda_min_ = 0, A_ = 0, eta_ = 0, U_ = 0;
    std::vector<double> powsum_base_;  // 1 - lambda/lambda_i
    mutable std::vector<double> delta_;
    mutable std::vector<double> powsums_;  // sum_i powsum_base_i^q
    mutable std::vector<double> cur_pow_;
};

CorrCoeffs corr_coeffs(const std::vector<BandParams>& bands, const ShadowParams& shadow,
                       const CorrelationSpec& correlation);

/// Cyclic Jacobi eigenvalues of a small dense symmetric matrix.
std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> mat,
                                          double rel_tol = 1e-13);

// ---------------------------------------------------------------------------
// PDF evaluators (densities per unit SNR)
// ---------------------------------------------------------------------------

double pdf_iid_km(double gamma, const BandParams& band, int M, const SeriesControl& ctrl = {});
double pdf_inid_km(double gamma, const InidCoeffs& coeffs, const SeriesControl& ctrl = {});
double pdf_iid_kms(double gamma, const BandParams& band, const ShadowParams& shadow, int M,
                   double gamma_bar, const SeriesControl& ctrl = {});
double pdf_corr_kms(double gamma, const CorrCoeffs& coeffs, double gamma_bar,
                    const ShadowParams& shadow, int M, const SeriesControl& ctrl = {});

/// PDF of the aggregate SNR for any model.
double pdf(const ChannelModel& model, double gamma, const SeriesControl& ctrl = {});

}  // namespace kmcap::fading
