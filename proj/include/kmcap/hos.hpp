#pragma once

#include <string>
#include <vector>

#include "kmcap/fading.hpp"

namespace kmcap::hos {

using fading::ChannelModel;
using fading::SeriesControl;

enum class Regime { exact, high_snr, low_snr, oracle };

/// One computed higher-order capacity statistic Lambda_n = E[log2^n(1+gamma)].
struct HosResult {
    double value = 0.0;      ///< Lambda_n in bits^n
    int n = 0;               ///< order
    int terms_used = 0;      ///< outer-series terms to convergence (table convention)
    double tail_estimate = 0.0;  ///< geometric bound on the truncated remainder
    Regime regime = Regime::exact;
};

/// Exact HOS by the outer series with the scaled J kernel per term.
HosResult hos_exact(const ChannelModel& model, int n, const SeriesControl& ctrl = {});

/// First-order statistic (ergodic capacity); alias of hos_exact(n = 1).
HosResult ergodic_capacity(const ChannelModel& model, const SeriesControl& ctrl = {});

/// Independent check of the i.i.d. kappa-mu ergodic capacity through the
/// order-derivative chain of the incomplete gamma (the Meijer-G route
/// rewritten as d Gamma(alpha, b)/d alpha - ln b Gamma(alpha, b)).
double ergodic_capacity_iid_km_gamma_chain(const fading::IidKappaMu& model,
                                           const SeriesControl& ctrl = {});

/// High-SNR asymptote: the same series with the Q kernel (shape lowered by one).
HosResult hos_high_snr(const ChannelModel& model, int n, const SeriesControl& ctrl = {});

/// Low-SNR asymptote: signed Stirling expansion of ln^n(1+gamma) against the
/// model's moments. Reports divergence instead of returning a value when the
/// expansion leaves its validity range.
HosResult hos_low_snr(const ChannelModel& model, int n, const SeriesControl& ctrl = {});

/// Direct adaptive quadrature of the defining expectation, with a tail bound.
HosResult hos_oracle(const ChannelModel& model, int n, double quad_tol = 1e-7);

struct ConvergenceRow {
    double snr_db = 0.0;
    int terms_used = 0;
    double value = 0.0;
    std::string error;  ///< nonempty when this point failed
};

/// Re-runs hos_exact across an SNR grid (dB) recording the term counts.
/// The model's SNR parameter (omega per band, or gamma_bar) is swept.
std::vector<ConvergenceRow> convergence_report(const ChannelModel& model, int n,
                                               const std::vector<double>& snr_grid_db,
                                               const SeriesControl& ctrl = {});

/// Model with its SNR parameter replaced: omega (kappa-mu models, per band,
/// band 1 for i.n.i.d.) or gamma_bar (shadowed models), linear units.
ChannelModel with_snr(const ChannelModel& model, double snr_linear);

}  // namespace kmcap::hos
