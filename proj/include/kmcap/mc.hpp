#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "kmcap/fading.hpp"

namespace kmcap::mc {

/// Philox4x32-10 counter-based generator. Streams are independent by key;
/// identical (seed, stream) sequences are reproducible on any machine and
/// under any parallel schedule.
class PhiloxStream {
  public:
    PhiloxStream(std::uint64_t seed, std::uint64_t stream);

    /// Raw 4x32 block for a given counter (stateless core).
    static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                              const std::array<std::uint32_t, 2>& key);

    double uniform();       ///< U in (0, 1)
    double normal();        ///< standard normal (Box-Muller pair, cached)
    double gamma(double shape, double scale);  ///< Marsaglia-Tsang
    long poisson(double lambda);               ///< inversion (< 10) / PTRS

  private:
    std::uint64_t next_raw64();
    std::array<std::uint32_t, 4> counter_{0, 0, 0, 0};
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 2;  // 2 x 64-bit outputs per block
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

/// Simulation settings.
struct SimConfig {
    std::int64_t samples = 1000000;
    std::uint64_t seed = 1;
    int streams = 64;

    void validate() const {
        if (samples < 1) throw domain_error("SimConfig: samples must be >= 1");
        if (streams < 1) throw domain_error("SimConfig: streams must be >= 1");
    }
};

struct EstimateResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t samples_used = 0;
};

/// One squared kappa-mu draw: gamma_i = Omega/(2 mu (1+kappa)) X with
/// X ~ noncentral chi-square(2 mu, 2 mu kappa) via the Poisson-gamma mixture.
double sample_km_sq(const fading::BandParams& band, PhiloxStream& rng);

/// One squared kappa-mu shadowed draw with per-band mean gamma_bar_band:
/// xi ~ Gamma(m, 1/m), then the conditional noncentral chi-square.
double sample_kms_sq(const fading::BandParams& band, const fading::ShadowParams& shadow,
                     double gamma_bar_band, PhiloxStream& rng);

/// Precomputed state for the correlated sampler: Cholesky factor of C and the
/// common branch scale gamma_bar/(2 eta). Integer m only.
struct CorrSampler {
    CorrSampler(std::vector<fading::BandParams> bands, fading::ShadowParams shadow,
                const fading::CorrelationSpec& corr, double gamma_bar);
    double sample_sum(PhiloxStream& rng) const;

    std::vector<fading::BandParams> bands;
    int m_int = 1;
    double scale = 1.0;  // gamma_bar / (2 eta)
    std::vector<std::vector<double>> chol;  // lower-triangular factor of C
};

/// Mean of log2^n(1+gamma_sum) over cfg.samples draws of the model, one entry
/// per requested order. Deterministic for fixed (seed, streams) under any
/// parallelism: samples are pre-partitioned into `streams` chunks, each on its
/// own Philox stream, combined in fixed order with compensated summation.
std::vector<EstimateResult> estimate_hos_orders(const fading::ChannelModel& model,
                                                const std::vector<int>& orders,
                                                const SimConfig& cfg);

EstimateResult estimate_hos(const fading::ChannelModel& model, int n, const SimConfig& cfg);

}  // namespace kmcap::mc
