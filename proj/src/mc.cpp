#include "kmcap/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <future>
#include <memory>
#include <thread>

namespace kmcap::mc {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = (std::uint64_t)kPhiloxM0 * c[0];
    const std::uint64_t p1 = (std::uint64_t)kPhiloxM1 * c[2];
    const std::uint32_t hi0 = (std::uint32_t)(p0 >> 32), lo0 = (std::uint32_t)p0;
    const std::uint32_t hi1 = (std::uint32_t)(p1 >> 32), lo1 = (std::uint32_t)p1;
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> PhiloxStream::block(const std::array<std::uint32_t, 4>& counter,
                                                 const std::array<std::uint32_t, 2>& key) {
    std::array<std::uint32_t, 4> c = counter;
    std::array<std::uint32_t, 2> k = key;
    for (int r = 0; r < 10; ++r) {
        philox_round(c, k);
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint64_t stream) {
    key_ = {(std::uint32_t)(seed ^ (stream >> 32)), (std::uint32_t)(seed >> 32 ^ stream)};
    counter_[2] = (std::uint32_t)stream;
    counter_[3] = (std::uint32_t)(stream >> 32) ^ (std::uint32_t)seed;
}

std::uint64_t PhiloxStream::next_raw64() {
    if (buf_pos_ >= 2) {
        buf_ = block(counter_, key_);
        if (++counter_[0] == 0) ++counter_[1];
        buf_pos_ = 0;
    }
    const int i = 2 * buf_pos_++;
    return ((std::uint64_t)buf_[i] << 32) | buf_[i + 1];
}

double PhiloxStream::uniform() {
    // 53-bit mantissa in (0,1); zero remapped to keep log(U) finite
    const double u = (double)(next_raw64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
}

double PhiloxStream::normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(th);
    have_cached_normal_ = true;
    return r * std::cos(th);
}

double PhiloxStream::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw domain_error("PhiloxStream::gamma: bad parameters");
    if (shape < 1.0) {
        // boost with U^(1/shape)
        const double u = uniform();
        return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

long PhiloxStream::poisson(double lambda) {
    if (lambda < 0.0) throw domain_error("PhiloxStream::poisson: lambda must be >= 0");
    if (lambda == 0.0) return 0;
    if (lambda < 10.0) {
        const double L = std::exp(-lambda);
        long k = 0;
        double p = uniform();
        while (p > L) {
            ++k;
            p *= uniform();
        }
        return k;
    }
    // PTRS transformed rejection (Hoermann)
    const double b = 0.931 + 2.53 * std::sqrt(lambda);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= v_r) return (long)kf;
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            kf * std::log(lambda) - lambda - std::lgamma(kf + 1.0))
            return (long)kf;
    }
}

double sample_km_sq(const fading::BandParams& band, PhiloxStream& rng) {
    band.validate();
    const double scale = band.omega / (2.0 * band.mu * (1.0 + band.kappa));
    const long p = rng.poisson(band.mu * band.kappa);
    return scale * rng.gamma(band.mu + (double)p, 2.0);
}

double sample_kms_sq(const fading::BandParams& band, const fading::ShadowParams& shadow,
                     double gamma_bar_band, PhiloxStream& rng) {
    band.validate();
    shadow.validate();
    if (!(gamma_bar_band > 0.0)) throw domain_error("sample_kms_sq: gamma_bar must be > 0");
    const double scale = gamma_bar_band / (2.0 * band.mu * (1.0 + band.kappa));
    const double xi = rng.gamma(shadow.m, 1.0 / shadow.m);  // unit-mean shadowing
    const long p = rng.poisson(band.mu * band.kappa * xi);
    return scale * rng.gamma(band.mu + (double)p, 2.0);
}

CorrSampler::CorrSampler(std::vector<fading::BandParams> bands_, fading::ShadowParams shadow,
                         const fading::CorrelationSpec& corr, double gamma_bar)
    : bands(std::move(bands_)) {
    shadow.validate();
    const double mr = std::round(shadow.m);
    if (std::abs(shadow.m - mr) > 1e-9 || mr < 1.0)
        throw domain_error(
            "CorrSampler: sampler requires integer m (use the quadrature oracle for real m)");
    m_int = (int)mr;
    const int M = (int)bands.size();
    if (M < 1) throw domain_error("CorrSampler: no bands");
    double eta = 0.0;
    for (const auto& b : bands) {
        b.validate();
        eta += b.mu * (1.0 + b.kappa);
    }
    if (!(gamma_bar > 0.0)) throw domain_error("CorrSampler: gamma_bar must be > 0");
    scale = gamma_bar / (2.0 * eta);
    // Cholesky of C (the Gaussian correlation matrix with sqrt(rho) entries)
    auto C = corr.build_c_matrix(M);
    chol.assign(M, std::vector<double>(M, 0.0));
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = C[i][j];
            for (int k = 0; k < j; ++k) s -= chol[i][k] * chol[j][k];
            if (i == j) {
                if (s <= 0.0) throw domain_error("CorrSampler: C is not positive definite");
                chol[i][j] = std::sqrt(s);
            } else {
                chol[i][j] = s / chol[j][j];
            }
        }
    }
}

double CorrSampler::sample_sum(PhiloxStream& rng) const {
    const int M = (int)bands.size();
    // shadowing vector: xi_i = (1/(2m)) sum over 2m rounds of correlated N(0,1)^2
    std::vector<double> xi(M, 0.0), z(M), cz(M);
    for (int r = 0; r < 2 * m_int; ++r) {
        for (int i = 0; i < M; ++i) z[i] = rng.normal();
        for (int i = 0; i < M; ++i) {
            double s = 0.0;
            for (int k = 0; k <= i; ++k) s += chol[i][k] * z[k];
            cz[i] = s;
        }
        for (int i = 0; i < M; ++i) xi[i] += cz[i] * cz[i];
    }
    double total = 0.0;
    for (int i = 0; i < M; ++i) {
        const double shade = xi[i] / (2.0 * m_int);
        const long p = rng.poisson(bands[i].mu * bands[i].kappa * shade);
        total += scale * rng.gamma(bands[i].mu + (double)p, 2.0);
    }
    return total;
}

namespace {

// one chunk of the estimate; compensated (Neumaier) accumulation per order
struct ChunkSums {
    std::vector<double> sum, comp, sumsq, compsq;
    std::int64_t count = 0;
};

template <typename DrawFn>
ChunkSums run_chunk(DrawFn&& draw, const std::vector<int>& orders, std::uint64_t seed,
                    std::uint64_t stream, std::int64_t count) {
    PhiloxStream rng(seed, stream);
    ChunkSums s;
    s.sum.assign(orders.size(), 0.0);
    s.comp.assign(orders.size(), 0.0);
    s.sumsq.assign(orders.size(), 0.0);
    s.compsq.assign(orders.size(), 0.0);
    s.count = count;
    for (std::int64_t i = 0; i < count; ++i) {
        const double g = draw(rng);
        const double l = std::log2(1.0 + g);
        for (size_t j = 0; j < orders.size(); ++j) {
            const double v = std::pow(l, orders[j]);
            {  // Neumaier
                const double t = s.sum[j] + v;
                s.comp[j] += (std::abs(s.sum[j]) >= std::abs(v)) ? (s.sum[j] - t) + v : (v - t) + s.sum[j];
                s.sum[j] = t;
            }
            const double v2 = v * v;
            {
                const double t = s.sumsq[j] + v2;
                s.compsq[j] +=
                    (std::abs(s.sumsq[j]) >= std::abs(v2)) ? (s.sumsq[j] - t) + v2 : (v2 - t) + s.sumsq[j];
                s.sumsq[j] = t;
            }
        }
    }
    return s;
}

}  // namespace

std::vector<EstimateResult> estimate_hos_orders(const fading::ChannelModel& model,
                                                const std::vector<int>& orders,
                                                const SimConfig& cfg) {
    cfg.validate();
    fading::validate(model);
    for (int n : orders)
        if (n < 0) throw domain_error("estimate_hos: order must be >= 0");

    // per-model draw closure
    std::function<double(PhiloxStream&)> draw;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, fading::IidKappaMu>) {
                draw = [m](PhiloxStream& rng) {
                    double t = 0.0;
                    for (int i = 0; i < m.M; ++i) t += sample_km_sq(m.band, rng);
                    return t;
                };
            } else if constexpr (std::is_same_v<T, fading::InidKappaMu>) {
                draw = [m](PhiloxStream& rng) {
                    double t = 0.0;
                    for (const auto& b : m.bands) t += sample_km_sq(b, rng);
                    return t;
                };
            } else if constexpr (std::is_same_v<T, fading::IidKappaMuShadowed>) {
                const double per_band = m.gamma_bar / m.M;
                draw = [m, per_band](PhiloxStream& rng) {
                    double t = 0.0;
                    for (int i = 0; i < m.M; ++i) t += sample_kms_sq(m.band, m.shadow, per_band, rng);
                    return t;
                };
            } else {
                auto sampler = std::make_shared<CorrSampler>(m.bands, m.shadow, m.correlation,
                                                             m.gamma_bar);
                draw = [sampler](PhiloxStream& rng) { return sampler->sample_sum(rng); };
            }
        },
        model);

    // fixed partition into cfg.streams chunks regardless of thread count
    const int S = cfg.streams;
    std::vector<std::int64_t> counts(S, cfg.samples / S);
    for (int i = 0; i < cfg.samples % S; ++i) ++counts[i];

    std::vector<ChunkSums> chunks(S);
    for (auto& c : chunks) {
        c.sum.assign(orders.size(), 0.0);
        c.comp.assign(orders.size(), 0.0);
        c.sumsq.assign(orders.size(), 0.0);
        c.compsq.assign(orders.size(), 0.0);
    }
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> futs;
    std::atomic<int> next{0};
    for (unsigned t = 0; t < std::min<unsigned>(hw, (unsigned)S); ++t) {
        futs.push_back(std::async(std::launch::async, [&]() {
            for (;;) {
                const int c = next.fetch_add(1);
                if (c >= S) return;
                if (counts[c] > 0)
                    chunks[c] = run_chunk(draw, orders, cfg.seed, (std::uint64_t)c, counts[c]);
            }
        }));
    }
    for (auto& f : futs) f.get();

    std::vector<EstimateResult> out(orders.size());
    for (size_t j = 0; j < orders.size(); ++j) {
        // combine chunk sums in fixed order
        double sum = 0.0, comp = 0.0, sumsq = 0.0, compsq = 0.0;
        for (int c = 0; c < S; ++c) {
            const double v = chunks[c].sum[j] + chunks[c].comp[j];
            const double t = sum + v;
            comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
            sum = t;
            const double v2 = chunks[c].sumsq[j] + chunks[c].compsq[j];
            const double t2 = sumsq + v2;
            compsq += (std::abs(sumsq) >= std::abs(v2)) ? (sumsq - t2) + v2 : (v2 - t2) + sumsq;
            sumsq = t2;
        }
        sum += comp;
        sumsq += compsq;
        const double N = (double)cfg.samples;
        const double mean = sum / N;
        const double var = std::max(0.0, sumsq / N - mean * mean);
        out[j].mean = orders[j] == 0 ? 1.0 : mean;
        out[j].std_error = orders[j] == 0 ? 0.0 : std::sqrt(var / N);
        out[j].samples_used = cfg.samples;
    }
    return out;
}

EstimateResult estimate_hos(const fading::ChannelModel& model, int n, const SimConfig& cfg) {
    return estimate_hos_orders(model, {n}, cfg).front();
}

}  // namespace kmcap::mc
