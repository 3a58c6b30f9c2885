#include "kmcap/metrics.hpp"

#include <cmath>

namespace kmcap::metrics {

CapacityMetrics metrics(const ChannelModel& model, const SeriesControl& ctrl) {
    double L[5] = {1.0, 0, 0, 0, 0};
    for (int n = 1; n <= 4; ++n) L[n] = hos::hos_exact(model, n, ctrl).value;
    CapacityMetrics out;
    out.ergodic = L[1];
    out.variance = L[2] - L[1] * L[1];
    out.aof = L[2] / (L[1] * L[1]) - 1.0;
    out.aod = out.variance / L[1];
    out.reliability = 100.0 * (1.0 - out.aod);
    if (out.variance < 1e-12)
        throw convergence_error("metrics: degenerate variance (< 1e-12), skewness/kurtosis undefined");
    out.skewness = (L[3] - L[1] * L[1] * L[1]) / std::pow(out.variance, 1.5);
    out.kurtosis = (L[4] - L[1] * L[1] * L[1] * L[1]) / (out.variance * out.variance);
    return out;
}

AodPeak aod_peak(const std::function<ChannelModel(double)>& family,
                 const std::vector<double>& snr_grid_db, const SeriesControl& ctrl) {
    if (snr_grid_db.empty()) throw domain_error("aod_peak: empty grid");
    std::vector<double> aods;
    aods.reserve(snr_grid_db.size());
    for (double db : snr_grid_db) {
        const auto model = family(db);
        const double l1 = hos::hos_exact(model, 1, ctrl).value;
        const double l2 = hos::hos_exact(model, 2, ctrl).value;
        aods.push_back((l2 - l1 * l1) / l1);
    }
    size_t imax = 0;
    for (size_t i = 1; i < aods.size(); ++i)
        if (aods[i] > aods[imax]) imax = i;

    AodPeak peak;
    peak.snr_db = snr_grid_db[imax];
    peak.aod = aods[imax];
    if (imax == 0 || imax + 1 == aods.size()) {
        peak.endpoint_warning = true;
    } else {
        // quadratic refinement through the three points around the maximum
        const double x0 = snr_grid_db[imax - 1], x1 = snr_grid_db[imax], x2 = snr_grid_db[imax + 1];
        const double y0 = aods[imax - 1], y1 = aods[imax], y2 = aods[imax + 1];
        const double d1 = (y1 - y0) / (x1 - x0);
        const double d2 = (y2 - y1) / (x2 - x1);
        const double curv = (d2 - d1) / (0.5 * (x2 - x0));
        (void)y2;
        if (curv < 0.0) {
            const double xs = 0.5 * (x0 + x1) - d1 / curv;  // vertex of the fitted parabola
            if (xs > x0 && xs < x2) {
                peak.snr_db = xs;
                const auto model = family(xs);  // evaluate exactly at the refined point
                const double l1 = hos::hos_exact(model, 1, ctrl).value;
                const double l2 = hos::hos_exact(model, 2, ctrl).value;
                peak.aod = (l2 - l1 * l1) / l1;
            }
        }
    }
    peak.reliability = 100.0 * (1.0 - peak.aod);
    return peak;
}

}  // namespace kmcap::metrics
