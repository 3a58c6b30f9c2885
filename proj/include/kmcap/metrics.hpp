#pragma once

#include <functional>

#include "kmcap/hos.hpp"

namespace kmcap::metrics {

using fading::ChannelModel;
using fading::SeriesControl;

/// Scalar capacity measures built from Lambda_1..Lambda_4.
struct CapacityMetrics {
    double ergodic = 0.0;      ///< Lambda_1, bits
    double variance = 0.0;     ///< Lambda_2 - Lambda_1^2, bits^2
    double aof = 0.0;          ///< Lambda_2/Lambda_1^2 - 1
    double aod = 0.0;          ///< variance / Lambda_1, bits
    double reliability = 0.0;  ///< 100 (1 - aod), percent (unclamped)
    double skewness = 0.0;     ///< (L3 - L1^3) / var^(3/2)
    double kurtosis = 0.0;     ///< (L4 - L1^4) / var^2
};

CapacityMetrics metrics(const ChannelModel& model, const SeriesControl& ctrl = {});

struct AodPeak {
    double snr_db = 0.0;
    double aod = 0.0;
    double reliability = 0.0;
    bool endpoint_warning = false;  ///< max sat on a grid endpoint
};

/// Scans AoD over an SNR grid for a model family (dB -> model) and refines the
/// discrete maximum with a quadratic fit through its neighbors.
AodPeak aod_peak(const std::function<ChannelModel(double)>& family,
                 const std::vector<double>& snr_grid_db, const SeriesControl& ctrl = {});

}  // namespace kmcap::metrics
