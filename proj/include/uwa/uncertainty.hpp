#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uwa/ranging.hpp"
#include "uwa/signals.hpp"

namespace uwa {

/// Significant peaks of one output PMF and the peakwise
/// uncertainty bit.
struct PeakReport {
    std::vector<std::size_t> peak_bins;  // sorted ascending
    std::vector<double> peak_heights;    // aligned with peak_bins
    int pu = 0;                          // 0 iff exactly one significant peak
};

/// Local maxima are bins strictly greater than every neighbor within
/// +/-window_w (leftmost bin of a plateau wins); significant peaks are
/// those within a factor Q of the tallest. PU = 0 iff exactly one.
PeakReport find_significant_peaks(const RangePmf& pmf, double Q = 10.0,
                                  std::size_t window_w = 1);

/// APU[%] = 100 * sum(PU) / N.
double apu(const std::vector<PeakReport>& reports);

/// MC-dropout mutual information in nats. Classifier: H(mean PMF) minus
/// mean per-pass entropy . Regressor: entropy of the quantized
/// point-estimate histogram.
double mumi(const nn::Model& dropout_model, const ScmSample& sample,
            std::size_t J, const RangeGrid& grid, std::uint64_t seed);

/// A certain sample: its id, single-peak range estimate, and received
/// power -- the ingredients of the JSEA power profile.
struct CertainSample {
    std::uint64_t sample_id = 0;
    double d_hat_m = 0.0;
    double psi = 0.0;
};

struct CertainPartition {
    std::vector<CertainSample> certain;        // S
    std::vector<std::uint64_t> uncertain_ids;  // S^c
};

/// Split a batch by PU bit; certain samples carry their single-peak
/// estimates (grid midpoints).
CertainPartition partition_certain(const std::vector<PeakReport>& reports,
                                   const Dataset& dataset,
                                   const RangeGrid& grid = {});

struct UncertaintyReport {
    std::vector<PeakReport> per_sample;
    std::optional<std::vector<double>> mumi_nats;
    double apu_percent = 0.0;
    CertainPartition partition;
};

/// Whole-batch assessment: predict, peak-find, optionally MC-dropout.
UncertaintyReport assess_uncertainty(const nn::Model& model, const Dataset& ds,
                                     double Q = 10.0, std::size_t window_w = 1,
                                     std::size_t mumi_passes = 0,
                                     std::uint64_t seed = 0);

}  // namespace uwa
