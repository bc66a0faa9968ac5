#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "uwa/nn.hpp"
#include "uwa/signals.hpp"

namespace uwa {

/// Uniform range quantization grid. Bin k spans
/// [d_min + (k-1/2)B, d_min + (k+1/2)B) and is represented by its midpoint
/// d_min + kB.
struct RangeGrid {
    double d_min_m = 900.0;
    double d_max_m = 9000.0;
    double bin_m = 100.0;

    std::size_t class_count() const {
        return static_cast<std::size_t>((d_max_m - d_min_m) / bin_m + 0.5) + 1;
    }
    double midpoint(std::size_t bin) const { return d_min_m + bin * bin_m; }
    static RangeGrid standard() { return {}; }
};

struct RangePmf {
    std::vector<double> probabilities;
    RangeGrid grid;

    void validate() const;
    std::size_t argmax() const;  // ties broken toward the smaller index
};

/// floor((d - D_min)/B + 0.5), clamped to [0, M-1]; *clamped reports
/// whether d fell outside the representable span.
std::size_t quantize_range(double d_m, const RangeGrid& grid, bool* clamped = nullptr);

/// Exponential soft label peaked at bin dq.
RangePmf soften_label(std::size_t dq, double sigma, const RangeGrid& grid);

RangePmf predict_pmf(const nn::Model& model, const ScmSample& sample);
std::vector<RangePmf> predict_pmfs(const nn::Model& model, const Dataset& ds);

/// Midpoint of the argmax bin.
double predict_range(const RangePmf& pmf);

/// Denormalized, clamped point estimate from a regression head.
double regressor_range(const nn::Model& model, const ScmSample& sample);

/// Bartlett processor value r^H C r for one unit-norm replica.
double bartlett_value(const ScmSample& sample,
                      const std::vector<std::complex<double>>& replica);

struct Replica {
    double range_m;
    std::vector<std::complex<double>> field;  // unit-normalized
};

/// Argmax of the Bartlett surface; ties go to the smallest range.
double bartlett_mfp(const ScmSample& sample, const std::vector<Replica>& replicas);

/// Unit-norm replica fields over a range grid for MFP.
std::vector<Replica> make_replicas(const ModeSet& modes, double source_depth_m,
                                   const std::vector<double>& ranges_m,
                                   const ArrayGeometry& array);

/// Histogram of J quantized MC-dropout point estimates.
RangePmf mc_dropout_pmf(const nn::Model& regressor, const ScmSample& sample,
                        std::size_t J, const RangeGrid& grid, std::uint64_t seed);

struct TrainConfig {
    double lr = 1e-4;
    std::size_t batch_size = 128;
    double sigma = 2.0;
    std::size_t patience_reduce = 75;
    std::size_t patience_stop = 125;
    std::vector<double> finetune_snrs_db = {2, 4, 6, 8, 10, 12, 14, 16};
    double val_fraction = 0.18;
    std::uint64_t seed = 1;
    RangeGrid grid;
    double dropout_rate = 0.2;
    // Desk-scale caps; the patience rule alone bounds neither phase.
    std::size_t max_epochs = 100000;
    std::size_t max_finetune_epochs = 100000;

    void validate() const;
};

TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

struct TrainLogEntry {
    std::size_t epoch;
    int phase;  // 0 = clean, 1 = noise fine-tune
    double train_loss, val_loss, lr;
};

struct TrainResult {
    nn::Model model;
    std::vector<TrainLogEntry> log;
};

/// Training schedule: random 82/18 split, patience-based lr decay and stop,
/// then noise fine-tuning cycling over the configured SNR list.
TrainResult train_classifier(const Dataset& train, const TrainConfig& config);
TrainResult train_regressor(const Dataset& train, const TrainConfig& config);

}  // namespace uwa
