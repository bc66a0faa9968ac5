#include "uwa/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uwa {

namespace {

double entropy_nats(const std::vector<double>& pmf) {
    double h = 0.0;
    for (double p : pmf)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

}  // namespace

PeakReport find_significant_peaks(const RangePmf& pmf, double Q,
                                  std::size_t window_w) {
    if (!(Q > 1.0)) throw std::invalid_argument("Q must be > 1");
    if (window_w < 1) throw std::invalid_argument("window_w must be >= 1");
    const auto& p = pmf.probabilities;
    if (p.empty()) throw std::invalid_argument("empty pmf");
    const std::size_t n = p.size();

    std::vector<std::size_t> maxima;
    std::vector<double> heights;
    for (std::size_t i = 0; i < n; ++i) {
        bool is_max = true;
        std::size_t lo = i >= window_w ? i - window_w : 0;
        std::size_t hi = std::min(i + window_w, n - 1);
        for (std::size_t j = lo; j <= hi && is_max; ++j) {
            if (j == i) continue;
            // Strictly above all left neighbors, at-least-equal to the
            // right ones: the leftmost bin of a plateau wins.
            if (j < i ? p[j] >= p[i] : p[j] > p[i]) is_max = false;
        }
        if (is_max) {
            maxima.push_back(i);
            heights.push_back(p[i]);
        }
    }

    PeakReport report;
    if (maxima.size() == 1) {
        report.peak_bins = maxima;
        report.peak_heights = heights;
        report.pu = 0;
        return report;
    }
    double h1 = *std::max_element(heights.begin(), heights.end());
    for (std::size_t m = 0; m < maxima.size(); ++m) {
        if (heights[m] >= h1 / Q) {
            report.peak_bins.push_back(maxima[m]);
            report.peak_heights.push_back(heights[m]);
        }
    }
    report.pu = report.peak_bins.size() == 1 ? 0 : 1;
    return report;
}

double apu(const std::vector<PeakReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("apu of empty batch");
    double sum = 0.0;
    for (const auto& r : reports) sum += r.pu;
    return 100.0 * sum / static_cast<double>(reports.size());
}

double mumi(const nn::Model& dropout_model, const ScmSample& sample,
            std::size_t J, const RangeGrid& grid, std::uint64_t seed) {
    if (J < 2) throw std::invalid_argument("mumi requires J >= 2");
    if (dropout_model.arch.regression) {
        RangePmf hist = mc_dropout_pmf(dropout_model, sample, J, grid, seed);
        return entropy_nats(hist.probabilities);
    }
    const std::size_t M = dropout_model.arch.output_dim;
    std::vector<double> mean_pmf(M, 0.0);
    double mean_entropy = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        auto res = dropout_model.forward({sample.features.data()}, nn::Mode::train,
                                         derive_seed(seed, j));
        auto pmf = nn::softmax(res.logits);
        for (std::size_t k = 0; k < M; ++k) mean_pmf[k] += pmf[k] / J;
        mean_entropy += entropy_nats(pmf) / J;
    }
    return std::max(0.0, entropy_nats(mean_pmf) - mean_entropy);
}

CertainPartition partition_certain(const std::vector<PeakReport>& reports,
                                   const Dataset& dataset, const RangeGrid& grid) {
    if (reports.size() != dataset.size())
        throw std::invalid_argument("reports do not cover dataset");
    CertainPartition part;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& s = dataset.samples[i];
        if (reports[i].pu == 0) {
            part.certain.push_back({s.sample_id,
                                    grid.midpoint(reports[i].peak_bins.front()),
                                    s.received_power});
        } else {
            part.uncertain_ids.push_back(s.sample_id);
        }
    }
    return part;
}

UncertaintyReport assess_uncertainty(const nn::Model& model, const Dataset& ds,
                                     double Q, std::size_t window_w,
                                     std::size_t mumi_passes, std::uint64_t seed) {
    UncertaintyReport report;
    RangeGrid grid{model.grid_d_min, model.grid_d_max, model.grid_bin};
    auto pmfs = predict_pmfs(model, ds);
    report.per_sample.reserve(ds.size());
    for (const auto& pmf : pmfs)
        report.per_sample.push_back(find_significant_peaks(pmf, Q, window_w));
    report.apu_percent = apu(report.per_sample);
    if (mumi_passes >= 2) {
        std::vector<double> vals(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i)
            vals[i] = mumi(model, ds.samples[i], mumi_passes, grid,
                           derive_seed(seed, i));
        report.mumi_nats = std::move(vals);
    }
    report.partition = partition_certain(report.per_sample, ds, grid);
    return report;
}

}  // namespace uwa
