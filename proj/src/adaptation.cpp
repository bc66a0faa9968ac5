#include "uwa/adaptation.hpp"

#include <cmath>
#include <stdexcept>

namespace uwa {

void AdaptConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    if (!(mu_shot >= 0.0)) throw std::invalid_argument("mu_shot must be >= 0");
    if (!(delta_m > 0.0)) throw std::invalid_argument("delta_m must be > 0");
    if (!(Q > 1.0)) throw std::invalid_argument("Q must be > 1");
    if (!(sigma >= 1.0 && sigma <= 10.0))
        throw std::invalid_argument("sigma must be in [1, 10]");
}

namespace {

std::vector<double> row_softmax(const std::vector<double>& logits, std::size_t m,
                                std::size_t row) {
    return nn::softmax({logits.begin() + row * m, logits.begin() + (row + 1) * m});
}

}  // namespace

AdaptResult shot_adapt(const nn::Model& pretrained, const Dataset& test,
                       const AdaptConfig& config, std::uint64_t seed) {
    config.validate();
    if (pretrained.arch.regression)
        throw std::invalid_argument("shot_adapt requires a classifier");
    const std::size_t N = test.size();
    if (N == 0) throw std::invalid_argument("empty test dataset");
    const std::size_t M = pretrained.arch.output_dim;
    RangeGrid grid{pretrained.grid_d_min, pretrained.grid_d_max, pretrained.grid_bin};

    // Certain/uncertain split and fixed pseudo-labels from the pre-trained
    // model.
    auto pmfs = predict_pmfs(pretrained, test);
    std::vector<int> pu(N);
    std::vector<double> pre_estimate(N);
    std::vector<std::size_t> certain_idx;
    for (std::size_t i = 0; i < N; ++i) {
        auto report = find_significant_peaks(pmfs[i], config.Q, config.window_w);
        pu[i] = report.pu;
        pre_estimate[i] = grid.midpoint(report.peak_bins.front());
        if (report.pu == 0) {
            pre_estimate[i] = grid.midpoint(report.peak_bins[0]);
            certain_idx.push_back(i);
        }
    }
    if (certain_idx.empty()) throw std::runtime_error("no certain samples");

    std::vector<std::vector<double>> pseudo(N);
    for (std::size_t i : certain_idx)
        pseudo[i] = soften_label(quantize_range(pre_estimate[i], grid),
                                 config.sigma, grid)
                        .probabilities;

    AdaptResult out{pretrained, std::vector<double>(N)};
    nn::Model& model = out.model;
    const bool head_was_trainable = model.head_trainable;
    model.head_trainable = false;

    std::vector<const double*> inputs;
    inputs.reserve(N);
    for (const auto& s : test.samples) inputs.push_back(s.features.data());

    const double ce_scale = config.beta / static_cast<double>(certain_idx.size());
    for (std::size_t iter = 0; iter < config.n_iterations; ++iter) {
        auto cache = model.forward_cached(inputs, nn::Mode::train,
                                          derive_seed(seed, iter));
        const auto& logits = model.result(cache).logits;
        std::vector<std::vector<double>> yhat(N);
        std::vector<double> ybar(M, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            yhat[i] = row_softmax(logits, M, i);
            for (std::size_t k = 0; k < M; ++k) ybar[k] += yhat[i][k] / N;
        }
        // d(-H(ybar))/d yhat_{ik} = (log ybar_k + 1)/N, then softmax
        // backprop per row; the CE term adds beta/|S| * (yhat - pseudo).
        std::vector<double> g(M);
        for (std::size_t k = 0; k < M; ++k) g[k] = (std::log(ybar[k]) + 1.0) / N;
        std::vector<double> dlogits(N * M, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            double dot = 0.0;
            for (std::size_t k = 0; k < M; ++k) dot += g[k] * yhat[i][k];
            for (std::size_t k = 0; k < M; ++k)
                dlogits[i * M + k] = yhat[i][k] * (g[k] - dot);
            if (!pseudo[i].empty())
                for (std::size_t k = 0; k < M; ++k)
                    dlogits[i * M + k] += ce_scale * (yhat[i][k] - pseudo[i][k]);
        }
        auto grads = model.backward(cache, dlogits);
        nn::adam_step(model, grads, config.mu_shot);
    }

    auto post_pmfs = predict_pmfs(model, test);
    for (std::size_t i = 0; i < N; ++i)
        out.d_hat_m[i] = pu[i] == 0 ? pre_estimate[i] : predict_range(post_pmfs[i]);
    model.head_trainable = head_was_trainable;
    return out;
}

std::optional<double> estimate_psi0(double d_m,
                                    const std::vector<CertainSample>& certain,
                                    double delta_m) {
    if (certain.empty()) throw std::invalid_argument("empty certain set");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& c : certain) {
        if (std::abs(d_m - c.d_hat_m) <= delta_m) {
            sum += c.psi;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

PseudoLabel jsea_select(const RangePmf& pmf, double psi,
                        const std::vector<CertainSample>& certain,
                        const AdaptConfig& config, std::uint64_t sample_id) {
    auto report = find_significant_peaks(pmf, config.Q, config.window_w);
    PseudoLabel label;
    label.sample_id = sample_id;
    if (report.pu == 0) {
        label.d_hat_m = pmf.grid.midpoint(report.peak_bins[0]);
        label.origin = PseudoOrigin::certain_peak;
    } else {
        if (certain.empty())
            throw std::runtime_error("no certain samples to build the power profile");
        label.origin = PseudoOrigin::jsea_power_selected;
        double best_score = std::numeric_limits<double>::infinity();
        bool found = false;
        double best_d = 0.0;
        for (std::size_t m = 0; m < report.peak_bins.size(); ++m) {
            double d = pmf.grid.midpoint(report.peak_bins[m]);
            auto psi0 = estimate_psi0(d, certain, config.delta_m);
            if (!psi0) continue;  // empty neighborhood: excluded from the argmin
            double score = (psi - *psi0) * (psi - *psi0);
            if (score < best_score) {  // ties keep the earlier (smaller) range
                best_score = score;
                best_d = d;
                found = true;
            }
        }
        if (found) {
            label.d_hat_m = best_d;
        } else {
            // Every neighborhood empty: not rectifiable; keep the tallest
            // peak (leftmost on a height tie).
            std::size_t best = 0;
            for (std::size_t m = 1; m < report.peak_heights.size(); ++m)
                if (report.peak_heights[m] > report.peak_heights[best]) best = m;
            label.d_hat_m = pmf.grid.midpoint(report.peak_bins[best]);
            label.not_rectifiable = true;
        }
    }
    label.soft = soften_label(quantize_range(label.d_hat_m, pmf.grid), config.sigma,
                              pmf.grid);
    return label;
}

nn::Model jsea_adapt(const nn::Model& pretrained, const Dataset& test,
                     const std::vector<PseudoLabel>& pseudo_labels,
                     const AdaptConfig& config, std::uint64_t seed) {
    config.validate();
    if (pseudo_labels.size() != test.size())
        throw std::invalid_argument("pseudo-labels do not cover dataset");
    const std::size_t N = test.size();
    const std::size_t M = pretrained.arch.output_dim;

    nn::Model model = pretrained;
    const bool head_was_trainable = model.head_trainable;
    model.head_trainable = false;

    std::vector<const double*> inputs;
    inputs.reserve(N);
    for (const auto& s : test.samples) inputs.push_back(s.features.data());

    for (std::size_t iter = 0; iter < config.n_iterations; ++iter) {
        auto cache = model.forward_cached(inputs, nn::Mode::train,
                                          derive_seed(seed, 0xA0000 + iter));
        const auto& logits = model.result(cache).logits;
        // L_JSEA = sum_i CE(pseudo_i, yhat_i); dlogits = yhat - pseudo.
        std::vector<double> dlogits(N * M);
        for (std::size_t i = 0; i < N; ++i) {
            auto yhat = row_softmax(logits, M, i);
            const auto& p = pseudo_labels[i].soft.probabilities;
            for (std::size_t k = 0; k < M; ++k)
                dlogits[i * M + k] = yhat[k] - p[k];
        }
        auto grads = model.backward(cache, dlogits);
        nn::adam_step(model, grads, config.mu_shot);
    }
    model.head_trainable = head_was_trainable;
    return model;
}

JseaResult jsea_run(const nn::Model& pretrained, const Dataset& test,
                    const AdaptConfig& config, bool finetune, std::uint64_t seed) {
    config.validate();
    auto report = assess_uncertainty(pretrained, test, config.Q, config.window_w);
    auto pmfs = predict_pmfs(pretrained, test);
    JseaResult out{pretrained, {}};
    out.labels.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        out.labels.push_back(jsea_select(pmfs[i], test.samples[i].received_power,
                                         report.partition.certain, config,
                                         test.samples[i].sample_id));
    if (finetune)
        out.model = jsea_adapt(pretrained, test, out.labels, config, seed);
    return out;
}

}  // namespace uwa
