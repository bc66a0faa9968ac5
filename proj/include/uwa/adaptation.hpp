#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uwa/ranging.hpp"
#include "uwa/uncertainty.hpp"

namespace uwa {

struct AdaptConfig {
    double beta = 1.0;        // SHOT cross-entropy weight
    double mu_shot = 5e-6;    // adaptation step size
    std::size_t n_iterations = 100;
    double Q = 10.0;          // peak significance ratio
    std::size_t window_w = 1;
    double delta_m = 500.0;   // power-neighborhood radius
    double sigma = 2.0;       // pseudo-label softening

    void validate() const;
};

enum class PseudoOrigin { certain_peak, jsea_power_selected };

struct PseudoLabel {
    std::uint64_t sample_id = 0;
    double d_hat_m = 0.0;
    RangePmf soft;
    PseudoOrigin origin = PseudoOrigin::certain_peak;
    bool not_rectifiable = false;  // all peak neighborhoods were empty
};

struct AdaptResult {
    nn::Model model;
    std::vector<double> d_hat_m;  // aligned with the test dataset
};

/// SHOT: freeze the head, fine-tune the trunk on
/// L = -H(mean output) + (beta/|S|) * sum CE(pseudo, output). Pseudo-labels
/// are fixed once from the pre-trained model's certain-sample estimates.
/// Certain samples keep their pre-adaptation estimates; uncertain ones are
/// re-predicted with the adapted model.
AdaptResult shot_adapt(const nn::Model& pretrained, const Dataset& test,
                       const AdaptConfig& config, std::uint64_t seed);

/// Mean received power of certain samples within delta of d; nullopt when
/// the neighborhood is empty.
std::optional<double> estimate_psi0(double d_m,
                                    const std::vector<CertainSample>& certain,
                                    double delta_m);

/// Power matching: single-peak samples keep their peak; multi-peak
/// samples take the peak whose psi0 estimate is closest to the sample's
/// received power (ties -> smaller range; all neighborhoods empty ->
/// largest peak, flagged).
PseudoLabel jsea_select(const RangePmf& pmf, double psi,
                        const std::vector<CertainSample>& certain,
                        const AdaptConfig& config, std::uint64_t sample_id = 0);

/// Fine-tune the trunk against the pseudo-label cross-entropy (head
/// frozen). Estimates for the current batch come from jsea_select.
nn::Model jsea_adapt(const nn::Model& pretrained, const Dataset& test,
                     const std::vector<PseudoLabel>& pseudo_labels,
                     const AdaptConfig& config, std::uint64_t seed);

/// Full JSEA pipeline: assess, build the power profile, select
/// pseudo-labels, optionally fine-tune.
struct JseaResult {
    nn::Model model;
    std::vector<PseudoLabel> labels;  // aligned with the test dataset
};
JseaResult jsea_run(const nn::Model& pretrained, const Dataset& test,
                    const AdaptConfig& config, bool finetune, std::uint64_t seed);

}  // namespace uwa
