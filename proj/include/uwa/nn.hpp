#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uwa::nn {

/// Dense row-major tensor, 64-bit throughout.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    static Tensor zeros(std::vector<std::size_t> shape);
    std::size_t size() const { return values.size(); }
    double* data() { return values.data(); }
    const double* data() const { return values.data(); }
};

struct ConvSpec {
    std::size_t in_channels, out_channels, kernel;
};

/// Fixed architecture: conv stack -> flatten -> linear feature layer ->
/// ReLU -> dropout -> linear head. Same-padding, stride 1, ReLU
/// activations after every conv and the feature layer.
struct ArchConfig {
    std::size_t input_size = 21;  // L
    std::vector<ConvSpec> convs = {{2, 6, 3}, {6, 38, 5}, {38, 40, 5}};
    std::size_t feature_dim = 256;  // N_phi
    std::size_t output_dim = 82;    // M classes, or 1 for regression
    bool regression = false;
    double dropout_rate = 0.2;

    std::size_t input_values() const { return 2 * input_size * input_size; }
    std::size_t flat_dim() const {
        return convs.back().out_channels * input_size * input_size;
    }
    static ArchConfig classifier(std::size_t L, std::size_t M);
    static ArchConfig regressor(std::size_t L);
};

enum class Group { trunk, head };

struct NamedParam {
    std::string name;
    Group group = Group::trunk;
    Tensor value;
    Tensor adam_m, adam_v;  // same shape as value
};

enum class Mode { train, eval };

struct ForwardResult {
    std::size_t batch = 0;
    std::vector<double> features;  // batch x N_phi
    std::vector<double> logits;    // batch x output_dim
};

/// Cached activations for one forward pass; consumed by backward().
struct ForwardCache;

class Model {
  public:
    ArchConfig arch;
    std::vector<NamedParam> params;
    std::uint64_t adam_step = 0;
    bool trunk_trainable = true;
    bool head_trainable = true;
    // Range-grid metadata carried in the checkpoint so prediction is
    // self-contained.
    double grid_d_min = 900.0, grid_d_max = 9000.0, grid_bin = 100.0;

    /// Kaiming-uniform fan-in init, zero biases, deterministic under seed.
    static Model init(const ArchConfig& arch, std::uint64_t seed);

    ForwardResult forward(const std::vector<const double*>& inputs, Mode mode,
                          std::uint64_t dropout_seed) const;
    ForwardCache forward_cached(const std::vector<const double*>& inputs, Mode mode,
                                std::uint64_t dropout_seed) const;
    const ForwardResult& result(const ForwardCache& cache) const;

    /// Gradients for every parameter from d(loss)/d(logits); frozen groups
    /// get zero gradients.
    std::vector<Tensor> backward(const ForwardCache& cache,
                                 const std::vector<double>& dlogits) const;

    /// Mean softmax cross-entropy against soft target PMFs (log-sum-exp
    /// fused; never a raw log of zero).
    double loss_and_gradients(const std::vector<const double*>& inputs,
                              const std::vector<const double*>& target_pmfs,
                              std::vector<Tensor>& grads, Mode mode,
                              std::uint64_t dropout_seed) const;
    double loss_only(const std::vector<const double*>& inputs,
                     const std::vector<const double*>& target_pmfs, Mode mode,
                     std::uint64_t dropout_seed) const;

    /// Mean squared error against scalar targets (regression head).
    double mse_loss_and_gradients(const std::vector<const double*>& inputs,
                                  const std::vector<double>& targets,
                                  std::vector<Tensor>& grads, Mode mode,
                                  std::uint64_t dropout_seed) const;

    NamedParam* find(const std::string& name);
    const NamedParam* find(const std::string& name) const;
};

/// Bias-corrected Adam over all trainable groups.
void adam_step(Model& model, const std::vector<Tensor>& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Softmax of one logit row (numerically safe).
std::vector<double> softmax(const std::vector<double>& logits);

std::size_t conv_parameter_count(const ArchConfig& arch);

/// UWAM1 checkpoint round trip; Adam state saved when present.
void save_checkpoint(const Model& model, const std::string& path,
                     bool include_adam = true);
Model load_checkpoint(const std::string& path);

// ForwardCache is move-only and opaque outside nn.cpp.
struct ForwardCache {
    ForwardResult result;
    std::vector<const double*> inputs;
    std::vector<std::vector<double>> conv_acts;  // post-ReLU, per conv layer
    std::vector<double> fc1_pre_dropout;         // post-ReLU feature layer
    std::vector<std::uint8_t> dropout_mask;      // batch x N_phi (train mode)
    bool dropout_active = false;
};

}  // namespace uwa::nn
