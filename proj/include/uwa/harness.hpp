#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uwa/adaptation.hpp"
#include "uwa/ranging.hpp"

namespace uwa {

/// Mean absolute error in meters.
double mae(const std::vector<double>& d_true, const std::vector<double>& d_hat);

/// Probability of credible localization: percentage of samples with
/// |d - d_hat| <= zeta * d (boundary counts).
double pcl(const std::vector<double>& d_true, const std::vector<double>& d_hat,
           double zeta);

enum class SweepAxis { snr_db, delta_c, delta_d, sediment_type };
enum class Method { o_mfp, m_mfp, cnn_c, shot, jsea_c, cnn_r, jsea_r };

std::string method_name(Method m);
Method parse_method(const std::string& name);
std::string axis_name(SweepAxis a);
SweepAxis parse_axis(const std::string& name);

/// One named sediment type (200 m layer, linear c from c_min to c_max).
struct NamedSediment {
    std::string name;
    SedimentLayer layer;
};
const std::vector<NamedSediment>& table_i_sediments();

/// Test environment: the training environment with the mismatch
/// knobs applied (SSP gradient delta_c, depth extension delta_d, sediment
/// substitution).
Environment apply_mismatch(const Environment& train_env, double delta_c,
                           double delta_d_m,
                           const std::optional<SedimentLayer>& sediment = {});

struct SweepSpec {
    SweepAxis axis = SweepAxis::snr_db;
    std::vector<double> values;  // sediment axis: index into table_i_sediments()
    double fixed_snr_db = 15.0;
    double fixed_delta_c = 0.0;
    double fixed_delta_d_m = 0.0;
    int fixed_sediment = -1;  // -1 = training sediment
    std::vector<Method> methods;
    std::size_t n_noise_realizations = 20;
    std::size_t n_test = 500;
    std::uint64_t seed = 1;
    double frequency_hz = 109.0;
    double source_depth_m = 9.0;
    std::size_t snapshots_per_sample = 1;
    std::size_t mumi_passes = 0;  // 0 disables the MUMI column
    bool timing = false;          // off -> runtime column is 0 (reproducible CSV)
    AdaptConfig adapt;

    void validate() const;
};

struct ResultRow {
    std::string axis;
    double axis_value = 0.0;
    std::string method;
    double mae_m = 0.0;
    double pcl_percent = 0.0;
    double apu_percent = 0.0;
    std::optional<double> mean_mumi;
    double certain_count = 0.0;  // mean |S| over realizations
    double runtime_s = 0.0;
};

/// Sweep protocol: per axis value, build the mismatched test
/// environment, draw n_test random ranges, average metrics over seeded
/// noise realizations for each method.
std::vector<ResultRow> run_sweep(const SweepSpec& spec, const Environment& train_env,
                                 const ArrayGeometry& array,
                                 const nn::Model* classifier,
                                 const nn::Model* regressor = nullptr);

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);

SweepSpec parse_sweep_spec(const std::string& text);
SweepSpec load_sweep_spec(const std::string& path);

/// Inputs for the closed-form complexity table.
struct ComplexityInput {
    std::size_t L = 21, n_phi = 256, M = 82;
    std::size_t n_tr = 821, n_test = 500, n_itr = 100;
    std::size_t W = 1, n_p = 5, certain = 100;  // |S|
};

struct ComplexityReport {
    // Per-layer multiply counts: conv1..conv3, fc1, head.
    std::vector<std::pair<std::string, std::uint64_t>> layer_ops;
    std::uint64_t cnn_forward_ops = 0;   // (87616 + 80 N_phi) L^2 + 2 M N_phi
    std::uint64_t mfp_ops = 0;           // N_tr (8 L^2 + 8 L)
    std::uint64_t mfp_memory = 0;        // 2 N_tr L
    std::uint64_t jsea_refine_ops = 0;   // M + M W + N_P |S|
    std::uint64_t jsea_memory = 0;       // N_test (L + 1)
    std::uint64_t adaptation_ops = 0;    // 2 N_itr * forward
};

ComplexityReport complexity_report(const ComplexityInput& in);
std::string format_complexity(const ComplexityReport& report);

}  // namespace uwa
