#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uwa/environment.hpp"
#include "uwa/modes.hpp"

namespace uwa {

/// Complex array snapshot: one Fourier coefficient per hydrophone.
struct Snapshot {
    std::vector<std::complex<double>> coefficients;
    double frequency_hz = 0.0;
};

/// One model input: the 2xLxL real/imag encoding of the normalized SCM,
/// plus the received power psi and (for labeled data) the true range.
struct ScmSample {
    std::size_t element_count = 0;                  // L
    std::vector<double> features;                   // 2*L*L, [Re C; Im C] row-major
    std::optional<double> true_range_m;
    double received_power = 0.0;                    // psi
    std::size_t snapshot_count = 1;                 // P
    std::uint64_t sample_id = 0;

    std::complex<double> scm_entry(std::size_t row, std::size_t col) const;
};

struct Dataset {
    std::vector<ScmSample> samples;
    std::size_t element_count = 0;   // L
    double frequency_hz = 0.0;
    std::uint64_t environment_hash = 0;
    std::uint64_t noise_seed = 0;

    std::size_t size() const { return samples.size(); }
};

/// Noise injection request. An SNR of +infinity means "leave clean".
struct NoiseSpec {
    double target_snr_db = std::numeric_limits<double>::infinity();
    bool deterministic_variance = false;  // scale by empirical noise power
    // Optional externally supplied noise coefficients (one Snapshot drawn
    // per signal snapshot); empty means complex white Gaussian.
    std::vector<Snapshot> external_pool;
};

/// Normalized SCM from P snapshots plus the mean received power.
ScmSample compute_scm(const std::vector<Snapshot>& snapshots);

/// Per-hydrophone i.i.d. complex noise added to every snapshot so the
/// batch-level array SNR meets the target. Deterministic under seed.
std::vector<std::vector<Snapshot>> add_noise(const std::vector<std::vector<Snapshot>>& batch,
                                             const NoiseSpec& spec,
                                             std::uint64_t seed);

/// Noiseless single-snapshot fields for a list of source ranges.
std::vector<Snapshot> synthesize_fields(const ModeSet& modes,
                                        double source_depth_m,
                                        const std::vector<double>& ranges_m,
                                        const ArrayGeometry& array);

/// Full synthetic pipeline: solve modes, synthesize, add noise, form SCMs.
Dataset generate_dataset(const Environment& env,
                         double source_depth_m,
                         const std::vector<double>& ranges_m,
                         const ArrayGeometry& array,
                         double frequency_hz,
                         std::size_t snapshots_per_sample,
                         const NoiseSpec& noise,
                         std::uint64_t seed);

/// As above but reusing an already-solved ModeSet.
Dataset generate_dataset(const ModeSet& modes,
                         std::uint64_t environment_hash,
                         double source_depth_m,
                         const std::vector<double>& ranges_m,
                         const ArrayGeometry& array,
                         std::size_t snapshots_per_sample,
                         const NoiseSpec& noise,
                         std::uint64_t seed);

/// Default training range grid: 850 m to 9050 m in 10 m steps.
std::vector<double> training_range_grid();

/// Recover sqrt(psi) * principal eigenvector of a rank-1 clean sample;
/// exact up to global phase for P=1 noiseless data.
Snapshot snapshot_from_rank1(const ScmSample& sample, double frequency_hz);

/// UWAD1 binary round trip.
void write_dataset(const Dataset& ds, const std::string& path, std::uint16_t label_bins = 0);
Dataset read_dataset(const std::string& path);

/// Derived per-sample seed so parallel and serial generation agree.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// splitmix64-based standard normal pair generator used for all Gaussian
/// draws (stable across platforms, unlike std::normal_distribution).
struct GaussianStream {
    explicit GaussianStream(std::uint64_t seed) : state_(seed) {}
    double next();
    std::uint64_t next_u64();

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace uwa
