#include "uwa/signals.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace uwa {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double snapshot_power(const Snapshot& s) {
    double acc = 0.0;
    for (const auto& c : s.coefficients) acc += std::norm(c);
    return acc;
}

}  // namespace

std::uint64_t GaussianStream::next_u64() { return splitmix64(state_); }

double GaussianStream::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller on splitmix64 uniforms; no libstdc++ distribution
    // dependence so streams are stable across platforms.
    double u1 = (next_u64() >> 11) * 0x1.0p-53;
    double u2 = (next_u64() >> 11) * 0x1.0p-53;
    u1 = std::max(u1, 0x1.0p-53);
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    return splitmix64(s);
}

std::complex<double> ScmSample::scm_entry(std::size_t row, std::size_t col) const {
    const std::size_t L = element_count;
    return {features[row * L + col], features[L * L + row * L + col]};
}

ScmSample compute_scm(const std::vector<Snapshot>& snapshots) {
    if (snapshots.empty()) throw std::invalid_argument("compute_scm: no snapshots");
    const std::size_t L = snapshots.front().coefficients.size();
    std::vector<std::complex<double>> scm(L * L, 0.0);
    double power = 0.0;
    for (const auto& snap : snapshots) {
        if (snap.coefficients.size() != L)
            throw std::invalid_argument("compute_scm: inconsistent element count");
        double p = snapshot_power(snap);
        if (!(p > 0.0)) throw std::invalid_argument("compute_scm: zero-norm snapshot");
        power += p;
        double inv = 1.0 / p;
        for (std::size_t r = 0; r < L; ++r)
            for (std::size_t c = 0; c < L; ++c)
                scm[r * L + c] += inv * snap.coefficients[r] * std::conj(snap.coefficients[c]);
    }
    const double inv_p = 1.0 / static_cast<double>(snapshots.size());
    ScmSample out;
    out.element_count = L;
    out.snapshot_count = snapshots.size();
    out.received_power = power * inv_p;
    out.features.resize(2 * L * L);
    for (std::size_t i = 0; i < L * L; ++i) {
        out.features[i] = scm[i].real() * inv_p;
        out.features[L * L + i] = scm[i].imag() * inv_p;
    }
    return out;
}

std::vector<std::vector<Snapshot>> add_noise(const std::vector<std::vector<Snapshot>>& batch,
                                             const NoiseSpec& spec,
                                             std::uint64_t seed) {
    if (batch.empty()) throw std::invalid_argument("add_noise: empty batch");
    if (std::isinf(spec.target_snr_db) && spec.target_snr_db > 0.0) return batch;
    if (!std::isfinite(spec.target_snr_db))
        throw std::invalid_argument("add_noise: target SNR must be finite or +inf");

    const std::size_t L = batch.front().front().coefficients.size();
    double signal_power = 0.0;  // sum over samples of per-snapshot-mean array power
    for (const auto& snaps : batch) {
        double p = 0.0;
        for (const auto& s : snaps) {
            if (s.coefficients.size() != L)
                throw std::invalid_argument("add_noise: inconsistent element count");
            p += snapshot_power(s);
        }
        signal_power += p / static_cast<double>(snaps.size());
    }
    const double n_samples = static_cast<double>(batch.size());
    // Batch SNR definition: SNR = 10 log10(total_signal / (N L psi_w)).
    const double psi_w =
        signal_power / (n_samples * static_cast<double>(L) *
                        std::pow(10.0, spec.target_snr_db / 10.0));

    if (!spec.external_pool.empty())
        for (const auto& s : spec.external_pool)
            if (s.coefficients.size() != L)
                throw std::invalid_argument("add_noise: external noise has wrong element count");

    // Draw raw noise for every snapshot of every sample.
    std::vector<std::vector<std::vector<std::complex<double>>>> noise(batch.size());
    double raw_power = 0.0;
    std::size_t n_elements = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        GaussianStream rng(derive_seed(seed, i));
        noise[i].resize(batch[i].size());
        for (auto& vec : noise[i]) {
            vec.resize(L);
            if (spec.external_pool.empty()) {
                for (auto& c : vec)
                    c = std::complex<double>(rng.next(), rng.next()) * std::sqrt(0.5);
            } else {
                const auto& src =
                    spec.external_pool[rng.next_u64() % spec.external_pool.size()];
                vec.assign(src.coefficients.begin(), src.coefficients.end());
            }
            for (const auto& c : vec) raw_power += std::norm(c);
            n_elements += L;
        }
    }

    double unit_power;  // expected (or empirical) per-element power of the raw noise
    if (spec.deterministic_variance) {
        unit_power = raw_power / static_cast<double>(n_elements);
    } else if (spec.external_pool.empty()) {
        unit_power = 1.0;
    } else {
        double pool = 0.0;
        for (const auto& s : spec.external_pool) pool += snapshot_power(s);
        unit_power = pool / (static_cast<double>(spec.external_pool.size()) * L);
    }
    const double scale = std::sqrt(psi_w / unit_power);

    std::vector<std::vector<Snapshot>> out = batch;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t p = 0; p < out[i].size(); ++p)
            for (std::size_t l = 0; l < L; ++l)
                out[i][p].coefficients[l] += scale * noise[i][p][l];
    return out;
}

std::vector<Snapshot> synthesize_fields(const ModeSet& modes,
                                        double source_depth_m,
                                        const std::vector<double>& ranges_m,
                                        const ArrayGeometry& array) {
    std::vector<Snapshot> out(ranges_m.size());
    for (std::size_t i = 0; i < ranges_m.size(); ++i) {
        out[i].frequency_hz = modes.frequency_hz;
        out[i].coefficients = pressure_field(modes, source_depth_m, ranges_m[i], array);
    }
    return out;
}

Dataset generate_dataset(const ModeSet& modes,
                         std::uint64_t environment_hash,
                         double source_depth_m,
                         const std::vector<double>& ranges_m,
                         const ArrayGeometry& array,
                         std::size_t snapshots_per_sample,
                         const NoiseSpec& noise,
                         std::uint64_t seed) {
    Dataset ds;
    ds.element_count = array.size();
    ds.frequency_hz = modes.frequency_hz;
    ds.environment_hash = environment_hash;
    ds.noise_seed = seed;
    if (ranges_m.empty()) return ds;

    std::vector<Snapshot> clean = synthesize_fields(modes, source_depth_m, ranges_m, array);
    std::vector<std::vector<Snapshot>> batch(ranges_m.size());
    for (std::size_t i = 0; i < ranges_m.size(); ++i)
        batch[i].assign(snapshots_per_sample, clean[i]);
    batch = add_noise(batch, noise, seed);

    ds.samples.resize(ranges_m.size());
    for (std::size_t i = 0; i < ranges_m.size(); ++i) {
        ds.samples[i] = compute_scm(batch[i]);
        ds.samples[i].true_range_m = ranges_m[i];
        ds.samples[i].sample_id = i;
    }
    return ds;
}

Dataset generate_dataset(const Environment& env,
                         double source_depth_m,
                         const std::vector<double>& ranges_m,
                         const ArrayGeometry& array,
                         double frequency_hz,
                         std::size_t snapshots_per_sample,
                         const NoiseSpec& noise,
                         std::uint64_t seed) {
    for (double r : ranges_m)
        if (!(r > 0.0)) throw std::invalid_argument("ranges must be positive");
    array.validate(env.water_depth_m);
    ModeSet modes = solve_modes(env, frequency_hz);
    return generate_dataset(modes, env.hash(), source_depth_m, ranges_m, array,
                            snapshots_per_sample, noise, seed);
}

std::vector<double> training_range_grid() {
    std::vector<double> ranges;
    for (int r = 850; r <= 9050; r += 10) ranges.push_back(static_cast<double>(r));
    return ranges;
}

Snapshot snapshot_from_rank1(const ScmSample& sample, double frequency_hz) {
    const std::size_t L = sample.element_count;
    std::size_t j = 0;
    double best = -1.0;
    for (std::size_t d = 0; d < L; ++d) {
        double v = sample.scm_entry(d, d).real();
        if (v > best) {
            best = v;
            j = d;
        }
    }
    if (!(best > 0.0)) throw std::invalid_argument("snapshot_from_rank1: degenerate SCM");
    Snapshot out;
    out.frequency_hz = frequency_hz;
    out.coefficients.resize(L);
    // Column j of C equals u * conj(u_j); dividing by sqrt(C_jj) makes u_j
    // real positive, then sqrt(psi) restores the physical amplitude.
    for (std::size_t r = 0; r < L; ++r)
        out.coefficients[r] = sample.scm_entry(r, j) / std::sqrt(best) *
                              std::sqrt(sample.received_power);
    return out;
}

namespace {
template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
}  // namespace

void write_dataset(const Dataset& ds, const std::string& path, std::uint16_t label_bins) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out.write("UWAD1", 5);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(ds.element_count));
    put<std::uint16_t>(out, label_bins);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.samples.size()));
    put<double>(out, ds.frequency_hz);
    put<std::uint32_t>(out, 1u);  // bit0: provenance block follows
    put<std::uint64_t>(out, ds.environment_hash);
    put<std::uint64_t>(out, ds.noise_seed);
    const std::size_t L = ds.element_count;
    for (const auto& s : ds.samples) {
        for (std::size_t i = 0; i < 2 * L * L; ++i)
            put<float>(out, static_cast<float>(s.features[i]));
        put<double>(out, s.true_range_m ? *s.true_range_m
                                        : std::numeric_limits<double>::quiet_NaN());
        put<double>(out, s.received_power);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "UWAD1", 5) != 0)
        throw std::runtime_error("not a UWAD1 file: " + path);
    Dataset ds;
    ds.element_count = get<std::uint16_t>(in);
    get<std::uint16_t>(in);  // label bins, informational
    const std::uint32_t n = get<std::uint32_t>(in);
    ds.frequency_hz = get<double>(in);
    const std::uint32_t flags = get<std::uint32_t>(in);
    if (flags & 1u) {
        ds.environment_hash = get<std::uint64_t>(in);
        ds.noise_seed = get<std::uint64_t>(in);
    }
    const std::size_t L = ds.element_count;
    ds.samples.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto& s = ds.samples[i];
        s.element_count = L;
        s.sample_id = i;
        s.features.resize(2 * L * L);
        for (std::size_t k = 0; k < 2 * L * L; ++k)
            s.features[k] = static_cast<double>(get<float>(in));
        double range = get<double>(in);
        if (!std::isnan(range)) s.true_range_m = range;
        s.received_power = get<double>(in);
    }
    if (!in) throw std::runtime_error("truncated UWAD1 file: " + path);
    return ds;
}

}  // namespace uwa
