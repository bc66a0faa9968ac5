#include "doctest.h"
#include "uwa/signals.hpp"

#include <cmath>
#include <complex>
#include <cstdio>

using namespace uwa;

namespace {

Snapshot make_snapshot(std::vector<std::complex<double>> c, double f = 109.0) {
    Snapshot s;
    s.coefficients = std::move(c);
    s.frequency_hz = f;
    return s;
}

std::complex<double> entry(const ScmSample& s, std::size_t r, std::size_t c) {
    return s.scm_entry(r, c);
}

}  // namespace

TEST_CASE("compute_scm: rank-1 unit-trace for P=1") {
    Snapshot s = make_snapshot({{1.0, 2.0}, {-0.5, 0.3}, {0.2, -1.1}});
    ScmSample scm = compute_scm({s});
    const std::size_t L = 3;
    double trace = 0.0;
    for (std::size_t i = 0; i < L; ++i) trace += entry(scm, i, i).real();
    CHECK(trace == doctest::Approx(1.0).epsilon(1e-12));
    // Rank-1 with unit trace implies C^2 = C.
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) {
            std::complex<double> cij = 0.0;
            for (std::size_t k = 0; k < L; ++k)
                cij += entry(scm, i, k) * entry(scm, k, j);
            CHECK(std::abs(cij - entry(scm, i, j)) < 1e-12);
        }
}

TEST_CASE("compute_scm: scaling leaves features, multiplies power by 25") {
    Snapshot s = make_snapshot({{1.0, 0.0}, {0.0, 2.0}, {3.0, -1.0}});
    Snapshot s5 = s;
    for (auto& c : s5.coefficients) c *= 5.0;
    ScmSample a = compute_scm({s}), b = compute_scm({s5});
    for (std::size_t i = 0; i < a.features.size(); ++i)
        CHECK(std::abs(a.features[i] - b.features[i]) < 1e-12);
    CHECK(b.received_power == doctest::Approx(25.0 * a.received_power));
}

TEST_CASE("compute_scm: two orthogonal unit snapshots average to diag(1/2,1/2,0)") {
    Snapshot e1 = make_snapshot({{1, 0}, {0, 0}, {0, 0}});
    Snapshot e2 = make_snapshot({{0, 0}, {1, 0}, {0, 0}});
    ScmSample scm = compute_scm({e1, e2});
    CHECK(std::abs(entry(scm, 0, 0) - 0.5) < 1e-12);
    CHECK(std::abs(entry(scm, 1, 1) - 0.5) < 1e-12);
    CHECK(std::abs(entry(scm, 2, 2)) < 1e-12);
    CHECK(std::abs(entry(scm, 0, 1)) < 1e-12);
}

TEST_CASE("compute_scm: global phase invariance and zero-norm error") {
    Snapshot s = make_snapshot({{0.3, 0.1}, {-1.0, 0.4}});
    Snapshot rotated = s;
    std::complex<double> phase = std::exp(std::complex<double>(0.0, 1.234));
    for (auto& c : rotated.coefficients) c *= phase;
    ScmSample a = compute_scm({s}), b = compute_scm({rotated});
    for (std::size_t i = 0; i < a.features.size(); ++i)
        CHECK(std::abs(a.features[i] - b.features[i]) <= 1e-12);

    Snapshot zero = make_snapshot({{0, 0}, {0, 0}});
    CHECK_THROWS(compute_scm({zero}));
    CHECK_THROWS(compute_scm({}));
}

TEST_CASE("Hermitian / PSD / unit-trace invariants on randomized samples") {
    GaussianStream g(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t L = 2 + (g.next_u64() % 8);
        std::size_t P = 1 + (g.next_u64() % 4);
        std::vector<Snapshot> snaps(P);
        for (auto& s : snaps) {
            s.frequency_hz = 109.0;
            s.coefficients.resize(L);
            for (auto& c : s.coefficients) c = {g.next(), g.next()};
        }
        ScmSample scm = compute_scm(snaps);
        double trace = 0.0;
        for (std::size_t i = 0; i < L; ++i) trace += scm.scm_entry(i, i).real();
        CHECK(std::abs(trace - 1.0) < 1e-9);
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j < L; ++j)
                CHECK(std::abs(scm.scm_entry(i, j) -
                               std::conj(scm.scm_entry(j, i))) <= 1e-12);
        // Quadratic-form PSD probe.
        for (int probe = 0; probe < 4; ++probe) {
            std::vector<std::complex<double>> v(L);
            for (auto& c : v) c = {g.next(), g.next()};
            std::complex<double> q = 0.0;
            for (std::size_t i = 0; i < L; ++i)
                for (std::size_t j = 0; j < L; ++j)
                    q += std::conj(v[i]) * scm.scm_entry(i, j) * v[j];
            CHECK(q.real() >= -1e-9);
        }
        CHECK(scm.received_power >= 0.0);
    }
}

TEST_CASE("add_noise: clean sentinel, determinism, deterministic variance") {
    GaussianStream g(7);
    std::vector<std::vector<Snapshot>> batch(8);
    for (auto& set : batch) {
        set.resize(1);
        set[0].frequency_hz = 109.0;
        set[0].coefficients.resize(4);
        for (auto& c : set[0].coefficients) c = {g.next(), g.next()};
    }

    SUBCASE("infinite SNR leaves the batch untouched") {
        NoiseSpec clean;  // default +inf
        auto out = add_noise(batch, clean, 5);
        for (std::size_t i = 0; i < batch.size(); ++i)
            CHECK(out[i][0].coefficients == batch[i][0].coefficients);
    }
    SUBCASE("same seed, same noise") {
        NoiseSpec spec;
        spec.target_snr_db = 5.0;
        auto a = add_noise(batch, spec, 42);
        auto b = add_noise(batch, spec, 42);
        for (std::size_t i = 0; i < batch.size(); ++i)
            CHECK(a[i][0].coefficients == b[i][0].coefficients);
        auto c = add_noise(batch, spec, 43);
        bool any_diff = false;
        for (std::size_t i = 0; i < batch.size(); ++i)
            if (a[i][0].coefficients != c[i][0].coefficients) any_diff = true;
        CHECK(any_diff);
    }
    SUBCASE("deterministic-variance 0 dB: empirical noise power is exact") {
        NoiseSpec spec;
        spec.target_snr_db = 0.0;
        spec.deterministic_variance = true;
        auto out = add_noise(batch, spec, 11);
        double signal_power = 0.0, noise_power = 0.0;
        std::size_t n_vals = 0;
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (std::size_t l = 0; l < 4; ++l) {
                signal_power += std::norm(batch[i][0].coefficients[l]);
                noise_power += std::norm(out[i][0].coefficients[l] -
                                         batch[i][0].coefficients[l]);
                ++n_vals;
            }
        double psi_w_target = signal_power / static_cast<double>(n_vals);
        CHECK(noise_power / n_vals ==
              doctest::Approx(psi_w_target).epsilon(1e-9));
    }
    SUBCASE("empty batch is rejected") {
        NoiseSpec spec;
        spec.target_snr_db = 5.0;
        CHECK_THROWS(add_noise({}, spec, 1));
    }
}

TEST_CASE("add_noise: Gaussian batch SNR converges (N=500, L=21, 0.5 dB)") {
    GaussianStream g(31);
    std::vector<std::vector<Snapshot>> batch(500);
    for (auto& set : batch) {
        set.resize(1);
        set[0].frequency_hz = 109.0;
        set[0].coefficients.resize(21);
        for (auto& c : set[0].coefficients) c = {g.next(), g.next()};
    }
    NoiseSpec spec;
    spec.target_snr_db = 10.0;
    auto out = add_noise(batch, spec, 77);
    double sig = 0.0, noi = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t l = 0; l < 21; ++l) {
            sig += std::norm(batch[i][0].coefficients[l]);
            noi += std::norm(out[i][0].coefficients[l] -
                             batch[i][0].coefficients[l]);
        }
    double achieved = 10.0 * std::log10(sig / noi);
    CHECK(std::abs(achieved - 10.0) < 0.5);
}

TEST_CASE("training_range_grid: the default 821 ranges") {
    auto grid = training_range_grid();
    REQUIRE(grid.size() == 821);
    CHECK(grid.front() == doctest::Approx(850.0));
    CHECK(grid.back() == doctest::Approx(9050.0));
    CHECK(grid[1] - grid[0] == doctest::Approx(10.0));
}

TEST_CASE("generate_dataset: determinism, labels, empty list") {
    Environment env = baseline_environment();
    ArrayGeometry arr = baseline_array();
    std::vector<double> ranges = {1000.0, 2500.0, 7000.0};
    NoiseSpec noise;
    noise.target_snr_db = 12.0;
    Dataset a = generate_dataset(env, 9.0, ranges, arr, 109.0, 1, noise, 5);
    Dataset b = generate_dataset(env, 9.0, ranges, arr, 109.0, 1, noise, 5);
    REQUIRE(a.size() == 3);
    CHECK(a.element_count == 21);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].features == b.samples[i].features);
        REQUIRE(a.samples[i].true_range_m.has_value());
        CHECK(*a.samples[i].true_range_m == doctest::Approx(ranges[i]));
    }
    Dataset empty = generate_dataset(env, 9.0, {}, arr, 109.0, 1, noise, 5);
    CHECK(empty.size() == 0);
}

TEST_CASE("UWAD1 round trip is bit exact") {
    Environment env = baseline_environment();
    ArrayGeometry arr = baseline_array();
    NoiseSpec noise;
    noise.target_snr_db = 8.0;
    Dataset ds = generate_dataset(env, 9.0, {1200.0, 4400.0}, arr, 109.0, 1,
                                  noise, 9);
    const std::string path = "roundtrip_test.uwad";
    write_dataset(ds, path);
    Dataset back = read_dataset(path);
    REQUIRE(back.size() == ds.size());
    CHECK(back.element_count == ds.element_count);
    CHECK(back.frequency_hz == ds.frequency_hz);
    CHECK(back.environment_hash == ds.environment_hash);
    CHECK(back.noise_seed == ds.noise_seed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        // Features are stored as float32 in the file; the round trip is
        // exact at file precision.
        for (std::size_t k = 0; k < ds.samples[i].features.size(); ++k)
            CHECK(back.samples[i].features[k] ==
                  static_cast<double>(
                      static_cast<float>(ds.samples[i].features[k])));
        CHECK(*back.samples[i].true_range_m == *ds.samples[i].true_range_m);
        CHECK(back.samples[i].received_power == ds.samples[i].received_power);
    }
    // A second serialization of the re-read dataset is byte-identical.
    const std::string path2 = "roundtrip_test2.uwad";
    write_dataset(back, path2);
    Dataset again = read_dataset(path2);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(again.samples[i].features == back.samples[i].features);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("snapshot_from_rank1 reconstructs clean P=1 features") {
    Environment env = baseline_environment();
    ArrayGeometry arr = baseline_array();
    NoiseSpec clean;
    Dataset ds = generate_dataset(env, 9.0, {3000.0}, arr, 109.0, 1, clean, 1);
    Snapshot snap = snapshot_from_rank1(ds.samples[0], 109.0);
    ScmSample rebuilt = compute_scm({snap});
    for (std::size_t i = 0; i < rebuilt.features.size(); ++i)
        CHECK(rebuilt.features[i] ==
              doctest::Approx(ds.samples[0].features[i]).epsilon(1e-9));
    CHECK(rebuilt.received_power ==
          doctest::Approx(ds.samples[0].received_power).epsilon(1e-9));
}

TEST_CASE("derive_seed decorrelates indices") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 7) == derive_seed(5, 7));
}
