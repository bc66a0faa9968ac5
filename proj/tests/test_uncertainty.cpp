#include "doctest.h"
#include "uwa/uncertainty.hpp"

#include <cmath>

using namespace uwa;

namespace {

RangePmf pmf_from(std::vector<double> heights) {
    RangePmf pmf;
    pmf.grid = RangeGrid{900.0, 900.0 + 100.0 * (heights.size() - 1), 100.0};
    pmf.probabilities = std::move(heights);
    return pmf;
}

}  // namespace

TEST_CASE("find_significant_peaks: PU branches") {
    SUBCASE("one-hot: single peak, PU = 0") {
        std::vector<double> h(82, 0.0);
        h[20] = 1.0;
        auto rep = find_significant_peaks(pmf_from(h));
        REQUIRE(rep.peak_bins.size() == 1);
        CHECK(rep.peak_bins[0] == 20);
        CHECK(rep.pu == 0);
    }
    SUBCASE("two maxima 0.5 and 0.4 at Q=10: both significant, PU = 1") {
        std::vector<double> h(20, 0.0);
        h[4] = 0.5;
        h[12] = 0.4;
        auto rep = find_significant_peaks(pmf_from(h), 10.0, 1);
        REQUIRE(rep.peak_bins.size() == 2);
        CHECK(rep.pu == 1);
    }
    SUBCASE("heights 0.9 and 0.05: only the tall peak significant, PU = 0") {
        std::vector<double> h(20, 0.0);
        h[4] = 0.9;
        h[12] = 0.05;
        auto rep = find_significant_peaks(pmf_from(h), 10.0, 1);
        REQUIRE(rep.peak_bins.size() == 1);
        CHECK(rep.peak_bins[0] == 4);
        CHECK(rep.pu == 0);
    }
    SUBCASE("boundary of the ratio test: h2 = h1/Q counts as significant") {
        std::vector<double> h(20, 0.0);
        h[4] = 0.9;
        h[12] = 0.09;
        auto rep = find_significant_peaks(pmf_from(h), 10.0, 1);
        CHECK(rep.peak_bins.size() == 2);
        CHECK(rep.pu == 1);
    }
}

TEST_CASE("find_significant_peaks: scaling invariance and plateau tie-break") {
    std::vector<double> h(15, 0.0);
    h[3] = 0.5;
    h[9] = 0.3;
    auto base = find_significant_peaks(pmf_from(h), 10.0, 1);
    std::vector<double> scaled = h;
    for (auto& v : scaled) v *= 7.3;
    auto big = find_significant_peaks(pmf_from(scaled), 10.0, 1);
    CHECK(base.peak_bins == big.peak_bins);
    CHECK(base.pu == big.pu);

    // Plateau: leftmost bin wins.
    std::vector<double> plat(10, 0.0);
    plat[4] = 0.5;
    plat[5] = 0.5;
    auto rep = find_significant_peaks(pmf_from(plat), 10.0, 1);
    REQUIRE(rep.peak_bins.size() == 1);
    CHECK(rep.peak_bins[0] == 4);

    // Wider window suppresses nearby secondary maxima.
    std::vector<double> close(10, 0.0);
    close[4] = 0.5;
    close[6] = 0.4;
    CHECK(find_significant_peaks(pmf_from(close), 10.0, 1).peak_bins.size() == 2);
    CHECK(find_significant_peaks(pmf_from(close), 10.0, 2).peak_bins.size() == 1);

    CHECK_THROWS_AS(find_significant_peaks(pmf_from(h), 1.0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(find_significant_peaks(pmf_from(h), 10.0, 0),
                    std::invalid_argument);
}

TEST_CASE("apu: percentage of uncertain samples") {
    PeakReport c, u;
    c.pu = 0;
    u.pu = 1;
    CHECK(apu({c, c, c}) == doctest::Approx(0.0));
    CHECK(apu({c, u, u, c}) == doctest::Approx(50.0));
    CHECK(apu({u}) == doctest::Approx(100.0));
    CHECK_THROWS_AS(apu({}), std::invalid_argument);
}

namespace {

ScmSample random_sample(std::size_t L, std::uint64_t seed) {
    ScmSample s;
    s.element_count = L;
    s.features.resize(2 * L * L);
    GaussianStream g(seed);
    for (auto& v : s.features) v = g.next();
    return s;
}

}  // namespace

TEST_CASE("mumi: trivial values and range bound") {
    RangeGrid grid;
    ScmSample sample = random_sample(6, 61);

    SUBCASE("J < 2 is rejected") {
        nn::ArchConfig arch = nn::ArchConfig::regressor(6);
        arch.convs = {{2, 3, 3}};
        arch.feature_dim = 16;
        nn::Model reg = nn::Model::init(arch, 62);
        CHECK_THROWS_AS(mumi(reg, sample, 1, grid, 1), std::invalid_argument);
    }
    SUBCASE("regressor with dropout 0: all passes identical, MUMI = 0") {
        nn::ArchConfig arch = nn::ArchConfig::regressor(6);
        arch.convs = {{2, 3, 3}};
        arch.feature_dim = 16;
        arch.dropout_rate = 0.0;
        nn::Model reg = nn::Model::init(arch, 63);
        CHECK(mumi(reg, sample, 10, grid, 3) == doctest::Approx(0.0));
    }
    SUBCASE("classifier with dropout 0: per-pass PMFs identical, MUMI = 0") {
        nn::ArchConfig arch = nn::ArchConfig::classifier(6, 82);
        arch.convs = {{2, 3, 3}};
        arch.feature_dim = 16;
        arch.dropout_rate = 0.0;
        nn::Model cls = nn::Model::init(arch, 64);
        CHECK(mumi(cls, sample, 10, grid, 3) == doctest::Approx(0.0));
    }
    SUBCASE("MUMI stays within [0, ln M] and is seed-deterministic") {
        nn::ArchConfig arch = nn::ArchConfig::classifier(6, 82);
        arch.convs = {{2, 3, 3}};
        arch.feature_dim = 16;
        arch.dropout_rate = 0.5;
        nn::Model cls = nn::Model::init(arch, 65);
        double v = mumi(cls, sample, 20, grid, 7);
        CHECK(v >= 0.0);
        CHECK(v <= std::log(82.0));
        CHECK(mumi(cls, sample, 20, grid, 7) == doctest::Approx(v));
    }
}

TEST_CASE("partition_certain: membership and estimates") {
    Dataset ds;
    ds.element_count = 2;
    for (std::uint64_t i = 0; i < 4; ++i) {
        ScmSample s;
        s.sample_id = i;
        s.element_count = 2;
        s.received_power = 1.0 + static_cast<double>(i);
        ds.samples.push_back(s);
    }
    PeakReport c, u;
    c.pu = 0;
    c.peak_bins = {20};
    c.peak_heights = {0.9};
    u.pu = 1;
    u.peak_bins = {5, 30};
    u.peak_heights = {0.5, 0.4};

    SUBCASE("all single-peak: S = all") {
        auto part = partition_certain({c, c, c, c}, ds);
        CHECK(part.certain.size() == 4);
        CHECK(part.uncertain_ids.empty());
        for (const auto& s : part.certain) CHECK(s.d_hat_m == doctest::Approx(2900.0));
    }
    SUBCASE("mixed batch: exact membership by PU bit") {
        auto part = partition_certain({c, u, u, c}, ds);
        REQUIRE(part.certain.size() == 2);
        REQUIRE(part.uncertain_ids.size() == 2);
        CHECK(part.certain[0].sample_id == 0);
        CHECK(part.certain[1].sample_id == 3);
        CHECK(part.certain[1].psi == doctest::Approx(4.0));
        CHECK(part.uncertain_ids[0] == 1);
        CHECK(part.uncertain_ids[1] == 2);
    }
    SUBCASE("reports must cover the dataset") {
        CHECK_THROWS_AS(partition_certain({c, u}, ds), std::invalid_argument);
    }
}

TEST_CASE("assess_uncertainty ties the pieces together") {
    nn::ArchConfig arch = nn::ArchConfig::classifier(5, 82);
    arch.convs = {{2, 3, 3}};
    arch.feature_dim = 16;
    nn::Model cls = nn::Model::init(arch, 71);
    Dataset ds;
    ds.element_count = 5;
    for (std::uint64_t i = 0; i < 6; ++i) {
        auto s = random_sample(5, 100 + i);
        s.sample_id = i;
        ds.samples.push_back(s);
    }
    auto rep = assess_uncertainty(cls, ds, 10.0, 1, 10, 3);
    REQUIRE(rep.per_sample.size() == 6);
    CHECK(rep.apu_percent == doctest::Approx(apu(rep.per_sample)));
    CHECK(rep.partition.certain.size() + rep.partition.uncertain_ids.size() == 6);
    REQUIRE(rep.mumi_nats.has_value());
    for (double v : *rep.mumi_nats) {
        CHECK(v >= 0.0);
        CHECK(v <= std::log(82.0));
    }
}
