#include "doctest.h"
#include "uwa/adaptation.hpp"

#include <cmath>

using namespace uwa;

namespace {

RangePmf pmf_with_peaks(const std::vector<std::pair<std::size_t, double>>& peaks,
                        std::size_t bins = 82) {
    RangePmf pmf;
    pmf.grid = RangeGrid{};
    pmf.probabilities.assign(bins, 0.0);
    for (auto [bin, h] : peaks) pmf.probabilities[bin] = h;
    return pmf;
}

nn::Model small_classifier(std::uint64_t seed, std::size_t L = 5,
                           std::size_t M = 82,
                           std::vector<std::pair<std::size_t, double>> bias = {}) {
    nn::ArchConfig arch = nn::ArchConfig::classifier(L, M);
    arch.convs = {{2, 3, 3}};
    arch.feature_dim = 16;
    nn::Model m = nn::Model::init(arch, seed);
    // Optional head biases shape the output PMFs so tests can control the
    // certain/uncertain mixture.
    for (auto [k, v] : bias) m.find("head.b")->value.values[k] = v;
    return m;
}

Dataset random_dataset(std::size_t n, std::size_t L, std::uint64_t seed) {
    Dataset ds;
    ds.element_count = L;
    GaussianStream g(seed);
    for (std::uint64_t i = 0; i < n; ++i) {
        ScmSample s;
        s.sample_id = i;
        s.element_count = L;
        s.features.resize(2 * L * L);
        for (auto& v : s.features) v = g.next();
        s.received_power = std::abs(g.next()) + 0.1;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

TEST_CASE("AdaptConfig validation") {
    AdaptConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    AdaptConfig bad = cfg;
    bad.beta = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.delta_m = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("estimate_psi0: neighborhood mean, sentinel, boundary") {
    std::vector<CertainSample> certain = {{0, 1000.0, 2.0}, {1, 1400.0, 4.0}};
    auto v = estimate_psi0(1200.0, certain, 500.0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(3.0));

    CHECK_FALSE(estimate_psi0(3000.0, certain, 500.0).has_value());

    // |d - d_hat| = delta exactly is included.
    auto edge = estimate_psi0(1900.0, certain, 500.0);
    REQUIRE(edge.has_value());
    CHECK(*edge == doctest::Approx(4.0));

    CHECK_THROWS_AS(estimate_psi0(1000.0, {}, 500.0), std::invalid_argument);
}

TEST_CASE("jsea_select: power-matching arithmetic and contracts") {
    AdaptConfig cfg;  // delta 500, Q 10, sigma 2

    // Certain samples placing psi0(2 km) = 9.0 and psi0(6 km) = 1.0.
    std::vector<CertainSample> certain = {{0, 2000.0, 9.0}, {1, 6000.0, 1.0}};
    // Peaks at 2 km (bin 11) and 6 km (bin 51).
    RangePmf pmf = pmf_with_peaks({{11, 0.5}, {51, 0.45}});

    SUBCASE("power match picks the 6 km peak for psi = 1.2") {
        auto lab = jsea_select(pmf, 1.2, certain, cfg, 7);
        CHECK(lab.d_hat_m == doctest::Approx(6000.0));
        CHECK(lab.origin == PseudoOrigin::jsea_power_selected);
        CHECK_FALSE(lab.not_rectifiable);
        CHECK(lab.sample_id == 7);
        CHECK(lab.soft.argmax() == 51);
        CHECK_NOTHROW(lab.soft.validate());
    }
    SUBCASE("single-peak PMF keeps its peak regardless of psi") {
        RangePmf single = pmf_with_peaks({{11, 0.9}});
        auto lab = jsea_select(single, 123456.0, certain, cfg);
        CHECK(lab.d_hat_m == doctest::Approx(2000.0));
        CHECK(lab.origin == PseudoOrigin::certain_peak);
    }
    SUBCASE("tie in squared distance goes to the smaller range") {
        std::vector<CertainSample> sym = {{0, 2000.0, 2.0}, {1, 6000.0, 4.0}};
        auto lab = jsea_select(pmf, 3.0, sym, cfg);  // both scores = 1
        CHECK(lab.d_hat_m == doctest::Approx(2000.0));
    }
    SUBCASE("all neighborhoods empty: largest peak, flagged") {
        std::vector<CertainSample> far = {{0, 9000.0, 5.0}};
        auto lab = jsea_select(pmf, 1.0, far, cfg);
        CHECK(lab.d_hat_m == doctest::Approx(2000.0));  // taller peak
        CHECK(lab.not_rectifiable);
    }
    SUBCASE("empty certain set with a multi-peak sample is an error") {
        CHECK_THROWS(jsea_select(pmf, 1.0, {}, cfg));
    }
    SUBCASE("selection is invariant to a common power rescaling") {
        auto base = jsea_select(pmf, 1.2, certain, cfg);
        std::vector<CertainSample> scaled = certain;
        for (auto& c : scaled) c.psi *= 37.0;
        auto big = jsea_select(pmf, 1.2 * 37.0, scaled, cfg);
        CHECK(base.d_hat_m == doctest::Approx(big.d_hat_m));
    }
}

TEST_CASE("shot_adapt: zero-step identity and freeze contract") {
    nn::Model cls = small_classifier(81, 5, 82, {{10, 4.0}});
    Dataset ds = random_dataset(12, 5, 82);
    AdaptConfig cfg;
    cfg.n_iterations = 10;
    {
        // Sanity: the biased head leaves at least one certain sample.
        auto report = assess_uncertainty(cls, ds, cfg.Q, cfg.window_w);
        REQUIRE_FALSE(report.partition.certain.empty());
    }

    SUBCASE("mu_shot = 0 leaves the model and estimates unchanged") {
        AdaptConfig zero = cfg;
        zero.mu_shot = 0.0;
        auto res = shot_adapt(cls, ds, zero, 5);
        for (std::size_t i = 0; i < cls.params.size(); ++i)
            CHECK(res.model.params[i].value.values == cls.params[i].value.values);
        auto pmfs = predict_pmfs(cls, ds);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto rep = find_significant_peaks(pmfs[i], cfg.Q, cfg.window_w);
            if (rep.pu == 1)
                CHECK(res.d_hat_m[i] == doctest::Approx(predict_range(pmfs[i])));
        }
    }
    SUBCASE("head parameters bit-identical, trunk moves") {
        auto res = shot_adapt(cls, ds, cfg, 5);
        bool trunk_moved = false;
        for (std::size_t i = 0; i < cls.params.size(); ++i) {
            if (cls.params[i].group == nn::Group::head)
                CHECK(res.model.params[i].value.values ==
                      cls.params[i].value.values);
            else if (res.model.params[i].value.values !=
                     cls.params[i].value.values)
                trunk_moved = true;
        }
        CHECK(trunk_moved);
    }
    SUBCASE("certain samples keep their pre-adaptation estimates") {
        auto res = shot_adapt(cls, ds, cfg, 5);
        auto pmfs = predict_pmfs(cls, ds);
        RangeGrid grid{cls.grid_d_min, cls.grid_d_max, cls.grid_bin};
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto rep = find_significant_peaks(pmfs[i], cfg.Q, cfg.window_w);
            if (rep.pu == 0)
                CHECK(res.d_hat_m[i] ==
                      doctest::Approx(grid.midpoint(rep.peak_bins[0])));
        }
    }
    SUBCASE("determinism under seed") {
        auto a = shot_adapt(cls, ds, cfg, 5);
        auto b = shot_adapt(cls, ds, cfg, 5);
        for (std::size_t i = 0; i < a.model.params.size(); ++i)
            CHECK(a.model.params[i].value.values ==
                  b.model.params[i].value.values);
        CHECK(a.d_hat_m == b.d_hat_m);
    }
}

TEST_CASE("shot entropy term diversifies a degenerate model") {
    // A head biased hard toward one class collapses every output; the
    // -H(ybar) term should spread the batch-average PMF.
    nn::Model cls = small_classifier(91, 5, 6);
    cls.find("head.b")->value.values[2] = 3.0;
    Dataset ds = random_dataset(16, 5, 92);

    auto mean_entropy = [&](const nn::Model& m) {
        auto pmfs = predict_pmfs(m, ds);
        std::vector<double> ybar(6, 0.0);
        for (const auto& p : pmfs)
            for (std::size_t k = 0; k < 6; ++k)
                ybar[k] += p.probabilities[k] / pmfs.size();
        double h = 0.0;
        for (double v : ybar)
            if (v > 0.0) h -= v * std::log(v);
        return h;
    };
    double before = mean_entropy(cls);

    AdaptConfig cfg;
    cfg.beta = 1e-9;  // effectively entropy-only
    cfg.mu_shot = 1e-3;
    cfg.n_iterations = 50;
    auto res = shot_adapt(cls, ds, cfg, 17);
    double after = mean_entropy(res.model);
    CHECK(after > before);
}

TEST_CASE("jsea_adapt: zero iterations, descent, freeze") {
    nn::Model cls = small_classifier(101, 5, 82, {{10, 4.0}, {40, 2.2}});
    Dataset ds = random_dataset(10, 5, 102);
    AdaptConfig cfg;
    auto run = jsea_run(cls, ds, cfg, false, 3);
    REQUIRE(run.labels.size() == ds.size());

    SUBCASE("zero iterations change nothing") {
        AdaptConfig zero = cfg;
        zero.n_iterations = 0;
        nn::Model out = jsea_adapt(cls, ds, run.labels, zero, 3);
        for (std::size_t i = 0; i < cls.params.size(); ++i)
            CHECK(out.params[i].value.values == cls.params[i].value.values);
    }
    SUBCASE("cross-entropy against pseudo-labels decreases") {
        auto ce = [&](const nn::Model& m) {
            auto pmfs = predict_pmfs(m, ds);
            double total = 0.0;
            for (std::size_t i = 0; i < ds.size(); ++i)
                for (std::size_t k = 0; k < pmfs[i].probabilities.size(); ++k) {
                    double y = run.labels[i].soft.probabilities[k];
                    if (y > 0.0) total -= y * std::log(pmfs[i].probabilities[k]);
                }
            return total;
        };
        double before = ce(cls);
        AdaptConfig strong = cfg;
        strong.mu_shot = 1e-4;
        strong.n_iterations = 30;
        nn::Model out = jsea_adapt(cls, ds, run.labels, strong, 3);
        CHECK(ce(out) < before);
        for (std::size_t i = 0; i < cls.params.size(); ++i)
            if (cls.params[i].group == nn::Group::head)
                CHECK(out.params[i].value.values == cls.params[i].value.values);
    }
    SUBCASE("labels must cover the dataset") {
        std::vector<PseudoLabel> short_labels(run.labels.begin(),
                                              run.labels.end() - 1);
        CHECK_THROWS_AS(jsea_adapt(cls, ds, short_labels, cfg, 3),
                        std::invalid_argument);
    }
}

TEST_CASE("jsea_run invariants: certain estimates and peak membership") {
    nn::Model cls = small_classifier(111, 5, 82, {{10, 4.0}, {40, 2.2}});
    Dataset ds = random_dataset(20, 5, 112);
    AdaptConfig cfg;
    auto run = jsea_run(cls, ds, cfg, true, 9);
    auto pmfs = predict_pmfs(cls, ds);
    RangeGrid grid{cls.grid_d_min, cls.grid_d_max, cls.grid_bin};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto rep = find_significant_peaks(pmfs[i], cfg.Q, cfg.window_w);
        bool member = false;
        for (std::size_t b : rep.peak_bins)
            if (grid.midpoint(b) == doctest::Approx(run.labels[i].d_hat_m))
                member = true;
        CHECK(member);  // always one of the model's own peaks
        if (rep.pu == 0)
            CHECK(run.labels[i].d_hat_m ==
                  doctest::Approx(grid.midpoint(rep.peak_bins[0])));
    }
    // Fine-tuned head still bit-identical.
    for (std::size_t i = 0; i < cls.params.size(); ++i)
        if (cls.params[i].group == nn::Group::head)
            CHECK(run.model.params[i].value.values == cls.params[i].value.values);
}
