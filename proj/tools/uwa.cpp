// uwa: command-line front end for the underwater acoustic ranging library.
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uwa/adaptation.hpp"
#include "uwa/harness.hpp"
#include "uwa/ranging.hpp"
#include "uwa/uncertainty.hpp"

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

uwa::Environment load_env_or_default(const std::string& path) {
    if (path.empty()) return uwa::baseline_environment();
    return uwa::load_environment(path);
}

std::vector<uwa::Replica> replicas_from_dataset(const uwa::Dataset& ds) {
    std::vector<uwa::Replica> reps;
    reps.reserve(ds.size());
    for (const auto& s : ds.samples) {
        if (!s.true_range_m)
            throw std::runtime_error("replica dataset must be labeled");
        auto snap = uwa::snapshot_from_rank1(s, ds.frequency_hz);
        uwa::Replica r;
        r.range_m = *s.true_range_m;
        double norm = 0.0;
        for (const auto& c : snap.coefficients) norm += std::norm(c);
        norm = std::sqrt(norm);
        r.field.reserve(snap.coefficients.size());
        for (const auto& c : snap.coefficients) r.field.push_back(c / norm);
        reps.push_back(std::move(r));
    }
    return reps;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Underwater acoustic source ranging with test-time adaptation"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "Generate a synthetic SCM dataset");
    std::string gen_env, gen_out = "data.uwad", gen_ranges = "training";
    double gen_snr = std::numeric_limits<double>::infinity();
    double gen_dc = 0.0, gen_dd = 0.0, gen_freq = 109.0, gen_zsrc = 9.0;
    std::string gen_sediment;
    std::size_t gen_n = 500, gen_snapshots = 1;
    std::uint64_t gen_seed = 1;
    gen->add_option("--env", gen_env, "Environment config file (default: built-in)");
    gen->add_option("--out", gen_out, "Output dataset path")->required();
    gen->add_option("--ranges", gen_ranges,
                    "'training' (850:10:9050) or 'random'");
    gen->add_option("--n", gen_n, "Sample count for random ranges");
    gen->add_option("--snr", gen_snr, "Array SNR in dB (omit for clean)");
    gen->add_option("--delta-c", gen_dc, "SSP gradient mismatch (m/s)/m");
    gen->add_option("--delta-d", gen_dd, "Water depth extension in m");
    gen->add_option("--sediment", gen_sediment,
                    "Sediment type (clay|silt|sand|gravel|moraine)");
    gen->add_option("--freq", gen_freq, "Frequency in Hz");
    gen->add_option("--source-depth", gen_zsrc, "Source depth in m");
    gen->add_option("--snapshots", gen_snapshots, "Snapshots per sample");
    gen->add_option("--seed", gen_seed, "Master seed");

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train the CNN on a dataset");
    std::string tr_dataset, tr_config, tr_out = "model.uwam", tr_log;
    bool tr_regressor = false;
    train->add_option("--dataset", tr_dataset)->required();
    train->add_option("--config", tr_config, "Train config file");
    train->add_option("--out", tr_out)->required();
    train->add_option("--log", tr_log, "Optional training-log CSV");
    train->add_flag("--regressor", tr_regressor, "Train the regression head");

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "Predict ranges / PMFs");
    std::string pr_model, pr_dataset, pr_out = "pmf.csv";
    bool pr_full_pmf = false;
    predict->add_option("--model", pr_model)->required();
    predict->add_option("--dataset", pr_dataset)->required();
    predict->add_option("--out", pr_out)->required();
    predict->add_flag("--full-pmf", pr_full_pmf, "Emit all class probabilities");

    // ---- mfp ----
    auto* mfp = app.add_subcommand("mfp", "Bartlett matched field processing");
    std::string mfp_replicas, mfp_test, mfp_out = "mfp.csv";
    mfp->add_option("--replicas", mfp_replicas,
                    "Clean labeled dataset providing replica fields")
        ->required();
    mfp->add_option("--test", mfp_test)->required();
    mfp->add_option("--out", mfp_out)->required();

    // ---- uncertainty ----
    auto* unc = app.add_subcommand("uncertainty", "PU/APU and MUMI report");
    std::string un_model, un_dataset, un_out = "uncertainty.csv";
    std::size_t un_mumi = 0;
    double un_Q = 10.0;
    std::size_t un_window = 1;
    std::uint64_t un_seed = 1;
    unc->add_option("--model", un_model)->required();
    unc->add_option("--dataset", un_dataset)->required();
    unc->add_option("--out", un_out)->required();
    unc->add_option("--mumi", un_mumi, "MC-dropout passes (0 = skip MUMI)");
    unc->add_option("--Q", un_Q, "Peak significance ratio");
    unc->add_option("--window", un_window, "Peak neighborhood half-width");
    unc->add_option("--seed", un_seed);

    // ---- adapt ----
    auto* adapt = app.add_subcommand("adapt", "Test-time adaptation");
    std::string ad_model, ad_dataset, ad_method = "jsea",
                ad_out = "adapt.csv", ad_out_model;
    uwa::AdaptConfig ad_cfg;
    std::uint64_t ad_seed = 1;
    adapt->add_option("--model", ad_model)->required();
    adapt->add_option("--dataset", ad_dataset)->required();
    adapt->add_option("--method", ad_method, "shot | jsea | jsea+finetune");
    adapt->add_option("--out", ad_out)->required();
    adapt->add_option("--out-model", ad_out_model, "Adapted checkpoint path");
    adapt->add_option("--beta", ad_cfg.beta);
    adapt->add_option("--mu-shot", ad_cfg.mu_shot);
    adapt->add_option("--iterations", ad_cfg.n_iterations);
    adapt->add_option("--Q", ad_cfg.Q);
    adapt->add_option("--delta", ad_cfg.delta_m);
    adapt->add_option("--sigma", ad_cfg.sigma);
    adapt->add_option("--seed", ad_seed);

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "Run a mismatch sweep");
    std::string sw_spec, sw_model, sw_regressor, sw_env, sw_out = "results.csv";
    sweep->add_option("--spec", sw_spec)->required();
    sweep->add_option("--train-model", sw_model, "Classifier checkpoint");
    sweep->add_option("--regressor-model", sw_regressor, "Regressor checkpoint");
    sweep->add_option("--env", sw_env, "Training environment (default: built-in)");
    sweep->add_option("--out", sw_out)->required();

    // ---- complexity ----
    auto* cx = app.add_subcommand("complexity", "Closed-form complexity table");
    uwa::ComplexityInput cx_in;
    std::string cx_out;
    cx->add_option("--L", cx_in.L);
    cx->add_option("--nphi", cx_in.n_phi);
    cx->add_option("--M", cx_in.M);
    cx->add_option("--ntr", cx_in.n_tr);
    cx->add_option("--ntest", cx_in.n_test);
    cx->add_option("--nitr", cx_in.n_itr);
    cx->add_option("--W", cx_in.W);
    cx->add_option("--np", cx_in.n_p);
    cx->add_option("--S", cx_in.certain);
    cx->add_option("--out", cx_out, "Write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            uwa::Environment base = load_env_or_default(gen_env);
            std::optional<uwa::SedimentLayer> sed;
            if (!gen_sediment.empty()) {
                for (const auto& s : uwa::table_i_sediments())
                    if (s.name == gen_sediment) sed = s.layer;
                if (!sed) throw std::runtime_error("unknown sediment: " + gen_sediment);
            }
            uwa::Environment env = uwa::apply_mismatch(base, gen_dc, gen_dd, sed);
            std::vector<double> ranges;
            if (gen_ranges == "training") {
                ranges = uwa::training_range_grid();
            } else if (gen_ranges == "random") {
                uwa::GaussianStream rng(uwa::derive_seed(gen_seed, 0xD100));
                ranges.resize(gen_n);
                for (auto& d : ranges)
                    d = 900.0 +
                        static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53 * 8100.0;
            } else {
                throw std::runtime_error("--ranges must be 'training' or 'random'");
            }
            uwa::NoiseSpec noise;
            noise.target_snr_db = gen_snr;
            uwa::Dataset ds = uwa::generate_dataset(env, gen_zsrc, ranges,
                                                    uwa::baseline_array(),
                                                    gen_freq, gen_snapshots, noise,
                                                    gen_seed);
            uwa::write_dataset(ds, gen_out);
            std::cout << "wrote " << ds.size() << " samples to " << gen_out << "\n";
        } else if (*train) {
            uwa::Dataset ds = uwa::read_dataset(tr_dataset);
            uwa::TrainConfig cfg;
            if (!tr_config.empty()) cfg = uwa::load_train_config(tr_config);
            uwa::TrainResult res = tr_regressor ? uwa::train_regressor(ds, cfg)
                                                : uwa::train_classifier(ds, cfg);
            uwa::nn::save_checkpoint(res.model, tr_out);
            if (!tr_log.empty()) {
                std::ofstream lf(tr_log, std::ios::binary);
                lf << "epoch,phase,train_loss,val_loss,lr\n";
                for (const auto& e : res.log)
                    lf << e.epoch << ',' << e.phase << ',' << fmt(e.train_loss)
                       << ',' << fmt(e.val_loss) << ',' << fmt(e.lr) << '\n';
            }
            std::cout << "trained " << res.log.size() << " epochs; saved " << tr_out
                      << "\n";
        } else if (*predict) {
            uwa::nn::Model model = uwa::nn::load_checkpoint(pr_model);
            uwa::Dataset ds = uwa::read_dataset(pr_dataset);
            std::ofstream f(pr_out, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open: " + pr_out);
            if (model.arch.regression) {
                f << "id,d_true,d_hat\n";
                for (const auto& s : ds.samples)
                    f << s.sample_id << ','
                      << (s.true_range_m ? fmt(*s.true_range_m) : "") << ','
                      << fmt(uwa::regressor_range(model, s)) << '\n';
            } else {
                auto pmfs = uwa::predict_pmfs(model, ds);
                f << "id,d_true,d_hat";
                if (pr_full_pmf)
                    for (std::size_t k = 0; k < model.arch.output_dim; ++k)
                        f << ",p" << k;
                f << '\n';
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    const auto& s = ds.samples[i];
                    f << s.sample_id << ','
                      << (s.true_range_m ? fmt(*s.true_range_m) : "") << ','
                      << fmt(uwa::predict_range(pmfs[i]));
                    if (pr_full_pmf)
                        for (double p : pmfs[i].probabilities) f << ',' << fmt(p);
                    f << '\n';
                }
            }
            std::cout << "wrote " << pr_out << "\n";
        } else if (*mfp) {
            uwa::Dataset reps_ds = uwa::read_dataset(mfp_replicas);
            uwa::Dataset test = uwa::read_dataset(mfp_test);
            auto reps = replicas_from_dataset(reps_ds);
            std::ofstream f(mfp_out, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open: " + mfp_out);
            f << "id,d_true,d_hat\n";
            for (const auto& s : test.samples)
                f << s.sample_id << ','
                  << (s.true_range_m ? fmt(*s.true_range_m) : "") << ','
                  << fmt(uwa::bartlett_mfp(s, reps)) << '\n';
            std::cout << "wrote " << mfp_out << "\n";
        } else if (*unc) {
            uwa::nn::Model model = uwa::nn::load_checkpoint(un_model);
            uwa::Dataset ds = uwa::read_dataset(un_dataset);
            auto report = uwa::assess_uncertainty(model, ds, un_Q, un_window,
                                                  un_mumi, un_seed);
            std::ofstream f(un_out, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open: " + un_out);
            f << "id,pu,n_peaks,peak_ranges,mumi\n";
            uwa::RangeGrid grid{model.grid_d_min, model.grid_d_max, model.grid_bin};
            double mean_mumi = 0.0;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const auto& r = report.per_sample[i];
                f << ds.samples[i].sample_id << ',' << r.pu << ','
                  << r.peak_bins.size() << ',';
                for (std::size_t m = 0; m < r.peak_bins.size(); ++m)
                    f << (m ? ";" : "") << fmt(grid.midpoint(r.peak_bins[m]));
                f << ',';
                if (report.mumi_nats) {
                    f << fmt((*report.mumi_nats)[i]);
                    mean_mumi += (*report.mumi_nats)[i] / ds.size();
                }
                f << '\n';
            }
            std::cout << "apu=" << fmt(report.apu_percent);
            if (report.mumi_nats) std::cout << " mean_mumi=" << fmt(mean_mumi);
            std::cout << "\n";
        } else if (*adapt) {
            uwa::nn::Model model = uwa::nn::load_checkpoint(ad_model);
            uwa::Dataset ds = uwa::read_dataset(ad_dataset);
            ad_cfg.validate();
            std::ofstream f(ad_out, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open: " + ad_out);
            f << "id,d_true,d_hat,pu,origin,flagged\n";
            auto reports = uwa::assess_uncertainty(model, ds, ad_cfg.Q,
                                                   ad_cfg.window_w);
            uwa::nn::Model adapted = model;
            if (ad_method == "shot") {
                auto res = uwa::shot_adapt(model, ds, ad_cfg, ad_seed);
                adapted = res.model;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    const auto& s = ds.samples[i];
                    f << s.sample_id << ','
                      << (s.true_range_m ? fmt(*s.true_range_m) : "") << ','
                      << fmt(res.d_hat_m[i]) << ',' << reports.per_sample[i].pu
                      << ",shot,0\n";
                }
            } else if (ad_method == "jsea" || ad_method == "jsea+finetune") {
                auto res = uwa::jsea_run(model, ds, ad_cfg,
                                         ad_method == "jsea+finetune", ad_seed);
                adapted = res.model;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    const auto& s = ds.samples[i];
                    const auto& lab = res.labels[i];
                    f << s.sample_id << ','
                      << (s.true_range_m ? fmt(*s.true_range_m) : "") << ','
                      << fmt(lab.d_hat_m) << ',' << reports.per_sample[i].pu << ','
                      << (lab.origin == uwa::PseudoOrigin::certain_peak
                              ? "certain-peak"
                              : "jsea-power-selected")
                      << ',' << (lab.not_rectifiable ? 1 : 0) << '\n';
                }
            } else {
                throw std::runtime_error("--method must be shot|jsea|jsea+finetune");
            }
            if (!ad_out_model.empty()) uwa::nn::save_checkpoint(adapted, ad_out_model);
            std::cout << "wrote " << ad_out << "\n";
        } else if (*sweep) {
            uwa::SweepSpec spec = uwa::load_sweep_spec(sw_spec);
            uwa::Environment env = load_env_or_default(sw_env);
            std::optional<uwa::nn::Model> cls, reg;
            if (!sw_model.empty()) cls = uwa::nn::load_checkpoint(sw_model);
            if (!sw_regressor.empty()) reg = uwa::nn::load_checkpoint(sw_regressor);
            auto rows = uwa::run_sweep(spec, env, uwa::baseline_array(),
                                       cls ? &*cls : nullptr,
                                       reg ? &*reg : nullptr);
            uwa::write_results_csv(rows, sw_out);
            std::cout << "wrote " << rows.size() << " rows to " << sw_out << "\n";
        } else if (*cx) {
            std::string table = uwa::format_complexity(uwa::complexity_report(cx_in));
            if (cx_out.empty()) {
                std::cout << table;
            } else {
                std::ofstream f(cx_out, std::ios::binary);
                if (!f) throw std::runtime_error("cannot open: " + cx_out);
                f << table;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
