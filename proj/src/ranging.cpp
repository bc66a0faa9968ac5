#include "uwa/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace uwa {

void RangePmf::validate() const {
    if (probabilities.size() != grid.class_count())
        throw std::invalid_argument("pmf size does not match grid");
    double sum = 0.0;
    for (double p : probabilities) {
        if (p < 0.0) throw std::invalid_argument("pmf entry < 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("pmf does not sum to 1");
}

std::size_t RangePmf::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i)
        if (probabilities[i] > probabilities[best]) best = i;
    return best;
}

std::size_t quantize_range(double d_m, const RangeGrid& grid, bool* clamped) {
    double raw = std::floor((d_m - grid.d_min_m) / grid.bin_m + 0.5);
    const double max_idx = static_cast<double>(grid.class_count() - 1);
    bool clip = raw < 0.0 || raw > max_idx;
    if (clamped) *clamped = clip;
    raw = std::clamp(raw, 0.0, max_idx);
    return static_cast<std::size_t>(raw);
}

RangePmf soften_label(std::size_t dq, double sigma, const RangeGrid& grid) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    RangePmf pmf;
    pmf.grid = grid;
    const std::size_t M = grid.class_count();
    pmf.probabilities.resize(M);
    double sum = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
        double dist = std::abs(static_cast<double>(k) - static_cast<double>(dq));
        pmf.probabilities[k] = std::exp(-dist / sigma);
        sum += pmf.probabilities[k];
    }
    for (double& p : pmf.probabilities) p /= sum;
    return pmf;
}

RangePmf predict_pmf(const nn::Model& model, const ScmSample& sample) {
    RangePmf pmf;
    pmf.grid = {model.grid_d_min, model.grid_d_max, model.grid_bin};
    auto res = model.forward({sample.features.data()}, nn::Mode::eval, 0);
    pmf.probabilities = nn::softmax(res.logits);
    return pmf;
}

std::vector<RangePmf> predict_pmfs(const nn::Model& model, const Dataset& ds) {
    RangeGrid grid{model.grid_d_min, model.grid_d_max, model.grid_bin};
    std::vector<const double*> inputs;
    inputs.reserve(ds.size());
    for (const auto& s : ds.samples) inputs.push_back(s.features.data());
    auto res = model.forward(inputs, nn::Mode::eval, 0);
    const std::size_t M = model.arch.output_dim;
    std::vector<RangePmf> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out[i].grid = grid;
        out[i].probabilities =
            nn::softmax({res.logits.begin() + i * M, res.logits.begin() + (i + 1) * M});
    }
    return out;
}

double predict_range(const RangePmf& pmf) { return pmf.grid.midpoint(pmf.argmax()); }

double regressor_range(const nn::Model& model, const ScmSample& sample) {
    auto res = model.forward({sample.features.data()}, nn::Mode::eval, 0);
    double d = model.grid_d_min + res.logits[0] * (model.grid_d_max - model.grid_d_min);
    return std::clamp(d, model.grid_d_min, model.grid_d_max);
}

double bartlett_value(const ScmSample& sample,
                      const std::vector<std::complex<double>>& replica) {
    const std::size_t L = sample.element_count;
    if (replica.size() != L)
        throw std::invalid_argument("replica length does not match sample");
    std::complex<double> acc = 0.0;
    for (std::size_t a = 0; a < L; ++a) {
        std::complex<double> row = 0.0;
        for (std::size_t b = 0; b < L; ++b) row += sample.scm_entry(a, b) * replica[b];
        acc += std::conj(replica[a]) * row;
    }
    return acc.real();
}

double bartlett_mfp(const ScmSample& sample, const std::vector<Replica>& replicas) {
    if (replicas.empty()) throw std::invalid_argument("empty replica set");
    double best_value = -std::numeric_limits<double>::infinity();
    double best_range = 0.0;
    for (const auto& rep : replicas) {
        double v = bartlett_value(sample, rep.field);
        if (v > best_value ||
            (v == best_value && rep.range_m < best_range)) {
            best_value = v;
            best_range = rep.range_m;
        }
    }
    return best_range;
}

std::vector<Replica> make_replicas(const ModeSet& modes, double source_depth_m,
                                   const std::vector<double>& ranges_m,
                                   const ArrayGeometry& array) {
    std::vector<Replica> out(ranges_m.size());
    for (std::size_t i = 0; i < ranges_m.size(); ++i) {
        out[i].range_m = ranges_m[i];
        out[i].field = pressure_field(modes, source_depth_m, ranges_m[i], array);
        double norm = 0.0;
        for (const auto& c : out[i].field) norm += std::norm(c);
        norm = std::sqrt(norm);
        for (auto& c : out[i].field) c /= norm;
    }
    return out;
}

RangePmf mc_dropout_pmf(const nn::Model& regressor, const ScmSample& sample,
                        std::size_t J, const RangeGrid& grid, std::uint64_t seed) {
    if (J < 1) throw std::invalid_argument("J must be >= 1");
    RangePmf pmf;
    pmf.grid = grid;
    pmf.probabilities.assign(grid.class_count(), 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        auto res = regressor.forward({sample.features.data()}, nn::Mode::train,
                                     derive_seed(seed, j));
        double d = regressor.grid_d_min +
                   res.logits[0] * (regressor.grid_d_max - regressor.grid_d_min);
        d = std::clamp(d, regressor.grid_d_min, regressor.grid_d_max);
        pmf.probabilities[quantize_range(d, grid)] += 1.0 / static_cast<double>(J);
    }
    return pmf;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(sigma >= 1.0 && sigma <= 10.0))
        throw std::invalid_argument("sigma must be in [1, 10]");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("val_fraction must be in [0, 1)");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

struct Shuffler {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    void shuffle(std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[next() % i]);
    }
};

struct Targets {
    // Classification: per-sample soft PMFs. Regression: scalars.
    std::vector<std::vector<double>> pmfs;
    std::vector<double> scalars;
};

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("expected key = value: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "lr") cfg.lr = std::stod(value);
        else if (key == "batch_size") cfg.batch_size = std::stoul(value);
        else if (key == "sigma") cfg.sigma = std::stod(value);
        else if (key == "patience_reduce") cfg.patience_reduce = std::stoul(value);
        else if (key == "patience_stop") cfg.patience_stop = std::stoul(value);
        else if (key == "finetune_snrs_db") cfg.finetune_snrs_db = parse_list(value);
        else if (key == "val_fraction") cfg.val_fraction = std::stod(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "d_min_m") cfg.grid.d_min_m = std::stod(value);
        else if (key == "d_max_m") cfg.grid.d_max_m = std::stod(value);
        else if (key == "bin_m") cfg.grid.bin_m = std::stod(value);
        else if (key == "dropout_rate") cfg.dropout_rate = std::stod(value);
        else if (key == "max_epochs") cfg.max_epochs = std::stoul(value);
        else if (key == "max_finetune_epochs") cfg.max_finetune_epochs = std::stoul(value);
        else throw std::invalid_argument("unknown train config key: " + key);
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_train_config(ss.str());
}

namespace {

// One patience-scheduled training phase over the given feature storage.
// refresh(epoch, features) lets the noise phase rebuild inputs per epoch.
template <typename RefreshFn>
void run_phase(nn::Model& model, std::vector<std::vector<double>>& features,
               const Targets& targets, const std::vector<std::size_t>& train_idx,
               const std::vector<std::size_t>& val_idx, const TrainConfig& cfg,
               int phase, std::size_t max_epochs, std::vector<TrainLogEntry>& log,
               RefreshFn refresh) {
    const bool regression = model.arch.regression;
    double lr = cfg.lr;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<nn::Tensor> best_params;
    std::size_t since_best = 0;
    std::vector<std::size_t> order = train_idx;
    Shuffler shuffler{derive_seed(cfg.seed, 0xC0FFEE + phase)};

    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
        refresh(epoch, features);
        shuffler.shuffle(order);
        double train_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<const double*> inputs, pmfs;
            std::vector<double> scalars;
            for (std::size_t i = start; i < end; ++i) {
                inputs.push_back(features[order[i]].data());
                if (regression) scalars.push_back(targets.scalars[order[i]]);
                else pmfs.push_back(targets.pmfs[order[i]].data());
            }
            std::vector<nn::Tensor> grads;
            std::uint64_t dseed =
                derive_seed(cfg.seed, (phase * 1000003ULL + epoch) * 977ULL + start);
            double loss = regression
                              ? model.mse_loss_and_gradients(inputs, scalars, grads,
                                                             nn::Mode::train, dseed)
                              : model.loss_and_gradients(inputs, pmfs, grads,
                                                         nn::Mode::train, dseed);
            nn::adam_step(model, grads, lr);
            train_loss += loss;
            ++n_batches;
        }
        train_loss /= static_cast<double>(std::max<std::size_t>(n_batches, 1));

        double val_loss;
        if (val_idx.empty()) {
            val_loss = train_loss;
        } else {
            std::vector<const double*> inputs, pmfs;
            std::vector<double> scalars;
            for (std::size_t i : val_idx) {
                inputs.push_back(features[i].data());
                if (regression) scalars.push_back(targets.scalars[i]);
                else pmfs.push_back(targets.pmfs[i].data());
            }
            if (regression) {
                auto res = model.forward(inputs, nn::Mode::eval, 0);
                val_loss = 0.0;
                for (std::size_t i = 0; i < inputs.size(); ++i) {
                    double err = res.logits[i] - scalars[i];
                    val_loss += err * err;
                }
                val_loss /= static_cast<double>(inputs.size());
            } else {
                val_loss = model.loss_only(inputs, pmfs, nn::Mode::eval, 0);
            }
        }
        log.push_back({epoch, phase, train_loss, val_loss, lr});

        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            since_best = 0;
            best_params.clear();
            for (const auto& p : model.params) best_params.push_back(p.value);
        } else {
            ++since_best;
            if (since_best == cfg.patience_reduce) lr *= 0.1;
            if (since_best >= cfg.patience_stop) break;
        }
    }
    if (!best_params.empty())
        for (std::size_t i = 0; i < model.params.size(); ++i)
            model.params[i].value = best_params[i];
}

TrainResult train_model(const Dataset& train, const TrainConfig& cfg, bool regression) {
    cfg.validate();
    const std::size_t n = train.size();
    if (n == 0) throw std::invalid_argument("empty training dataset");

    Targets targets;
    for (const auto& s : train.samples) {
        if (!s.true_range_m)
            throw std::invalid_argument("training dataset contains unlabeled samples");
        if (regression) {
            targets.scalars.push_back((*s.true_range_m - cfg.grid.d_min_m) /
                                      (cfg.grid.d_max_m - cfg.grid.d_min_m));
        } else {
            targets.pmfs.push_back(
                soften_label(quantize_range(*s.true_range_m, cfg.grid), cfg.sigma,
                             cfg.grid)
                    .probabilities);
        }
    }

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Shuffler split_rng{derive_seed(cfg.seed, 0x5917)};
    split_rng.shuffle(idx);
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(n * (1.0 - cfg.val_fraction)));
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + n_train);
    std::vector<std::size_t> val_idx(idx.begin() + n_train, idx.end());
    if (train_idx.size() < cfg.batch_size)
        throw std::invalid_argument("training split smaller than one batch");

    nn::ArchConfig arch = regression
                              ? nn::ArchConfig::regressor(train.element_count)
                              : nn::ArchConfig::classifier(train.element_count,
                                                           cfg.grid.class_count());
    arch.dropout_rate = cfg.dropout_rate;
    nn::Model model = nn::Model::init(arch, cfg.seed);
    model.grid_d_min = cfg.grid.d_min_m;
    model.grid_d_max = cfg.grid.d_max_m;
    model.grid_bin = cfg.grid.bin_m;

    TrainResult result{std::move(model), {}};

    std::vector<std::vector<double>> features(n);
    for (std::size_t i = 0; i < n; ++i) features[i] = train.samples[i].features;
    run_phase(result.model, features, targets, train_idx, val_idx, cfg, 0,
              cfg.max_epochs, result.log, [](std::size_t, auto&) {});

    if (!cfg.finetune_snrs_db.empty() && cfg.max_finetune_epochs > 0) {
        // Rebuild clean snapshots once, then contaminate afresh each epoch
        // at the SNR the cycle dictates.
        std::vector<std::vector<Snapshot>> clean(n);
        for (std::size_t i = 0; i < n; ++i)
            clean[i] = {snapshot_from_rank1(train.samples[i], train.frequency_hz)};
        auto refresh = [&](std::size_t epoch, std::vector<std::vector<double>>& feats) {
            NoiseSpec spec;
            spec.target_snr_db =
                cfg.finetune_snrs_db[epoch % cfg.finetune_snrs_db.size()];
            auto noisy = add_noise(clean, spec, derive_seed(cfg.seed, 0xF17E + epoch));
            for (std::size_t i = 0; i < noisy.size(); ++i)
                feats[i] = compute_scm(noisy[i]).features;
        };
        run_phase(result.model, features, targets, train_idx, val_idx, cfg, 1,
                  cfg.max_finetune_epochs, result.log, refresh);
    }
    return result;
}

}  // namespace

TrainResult train_classifier(const Dataset& train, const TrainConfig& config) {
    return train_model(train, config, false);
}

TrainResult train_regressor(const Dataset& train, const TrainConfig& config) {
    return train_model(train, config, true);
}

}  // namespace uwa
