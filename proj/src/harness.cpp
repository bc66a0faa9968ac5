#include "uwa/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace uwa {

double mae(const std::vector<double>& d_true, const std::vector<double>& d_hat) {
    if (d_true.size() != d_hat.size())
        throw std::invalid_argument("mae: length mismatch");
    if (d_true.empty()) throw std::invalid_argument("mae: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < d_true.size(); ++i)
        sum += std::abs(d_true[i] - d_hat[i]);
    return sum / static_cast<double>(d_true.size());
}

double pcl(const std::vector<double>& d_true, const std::vector<double>& d_hat,
           double zeta) {
    if (d_true.size() != d_hat.size())
        throw std::invalid_argument("pcl: length mismatch");
    if (d_true.empty()) throw std::invalid_argument("pcl: empty input");
    std::size_t credible = 0;
    for (std::size_t i = 0; i < d_true.size(); ++i)
        if (std::abs(d_true[i] - d_hat[i]) <= zeta * d_true[i]) ++credible;
    return 100.0 * static_cast<double>(credible) / static_cast<double>(d_true.size());
}

std::string method_name(Method m) {
    switch (m) {
        case Method::o_mfp: return "O-MFP";
        case Method::m_mfp: return "M-MFP";
        case Method::cnn_c: return "CNN-c";
        case Method::shot: return "SHOT";
        case Method::jsea_c: return "JSEA-c";
        case Method::cnn_r: return "CNN-r";
        case Method::jsea_r: return "JSEA-r";
    }
    throw std::invalid_argument("bad method");
}

Method parse_method(const std::string& name) {
    for (Method m : {Method::o_mfp, Method::m_mfp, Method::cnn_c, Method::shot,
                     Method::jsea_c, Method::cnn_r, Method::jsea_r})
        if (method_name(m) == name) return m;
    throw std::invalid_argument("unknown method: " + name);
}

std::string axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::snr_db: return "snr_db";
        case SweepAxis::delta_c: return "delta_c";
        case SweepAxis::delta_d: return "delta_d";
        case SweepAxis::sediment_type: return "sediment_type";
    }
    throw std::invalid_argument("bad axis");
}

SweepAxis parse_axis(const std::string& name) {
    for (SweepAxis a : {SweepAxis::snr_db, SweepAxis::delta_c, SweepAxis::delta_d,
                        SweepAxis::sediment_type})
        if (axis_name(a) == name) return a;
    throw std::invalid_argument("unknown axis: " + name);
}

const std::vector<NamedSediment>& table_i_sediments() {
    static const std::vector<NamedSediment> table = {
        {"clay", {200.0, 1.5, 1500.0, 1520.0, 0.2}},
        {"silt", {200.0, 1.7, 1575.0, 1595.0, 1.0}},
        {"sand", {200.0, 1.9, 1650.0, 1670.0, 0.8}},
        {"gravel", {200.0, 2.0, 1800.0, 1820.0, 0.6}},
        {"moraine", {200.0, 2.1, 1950.0, 1970.0, 0.4}},
    };
    return table;
}

Environment apply_mismatch(const Environment& train_env, double delta_c,
                           double delta_d_m,
                           const std::optional<SedimentLayer>& sediment) {
    Environment env = train_env;
    env.ssp_gradient_delta = delta_c;
    if (delta_d_m != 0.0) {
        if (delta_d_m < 0.0)
            throw std::invalid_argument("delta_d_m must be >= 0");
        double old_depth = env.water_depth_m;
        env.water_depth_m += delta_d_m;
        env.termination_depth_m += delta_d_m;
        // Extend the SSP with the gradient of its deepest segment.
        std::size_t n = env.ssp_depths_m.size();
        double slope = (env.ssp_speeds_m_s[n - 1] - env.ssp_speeds_m_s[n - 2]) /
                       (env.ssp_depths_m[n - 1] - env.ssp_depths_m[n - 2]);
        env.ssp_depths_m.push_back(env.water_depth_m);
        env.ssp_speeds_m_s.push_back(env.ssp_speeds_m_s[n - 1] +
                                     slope * (env.water_depth_m - old_depth));
    }
    if (sediment) env.sediment = {*sediment};
    env.validate();
    return env;
}

void SweepSpec::validate() const {
    if (values.empty()) throw std::invalid_argument("sweep values empty");
    if (methods.empty()) throw std::invalid_argument("sweep methods empty");
    if (n_noise_realizations < 1 || n_test < 1)
        throw std::invalid_argument("realizations and n_test must be >= 1");
    adapt.validate();
    if (axis == SweepAxis::sediment_type)
        for (double v : values)
            if (v < 0 || v >= static_cast<double>(table_i_sediments().size()))
                throw std::invalid_argument("sediment index out of range");
}

namespace {

struct MethodAccum {
    double mae_sum = 0, pcl_sum = 0, apu_sum = 0, mumi_sum = 0, certain_sum = 0;
    double runtime = 0;
    bool has_mumi = false;
};

double uniform_range(GaussianStream& rng, double lo, double hi) {
    double u = static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

}  // namespace

std::vector<ResultRow> run_sweep(const SweepSpec& spec, const Environment& train_env,
                                 const ArrayGeometry& array,
                                 const nn::Model* classifier,
                                 const nn::Model* regressor) {
    spec.validate();
    auto needs = [&](Method m) {
        return std::find(spec.methods.begin(), spec.methods.end(), m) !=
               spec.methods.end();
    };
    if ((needs(Method::cnn_c) || needs(Method::shot) || needs(Method::jsea_c)) &&
        !classifier)
        throw std::invalid_argument("classifier checkpoint required");
    if ((needs(Method::cnn_r) || needs(Method::jsea_r)) && !regressor)
        throw std::invalid_argument("regressor checkpoint required");

    RangeGrid grid = classifier
                         ? RangeGrid{classifier->grid_d_min, classifier->grid_d_max,
                                     classifier->grid_bin}
                         : RangeGrid{};
    const std::size_t dropout_J = spec.mumi_passes >= 2 ? spec.mumi_passes : 50;

    std::vector<Replica> m_replicas;
    std::optional<ModeSet> train_modes;
    if (needs(Method::m_mfp)) {
        train_modes = solve_modes(train_env, spec.frequency_hz);
        m_replicas = make_replicas(*train_modes, spec.source_depth_m,
                                   training_range_grid(), array);
    }

    std::vector<ResultRow> rows;
    for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
        double value = spec.values[vi];
        double snr = spec.axis == SweepAxis::snr_db ? value : spec.fixed_snr_db;
        double dc = spec.axis == SweepAxis::delta_c ? value : spec.fixed_delta_c;
        double dd = spec.axis == SweepAxis::delta_d ? value : spec.fixed_delta_d_m;
        int sed_idx = spec.axis == SweepAxis::sediment_type
                          ? static_cast<int>(value)
                          : spec.fixed_sediment;
        std::optional<SedimentLayer> sed;
        if (sed_idx >= 0) sed = table_i_sediments()[sed_idx].layer;

        Environment test_env = apply_mismatch(train_env, dc, dd, sed);
        ModeSet test_modes = solve_modes(test_env, spec.frequency_hz);
        std::vector<Replica> o_replicas;
        if (needs(Method::o_mfp))
            o_replicas = make_replicas(test_modes, spec.source_depth_m,
                                       training_range_grid(), array);

        GaussianStream range_rng(derive_seed(spec.seed, 0xD100 + vi));
        std::vector<double> ranges(spec.n_test);
        for (auto& d : ranges) d = uniform_range(range_rng, 900.0, 9000.0);

        std::map<Method, MethodAccum> acc;
        for (std::size_t r = 0; r < spec.n_noise_realizations; ++r) {
            NoiseSpec noise;
            noise.target_snr_db = snr;
            std::uint64_t real_seed = derive_seed(spec.seed, vi * 10007 + r + 1);
            Dataset ds = generate_dataset(test_modes, test_env.hash(),
                                          spec.source_depth_m, ranges, array,
                                          spec.snapshots_per_sample, noise,
                                          real_seed);

            for (Method m : spec.methods) {
                auto t0 = std::chrono::steady_clock::now();
                std::vector<double> d_hat(ds.size());
                double apu_val = 0.0, mumi_val = 0.0, certain_val = 0.0;
                bool has_mumi = false;
                switch (m) {
                    case Method::o_mfp:
                    case Method::m_mfp: {
                        const auto& reps =
                            m == Method::o_mfp ? o_replicas : m_replicas;
                        for (std::size_t i = 0; i < ds.size(); ++i)
                            d_hat[i] = bartlett_mfp(ds.samples[i], reps);
                        break;
                    }
                    case Method::cnn_c: {
                        auto report = assess_uncertainty(
                            *classifier, ds, spec.adapt.Q, spec.adapt.window_w,
                            spec.mumi_passes, derive_seed(real_seed, 0xA1));
                        auto pmfs = predict_pmfs(*classifier, ds);
                        for (std::size_t i = 0; i < ds.size(); ++i)
                            d_hat[i] = predict_range(pmfs[i]);
                        apu_val = report.apu_percent;
                        certain_val =
                            static_cast<double>(report.partition.certain.size());
                        if (report.mumi_nats) {
                            has_mumi = true;
                            for (double v : *report.mumi_nats)
                                mumi_val += v / static_cast<double>(ds.size());
                        }
                        break;
                    }
                    case Method::shot: {
                        auto report = assess_uncertainty(*classifier, ds,
                                                         spec.adapt.Q,
                                                         spec.adapt.window_w);
                        auto res = shot_adapt(*classifier, ds, spec.adapt,
                                              derive_seed(real_seed, 0x5407));
                        d_hat = res.d_hat_m;
                        apu_val = report.apu_percent;
                        certain_val =
                            static_cast<double>(report.partition.certain.size());
                        break;
                    }
                    case Method::jsea_c: {
                        auto report = assess_uncertainty(*classifier, ds,
                                                         spec.adapt.Q,
                                                         spec.adapt.window_w);
                        auto res = jsea_run(*classifier, ds, spec.adapt, true,
                                            derive_seed(real_seed, 0x15EA));
                        // Certain samples keep their pre-adaptation
                        // estimates; the rest are re-predicted with the
                        // adapted network (the pseudo-labels are a training
                        // signal, not the estimate).
                        auto adapted = predict_pmfs(res.model, ds);
                        for (std::size_t i = 0; i < ds.size(); ++i)
                            d_hat[i] = predict_range(adapted[i]);
                        for (const auto& cs : report.partition.certain)
                            for (std::size_t i = 0; i < ds.size(); ++i)
                                if (ds.samples[i].sample_id == cs.sample_id)
                                    d_hat[i] = cs.d_hat_m;
                        apu_val = report.apu_percent;
                        certain_val =
                            static_cast<double>(report.partition.certain.size());
                        break;
                    }
                    case Method::cnn_r: {
                        for (std::size_t i = 0; i < ds.size(); ++i)
                            d_hat[i] = regressor_range(*regressor, ds.samples[i]);
                        if (spec.mumi_passes >= 2) {
                            has_mumi = true;
                            for (std::size_t i = 0; i < ds.size(); ++i)
                                mumi_val += mumi(*regressor, ds.samples[i],
                                                 spec.mumi_passes, grid,
                                                 derive_seed(real_seed, i)) /
                                            static_cast<double>(ds.size());
                        }
                        break;
                    }
                    case Method::jsea_r: {
                        // Peaks come from the MC-dropout histogram PMFs.
                        std::vector<PeakReport> reports(ds.size());
                        std::vector<RangePmf> pmfs(ds.size());
                        for (std::size_t i = 0; i < ds.size(); ++i) {
                            pmfs[i] = mc_dropout_pmf(*regressor, ds.samples[i],
                                                     dropout_J, grid,
                                                     derive_seed(real_seed,
                                                                 0xD0 + i));
                            reports[i] = find_significant_peaks(
                                pmfs[i], spec.adapt.Q, spec.adapt.window_w);
                        }
                        auto part = partition_certain(reports, ds, grid);
                        for (std::size_t i = 0; i < ds.size(); ++i)
                            d_hat[i] = jsea_select(pmfs[i],
                                                   ds.samples[i].received_power,
                                                   part.certain, spec.adapt,
                                                   ds.samples[i].sample_id)
                                           .d_hat_m;
                        apu_val = apu(reports);
                        certain_val = static_cast<double>(part.certain.size());
                        break;
                    }
                }
                auto t1 = std::chrono::steady_clock::now();
                auto& a = acc[m];
                a.mae_sum += mae(ranges, d_hat);
                a.pcl_sum += pcl(ranges, d_hat, 0.10);
                a.apu_sum += apu_val;
                a.certain_sum += certain_val;
                if (has_mumi) {
                    a.mumi_sum += mumi_val;
                    a.has_mumi = true;
                }
                if (spec.timing)
                    a.runtime +=
                        std::chrono::duration<double>(t1 - t0).count();
            }
        }

        const double R = static_cast<double>(spec.n_noise_realizations);
        for (Method m : spec.methods) {
            const auto& a = acc[m];
            ResultRow row;
            row.axis = axis_name(spec.axis);
            row.axis_value = value;
            row.method = method_name(m);
            row.mae_m = a.mae_sum / R;
            row.pcl_percent = a.pcl_sum / R;
            row.apu_percent = a.apu_sum / R;
            if (a.has_mumi) row.mean_mumi = a.mumi_sum / R;
            row.certain_count = a.certain_sum / R;
            row.runtime_s = a.runtime;
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << "axis,value,method,mae_m,pcl_percent,apu_percent,mean_mumi,"
         "certain_count,runtime_s\n";
    for (const auto& r : rows) {
        f << r.axis << ',' << fmt(r.axis_value) << ',' << r.method << ','
          << fmt(r.mae_m) << ',' << fmt(r.pcl_percent) << ','
          << fmt(r.apu_percent) << ',' << (r.mean_mumi ? fmt(*r.mean_mumi) : "")
          << ',' << fmt(r.certain_count) << ',' << fmt(r.runtime_s) << '\n';
    }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    std::vector<ResultRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 9) fields.emplace_back();
        ResultRow r;
        r.axis = fields[0];
        r.axis_value = std::stod(fields[1]);
        r.method = fields[2];
        r.mae_m = std::stod(fields[3]);
        r.pcl_percent = std::stod(fields[4]);
        r.apu_percent = std::stod(fields[5]);
        if (!fields[6].empty()) r.mean_mumi = std::stod(fields[6]);
        r.certain_count = std::stod(fields[7]);
        r.runtime_s = std::stod(fields[8]);
        rows.push_back(r);
    }
    return rows;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

SweepSpec parse_sweep_spec(const std::string& text) {
    SweepSpec spec;
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
        if (key == "axis") spec.axis = parse_axis(value);
        else if (key == "values") {
            spec.values.clear();
            for (const auto& v : split_list(value)) spec.values.push_back(std::stod(v));
        } else if (key == "methods") {
            spec.methods.clear();
            for (const auto& v : split_list(value))
                spec.methods.push_back(parse_method(v));
        } else if (key == "snr_db") spec.fixed_snr_db = std::stod(value);
        else if (key == "delta_c") spec.fixed_delta_c = std::stod(value);
        else if (key == "delta_d") spec.fixed_delta_d_m = std::stod(value);
        else if (key == "sediment") {
            if (value == "training") spec.fixed_sediment = -1;
            else {
                const auto& tab = table_i_sediments();
                auto it = std::find_if(tab.begin(), tab.end(), [&](const auto& s) {
                    return s.name == value;
                });
                if (it == tab.end())
                    throw std::invalid_argument("unknown sediment: " + value);
                spec.fixed_sediment = static_cast<int>(it - tab.begin());
            }
        } else if (key == "n_noise_realizations")
            spec.n_noise_realizations = std::stoul(value);
        else if (key == "n_test") spec.n_test = std::stoul(value);
        else if (key == "seed") spec.seed = std::stoull(value);
        else if (key == "frequency_hz") spec.frequency_hz = std::stod(value);
        else if (key == "source_depth_m") spec.source_depth_m = std::stod(value);
        else if (key == "snapshots") spec.snapshots_per_sample = std::stoul(value);
        else if (key == "mumi_passes") spec.mumi_passes = std::stoul(value);
        else if (key == "timing") spec.timing = value == "true" || value == "1";
        else if (key == "beta") spec.adapt.beta = std::stod(value);
        else if (key == "mu_shot") spec.adapt.mu_shot = std::stod(value);
        else if (key == "n_iterations") spec.adapt.n_iterations = std::stoul(value);
        else if (key == "Q") spec.adapt.Q = std::stod(value);
        else if (key == "window_w") spec.adapt.window_w = std::stoul(value);
        else if (key == "delta_m") spec.adapt.delta_m = std::stod(value);
        else if (key == "sigma") spec.adapt.sigma = std::stod(value);
        else throw std::invalid_argument("unknown sweep key: " + key);
    }
    spec.validate();
    return spec;
}

SweepSpec load_sweep_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open spec: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_sweep_spec(ss.str());
}

ComplexityReport complexity_report(const ComplexityInput& in) {
    const std::uint64_t L2 = static_cast<std::uint64_t>(in.L) * in.L;
    ComplexityReport rep;
    // 2 * H_in * H_out * k^2 * L^2 multiplications per conv layer.
    rep.layer_ops = {
        {"conv1", 2ULL * 2 * 6 * 3 * 3 * L2},
        {"conv2", 2ULL * 6 * 38 * 5 * 5 * L2},
        {"conv3", 2ULL * 38 * 40 * 5 * 5 * L2},
        {"fc1", 80ULL * in.n_phi * L2},
        {"head", 2ULL * in.n_phi * in.M},
    };
    rep.cnn_forward_ops = (87616ULL + 80ULL * in.n_phi) * L2 + 2ULL * in.M * in.n_phi;
    rep.mfp_ops = static_cast<std::uint64_t>(in.n_tr) * (8ULL * L2 + 8ULL * in.L);
    rep.mfp_memory = 2ULL * in.n_tr * in.L;
    rep.jsea_refine_ops =
        static_cast<std::uint64_t>(in.M) + static_cast<std::uint64_t>(in.M) * in.W +
        static_cast<std::uint64_t>(in.n_p) * in.certain;
    rep.jsea_memory = static_cast<std::uint64_t>(in.n_test) * (in.L + 1);
    rep.adaptation_ops = 2ULL * in.n_itr * rep.cnn_forward_ops;
    return rep;
}

std::string format_complexity(const ComplexityReport& rep) {
    std::ostringstream out;
    out << "item,ops\n";
    for (const auto& [name, ops] : rep.layer_ops) out << name << ',' << ops << '\n';
    out << "cnn_forward," << rep.cnn_forward_ops << '\n';
    out << "mfp," << rep.mfp_ops << '\n';
    out << "mfp_memory," << rep.mfp_memory << '\n';
    out << "jsea_refine," << rep.jsea_refine_ops << '\n';
    out << "jsea_memory," << rep.jsea_memory << '\n';
    out << "adaptation," << rep.adaptation_ops << '\n';
    return out.str();
}

}  // namespace uwa
