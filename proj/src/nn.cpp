#include "uwa/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uwa::nn {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) { return (splitmix64(state) >> 11) * 0x1.0p-53; }

void check_finite(const double* p, std::size_t n, const char* where) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i]))
            throw std::runtime_error(std::string("non-finite value in ") + where);
}

// col[(ic*k*k + ki*k + kj)][y*L + x] for same-padding stride-1 conv.
void im2col(const double* x, std::size_t channels, std::size_t L, std::size_t k,
            double* col) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t plane = L * L;
    std::size_t row = 0;
    for (std::size_t ic = 0; ic < channels; ++ic) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj, ++row) {
                double* dst = col + row * plane;
                for (std::size_t y = 0; y < L; ++y) {
                    std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ki) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(L)) {
                        std::memset(dst + y * L, 0, L * sizeof(double));
                        continue;
                    }
                    for (std::size_t xcol = 0; xcol < L; ++xcol) {
                        std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xcol + kj) - pad;
                        dst[y * L + xcol] =
                            (sx < 0 || sx >= static_cast<std::ptrdiff_t>(L))
                                ? 0.0
                                : x[ic * plane + sy * L + sx];
                    }
                }
            }
        }
    }
}

void col2im_accumulate(const double* col, std::size_t channels, std::size_t L,
                       std::size_t k, double* x) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t plane = L * L;
    std::size_t row = 0;
    for (std::size_t ic = 0; ic < channels; ++ic) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj, ++row) {
                const double* src = col + row * plane;
                for (std::size_t y = 0; y < L; ++y) {
                    std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ki) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(L)) continue;
                    for (std::size_t xcol = 0; xcol < L; ++xcol) {
                        std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xcol + kj) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(L)) continue;
                        x[ic * plane + sy * L + sx] += src[y * L + xcol];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    t.shape = std::move(shape);
    t.values.assign(n, 0.0);
    return t;
}

ArchConfig ArchConfig::classifier(std::size_t L, std::size_t M) {
    ArchConfig a;
    a.input_size = L;
    a.output_dim = M;
    return a;
}

ArchConfig ArchConfig::regressor(std::size_t L) {
    ArchConfig a;
    a.input_size = L;
    a.output_dim = 1;
    a.regression = true;
    return a;
}

std::size_t conv_parameter_count(const ArchConfig& arch) {
    std::size_t n = 0;
    for (const auto& c : arch.convs)
        n += c.out_channels * c.in_channels * c.kernel * c.kernel + c.out_channels;
    return n;
}

Model Model::init(const ArchConfig& arch, std::uint64_t seed) {
    Model m;
    m.arch = arch;
    std::uint64_t state = seed ^ 0xA5A5A5A55A5A5A5AULL;
    auto add = [&](const std::string& name, Group g, std::vector<std::size_t> shape,
                   std::size_t fan_in, bool bias) {
        NamedParam p;
        p.name = name;
        p.group = g;
        p.value = Tensor::zeros(shape);
        if (!bias) {
            double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (double& v : p.value.values) v = (2.0 * uniform01(state) - 1.0) * bound;
        }
        p.adam_m = Tensor::zeros(shape);
        p.adam_v = Tensor::zeros(shape);
        m.params.push_back(std::move(p));
    };
    for (std::size_t i = 0; i < arch.convs.size(); ++i) {
        const auto& c = arch.convs[i];
        std::string base = "conv" + std::to_string(i + 1);
        std::size_t fan = c.in_channels * c.kernel * c.kernel;
        add(base + ".w", Group::trunk, {c.out_channels, c.in_channels, c.kernel, c.kernel},
            fan, false);
        add(base + ".b", Group::trunk, {c.out_channels}, fan, true);
    }
    add("fc1.w", Group::trunk, {arch.feature_dim, arch.flat_dim()}, arch.flat_dim(), false);
    add("fc1.b", Group::trunk, {arch.feature_dim}, arch.flat_dim(), true);
    add("head.w", Group::head, {arch.output_dim, arch.feature_dim}, arch.feature_dim, false);
    add("head.b", Group::head, {arch.output_dim}, arch.feature_dim, true);
    return m;
}

NamedParam* Model::find(const std::string& name) {
    for (auto& p : params)
        if (p.name == name) return &p;
    return nullptr;
}
const NamedParam* Model::find(const std::string& name) const {
    return const_cast<Model*>(this)->find(name);
}

ForwardCache Model::forward_cached(const std::vector<const double*>& inputs, Mode mode,
                                   std::uint64_t dropout_seed) const {
    const std::size_t batch = inputs.size();
    const std::size_t L = arch.input_size;
    const std::size_t plane = L * L;
    ForwardCache cache;
    cache.inputs = inputs;
    cache.conv_acts.resize(arch.convs.size());

    std::vector<double> col;
    for (std::size_t layer = 0; layer < arch.convs.size(); ++layer) {
        const auto& spec = arch.convs[layer];
        const NamedParam& w = params[2 * layer];
        const NamedParam& b = params[2 * layer + 1];
        const std::size_t ck = spec.in_channels * spec.kernel * spec.kernel;
        col.resize(ck * plane);
        auto& out = cache.conv_acts[layer];
        out.assign(batch * spec.out_channels * plane, 0.0);
        for (std::size_t s = 0; s < batch; ++s) {
            const double* x = layer == 0 ? inputs[s]
                                         : cache.conv_acts[layer - 1].data() +
                                               s * arch.convs[layer - 1].out_channels * plane;
            im2col(x, spec.in_channels, L, spec.kernel, col.data());
            double* y = out.data() + s * spec.out_channels * plane;
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
                        static_cast<int>(spec.out_channels), static_cast<int>(plane),
                        static_cast<int>(ck), 1.0, w.value.data(), static_cast<int>(ck),
                        col.data(), static_cast<int>(plane), 0.0, y,
                        static_cast<int>(plane));
            for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
                const double bias = b.value.values[oc];
                double* row = y + oc * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    row[i] = std::max(row[i] + bias, 0.0);
            }
        }
    }

    const std::size_t flat = arch.flat_dim();
    const std::size_t n_phi = arch.feature_dim;
    const NamedParam& fc1w = *find("fc1.w");
    const NamedParam& fc1b = *find("fc1.b");
    cache.fc1_pre_dropout.assign(batch * n_phi, 0.0);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(batch),
                static_cast<int>(n_phi), static_cast<int>(flat), 1.0,
                cache.conv_acts.back().data(), static_cast<int>(flat), fc1w.value.data(),
                static_cast<int>(flat), 0.0, cache.fc1_pre_dropout.data(),
                static_cast<int>(n_phi));
    for (std::size_t s = 0; s < batch; ++s) {
        double* row = cache.fc1_pre_dropout.data() + s * n_phi;
        for (std::size_t i = 0; i < n_phi; ++i)
            row[i] = std::max(row[i] + fc1b.value.values[i], 0.0);
    }

    cache.dropout_active = mode == Mode::train && arch.dropout_rate > 0.0;
    cache.result.batch = batch;
    cache.result.features.assign(cache.fc1_pre_dropout.begin(), cache.fc1_pre_dropout.end());
    if (cache.dropout_active) {
        const double p = arch.dropout_rate;
        const double keep_scale = 1.0 / (1.0 - p);
        cache.dropout_mask.assign(batch * n_phi, 1);
        for (std::size_t s = 0; s < batch; ++s) {
            std::uint64_t state = dropout_seed ^ (0x9E3779B97F4A7C15ULL * (s + 1));
            splitmix64(state);
            for (std::size_t i = 0; i < n_phi; ++i) {
                bool keep = uniform01(state) >= p;
                cache.dropout_mask[s * n_phi + i] = keep ? 1 : 0;
                cache.result.features[s * n_phi + i] =
                    keep ? cache.result.features[s * n_phi + i] * keep_scale : 0.0;
            }
        }
    }

    const NamedParam& hw = *find("head.w");
    const NamedParam& hb = *find("head.b");
    const std::size_t M = arch.output_dim;
    cache.result.logits.assign(batch * M, 0.0);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(batch),
                static_cast<int>(M), static_cast<int>(n_phi), 1.0,
                cache.result.features.data(), static_cast<int>(n_phi), hw.value.data(),
                static_cast<int>(n_phi), 0.0, cache.result.logits.data(),
                static_cast<int>(M));
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t k = 0; k < M; ++k)
            cache.result.logits[s * M + k] += hb.value.values[k];
    check_finite(cache.result.logits.data(), cache.result.logits.size(), "forward logits");
    return cache;
}

ForwardResult Model::forward(const std::vector<const double*>& inputs, Mode mode,
                             std::uint64_t dropout_seed) const {
    return forward_cached(inputs, mode, dropout_seed).result;
}

const ForwardResult& Model::result(const ForwardCache& cache) const { return cache.result; }

std::vector<Tensor> Model::backward(const ForwardCache& cache,
                                    const std::vector<double>& dlogits) const {
    const std::size_t batch = cache.result.batch;
    const std::size_t L = arch.input_size;
    const std::size_t plane = L * L;
    const std::size_t n_phi = arch.feature_dim;
    const std::size_t M = arch.output_dim;
    const std::size_t flat = arch.flat_dim();

    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(Tensor::zeros(p.value.shape));
    auto grad_of = [&](const std::string& name) -> Tensor& {
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].name == name) return grads[i];
        throw std::logic_error("unknown parameter " + name);
    };

    const NamedParam& hw = *find("head.w");
    // Head gradients.
    if (head_trainable) {
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(M),
                    static_cast<int>(n_phi), static_cast<int>(batch), 1.0, dlogits.data(),
                    static_cast<int>(M), cache.result.features.data(),
                    static_cast<int>(n_phi), 0.0, grad_of("head.w").data(),
                    static_cast<int>(n_phi));
        Tensor& hbg = grad_of("head.b");
        for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t k = 0; k < M; ++k) hbg.values[k] += dlogits[s * M + k];
    }

    // Into the feature layer.
    std::vector<double> dfeat(batch * n_phi, 0.0);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(batch),
                static_cast<int>(n_phi), static_cast<int>(M), 1.0, dlogits.data(),
                static_cast<int>(M), hw.value.data(), static_cast<int>(n_phi), 0.0,
                dfeat.data(), static_cast<int>(n_phi));
    if (cache.dropout_active) {
        const double keep_scale = 1.0 / (1.0 - arch.dropout_rate);
        for (std::size_t i = 0; i < dfeat.size(); ++i)
            dfeat[i] = cache.dropout_mask[i] ? dfeat[i] * keep_scale : 0.0;
    }
    for (std::size_t i = 0; i < dfeat.size(); ++i)
        if (cache.fc1_pre_dropout[i] <= 0.0) dfeat[i] = 0.0;

    if (!trunk_trainable) {
        check_finite(dfeat.data(), dfeat.size(), "backward");
        return grads;
    }

    const NamedParam& fc1w = *find("fc1.w");
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(n_phi),
                static_cast<int>(flat), static_cast<int>(batch), 1.0, dfeat.data(),
                static_cast<int>(n_phi), cache.conv_acts.back().data(),
                static_cast<int>(flat), 0.0, grad_of("fc1.w").data(),
                static_cast<int>(flat));
    {
        Tensor& bg = grad_of("fc1.b");
        for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t i = 0; i < n_phi; ++i) bg.values[i] += dfeat[s * n_phi + i];
    }
    std::vector<double> dconv(batch * flat, 0.0);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(batch),
                static_cast<int>(flat), static_cast<int>(n_phi), 1.0, dfeat.data(),
                static_cast<int>(n_phi), fc1w.value.data(), static_cast<int>(flat), 0.0,
                dconv.data(), static_cast<int>(flat));

    std::vector<double> col, dcol, dprev;
    for (std::size_t layer = arch.convs.size(); layer-- > 0;) {
        const auto& spec = arch.convs[layer];
        const NamedParam& w = params[2 * layer];
        const std::size_t ck = spec.in_channels * spec.kernel * spec.kernel;
        const std::size_t out_plane = spec.out_channels * plane;
        Tensor& wg = grads[2 * layer];
        Tensor& bg = grads[2 * layer + 1];
        col.resize(ck * plane);
        dcol.resize(ck * plane);
        const std::size_t prev_size =
            layer == 0 ? arch.input_values() : arch.convs[layer - 1].out_channels * plane;
        dprev.assign(batch * prev_size, 0.0);
        for (std::size_t s = 0; s < batch; ++s) {
            double* dy = dconv.data() + s * out_plane;
            const double* act = cache.conv_acts[layer].data() + s * out_plane;
            for (std::size_t i = 0; i < out_plane; ++i)
                if (act[i] <= 0.0) dy[i] = 0.0;
            const double* x = layer == 0 ? cache.inputs[s]
                                         : cache.conv_acts[layer - 1].data() + s * prev_size;
            im2col(x, spec.in_channels, L, spec.kernel, col.data());
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans,
                        static_cast<int>(spec.out_channels), static_cast<int>(ck),
                        static_cast<int>(plane), 1.0, dy, static_cast<int>(plane),
                        col.data(), static_cast<int>(plane), 1.0, wg.data(),
                        static_cast<int>(ck));
            for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
                double acc = 0.0;
                const double* row = dy + oc * plane;
                for (std::size_t i = 0; i < plane; ++i) acc += row[i];
                bg.values[oc] += acc;
            }
            if (layer > 0) {
                cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(ck),
                            static_cast<int>(plane), static_cast<int>(spec.out_channels),
                            1.0, w.value.data(), static_cast<int>(ck), dy,
                            static_cast<int>(plane), 0.0, dcol.data(),
                            static_cast<int>(plane));
                col2im_accumulate(dcol.data(), spec.in_channels, L, spec.kernel,
                                  dprev.data() + s * prev_size);
            }
        }
        dconv.swap(dprev);
    }

    for (const auto& g : grads)
        check_finite(g.data(), g.size(), "gradients");
    return grads;
}

double Model::loss_and_gradients(const std::vector<const double*>& inputs,
                                 const std::vector<const double*>& target_pmfs,
                                 std::vector<Tensor>& grads, Mode mode,
                                 std::uint64_t dropout_seed) const {
    ForwardCache cache = forward_cached(inputs, mode, dropout_seed);
    const std::size_t batch = inputs.size();
    const std::size_t M = arch.output_dim;
    std::vector<double> dlogits(batch * M);
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t s = 0; s < batch; ++s) {
        const double* z = cache.result.logits.data() + s * M;
        const double* y = target_pmfs[s];
        double zmax = *std::max_element(z, z + M);
        double sum = 0.0;
        for (std::size_t k = 0; k < M; ++k) sum += std::exp(z[k] - zmax);
        double lse = std::log(sum) + zmax;
        for (std::size_t k = 0; k < M; ++k) {
            loss -= y[k] * (z[k] - lse) * inv_batch;
            dlogits[s * M + k] = (std::exp(z[k] - lse) - y[k]) * inv_batch;
        }
    }
    grads = backward(cache, dlogits);
    return loss;
}

double Model::loss_only(const std::vector<const double*>& inputs,
                        const std::vector<const double*>& target_pmfs, Mode mode,
                        std::uint64_t dropout_seed) const {
    ForwardResult res = forward(inputs, mode, dropout_seed);
    const std::size_t M = arch.output_dim;
    double loss = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const double* z = res.logits.data() + s * M;
        const double* y = target_pmfs[s];
        double zmax = *std::max_element(z, z + M);
        double sum = 0.0;
        for (std::size_t k = 0; k < M; ++k) sum += std::exp(z[k] - zmax);
        double lse = std::log(sum) + zmax;
        for (std::size_t k = 0; k < M; ++k) loss -= y[k] * (z[k] - lse);
    }
    return loss / static_cast<double>(inputs.size());
}

double Model::mse_loss_and_gradients(const std::vector<const double*>& inputs,
                                     const std::vector<double>& targets,
                                     std::vector<Tensor>& grads, Mode mode,
                                     std::uint64_t dropout_seed) const {
    if (arch.output_dim != 1)
        throw std::logic_error("mse loss requires a scalar head");
    ForwardCache cache = forward_cached(inputs, mode, dropout_seed);
    const std::size_t batch = inputs.size();
    std::vector<double> dlogits(batch);
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t s = 0; s < batch; ++s) {
        double err = cache.result.logits[s] - targets[s];
        loss += err * err * inv_batch;
        dlogits[s] = 2.0 * err * inv_batch;
    }
    grads = backward(cache, dlogits);
    return loss;
}

void adam_step(Model& model, const std::vector<Tensor>& grads, double lr, double beta1,
               double beta2, double eps) {
    if (grads.size() != model.params.size())
        throw std::invalid_argument("adam_step: gradient count mismatch");
    model.adam_step += 1;
    const double t = static_cast<double>(model.adam_step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        NamedParam& p = model.params[i];
        bool trainable =
            p.group == Group::trunk ? model.trunk_trainable : model.head_trainable;
        if (!trainable) continue;
        if (grads[i].size() != p.value.size())
            throw std::invalid_argument("adam_step: shape mismatch for " + p.name);
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            double g = grads[i].values[j];
            double& m = p.adam_m.values[j];
            double& v = p.adam_v.values[j];
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            p.value.values[j] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
        }
    }
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - zmax);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

namespace {
template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
void put_tensor(std::ostream& out, const Tensor& t) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
}
Tensor get_tensor(std::istream& in) {
    std::uint8_t ndim = get<std::uint8_t>(in);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    return t;
}
}  // namespace

void save_checkpoint(const Model& model, const std::string& path, bool include_adam) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out.write("UWAM1", 5);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(model.arch.input_size));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(model.arch.output_dim));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(model.arch.feature_dim));
    put<std::uint8_t>(out, model.arch.regression ? 1 : 0);
    put<double>(out, model.arch.dropout_rate);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(model.arch.convs.size()));
    for (const auto& c : model.arch.convs) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(c.in_channels));
        put<std::uint16_t>(out, static_cast<std::uint16_t>(c.out_channels));
        put<std::uint16_t>(out, static_cast<std::uint16_t>(c.kernel));
    }
    put<double>(out, model.grid_d_min);
    put<double>(out, model.grid_d_max);
    put<double>(out, model.grid_bin);
    put<std::uint8_t>(out, include_adam ? 1 : 0);
    if (include_adam) put<std::uint64_t>(out, model.adam_step);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.size()));
    for (const auto& p : model.params) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint8_t>(out, p.group == Group::head ? 1 : 0);
        put_tensor(out, p.value);
        if (include_adam) {
            put_tensor(out, p.adam_m);
            put_tensor(out, p.adam_v);
        }
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "UWAM1", 5) != 0)
        throw std::runtime_error("not a UWAM1 file: " + path);
    Model m;
    m.arch.input_size = get<std::uint16_t>(in);
    m.arch.output_dim = get<std::uint16_t>(in);
    m.arch.feature_dim = get<std::uint16_t>(in);
    m.arch.regression = get<std::uint8_t>(in) != 0;
    m.arch.dropout_rate = get<double>(in);
    std::uint16_t n_convs = get<std::uint16_t>(in);
    m.arch.convs.resize(n_convs);
    for (auto& c : m.arch.convs) {
        c.in_channels = get<std::uint16_t>(in);
        c.out_channels = get<std::uint16_t>(in);
        c.kernel = get<std::uint16_t>(in);
    }
    m.grid_d_min = get<double>(in);
    m.grid_d_max = get<double>(in);
    m.grid_bin = get<double>(in);
    bool has_adam = get<std::uint8_t>(in) != 0;
    if (has_adam) m.adam_step = get<std::uint64_t>(in);
    std::uint32_t n_params = get<std::uint32_t>(in);
    m.params.resize(n_params);
    for (auto& p : m.params) {
        std::uint16_t len = get<std::uint16_t>(in);
        p.name.resize(len);
        in.read(p.name.data(), len);
        p.group = get<std::uint8_t>(in) != 0 ? Group::head : Group::trunk;
        p.value = get_tensor(in);
        if (has_adam) {
            p.adam_m = get_tensor(in);
            p.adam_v = get_tensor(in);
        } else {
            p.adam_m = Tensor::zeros(p.value.shape);
            p.adam_v = Tensor::zeros(p.value.shape);
        }
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return m;
}

}  // namespace uwa::nn
