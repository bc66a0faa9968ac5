#include "uwa/modes.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace uwa {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDbPerNeper = 8.685889638065035;

struct MediumProfile {
    // Sampled sound speed / density / attenuation at a given depth.
    double c, rho, alpha_db_km_hz;
};

MediumProfile medium_at(const Environment& env, double z) {
    if (z <= env.water_depth_m) return {env.water_speed_at(z), 1.0, 0.0};
    double top = env.water_depth_m;
    for (const auto& lay : env.sediment) {
        double bottom = top + lay.thickness_m;
        if (z <= bottom) {
            double t = (z - top) / lay.thickness_m;
            return {lay.c_top_m_s + t * (lay.c_bottom_m_s - lay.c_top_m_s),
                    lay.density_g_cm3, lay.attenuation_db_per_km_hz};
        }
        top = bottom;
    }
    if (env.sediment.empty()) return {env.ssp_speeds_m_s.back(), 1.0, 0.0};
    const auto& last = env.sediment.back();
    return {last.c_bottom_m_s, last.density_g_cm3, last.attenuation_db_per_km_hz};
}

// One inverse-iteration refinement pass for a symmetric tridiagonal matrix
// shifted near an isolated eigenvalue; dgtsv does the pivoted solve.
std::vector<double> inverse_iteration(const std::vector<double>& diag,
                                      const std::vector<double>& off,
                                      double lambda) {
    const lapack_int n = static_cast<lapack_int>(diag.size());
    std::vector<double> v(n);
    // Deterministic non-degenerate start vector.
    for (lapack_int i = 0; i < n; ++i)
        v[i] = std::sin(0.7 * (i + 1)) + 0.3 * std::cos(1.3 * (i + 1));
    double shift = lambda * (1.0 + 1e-12) + 1e-14;
    for (int pass = 0; pass < 3; ++pass) {
        std::vector<double> dl(off.begin(), off.end());
        std::vector<double> du(off.begin(), off.end());
        std::vector<double> d(n);
        for (lapack_int i = 0; i < n; ++i) d[i] = diag[i] - shift;
        lapack_int info = LAPACKE_dgtsv(LAPACK_COL_MAJOR, n, 1, dl.data(), d.data(),
                                        du.data(), v.data(), n);
        if (info != 0) throw std::runtime_error("inverse iteration solve failed");
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

}  // namespace

double ModeSet::mode_at(std::size_t m, double z) const {
    const auto& zs = depth_grid;
    if (z <= zs.front() || z >= zs.back()) {
        if (z < zs.front() || z > zs.back()) return 0.0;
    }
    auto it = std::upper_bound(zs.begin(), zs.end(), z);
    std::size_t i = it == zs.end() ? zs.size() - 1 : static_cast<std::size_t>(it - zs.begin());
    if (i == 0) i = 1;
    double t = (z - zs[i - 1]) / (zs[i] - zs[i - 1]);
    const auto& psi = mode_functions[m];
    return psi[i - 1] + t * (psi[i] - psi[i - 1]);
}

double ModeSet::density_at(double z) const {
    const auto& zs = depth_grid;
    if (z <= zs.front()) return density_nodes.front();
    if (z >= zs.back()) return density_nodes.back();
    auto it = std::upper_bound(zs.begin(), zs.end(), z);
    std::size_t i = static_cast<std::size_t>(it - zs.begin());
    double t = (z - zs[i - 1]) / (zs[i] - zs[i - 1]);
    return density_nodes[i - 1] + t * (density_nodes[i] - density_nodes[i - 1]);
}

Environment perturb_ssp(const Environment& env) {
    env.validate();
    Environment out = env;
    double depth = env.water_depth_m;
    for (std::size_t i = 0; i < out.ssp_depths_m.size(); ++i) {
        double z = out.ssp_depths_m[i];
        out.ssp_speeds_m_s[i] += env.ssp_gradient_delta / depth * (z - depth);
    }
    out.ssp_gradient_delta = 0.0;
    return out;
}

std::size_t default_grid_points(const Environment& env) {
    return static_cast<std::size_t>(std::ceil(env.termination_depth_m / 0.1));
}

ModeSet solve_modes(const Environment& env, double frequency_hz) {
    return solve_modes(env, frequency_hz, default_grid_points(env));
}

ModeSet solve_modes(const Environment& env_in, double frequency_hz, std::size_t grid_points) {
    env_in.validate();
    if (!(frequency_hz > 0.0)) throw std::invalid_argument("frequency must be > 0");
    if (grid_points < 500) throw std::invalid_argument("grid_points must be >= 500");
    Environment env = env_in.ssp_gradient_delta != 0.0 ? perturb_ssp(env_in) : env_in;

    const std::size_t n = grid_points;  // interior nodes
    const double h = env.termination_depth_m / static_cast<double>(n + 1);
    const double omega = 2.0 * kPi * frequency_hz;

    // Interval (midpoint) and node sampling of the medium.
    std::vector<double> p_mid(n + 1);  // 1/rho on intervals
    double c_min = std::numeric_limits<double>::infinity();
    double c_max = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        MediumProfile m = medium_at(env, (i + 0.5) * h);
        p_mid[i] = 1.0 / m.rho;
        c_min = std::min(c_min, m.c);
        c_max = std::max(c_max, m.c);
    }
    std::vector<double> gamma(n), alpha_np(n), c_node(n), w_node(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = (i + 1) * h;
        MediumProfile m = medium_at(env, z);
        c_node[i] = m.c;
        gamma[i] = omega * omega / (m.c * m.c);
        alpha_np[i] = m.alpha_db_km_hz * frequency_hz / 1000.0 / kDbPerNeper;
        w_node[i] = 0.5 * (p_mid[i] + p_mid[i + 1]);
        c_min = std::min(c_min, m.c);
        c_max = std::max(c_max, m.c);
    }

    // Standard-form symmetric tridiagonal B = W^{-1/2} M W^{-1/2} for
    // M psi = k^2 W psi.
    std::vector<double> diag(n), off(n > 1 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i)
        diag[i] = gamma[i] - (p_mid[i] + p_mid[i + 1]) / (h * h * w_node[i]);
    for (std::size_t i = 0; i + 1 < n; ++i)
        off[i] = p_mid[i + 1] / (h * h * std::sqrt(w_node[i] * w_node[i + 1]));

    const double k_lo = omega / c_max;
    const double k_hi = omega / c_min;
    double vl = k_lo * k_lo;
    double vu = k_hi * k_hi;
    if (!(vu > vl)) throw NoModesError("no propagating modes: empty wavenumber band");

    std::vector<double> d_copy = diag, e_copy = off;
    e_copy.resize(n, 0.0);
    std::vector<double> eigenvalues(n);
    lapack_int found = 0;
    std::vector<lapack_int> isuppz(2 * std::max<std::size_t>(n, 1));
    lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'N', 'V',
                                     static_cast<lapack_int>(n), d_copy.data(),
                                     e_copy.data(), vl, vu, 0, 0, 0.0, &found,
                                     eigenvalues.data(), nullptr, 1, isuppz.data());
    if (info != 0) throw std::runtime_error("tridiagonal eigensolve failed");
    if (found == 0) throw NoModesError("no propagating modes at this frequency");
    eigenvalues.resize(found);
    std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());

    ModeSet modes;
    modes.frequency_hz = frequency_hz;
    modes.depth_grid.resize(n + 2);
    for (std::size_t i = 0; i < n + 2; ++i) modes.depth_grid[i] = i * h;
    modes.density_nodes.resize(n + 2);
    for (std::size_t i = 0; i < n; ++i) modes.density_nodes[i + 1] = 1.0 / w_node[i];
    modes.density_nodes[0] = 1.0 / p_mid[0];
    modes.density_nodes[n + 1] = 1.0 / p_mid[n];

    for (double lambda : eigenvalues) {
        std::vector<double> phi = inverse_iteration(diag, off, lambda);
        // Back to psi and trapezoid-normalize against 1/rho.
        std::vector<double> psi(n + 2, 0.0);
        double norm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            psi[i + 1] = phi[i] / std::sqrt(w_node[i]);
            norm2 += w_node[i] * psi[i + 1] * psi[i + 1] * h;
        }
        double scale = 1.0 / std::sqrt(norm2);
        // Sign convention: positive slope at the surface.
        if (psi[1] < 0.0) scale = -scale;
        for (double& x : psi) x *= scale;

        double k_re = std::sqrt(lambda);
        // Perturbative loss from sediment attenuation.
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (alpha_np[i] > 0.0)
                loss += alpha_np[i] / c_node[i] * w_node[i] * psi[i + 1] * psi[i + 1] * h;
        double k_im = omega / k_re * loss;

        modes.wavenumbers.emplace_back(k_re, k_im);
        modes.mode_functions.push_back(std::move(psi));
    }
    return modes;
}

std::vector<std::complex<double>> pressure_field(const ModeSet& modes,
                                                 double source_depth_m,
                                                 double range_m,
                                                 const ArrayGeometry& array) {
    if (!(range_m > 0.0)) throw std::domain_error("range_m must be > 0");
    if (!(source_depth_m > 0.0) || !(source_depth_m < modes.depth_grid.back()))
        throw std::domain_error("source depth outside solver grid");
    const std::size_t n_modes = modes.mode_count();
    const std::size_t n_phones = array.size();
    const double rho_s = modes.density_at(source_depth_m);
    const std::complex<double> prefactor =
        std::complex<double>(0.0, 1.0) *
        std::exp(std::complex<double>(0.0, -kPi / 4.0)) /
        (rho_s * std::sqrt(8.0 * kPi * range_m));

    std::vector<std::complex<double>> field(n_phones, 0.0);
    for (std::size_t m = 0; m < n_modes; ++m) {
        const std::complex<double> k = modes.wavenumbers[m];
        const std::complex<double> weight =
            modes.mode_at(m, source_depth_m) *
            std::exp(std::complex<double>(0.0, 1.0) * k * range_m) / std::sqrt(k);
        for (std::size_t l = 0; l < n_phones; ++l)
            field[l] += weight * modes.mode_at(m, array.hydrophone_depths_m[l]);
    }
    for (auto& x : field) x *= prefactor;
    return field;
}

double orthonormality_residual(const ModeSet& modes) {
    const std::size_t n_modes = modes.mode_count();
    const std::size_t n = modes.depth_grid.size();
    double worst = 0.0;
    for (std::size_t a = 0; a < n_modes; ++a) {
        for (std::size_t b = a; b < n_modes; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                double h = modes.depth_grid[i + 1] - modes.depth_grid[i];
                double fa = modes.mode_functions[a][i] * modes.mode_functions[b][i] /
                            modes.density_nodes[i];
                double fb = modes.mode_functions[a][i + 1] * modes.mode_functions[b][i + 1] /
                            modes.density_nodes[i + 1];
                acc += 0.5 * (fa + fb) * h;
            }
            double target = a == b ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(acc - target));
        }
    }
    return worst;
}

}  // namespace uwa
