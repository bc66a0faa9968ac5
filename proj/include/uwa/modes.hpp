#pragma once

#include <complex>
#include <vector>

#include "uwa/environment.hpp"

namespace uwa {

/// Thrown when no propagating mode exists at the requested frequency.
struct NoModesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Normal modes of a range-independent waveguide at one frequency.
/// Mode functions are real, density-orthonormal on depth_grid, and sorted
/// by decreasing Re(k). Im(k) >= 0 so modes decay with range under the
/// e^{ikr} convention.
struct ModeSet {
    double frequency_hz = 0.0;
    std::vector<std::complex<double>> wavenumbers;        // horizontal k_m, rad/m
    std::vector<std::vector<double>> mode_functions;      // [mode][node]
    std::vector<double> depth_grid;                       // includes both boundaries
    std::vector<double> density_nodes;                    // effective rho at each node

    std::size_t mode_count() const { return wavenumbers.size(); }

    /// Linear interpolation of mode m onto depth z (0 outside the grid).
    double mode_at(std::size_t m, double z) const;
    double density_at(double z) const;
};

/// Copy of env with the constant-gradient SSP perturbation baked into the
/// speed samples: c(z) = c0(z) + (delta / D) (z - D), pivot at the bottom.
Environment perturb_ssp(const Environment& env);

std::size_t default_grid_points(const Environment& env);

/// Finite-difference Sturm-Liouville mode solve: pressure-release surface
/// and termination, sediment appended with its own c and rho, propagating
/// band omega/c_max_grid < Re(k) < omega/c_min_grid, sediment attenuation
/// folded into Im(k) perturbatively.
ModeSet solve_modes(const Environment& env, double frequency_hz, std::size_t grid_points);
ModeSet solve_modes(const Environment& env, double frequency_hz);

/// Mode-sum pressure synthesis at the hydrophones for a point source.
std::vector<std::complex<double>> pressure_field(const ModeSet& modes,
                                                 double source_depth_m,
                                                 double range_m,
                                                 const ArrayGeometry& array);

/// max |trapz(psi_m psi_n / rho) - delta_mn| over all mode pairs.
double orthonormality_residual(const ModeSet& modes);

}  // namespace uwa
