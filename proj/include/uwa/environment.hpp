#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwa {

/// One fluid sediment layer. Sound speed varies linearly from c_top to
/// c_bottom across the layer thickness.
struct SedimentLayer {
    double thickness_m = 0.0;
    double density_g_cm3 = 1.0;
    double c_top_m_s = 1500.0;
    double c_bottom_m_s = 1500.0;
    double attenuation_db_per_km_hz = 0.0;
};

/// Water column + sediment description of a range-independent waveguide.
/// All the environmental mismatch knobs (depth, SSP gradient, sediment
/// type) live here.
struct Environment {
    double water_depth_m = 0.0;
    std::vector<double> ssp_depths_m;   // strictly increasing, spans [0, water_depth_m]
    std::vector<double> ssp_speeds_m_s; // c0(z) at each depth sample
    double ssp_gradient_delta = 0.0;    // (m/s)/m, applied by perturb_ssp
    std::vector<SedimentLayer> sediment;
    double termination_depth_m = 0.0;   // artificial pressure-release bottom

    void validate() const;

    /// Water sound speed at depth z by linear interpolation (clamped at
    /// the profile ends).
    double water_speed_at(double z) const;

    /// Stable content hash used for dataset provenance.
    std::uint64_t hash() const;
};

/// Vertical line array, depths strictly increasing within the water column.
struct ArrayGeometry {
    std::vector<double> hydrophone_depths_m;

    std::size_t size() const { return hydrophone_depths_m.size(); }
    void validate(double water_depth_m) const;

    /// L uniformly spaced hydrophones from first_m to last_m inclusive.
    static ArrayGeometry uniform(double first_m, double last_m, std::size_t count);
};

/// Built-in shallow-water training environment: 216.5 m flat bathymetry,
/// downward-refracting averaged SSP, one 200 m sediment extension with the
/// "training sediment" parameters, pressure-release termination.
Environment baseline_environment();

/// 21-element VLA spanning 94.125 m to 212.25 m.
ArrayGeometry baseline_array();

/// Parse an environment from the documented key/value + table text format.
Environment parse_environment(const std::string& text);
Environment load_environment(const std::string& path);
std::string format_environment(const Environment& env);

}  // namespace uwa
