#include "uwa/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace uwa {

void Environment::validate() const {
    if (!(water_depth_m > 0.0)) throw std::invalid_argument("water_depth_m must be > 0");
    if (!(termination_depth_m > water_depth_m))
        throw std::invalid_argument("termination_depth_m must exceed water_depth_m");
    if (ssp_depths_m.size() < 2 || ssp_depths_m.size() != ssp_speeds_m_s.size())
        throw std::invalid_argument("ssp grid malformed");
    if (std::abs(ssp_depths_m.front()) > 1e-9 ||
        ssp_depths_m.back() < water_depth_m - 1e-9)
        throw std::invalid_argument("ssp grid must span [0, water_depth_m]");
    for (std::size_t i = 1; i < ssp_depths_m.size(); ++i)
        if (!(ssp_depths_m[i] > ssp_depths_m[i - 1]))
            throw std::invalid_argument("ssp depths must be strictly increasing");
    for (double c : ssp_speeds_m_s)
        if (!(c > 0.0)) throw std::invalid_argument("ssp speeds must be > 0");
    for (const auto& lay : sediment) {
        if (!(lay.thickness_m > 0.0) || !(lay.density_g_cm3 > 0.0) ||
            !(lay.c_top_m_s > 0.0) || !(lay.c_bottom_m_s > 0.0))
            throw std::invalid_argument("sediment layer parameters must be positive");
        if (lay.attenuation_db_per_km_hz < 0.0)
            throw std::invalid_argument("sediment attenuation must be >= 0");
    }
}

double Environment::water_speed_at(double z) const {
    const auto& zs = ssp_depths_m;
    const auto& cs = ssp_speeds_m_s;
    if (z <= zs.front()) return cs.front();
    if (z >= zs.back()) return cs.back();
    auto it = std::upper_bound(zs.begin(), zs.end(), z);
    std::size_t i = static_cast<std::size_t>(it - zs.begin());
    double t = (z - zs[i - 1]) / (zs[i] - zs[i - 1]);
    return cs[i - 1] + t * (cs[i] - cs[i - 1]);
}

namespace {
// FNV-1a over the raw little-endian doubles; stable across runs.
void hash_doubles(std::uint64_t& h, const double* p, std::size_t n) {
    const unsigned char* b = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
    }
}
}  // namespace

std::uint64_t Environment::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    hash_doubles(h, &water_depth_m, 1);
    hash_doubles(h, &termination_depth_m, 1);
    hash_doubles(h, &ssp_gradient_delta, 1);
    hash_doubles(h, ssp_depths_m.data(), ssp_depths_m.size());
    hash_doubles(h, ssp_speeds_m_s.data(), ssp_speeds_m_s.size());
    for (const auto& lay : sediment) {
        double v[5] = {lay.thickness_m, lay.density_g_cm3, lay.c_top_m_s,
                       lay.c_bottom_m_s, lay.attenuation_db_per_km_hz};
        hash_doubles(h, v, 5);
    }
    return h;
}

void ArrayGeometry::validate(double water_depth_m) const {
    if (hydrophone_depths_m.empty())
        throw std::invalid_argument("array needs at least one hydrophone");
    for (std::size_t i = 0; i < hydrophone_depths_m.size(); ++i) {
        double z = hydrophone_depths_m[i];
        if (!(z > 0.0) || !(z < water_depth_m))
            throw std::invalid_argument("hydrophone depth outside water column");
        if (i > 0 && !(z > hydrophone_depths_m[i - 1]))
            throw std::invalid_argument("hydrophone depths must be strictly increasing");
    }
}

ArrayGeometry ArrayGeometry::uniform(double first_m, double last_m, std::size_t count) {
    ArrayGeometry a;
    a.hydrophone_depths_m.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        a.hydrophone_depths_m[i] = first_m + t * (last_m - first_m);
    }
    return a;
}

Environment baseline_environment() {
    Environment env;
    env.water_depth_m = 216.5;
    env.termination_depth_m = 416.5;
    // Downward-refracting averaged profile for the 216.5 m site.
    env.ssp_depths_m = {0.0,  10.0, 20.0,  30.0,  40.0,  50.0, 75.0,
                        100.0, 125.0, 150.0, 175.0, 200.0, 216.5};
    env.ssp_speeds_m_s = {1521.95, 1521.20, 1517.10, 1509.50, 1504.00,
                          1501.00, 1497.00, 1494.20, 1492.30, 1490.80,
                          1489.80, 1489.20, 1488.70};
    SedimentLayer lay;
    lay.thickness_m = 200.0;
    lay.density_g_cm3 = 1.76;
    lay.c_top_m_s = 1572.37;
    lay.c_bottom_m_s = 1593.02;
    lay.attenuation_db_per_km_hz = 0.2;
    env.sediment = {lay};
    return env;
}

ArrayGeometry baseline_array() {
    return ArrayGeometry::uniform(94.125, 212.25, 21);
}

namespace {
std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

Environment parse_environment(const std::string& text) {
    Environment env;
    std::istringstream in(text);
    std::string line;
    std::string section;
    while (std::getline(in, line)) {
        std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        if (section == "ssp") {
            std::istringstream row(line);
            double z, c;
            if (!(row >> z >> c)) throw std::invalid_argument("bad ssp row: " + line);
            env.ssp_depths_m.push_back(z);
            env.ssp_speeds_m_s.push_back(c);
        } else if (section == "sediment") {
            std::istringstream row(line);
            SedimentLayer lay;
            if (!(row >> lay.thickness_m >> lay.density_g_cm3 >> lay.c_top_m_s >>
                  lay.c_bottom_m_s >> lay.attenuation_db_per_km_hz))
                throw std::invalid_argument("bad sediment row: " + line);
            env.sediment.push_back(lay);
        } else {
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("expected key = value: " + line);
            std::string key = trim(line.substr(0, eq));
            double value = std::stod(trim(line.substr(eq + 1)));
            if (key == "water_depth_m") env.water_depth_m = value;
            else if (key == "termination_depth_m") env.termination_depth_m = value;
            else if (key == "ssp_gradient_delta") env.ssp_gradient_delta = value;
            else throw std::invalid_argument("unknown environment key: " + key);
        }
    }
    env.validate();
    return env;
}

Environment load_environment(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open environment file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_environment(ss.str());
}

std::string format_environment(const Environment& env) {
    std::ostringstream out;
    out.precision(17);
    out << "water_depth_m = " << env.water_depth_m << "\n";
    out << "termination_depth_m = " << env.termination_depth_m << "\n";
    out << "ssp_gradient_delta = " << env.ssp_gradient_delta << "\n";
    out << "[ssp]\n";
    for (std::size_t i = 0; i < env.ssp_depths_m.size(); ++i)
        out << env.ssp_depths_m[i] << " " << env.ssp_speeds_m_s[i] << "\n";
    out << "[sediment]\n";
    for (const auto& lay : env.sediment)
        out << lay.thickness_m << " " << lay.density_g_cm3 << " " << lay.c_top_m_s
            << " " << lay.c_bottom_m_s << " " << lay.attenuation_db_per_km_hz << "\n";
    return out.str();
}

}  // namespace uwa
