#include "ivct/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace ivct {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double ScanGeometry::fan_half_angle() const {
    const double u_max = 0.5 * static_cast<double>(n_detectors) * detector_pitch;
    return std::atan2(u_max, source_detector());
}

double ScanGeometry::fov_radius() const { return dist_source_center * std::sin(fan_half_angle()); }

double ScanGeometry::delta_beta() const {
    return angular_span_deg / 180.0 * kPi / static_cast<double>(n_full_views);
}

double ScanGeometry::iso_pitch() const { return detector_pitch * dist_source_center / source_detector(); }

bool ScanGeometry::compatible(const ScanGeometry& o) const {
    return n_full_views == o.n_full_views && n_detectors == o.n_detectors &&
           dist_source_center == o.dist_source_center && dist_detector_center == o.dist_detector_center &&
           detector_pitch == o.detector_pitch && image_size == o.image_size && pixel_spacing == o.pixel_spacing &&
           angular_span_deg == o.angular_span_deg;
}

ScanGeometry make_geometry(ScanGeometry g) {
    if (g.n_full_views < 1 || g.n_detectors < 1) throw std::invalid_argument("geometry: counts must be positive");
    if (g.dist_source_center <= 0 || g.dist_detector_center <= 0)
        throw std::invalid_argument("geometry: distances must be positive");
    if (g.image_size < 2 || g.pixel_spacing <= 0) throw std::invalid_argument("geometry: bad image grid");
    if (g.angular_span_deg <= 0 || g.angular_span_deg > 360.0)
        throw std::invalid_argument("geometry: angular span must be in (0, 360]");
    if (g.attenuation_scale <= 0) throw std::invalid_argument("geometry: attenuation scale must be positive");

    const double half_diag = 0.5 * std::sqrt(2.0) * static_cast<double>(g.image_size) * g.pixel_spacing;
    if (g.detector_pitch <= 0) {
        // cover the diagonal plus a 2-pixel margin
        const double r = half_diag + 2.0 * g.pixel_spacing;
        if (r >= g.dist_source_center) throw std::invalid_argument("geometry: object larger than source orbit");
        g.detector_pitch = 2.0 * g.source_detector() * std::tan(std::asin(r / g.dist_source_center)) /
                           static_cast<double>(g.n_detectors);
    }
    if (g.fov_radius() < half_diag)
        throw std::invalid_argument("geometry: field of view smaller than the image support");

    g.view_angles.resize(static_cast<size_t>(g.n_full_views));
    const double step = g.angular_span_deg / 180.0 * kPi / static_cast<double>(g.n_full_views);
    for (int64_t i = 0; i < g.n_full_views; ++i) g.view_angles[static_cast<size_t>(i)] = static_cast<double>(i) * step;
    return g;
}

std::vector<int64_t> all_views(const ScanGeometry& geom) {
    std::vector<int64_t> v(static_cast<size_t>(geom.n_full_views));
    for (int64_t i = 0; i < geom.n_full_views; ++i) v[static_cast<size_t>(i)] = i;
    return v;
}

} // namespace ivct
