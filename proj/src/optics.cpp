#include "paperprint/optics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <type_traits>

#include <Eigen/Geometry>

namespace paperprint {

void validate_normals(const NormalField& nf, double tol)
{
    require_same_shape(nf.nx, nf.ny, "NormalField");
    require_same_shape(nf.nx, nf.nz, "NormalField");
    for (std::size_t i = 0; i < nf.nx.size(); ++i) {
        const double n2 = nf.nx.values()[i] * nf.nx.values()[i] + nf.ny.values()[i] * nf.ny.values()[i] +
                          nf.nz.values()[i] * nf.nz.values()[i];
        if (std::abs(std::sqrt(n2) - 1.0) > tol)
            throw std::invalid_argument("NormalField: non-unit normal");
    }
}

namespace optics {

namespace {

/// Composite Simpson over [lo, hi] with an even number of intervals.
template <typename F>
auto simpson(F&& f, double lo, double hi, int steps)
{
    if (steps % 2 != 0)
        ++steps;
    const double h = (hi - lo) / steps;
    using Value = std::decay_t<decltype(f(lo))>;
    Value acc = f(lo);
    acc += f(hi);
    for (int i = 1; i < steps; ++i)
        acc += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * h);
    return Value(acc * (h / 3.0));
}

std::pair<double, double> light_range(const ScannerGeometry& geom)
{
    const double a = geom.light_span_near;
    return {-a, geom.exact_far_segment ? geom.light_span_far : a};
}

/// ∫ o / |o|^3 do_x over the light, scaled by l.
Eigen::Vector3d light_moment(const ScannerGeometry& geom)
{
    const auto [lo, hi] = light_range(geom);
    const double oy = geom.light_offset_y;
    const double oz = geom.light_offset_z;
    Eigen::Vector3d m = simpson(
        [&](double ox) -> Eigen::Vector3d {
            const Eigen::Vector3d o(ox, oy, oz);
            const double d = o.norm();
            return o / (d * d * d);
        },
        lo, hi, geom.quadrature_steps);
    return geom.light_strength * m;
}

void require_unit(const Eigen::Vector3d& n, const char* what)
{
    if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-9)
        throw std::domain_error(std::string(what) + " must be a unit vector");
}

} // namespace

Eigen::Vector3d ScannerGeometry::default_sensor_dir()
{
    const double phi = 10.0 * std::numbers::pi / 180.0;
    return {0.0, std::sin(phi), std::cos(phi)};
}

Eigen::Vector3d ScannerGeometry::tilted_sensor_dir(double v_cx)
{
    if (std::abs(v_cx) >= 1.0)
        throw std::domain_error("tilted_sensor_dir: |v_cx| must be < 1");
    const Eigen::Vector3d base = default_sensor_dir();
    const double k = std::sqrt(1.0 - v_cx * v_cx);
    return {v_cx, k * base.y(), k * base.z()};
}

void ScannerGeometry::validate() const
{
    if (!(light_span_near > 0.0) || light_span_far < light_span_near)
        throw std::invalid_argument("ScannerGeometry: require 0 < a <= b");
    if (!(light_offset_z > 0.0))
        throw std::invalid_argument("ScannerGeometry: o_z must be positive");
    if (std::abs(sensor_dir.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("ScannerGeometry: sensor direction must be unit length");
    if (quadrature_steps < 64)
        throw std::invalid_argument("ScannerGeometry: quadrature_steps must be >= 64");
}

void ReflectanceParams::validate() const
{
    if (w_d < 0.0 || w_s < 0.0 || !(w_d + w_s > 0.0))
        throw std::invalid_argument("ReflectanceParams: weights must be >= 0 with positive sum");
    if (!(k_e > 0.0))
        throw std::invalid_argument("ReflectanceParams: k_e must be positive");
}

double reflect_point(const Eigen::Vector3d& n, const Eigen::Vector3d& light_point, const Eigen::Vector3d& v_c,
                     const ReflectanceParams& params, double l)
{
    require_unit(n, "reflect_point: normal");
    const double d2 = light_point.squaredNorm();
    if (!(d2 > 0.0))
        throw std::domain_error("reflect_point: light point coincides with the surface point");
    const Eigen::Vector3d v_i = light_point / std::sqrt(d2);
    const double diffuse = std::max(0.0, n.dot(v_i));
    const Eigen::Vector3d v_r = 2.0 * n * n.dot(v_i) - v_i;
    const double lobe = v_c.dot(v_r);
    const double specular = params.k_e == 1.0 ? lobe : std::pow(std::max(0.0, lobe), params.k_e);
    return l / d2 * (params.w_d * diffuse + params.w_s * specular);
}

double line_integral_intensity(const Eigen::Vector3d& n, const ScannerGeometry& geom, const ReflectanceParams& params)
{
    geom.validate();
    params.validate();
    require_unit(n, "line_integral_intensity: normal");
    const auto [lo, hi] = light_range(geom);
    const double oy = geom.light_offset_y;
    const double oz = geom.light_offset_z;
    return simpson(
        [&](double ox) {
            return reflect_point(n, Eigen::Vector3d(ox, oy, oz), geom.sensor_dir, params, geom.light_strength);
        },
        lo, hi, geom.quadrature_steps);
}

double light_scale(const ScannerGeometry& geom, double weight)
{
    const double a = geom.light_span_near;
    const double oy = geom.light_offset_y;
    const double oz = geom.light_offset_z;
    const double k = simpson(
        [&](double ox) {
            const double d = std::sqrt(ox * ox + oy * oy + oz * oz);
            return 1.0 / (d * d * d);
        },
        -a, a, geom.quadrature_steps);
    return 2.0 * geom.light_strength * weight * oy * k;
}

namespace {

void require_closed_form(const ScannerGeometry& geom, const ReflectanceParams& params)
{
    geom.validate();
    params.validate();
    if (geom.sensor_dir.x() != 0.0)
        throw std::domain_error("closed-form difference requires v_cx == 0");
    if (params.k_e != 1.0)
        throw std::domain_error("closed-form difference requires k_e == 1");
}

double specular_gain(const ScannerGeometry& geom)
{
    return geom.sensor_dir.z() + geom.sensor_dir.y() * geom.light_offset_z / geom.light_offset_y;
}

} // namespace

double predicted_difference(const Eigen::Vector3d& n, const ScannerGeometry& geom, const ReflectanceParams& params)
{
    require_closed_form(geom, params);
    require_unit(n, "predicted_difference: normal");
    const double s = light_scale(geom, params.w_d);
    const double s_spec = light_scale(geom, params.w_s);
    return s * n.y() + 2.0 * s_spec * n.z() * n.y() * specular_gain(geom);
}

double predicted_difference_linear(const Eigen::Vector3d& n, const ScannerGeometry& geom,
                                   const ReflectanceParams& params)
{
    require_closed_form(geom, params);
    require_unit(n, "predicted_difference_linear: normal");
    const double s = light_scale(geom, params.w_d);
    const double s_spec = light_scale(geom, params.w_s);
    return (s + 2.0 * specular_gain(geom) * s_spec) * n.y();
}

Eigen::Vector3d rotate_normal(const Eigen::Vector3d& n, int quarter_turns)
{
    switch (((quarter_turns % 4) + 4) % 4) {
    case 0: return n;
    case 1: return {-n.y(), n.x(), n.z()};
    case 2: return {-n.x(), -n.y(), n.z()};
    default: return {n.y(), -n.x(), n.z()};
    }
}

ScanImage render_scan(const NormalField& normals, const ScannerGeometry& geom, const ReflectanceParams& params,
                      int orientation_degrees)
{
    geom.validate();
    params.validate();
    const int q = quarter_turns_from_degrees(orientation_degrees);
    require_same_shape(normals.nx, normals.ny, "render_scan");
    require_same_shape(normals.nx, normals.nz, "render_scan");

    const Grid nx = rotate_quarter_turns(normals.nx, q);
    const Grid ny = rotate_quarter_turns(normals.ny, q);
    const Grid nz = rotate_quarter_turns(normals.nz, q);

    // With k_e == 1 and no active diffuse clamp the integrand is linear in the
    // light moment, so the per-pixel quadrature collapses to dot products.
    const Eigen::Vector3d m = light_moment(geom);
    const Eigen::Vector3d& v_c = geom.sensor_dir;
    const auto [lo, hi] = light_range(geom);
    const Eigen::Vector3d o_lo(lo, geom.light_offset_y, geom.light_offset_z);
    const Eigen::Vector3d o_hi(hi, geom.light_offset_y, geom.light_offset_z);
    const bool linear_lobe = params.k_e == 1.0;

    ScanImage out{Grid(nx.rows(), nx.cols()), orientation_degrees, normals.pixel_pitch};
    for (std::size_t i = 0; i < nx.size(); ++i) {
        const Eigen::Vector3d n = rotate_normal({nx.values()[i], ny.values()[i], nz.values()[i]}, q);
        double value;
        if (linear_lobe && n.dot(o_lo) >= 0.0 && n.dot(o_hi) >= 0.0) {
            const double nm = n.dot(m);
            value = params.w_d * nm + params.w_s * (2.0 * v_c.dot(n) * nm - v_c.dot(m));
        } else {
            value = line_integral_intensity(n, geom, params);
        }
        out.intensities.values()[i] = value;
    }
    return out;
}

} // namespace optics
} // namespace paperprint
