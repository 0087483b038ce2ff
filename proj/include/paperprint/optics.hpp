#pragma once

#include <Eigen/Core>

#include "paperprint/grid.hpp"
#include "paperprint/normals.hpp"

namespace paperprint::optics {

/// Flatbed scanner light-transport geometry. The point of interest sits at
/// the origin; the linear light runs parallel to x at (o_x, o_y, o_z).
/// Lengths are in mm.
struct ScannerGeometry
{
    double light_span_near = 5.0;  ///< a: the light covers o_x in [-a, a]
    double light_span_far = 20.0;  ///< b >= a: far end, used only with exact_far_segment
    double light_offset_y = 2.0;   ///< o_y
    double light_offset_z = 2.0;   ///< o_z
    Eigen::Vector3d sensor_dir = default_sensor_dir(); ///< unit v_c
    double light_strength = 1.0;   ///< l
    int quadrature_steps = 1024;   ///< composite Simpson intervals (even)
    bool exact_far_segment = false; ///< integrate over [-a, b] instead of [-a, a]

    /// v_c = (0, sin 10°, cos 10°).
    static Eigen::Vector3d default_sensor_dir();
    /// Sensor direction tilted by v_cx out of the yz-plane, renormalized
    /// while keeping the 10° yz-plane elevation.
    static Eigen::Vector3d tilted_sensor_dir(double v_cx);

    bool scanner_faithful() const { return sensor_dir.x() == 0.0; }
    void validate() const;
};

struct ReflectanceParams
{
    double w_d = 1.0; ///< diffuse weight
    double w_s = 0.0; ///< specular weight
    double k_e = 1.0; ///< gloss exponent

    void validate() const;
};

/// Scan intensities in the scanner frame of one acquisition orientation.
struct ScanImage
{
    Grid intensities;
    int orientation = 0;       ///< degrees: 0, 90, 180 or 270
    double pixel_pitch = 84.7; ///< µm per pixel
};

/// Generalized reflection at the origin for a point light at light_point.
/// The specular lobe with k_e == 1 is the linear (unclamped) term used by the
/// analytic model; for other exponents the base is clamped at zero.
double reflect_point(const Eigen::Vector3d& n, const Eigen::Vector3d& light_point, const Eigen::Vector3d& v_c,
                     const ReflectanceParams& params, double l);

/// Composite Simpson integral of reflect_point over the linear light.
double line_integral_intensity(const Eigen::Vector3d& n, const ScannerGeometry& geom, const ReflectanceParams& params);

/// s = 2 l w o_y ∫ |o|^-3 do_x over [-a, a] for weight w (w_d gives s, w_s gives s').
double light_scale(const ScannerGeometry& geom, double weight);

/// I_0 - I_180 for normal n with the specular cross term retained:
/// s n_y + 2 s' n_z n_y (v_cz + v_cy o_z / o_y). Requires v_cx == 0, k_e == 1.
double predicted_difference(const Eigen::Vector3d& n, const ScannerGeometry& geom, const ReflectanceParams& params);

/// The n_z -> 1 linearization [s + 2 (v_cz + v_cy o_z / o_y) s'] n_y.
double predicted_difference_linear(const Eigen::Vector3d& n, const ScannerGeometry& geom,
                                   const ReflectanceParams& params);

/// Renders the scanner image of a patch placed at `orientation_degrees`.
/// The grid is rotated spatially and each normal is rotated about z by the
/// same angle before evaluation.
ScanImage render_scan(const NormalField& normals, const ScannerGeometry& geom, const ReflectanceParams& params,
                      int orientation_degrees);

/// Rotates a normal about the z axis by a multiple of 90 degrees (exact).
Eigen::Vector3d rotate_normal(const Eigen::Vector3d& n, int quarter_turns);

} // namespace paperprint::optics
