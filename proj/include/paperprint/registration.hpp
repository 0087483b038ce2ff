#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "paperprint/grid.hpp"

namespace paperprint::registration {

using Point = Eigen::Vector2d; ///< (x = col, y = row) in pixels

struct Segment
{
    Point a;
    Point b;
};

struct Circle
{
    Point center;
    double radius = 0.0;
};

struct Rect
{
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// Registration target in layout pixel coordinates: two horizontal and two
/// vertical guide lines crossing at the patch corners, a dark disk centered
/// on each crossing, and an opaque QR texture block.
struct FiducialLayout
{
    std::array<Point, 4> patch_square; ///< TL, TR, BR, BL
    std::vector<Segment> guide_lines;
    std::vector<Circle> circles;
    Rect qr_region;
    double line_width = 3.0;

    /// Patch of patch_px square centered in a canvas of the given size; guide
    /// lines overshoot the corners by overshoot px on both sides.
    static FiducialLayout standard(double canvas_px, double patch_px, double circle_radius = 6.0,
                                   double overshoot = 30.0);
    void validate() const;
};

/// Four ordered corners: TL, TR, BR, BL in image coordinates.
struct CornerSet
{
    std::array<Point, 4> corners;

    bool convex() const;
};

struct RenderOptions
{
    std::size_t rows = 300;
    std::size_t cols = 300;
    int supersample = 4;
    double blur_sigma = 0.0;
    double noise_std = 0.0;
    std::uint64_t seed = 1;
};

/// Anti-aliased render of the layout warped by transform (layout -> image,
/// homogeneous 3x3), then Gaussian blur and noise. Paper is 1, ink is 0,
/// the patch carries a smooth texture in [0.6, 0.95].
Grid render_fiducial(const FiducialLayout& layout, const Eigen::Matrix3d& transform, const RenderOptions& opts);

class NoFiducial : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class AmbiguousFiducial : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct DetectOptions
{
    double angle_step_deg = 1.0;
    double rho_step = 1.0;
    double peak_fraction = 0.6;
    double circle_radius = 6.0;
    double refine_window = 1.5; ///< centroid window as a multiple of circle_radius
};

/// Hough line detection, total-least-squares line refinement, pairwise
/// intersections, then disk-centroid refinement of each intersection.
CornerSet detect_fiducial(const Grid& img, const DetectOptions& opts = {});

/// Homography mapping src[i] to dst[i].
Eigen::Matrix3d homography(const std::array<Point, 4>& src, const std::array<Point, 4>& dst);

/// Projective warp that maps the corners to the output pixel centers
/// (0, 0), (cols-1, 0), (cols-1, rows-1), (0, rows-1); bilinear resampling.
Grid rectify(const Grid& img, const CornerSet& corners, std::size_t out_rows, std::size_t out_cols);

/// Adds i.i.d. N(0, L^2) offsets to all eight coordinates. The offsets are
/// L times a standard normal draw fixed by the seed.
CornerSet perturb_corners(const CornerSet& corners, double L, std::uint64_t seed);

/// Corners of the axis-aligned block [col0, col0 + cols) x [row0, row0 + rows) at pixel centers.
CornerSet block_corners(double col0, double row0, std::size_t rows, std::size_t cols);

} // namespace paperprint::registration
