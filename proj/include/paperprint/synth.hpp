#pragma once

#include <cstdint>

#include "paperprint/grid.hpp"
#include "paperprint/normals.hpp"
#include "paperprint/optics.hpp"

namespace paperprint::synth {

struct HeightMap
{
    Grid heights;              ///< µm
    double pixel_pitch = 84.7; ///< µm per pixel
};

/// Fiber-network surface model. Counts refer to fibers centered on the patch
/// area; the generator adds margin fibers at the same density.
struct FiberModelParams
{
    int fiber_count = 0;
    double fiber_width_um = 25.0;
    double fiber_length_um = 1000.0;
    double ridge_height_um = 16.5;
    double noise_floor_um = 0.3;
    /// Log-amplitude contrast of the large-scale formation (floc) field that
    /// modulates local ridge heights; 0 disables it.
    double formation_contrast = 0.0;
    double formation_scale_um = 2000.0;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Reference fiber density (fibers per mm^2) of the calibrated model.
inline constexpr double kDefaultFiberDensity = 100.0;

/// Calibrated parameters for a rows x cols patch at the given pitch.
FiberModelParams default_fiber_params(std::size_t rows, std::size_t cols, double pitch_um, std::uint64_t seed);

/// Heights sampled as pixel averages of randomly placed elongated Gaussian
/// ridges plus band-limited noise.
HeightMap generate_surface(const FiberModelParams& params, std::size_t rows, std::size_t cols, double pitch_um);

/// Per-pixel least-squares plane fit over a window x window neighborhood
/// (truncated at the borders), in physical units.
NormalField normals_from_heightmap(const HeightMap& hm, int window = 3);

/// sin(theta) of every normal, theta being the angle to the z axis.
Grid sin_theta(const NormalField& nf);

/// Separable Gaussian blur (reflect padding) followed by i.i.d. Gaussian noise.
optics::ScanImage degrade_scan(const optics::ScanImage& img, double sigma_x, double sigma_y, double noise_std,
                               std::uint64_t seed);

/// As degrade_scan, with the per-pixel noise standard deviation multiplied by
/// `noise_gain` (same shape as the image).
optics::ScanImage degrade_scan(const optics::ScanImage& img, double sigma_x, double sigma_y, double noise_std,
                               const Grid& noise_gain, std::uint64_t seed);

/// Smooth zero-mean, unit-variance random field with Gaussian correlation of
/// length `scale_px`, built from random Fourier modes.
Grid smooth_random_field(std::size_t rows, std::size_t cols, double scale_px, std::uint64_t seed, int modes = 64);

} // namespace paperprint::synth
