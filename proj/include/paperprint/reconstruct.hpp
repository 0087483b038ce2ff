#pragma once

#include <string>
#include <vector>

#include "paperprint/grid.hpp"
#include "paperprint/normals.hpp"
#include "paperprint/synth.hpp"

namespace paperprint::reconstruct {

/// Discrete gradient that the integrated surface must reproduce.
enum class GradientModel {
    /// Forward differences matched to the mean of the two adjacent pixel
    /// gradients. Solved exactly by one DCT; mildly low-pass.
    edge_average,
    /// The window-3 plane-fit slope of normals_from_heightmap. Inverts that
    /// estimator up to a small damping; solved by DCT-preconditioned CG.
    plane_fit,
};

struct IntegrateOptions
{
    /// Cap on |gradient| for pixels with vanishing n_z (clamped completions).
    double max_slope = 5.0;
    GradientModel model = GradientModel::edge_average;
    double damping = 1e-6;     ///< plane_fit only: weight of the curvature penalty
    int max_iterations = 2000; ///< plane_fit only
    double tolerance = 1e-10;  ///< plane_fit only: relative residual norm
};

/// Least-squares integration of the gradient field (-n_x/n_z, -n_y/n_z) with
/// Neumann boundaries. Heights share the units of the pixel pitch; the
/// output is mean-centered.
synth::HeightMap integrate_surface(const NormalField& nf, const IntegrateOptions& opts = {});

inline constexpr double kDefaultTrendSigma = 25.0;
inline constexpr double kDefaultDogSigma = 1.6;
inline constexpr int kDefaultDogLevels = 10;

/// hm minus its Gaussian blur of width trend_sigma (px).
synth::HeightMap detrend(const synth::HeightMap& hm, double trend_sigma = kDefaultTrendSigma);

/// levels[0] is L_1, the highest spatial-frequency subband.
struct SubbandStack
{
    std::vector<Grid> levels;
    double dog_base_sigma = kDefaultDogSigma;

    int count() const { return static_cast<int>(levels.size()); }
};

/// L_n = G_n - G_{n+1}, G_1 the input, G_n (n >= 2) the input blurred with
/// sigma^(n-1), G_{N+1} = 0.
SubbandStack dog_decompose(const Grid& map, int levels = kDefaultDogLevels, double sigma = kDefaultDogSigma);

/// The single level L_n (1-based) of dog_decompose without computing the rest.
Grid dog_level(const Grid& map, int n, int levels = kDefaultDogLevels, double sigma = kDefaultDogSigma);

enum class FeatureKind { norm_map_x, norm_map_y, heightmap, detrended, subband };

struct FeatureSpec
{
    FeatureKind kind = FeatureKind::subband;
    int subband = 2; ///< 1-based, only for FeatureKind::subband

    std::string to_string() const;
    /// Accepts norm_map_x, norm_map_y, heightmap, detrended, subband:<n>.
    static FeatureSpec parse(const std::string& text);
    bool operator==(const FeatureSpec&) const = default;
};

/// Feature map of a heightmap. Norm-map kinds use the window-3 plane-fit
/// normals; subbands decompose the heightmap itself.
Grid feature_from_heightmap(const synth::HeightMap& hm, const FeatureSpec& spec, int levels = kDefaultDogLevels,
                            double sigma = kDefaultDogSigma);

} // namespace paperprint::reconstruct
