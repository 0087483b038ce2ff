#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "paperprint/grid.hpp"
#include "paperprint/normals.hpp"
#include "paperprint/normmap.hpp"
#include "paperprint/optics.hpp"
#include "paperprint/reconstruct.hpp"
#include "paperprint/synth.hpp"

namespace paperprint::experiments {

/// Degradation of one simulated scanner, in its own frame: x runs along the
/// linear light, y along the scan direction.
struct ScannerProfile
{
    double blur_along = 1.0;   ///< px
    double blur_across = 0.5;  ///< px
    double noise_std = 0.01;   ///< intensity units
    double noise_gain_contrast = 0.0; ///< log-amplitude of a smooth per-scan noise gain field
};

/// Synthetic acquisition campaign: every patch is scanned repeats times by
/// every scanner, each acquisition being a set of four orientation scans.
struct CorpusConfig
{
    int patches = 9;
    int repeats = 3;
    std::size_t rows = 200;
    std::size_t cols = 200;
    std::size_t margin = 16; ///< canvas border around the patch (px)
    double pixel_pitch = 84.7;
    double formation_contrast = 0.3;
    optics::ScannerGeometry geometry;
    optics::ReflectanceParams reflectance{1.0, 0.2, 1.0};
    std::vector<ScannerProfile> scanners = default_scanners();
    double warp_height_um = 0.0; ///< std of a smooth per-acquisition sheet warp
    double warp_scale_px = 60.0;
    std::uint64_t seed = 2024;

    static std::vector<ScannerProfile> default_scanners();
    std::size_t canvas_rows() const { return rows + 2 * margin; }
    std::size_t canvas_cols() const { return cols + 2 * margin; }
    int acquisitions_per_patch() const { return static_cast<int>(scanners.size()) * repeats; }
    void validate() const;
};

struct PatchTruth
{
    synth::HeightMap surface; ///< canvas-sized
    NormalField normals;      ///< patch-sized, plane-fit on the canvas then cropped
};

/// Four degraded scans of the full canvas, indexed by quarter turns.
struct Acquisition
{
    int patch = 0;
    int scanner = 0;
    int repeat = 0;
    std::array<optics::ScanImage, 4> scans;
};

PatchTruth make_patch(const CorpusConfig& cfg, int patch);

Acquisition acquire(const CorpusConfig& cfg, const PatchTruth& truth, int patch, int scanner, int repeat);

/// The patch region of each canvas scan (an exact crop in every orientation).
std::array<optics::ScanImage, 4> crop_patch_scans(const CorpusConfig& cfg, const Acquisition& acq);

/// Features of one acquisition after normmap estimation, scale recovery,
/// z-completion and integration.
struct AcquisitionFeatures
{
    Grid norm_map_x;
    Grid norm_map_y;
    synth::HeightMap heightmap;
    double alpha = 0.0;
    std::size_t clamped = 0;

    /// Feature map for kinds other than norm maps is derived from heightmap.
    Grid feature(const reconstruct::FeatureSpec& spec) const;
};

/// Runs the scanner-side chain on four patch-frame scans. Scale recovery
/// uses the component deviations of the reference normals.
AcquisitionFeatures extract_features(std::span<const optics::ScanImage> scans, const NormalField& reference);

/// A fully processed corpus: truth per patch and features per acquisition,
/// acquisitions ordered by (patch, scanner, repeat).
struct Corpus
{
    CorpusConfig config;
    std::vector<PatchTruth> truths;
    std::vector<AcquisitionFeatures> features;
    std::vector<std::array<int, 3>> ids; ///< (patch, scanner, repeat)
};

Corpus build_corpus(const CorpusConfig& cfg);

/// Index pairs into Corpus::features: all within-patch pairs, and for each
/// patch per x per acquisition pairs, each against a randomly drawn other patch.
struct PairDesign
{
    std::vector<std::pair<int, int>> matched;
    std::vector<std::pair<int, int>> unmatched;
};

PairDesign make_pairs(const Corpus& corpus, std::uint64_t seed);

} // namespace paperprint::experiments
