#include "paperprint/corpus.hpp"

#include <cmath>
#include <stdexcept>

#include "paperprint/filter.hpp"
#include "paperprint/rng.hpp"

namespace paperprint::experiments {

std::vector<ScannerProfile> CorpusConfig::default_scanners()
{
    return {
        {1.0, 0.5, 0.090, 0.0},
        {1.2, 0.6, 0.108, 0.0},
        {1.4, 0.7, 0.126, 0.0},
    };
}

void CorpusConfig::validate() const
{
    if (patches < 2 || repeats < 1 || scanners.empty())
        throw std::invalid_argument("CorpusConfig: need >= 2 patches, >= 1 repeat and >= 1 scanner");
    if (rows < 50 || cols < 50)
        throw std::invalid_argument("CorpusConfig: patch must be at least 50x50");
    if (!(pixel_pitch > 0.0) || formation_contrast < 0.0 || warp_height_um < 0.0 || !(warp_scale_px > 0.0))
        throw std::invalid_argument("CorpusConfig: invalid surface parameters");
    for (const auto& s : scanners)
        if (s.blur_along < 0.0 || s.blur_across < 0.0 || s.noise_std < 0.0 || s.noise_gain_contrast < 0.0)
            throw std::invalid_argument("CorpusConfig: invalid scanner profile");
    geometry.validate();
    reflectance.validate();
}

PatchTruth make_patch(const CorpusConfig& cfg, int patch)
{
    auto params = synth::default_fiber_params(cfg.canvas_rows(), cfg.canvas_cols(), cfg.pixel_pitch,
                                              derive_seed(cfg.seed, {0x5A7C, static_cast<std::uint64_t>(patch)}));
    params.formation_contrast = cfg.formation_contrast;
    PatchTruth t;
    t.surface = synth::generate_surface(params, cfg.canvas_rows(), cfg.canvas_cols(), cfg.pixel_pitch);
    const NormalField full = synth::normals_from_heightmap(t.surface);
    t.normals = {crop(full.nx, cfg.margin, cfg.margin, cfg.rows, cfg.cols),
                 crop(full.ny, cfg.margin, cfg.margin, cfg.rows, cfg.cols),
                 crop(full.nz, cfg.margin, cfg.margin, cfg.rows, cfg.cols), cfg.pixel_pitch};
    return t;
}

Acquisition acquire(const CorpusConfig& cfg, const PatchTruth& truth, int patch, int scanner, int repeat)
{
    if (scanner < 0 || scanner >= static_cast<int>(cfg.scanners.size()))
        throw std::out_of_range("acquire: scanner index out of range");
    const ScannerProfile& prof = cfg.scanners[static_cast<std::size_t>(scanner)];
    const auto key = [&](std::uint64_t what, std::uint64_t extra = 0) {
        return derive_seed(cfg.seed, {what, static_cast<std::uint64_t>(patch), static_cast<std::uint64_t>(scanner),
                                      static_cast<std::uint64_t>(repeat), extra});
    };

    synth::HeightMap sheet = truth.surface;
    if (cfg.warp_height_um > 0.0) {
        Grid warp = synth::smooth_random_field(sheet.heights.rows(), sheet.heights.cols(), cfg.warp_scale_px,
                                               key(0x3A2B));
        warp *= cfg.warp_height_um;
        sheet.heights += warp;
    }
    const NormalField normals = synth::normals_from_heightmap(sheet);

    Acquisition acq{patch, scanner, repeat, {}};
    for (int q = 0; q < 4; ++q) {
        const optics::ScanImage clean = optics::render_scan(normals, cfg.geometry, cfg.reflectance, 90 * q);
        const std::size_t R = clean.intensities.rows();
        const std::size_t C = clean.intensities.cols();
        Grid gain(R, C, 1.0);
        if (prof.noise_gain_contrast > 0.0) {
            const double c = prof.noise_gain_contrast;
            const Grid f = synth::smooth_random_field(R, C, 40.0, key(0x6A17, static_cast<std::uint64_t>(q)));
            for (std::size_t i = 0; i < gain.size(); ++i)
                gain.values()[i] = std::exp(c * f.values()[i] - 0.5 * c * c);
        }
        acq.scans[static_cast<std::size_t>(q)] = synth::degrade_scan(
            clean, prof.blur_along, prof.blur_across, prof.noise_std, gain, key(0x401E, static_cast<std::uint64_t>(q)));
    }
    return acq;
}

std::array<optics::ScanImage, 4> crop_patch_scans(const CorpusConfig& cfg, const Acquisition& acq)
{
    std::array<optics::ScanImage, 4> out;
    for (int q = 0; q < 4; ++q) {
        const auto& s = acq.scans[static_cast<std::size_t>(q)];
        const bool swap = q % 2 == 1;
        out[static_cast<std::size_t>(q)] = {
            crop(s.intensities, cfg.margin, cfg.margin, swap ? cfg.cols : cfg.rows, swap ? cfg.rows : cfg.cols),
            s.orientation, s.pixel_pitch};
    }
    return out;
}

Grid AcquisitionFeatures::feature(const reconstruct::FeatureSpec& spec) const
{
    switch (spec.kind) {
    case reconstruct::FeatureKind::norm_map_x: return norm_map_x;
    case reconstruct::FeatureKind::norm_map_y: return norm_map_y;
    default: return reconstruct::feature_from_heightmap(heightmap, spec);
    }
}

AcquisitionFeatures extract_features(std::span<const optics::ScanImage> scans, const NormalField& reference)
{
    if (scans.empty())
        throw std::invalid_argument("extract_features: no scans");
    const normmap::NormMap nm = normmap::estimate_normmap(scans);
    AcquisitionFeatures f;
    f.alpha = normmap::estimate_alpha(nm, normmap::normmap_from_normals(reference));
    normmap::Completion comp = normmap::complete_z(nm, f.alpha);
    comp.normals.pixel_pitch = scans.front().pixel_pitch;
    f.clamped = comp.clamped;
    f.heightmap = reconstruct::integrate_surface(comp.normals);
    f.norm_map_x = nm.nx_scaled;
    f.norm_map_y = nm.ny_scaled;
    return f;
}

Corpus build_corpus(const CorpusConfig& cfg)
{
    cfg.validate();
    Corpus corpus;
    corpus.config = cfg;
    for (int p = 0; p < cfg.patches; ++p) {
        corpus.truths.push_back(make_patch(cfg, p));
        for (int s = 0; s < static_cast<int>(cfg.scanners.size()); ++s)
            for (int r = 0; r < cfg.repeats; ++r) {
                const Acquisition acq = acquire(cfg, corpus.truths.back(), p, s, r);
                const auto scans = crop_patch_scans(cfg, acq);
                corpus.features.push_back(extract_features(scans, corpus.truths.back().normals));
                corpus.ids.push_back({p, s, r});
            }
    }
    return corpus;
}

PairDesign make_pairs(const Corpus& corpus, std::uint64_t seed)
{
    const int per = corpus.config.acquisitions_per_patch();
    const int P = corpus.config.patches;
    PairDesign d;
    Rng rng(derive_seed(seed, {0x9A125}));
    std::uniform_int_distribution<int> other(0, P - 2);
    for (int p = 0; p < P; ++p) {
        for (int i = 0; i < per; ++i)
            for (int j = i + 1; j < per; ++j)
                d.matched.emplace_back(p * per + i, p * per + j);
        for (int i = 0; i < per; ++i)
            for (int j = 0; j < per; ++j) {
                int q = other(rng);
                if (q >= p)
                    ++q;
                d.unmatched.emplace_back(p * per + i, q * per + j);
            }
    }
    return d;
}

} // namespace paperprint::experiments
