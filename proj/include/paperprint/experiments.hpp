#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "paperprint/corpus.hpp"
#include "paperprint/grid.hpp"
#include "paperprint/reconstruct.hpp"
#include "paperprint/synth.hpp"

namespace paperprint::experiments {

using Cell = std::variant<double, long long, std::string>;

/// Tabular study result: one row per value of the independent variable.
struct StudyReport
{
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::map<std::string, double> summary;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;

    /// Column index by name; throws std::out_of_range.
    std::size_t column(const std::string& name) const;
    /// Numeric value of a cell (integers widen to double); throws on text.
    double number(std::size_t row, const std::string& column) const;

    /// RFC 4180 CSV with a header row. Reals use 17 significant digits so the
    /// bytes are a function of the values alone.
    std::string to_csv() const;
    /// JSON manifest: study name, seed, config and summary.
    std::string manifest_json() const;
    void write(const std::string& csv_path, const std::string& manifest_path) const;
};

// --- specular ablation -------------------------------------------------------

struct SpecularAblationOptions
{
    std::vector<double> w_s_values{0.0, 0.1, 0.2, 0.3};
    std::vector<double> v_cx_values{0.0, 0.1, 0.3};
    int n_fields = 9;
    std::size_t rows = 200;
    std::size_t cols = 200;
    double pixel_pitch = 84.7;
    std::uint64_t seed = 1;
};

/// For every (w_s, v_cx) cell, renders noise-free scans of n_fields synthetic
/// patches and reports the mean correlation of the difference-estimated n_y
/// with the true n_y and with the purely diffuse (w_s = 0, v_cx = 0) estimate.
StudyReport specular_ablation(const SpecularAblationOptions& opts);

// --- feature comparison ------------------------------------------------------

/// Full-patch closed-form and empirical EERs of each feature kind.
StudyReport feature_study(const Corpus& corpus, const PairDesign& pairs,
                          const std::vector<reconstruct::FeatureSpec>& specs);

/// Correlation scores of every pair over the whole feature maps.
void pair_scores(std::span<const Grid> features, const PairDesign& pairs, std::vector<double>& matched,
                 std::vector<double>& unmatched);

// --- block cutting -----------------------------------------------------------

struct BlockCutOptions
{
    int max_cuts = 3;
    double root_fraction = 0.8; ///< center crop of each dimension used as level 0
    std::size_t min_block = 16; ///< no level whose block edge falls below this
};

/// Each cut splits every block into four; each block contributes one
/// correlation score per pair. Per level: score moments, std ratios to the
/// previous level, closed-form EERs, and the Laplace EER predicted from the
/// root-level means and the measured cumulative std ratios. Summary holds
/// the least-squares line of log10 Laplace EER against block edge length.
StudyReport block_cut_study(std::span<const Grid> features, const PairDesign& pairs, const BlockCutOptions& opts = {});

// --- subblock statistics -----------------------------------------------------

/// Correlations of the four equal quadrants (TL, TR, BL, BR).
std::array<double, 4> quadrant_correlations(const Grid& x, const Grid& y);

/// rho - (rho_1 + rho_2 + rho_3 + rho_4) / 4 for the whole block and its quadrants.
double subblock_residual(const Grid& x, const Grid& y);

/// r_n statistics over the pairs at each center-crop block edge.
StudyReport residual_study(std::span<const Grid> features, const std::vector<std::pair<int, int>>& pairs,
                           const std::vector<std::size_t>& block_edges = {50, 100, 200});

enum class Hypothesis { matched, unmatched };

struct CovarianceTestOptions
{
    bool shuffle = false; ///< permute each quadrant column independently (null control)
    std::uint64_t seed = 1;
};

/// Per table (one table per feature, one row per pair), the sample
/// correlation across pairs of quadrant scores rho_i and rho_j for each of the
/// six quadrant pairs. All values are Fisher z-transformed and pooled into a
/// one-sample t test against zero: two-sided for unmatched, greater-than for
/// matched. Summary keys: t, df, p_value, mean_z.
StudyReport subblock_covariance_test(const std::vector<std::vector<std::array<double, 4>>>& tables,
                                     Hypothesis hypothesis, const CovarianceTestOptions& opts = {});

// --- registration perturbation ----------------------------------------------

struct PerturbationOptions
{
    std::vector<double> L_values{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    int trials = 1;
    std::vector<int> candidate_subbands{1, 2, 3, 4};
    std::uint64_t seed = 1;
    std::uint64_t pair_seed = 7;
};

/// Rectifies every canvas scan with its patch corners perturbed by L times a
/// fixed standard normal draw per (trial, acquisition, orientation, coordinate),
/// reruns feature extraction and reports closed-form EERs of the subband that
/// is best (lowest Laplace EER) at the first L value.
StudyReport perturbation_study(const CorpusConfig& cfg, const PerturbationOptions& opts = {});

// --- resolution sweep --------------------------------------------------------

/// Mean and std of sin(theta) of window-3 plane-fit normals after block
/// averaging the source heights to each requested resolution. Every ppi must
/// be an integer divisor of the source resolution.
StudyReport resolution_study(const synth::HeightMap& source, const std::vector<double>& ppi_values);

/// Calibrated fine-pitch source surface for resolution_study.
synth::HeightMap resolution_source(std::size_t size = 2400, double ppi = 4800.0, std::uint64_t seed = 5);

} // namespace paperprint::experiments
