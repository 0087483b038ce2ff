#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "paperprint/grid.hpp"

namespace paperprint::match {

/// Pearson correlation of two same-shape grids. Throws if either is constant.
double correlation(const Grid& a, const Grid& b);
double correlation(std::span<const double> a, std::span<const double> b);

/// Maximum-likelihood summary of the score distributions. Index 0 is the
/// unmatched hypothesis, index 1 the matched one.
struct MatchStats
{
    double mu0 = 0.0;
    double sigma0 = 1.0;
    double mu1 = 0.0;
    double sigma1 = 1.0;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    double lambda0 = 0.0; ///< Laplace rate sqrt(2) / sigma0
    double lambda1 = 0.0; ///< Laplace rate sqrt(2) / sigma1
};

/// Means and 1/n standard deviations of each list (at least 2 scores each).
MatchStats hypothesis_stats(std::span<const double> matched, std::span<const double> unmatched);

/// An error rate carried both linearly (may underflow to 0) and as log10.
struct ErrorRate
{
    double value = 0.5;
    double log10 = -0.30102999566398120;
};

/// log10 of the standard normal CDF, accurate far into the lower tail.
double log10_normal_cdf(double x);

/// Phi((mu0 - mu1) / (sigma0 + sigma1)); requires mu0 <= mu1.
ErrorRate eer_gaussian(const MatchStats& s);

/// 1/2 exp[sqrt(2) (mu0 - mu1) / (sigma0 + sigma1)]; requires mu0 <= mu1.
ErrorRate eer_laplace(const MatchStats& s);

/// The same Laplace EER written with the rates: 1/2 exp[(mu0 - mu1) l0 l1 / (l0 + l1)].
ErrorRate eer_laplace_rates(double mu0, double mu1, double lambda0, double lambda1);

/// Threshold sweep over the pooled scores (accept when score >= t); the
/// crossing of false-accept and false-reject rates is linearly interpolated.
double empirical_eer(std::span<const double> matched, std::span<const double> unmatched);

struct EERReport
{
    MatchStats stats;
    ErrorRate eer_gaussian;
    ErrorRate eer_laplace;
    double eer_empirical = 0.0;
    std::string feature_kind;
    std::optional<int> subband_index;
};

EERReport evaluate(std::span<const double> matched, std::span<const double> unmatched, std::string feature_kind = {},
                   std::optional<int> subband_index = std::nullopt);

} // namespace paperprint::match
