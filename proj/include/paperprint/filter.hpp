#pragma once

#include <cstddef>
#include <vector>

#include "paperprint/grid.hpp"

namespace paperprint {

/// Half-sample symmetric boundary extension (d c b a | a b c d | d c b a),
/// valid for any offset, including offsets beyond one grid length.
std::size_t reflect_index(long long i, std::size_t n);

/// Sampled, unit-sum Gaussian taps truncated at ceil(4 sigma). sigma == 0
/// gives the single tap {1}.
std::vector<double> gaussian_taps(double sigma);

/// 1-D convolution of every row (axis 1) or every column (axis 0) with a
/// symmetric odd-length kernel, reflect padding.
Grid convolve_rows(const Grid& g, const std::vector<double>& taps);
Grid convolve_cols(const Grid& g, const std::vector<double>& taps);

/// Separable Gaussian blur with independent x (column) and y (row) widths.
Grid gaussian_blur(const Grid& g, double sigma_x, double sigma_y);
inline Grid gaussian_blur(const Grid& g, double sigma) { return gaussian_blur(g, sigma, sigma); }

/// Bilinear sample at continuous (x = col, y = row); reflect extension outside.
double sample_bilinear(const Grid& g, double x, double y);

/// Average non-overlapping factor x factor blocks; trailing partial blocks are dropped.
Grid block_average(const Grid& g, std::size_t factor);

} // namespace paperprint
