#include "paperprint/filter.hpp"

#include <cmath>
#include <stdexcept>

namespace paperprint {

std::size_t reflect_index(long long i, std::size_t n)
{
    const long long period = 2 * static_cast<long long>(n);
    long long m = i % period;
    if (m < 0)
        m += period;
    if (m >= static_cast<long long>(n))
        m = period - 1 - m;
    return static_cast<std::size_t>(m);
}

std::vector<double> gaussian_taps(double sigma)
{
    if (sigma < 0.0 || !std::isfinite(sigma))
        throw std::invalid_argument("gaussian_taps: sigma must be finite and >= 0");
    if (sigma == 0.0)
        return {1.0};
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * (k * k) / (sigma * sigma));
        taps[k + radius] = v;
        sum += v;
    }
    for (double& t : taps)
        t /= sum;
    return taps;
}

Grid convolve_rows(const Grid& g, const std::vector<double>& taps)
{
    if (taps.size() % 2 == 0)
        throw std::invalid_argument("convolve_rows: kernel length must be odd");
    if (taps.size() == 1 && taps[0] == 1.0)
        return g;
    const long long h = static_cast<long long>(taps.size() / 2);
    const std::size_t C = g.cols();
    Grid out(g.rows(), C);
    std::vector<double> padded(C + 2 * h);
    for (std::size_t r = 0; r < g.rows(); ++r) {
        auto src = g.row(r);
        for (long long i = 0; i < static_cast<long long>(padded.size()); ++i)
            padded[i] = src[reflect_index(i - h, C)];
        auto dst = out.row(r);
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            // Symmetric taps: convolution and correlation coincide.
            for (std::size_t k = 0; k < taps.size(); ++k)
                acc += taps[k] * padded[c + k];
            dst[c] = acc;
        }
    }
    return out;
}

Grid convolve_cols(const Grid& g, const std::vector<double>& taps)
{
    if (taps.size() % 2 == 0)
        throw std::invalid_argument("convolve_cols: kernel length must be odd");
    if (taps.size() == 1 && taps[0] == 1.0)
        return g;
    const long long h = static_cast<long long>(taps.size() / 2);
    const std::size_t R = g.rows();
    const std::size_t C = g.cols();
    Grid out(R, C);
    std::vector<std::size_t> src_rows(R + 2 * h);
    for (long long i = 0; i < static_cast<long long>(src_rows.size()); ++i)
        src_rows[i] = reflect_index(i - h, R);
    for (std::size_t r = 0; r < R; ++r) {
        auto dst = out.row(r);
        for (std::size_t k = 0; k < taps.size(); ++k) {
            const double w = taps[k];
            auto src = g.row(src_rows[r + k]);
            for (std::size_t c = 0; c < C; ++c)
                dst[c] += w * src[c];
        }
    }
    return out;
}

Grid gaussian_blur(const Grid& g, double sigma_x, double sigma_y)
{
    return convolve_cols(convolve_rows(g, gaussian_taps(sigma_x)), gaussian_taps(sigma_y));
}

double sample_bilinear(const Grid& g, double x, double y)
{
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double tx = x - fx;
    const double ty = y - fy;
    const auto x0 = static_cast<long long>(fx);
    const auto y0 = static_cast<long long>(fy);
    const std::size_t c0 = reflect_index(x0, g.cols());
    const std::size_t c1 = reflect_index(x0 + 1, g.cols());
    const std::size_t r0 = reflect_index(y0, g.rows());
    const std::size_t r1 = reflect_index(y0 + 1, g.rows());
    const double top = (1.0 - tx) * g(r0, c0) + tx * g(r0, c1);
    const double bottom = (1.0 - tx) * g(r1, c0) + tx * g(r1, c1);
    return (1.0 - ty) * top + ty * bottom;
}

Grid block_average(const Grid& g, std::size_t factor)
{
    if (factor == 0)
        throw std::invalid_argument("block_average: factor must be positive");
    const std::size_t R = g.rows() / factor;
    const std::size_t C = g.cols() / factor;
    Grid out(R, C);
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < factor; ++i)
                for (std::size_t j = 0; j < factor; ++j)
                    acc += g(r * factor + i, c * factor + j);
            out(r, c) = acc * inv;
        }
    return out;
}

} // namespace paperprint
