#include "paperprint/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "paperprint/filter.hpp"
#include "paperprint/rng.hpp"

namespace paperprint::synth {

namespace {

/// Random Fourier modes of a stationary field with Gaussian covariance.
struct FourierModes
{
    std::vector<double> kx, ky, phase;
    double amplitude = 0.0;

    FourierModes(double scale, int modes, std::uint64_t seed)
    {
        Rng rng(seed);
        std::normal_distribution<double> freq(0.0, 1.0 / scale);
        std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
        for (int i = 0; i < modes; ++i) {
            kx.push_back(freq(rng));
            ky.push_back(freq(rng));
            phase.push_back(ph(rng));
        }
        amplitude = std::sqrt(2.0 / modes);
    }

    double operator()(double x, double y) const
    {
        double acc = 0.0;
        for (std::size_t i = 0; i < kx.size(); ++i)
            acc += std::cos(kx[i] * x + ky[i] * y + phase[i]);
        return amplitude * acc;
    }
};

} // namespace

void FiberModelParams::validate() const
{
    if (fiber_count < 0)
        throw std::invalid_argument("FiberModelParams: fiber_count must be >= 0");
    if (!(fiber_width_um > 0.0) || !(fiber_length_um > 0.0) || !(ridge_height_um > 0.0))
        throw std::invalid_argument("FiberModelParams: fiber dimensions must be positive");
    if (noise_floor_um < 0.0 || formation_contrast < 0.0 || !(formation_scale_um > 0.0))
        throw std::invalid_argument("FiberModelParams: invalid noise or formation parameters");
}

FiberModelParams default_fiber_params(std::size_t rows, std::size_t cols, double pitch_um, std::uint64_t seed)
{
    FiberModelParams p;
    const double area_mm2 = rows * cols * pitch_um * pitch_um * 1e-6;
    p.fiber_count = static_cast<int>(std::lround(kDefaultFiberDensity * area_mm2));
    p.seed = seed;
    return p;
}

HeightMap generate_surface(const FiberModelParams& params, std::size_t rows, std::size_t cols, double pitch_um)
{
    params.validate();
    if (rows < 32 || cols < 32)
        throw std::invalid_argument("generate_surface: grid must be at least 32x32");
    if (!(pitch_um > 0.0))
        throw std::invalid_argument("generate_surface: pitch must be positive");

    HeightMap hm{Grid(rows, cols), pitch_um};
    const double width = cols * pitch_um;
    const double height = rows * pitch_um;
    const double margin = params.fiber_length_um;
    const double area = width * height;
    const double extended = (width + 2 * margin) * (height + 2 * margin);
    const auto count = static_cast<long long>(std::llround(params.fiber_count * extended / area));

    Rng rng(derive_seed(params.seed, {1}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const FourierModes formation(params.formation_scale_um, 64, derive_seed(params.seed, {2}));
    const double pixel_var = pitch_um * pitch_um / 12.0;

    for (long long f = 0; f < count; ++f) {
        const double cx = -margin + unit(rng) * (width + 2 * margin);
        const double cy = -margin + unit(rng) * (height + 2 * margin);
        const double theta = unit(rng) * std::numbers::pi;
        const double length = params.fiber_length_um * (0.6 + 0.8 * unit(rng));
        const double fiber_w = params.fiber_width_um * (0.7 + 0.6 * unit(rng));
        double h = params.ridge_height_um * (0.5 + unit(rng));
        if (params.formation_contrast > 0.0) {
            const double g = formation(cx, cy);
            const double c = params.formation_contrast;
            h *= std::exp(c * g - 0.5 * c * c);
        }

        // Pixel-area averaging widens the bump and preserves its volume.
        const double su0 = length / 4.0;
        const double sv0 = fiber_w / 2.0;
        const double su = std::sqrt(su0 * su0 + pixel_var);
        const double sv = std::sqrt(sv0 * sv0 + pixel_var);
        h *= (su0 * sv0) / (su * sv);

        const double ct = std::cos(theta);
        const double st = std::sin(theta);
        const double ex = 4.0 * std::sqrt(su * su * ct * ct + sv * sv * st * st);
        const double ey = 4.0 * std::sqrt(su * su * st * st + sv * sv * ct * ct);
        const long long c0 = std::max(0LL, static_cast<long long>(std::floor((cx - ex) / pitch_um - 0.5)));
        const long long c1 = std::min(static_cast<long long>(cols) - 1,
                                      static_cast<long long>(std::ceil((cx + ex) / pitch_um - 0.5)));
        const long long r0 = std::max(0LL, static_cast<long long>(std::floor((cy - ey) / pitch_um - 0.5)));
        const long long r1 = std::min(static_cast<long long>(rows) - 1,
                                      static_cast<long long>(std::ceil((cy + ey) / pitch_um - 0.5)));
        const double inv_u = 1.0 / (2.0 * su * su);
        const double inv_v = 1.0 / (2.0 * sv * sv);
        const double cut_v = 16.0 * sv * sv;
        const double cut = std::sqrt(cut_v);
        for (long long r = r0; r <= r1; ++r) {
            const double dy = (r + 0.5) * pitch_um - cy;
            auto row = hm.heights.row(static_cast<std::size_t>(r));
            // Columns where |v| <= 4 sv, from v = -st dx + ct dy.
            long long lo = c0, hi = c1;
            if (std::abs(st) > 1e-12) {
                const double a = (ct * dy - cut) / st;
                const double b = (ct * dy + cut) / st;
                const double x0 = cx + std::min(a, b);
                const double x1 = cx + std::max(a, b);
                lo = std::max(c0, static_cast<long long>(std::floor(x0 / pitch_um - 0.5)));
                hi = std::min(c1, static_cast<long long>(std::ceil(x1 / pitch_um - 0.5)));
            }
            for (long long c = lo; c <= hi; ++c) {
                const double dx = (c + 0.5) * pitch_um - cx;
                const double v = -st * dx + ct * dy;
                if (v * v > cut_v)
                    continue;
                const double u = ct * dx + st * dy;
                row[static_cast<std::size_t>(c)] += h * std::exp(-u * u * inv_u - v * v * inv_v);
            }
        }
    }

    if (params.noise_floor_um > 0.0) {
        // Band-limited at the fiber-width scale; below one pixel the pixel
        // average of the fine noise is close to white with reduced variance.
        const double corr_px = 0.5 * params.fiber_width_um / pitch_um;
        Grid noise = white_noise(rows, cols, 1.0, derive_seed(params.seed, {3}));
        double target = params.noise_floor_um;
        if (corr_px >= 0.5) {
            noise = gaussian_blur(noise, corr_px);
            const double s = stddev(noise);
            if (s > 0.0)
                noise *= 1.0 / s;
        } else {
            target *= std::min(1.0, 2.0 * std::sqrt(std::numbers::pi) * corr_px);
        }
        noise *= target;
        hm.heights += noise;
    }
    return hm;
}

NormalField normals_from_heightmap(const HeightMap& hm, int window)
{
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("normals_from_heightmap: window must be odd and >= 3");
    const Grid& z = hm.heights;
    const long long R = static_cast<long long>(z.rows());
    const long long C = static_cast<long long>(z.cols());
    const long long half = window / 2;
    const double p = hm.pixel_pitch;

    NormalField nf{Grid(z.rows(), z.cols()), Grid(z.rows(), z.cols()), Grid(z.rows(), z.cols()), p};
    for (long long r = 0; r < R; ++r) {
        for (long long c = 0; c < C; ++c) {
            // Fit z = a + b x + c y with coordinates centered on the pixel.
            double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, sz = 0, sxz = 0, syz = 0;
            for (long long i = std::max(0LL, r - half); i <= std::min(R - 1, r + half); ++i) {
                const double y = (i - r) * p;
                for (long long j = std::max(0LL, c - half); j <= std::min(C - 1, c + half); ++j) {
                    const double x = (j - c) * p;
                    const double v = z(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                    n += 1;
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                    sz += v;
                    sxz += x * v;
                    syz += y * v;
                }
            }
            Eigen::Matrix3d A;
            A << n, sx, sy, sx, sxx, sxy, sy, sxy, syy;
            const Eigen::Vector3d rhs(sz, sxz, syz);
            const Eigen::Vector3d coef = A.ldlt().solve(rhs);
            double gx = coef(1);
            double gy = coef(2);
            if (!std::isfinite(gx) || !std::isfinite(gy))
                gx = gy = 0.0;
            const Eigen::Vector3d normal = Eigen::Vector3d(-gx, -gy, 1.0).normalized();
            nf.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), normal);
        }
    }
    return nf;
}

Grid sin_theta(const NormalField& nf)
{
    Grid out(nf.rows(), nf.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = nf.nx.values()[i];
        const double y = nf.ny.values()[i];
        out.values()[i] = std::sqrt(x * x + y * y);
    }
    return out;
}

optics::ScanImage degrade_scan(const optics::ScanImage& img, double sigma_x, double sigma_y, double noise_std,
                               std::uint64_t seed)
{
    return degrade_scan(img, sigma_x, sigma_y, noise_std, Grid(img.intensities.rows(), img.intensities.cols(), 1.0),
                        seed);
}

optics::ScanImage degrade_scan(const optics::ScanImage& img, double sigma_x, double sigma_y, double noise_std,
                               const Grid& noise_gain, std::uint64_t seed)
{
    if (sigma_x < 0.0 || sigma_y < 0.0 || noise_std < 0.0)
        throw std::invalid_argument("degrade_scan: sigmas and noise must be >= 0");
    require_same_shape(img.intensities, noise_gain, "degrade_scan noise gain");
    optics::ScanImage out = img;
    out.intensities = gaussian_blur(img.intensities, sigma_x, sigma_y);
    if (noise_std > 0.0) {
        const Grid noise = white_noise(img.intensities.rows(), img.intensities.cols(), noise_std, seed);
        for (std::size_t i = 0; i < noise.size(); ++i)
            out.intensities.values()[i] += noise_gain.values()[i] * noise.values()[i];
    }
    return out;
}

Grid smooth_random_field(std::size_t rows, std::size_t cols, double scale_px, std::uint64_t seed, int modes)
{
    if (!(scale_px > 0.0))
        throw std::invalid_argument("smooth_random_field: scale must be positive");
    const FourierModes field(scale_px, modes, seed);
    Grid out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out(r, c) = field(static_cast<double>(c), static_cast<double>(r));
    return out;
}

} // namespace paperprint::synth
