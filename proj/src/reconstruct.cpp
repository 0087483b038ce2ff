#include "paperprint/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

#include "paperprint/filter.hpp"

namespace paperprint::reconstruct {

namespace {

/// In-place 2-D DCT-II (inverse = false) or DCT-III (inverse = true), FFTW
/// unnormalized conventions.
void dct2d(std::vector<double>& data, std::size_t rows, std::size_t cols, bool inverse)
{
    const fftw_r2r_kind kind = inverse ? FFTW_REDFT01 : FFTW_REDFT10;
    fftw_plan plan = fftw_plan_r2r_2d(static_cast<int>(rows), static_cast<int>(cols), data.data(), data.data(), kind,
                                      kind, FFTW_ESTIMATE);
    if (!plan)
        throw std::runtime_error("dct2d: FFTW plan creation failed");
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

/// Window-3 plane-fit slope operator with windows truncated at the borders.
/// On a product window the x slope weight of column offset j is
/// (j - mean_j) / (window_rows * sum_j (j - mean_j)^2), and likewise for y.
class PlaneFitGradient
{
public:
    PlaneFitGradient(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    /// (gx, gy) per pixel, in height units per pixel.
    void apply(const std::vector<double>& z, std::vector<double>& gx, std::vector<double>& gy) const
    {
        for (std::size_t r = 0; r < rows_; ++r) {
            const Window wy = window(r, rows_);
            for (std::size_t c = 0; c < cols_; ++c) {
                const Window wx = window(c, cols_);
                double sx = 0.0, sy = 0.0;
                for (std::size_t i = wy.lo; i <= wy.hi; ++i)
                    for (std::size_t j = wx.lo; j <= wx.hi; ++j) {
                        const double v = z[i * cols_ + j];
                        sx += wx.weight(j) * v / wy.count;
                        sy += wy.weight(i) * v / wx.count;
                    }
                gx[r * cols_ + c] = sx;
                gy[r * cols_ + c] = sy;
            }
        }
    }

    /// Adjoint of apply.
    void apply_transpose(const std::vector<double>& gx, const std::vector<double>& gy, std::vector<double>& z) const
    {
        std::fill(z.begin(), z.end(), 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            const Window wy = window(r, rows_);
            for (std::size_t c = 0; c < cols_; ++c) {
                const Window wx = window(c, cols_);
                const double ax = gx[r * cols_ + c] / wy.count;
                const double ay = gy[r * cols_ + c] / wx.count;
                for (std::size_t i = wy.lo; i <= wy.hi; ++i)
                    for (std::size_t j = wx.lo; j <= wx.hi; ++j)
                        z[i * cols_ + j] += wx.weight(j) * ax + wy.weight(i) * ay;
            }
        }
    }

private:
    struct Window
    {
        std::size_t lo, hi;
        double center, sxx, count;
        double weight(std::size_t k) const { return sxx > 0.0 ? (static_cast<double>(k) - center) / sxx : 0.0; }
    };

    static Window window(std::size_t k, std::size_t n)
    {
        Window w;
        w.lo = k > 0 ? k - 1 : 0;
        w.hi = std::min(n - 1, k + 1);
        w.count = static_cast<double>(w.hi - w.lo + 1);
        w.center = 0.5 * static_cast<double>(w.lo + w.hi);
        w.sxx = 0.0;
        for (std::size_t j = w.lo; j <= w.hi; ++j)
            w.sxx += (j - w.center) * (j - w.center);
        return w;
    }

    std::size_t rows_, cols_;
};

/// Adds eps * (D2x^T D2x + D2y^T D2y) z, D2 being interior second differences,
/// a penalty that vanishes on planes.
void add_curvature_penalty(const std::vector<double>& z, std::vector<double>& out, std::size_t R, std::size_t C,
                           double eps)
{
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 1; c + 1 < C; ++c) {
            const std::size_t i = r * C + c;
            const double d = eps * (z[i - 1] - 2.0 * z[i] + z[i + 1]);
            out[i - 1] += d;
            out[i] -= 2.0 * d;
            out[i + 1] += d;
        }
    for (std::size_t r = 1; r + 1 < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = r * C + c;
            const double d = eps * (z[i - C] - 2.0 * z[i] + z[i + C]);
            out[i - C] += d;
            out[i] -= 2.0 * d;
            out[i + C] += d;
        }
}

/// Least squares against the plane-fit slope operator with a small curvature
/// penalty for its near-null modes. The preconditioner is the symbol under
/// mirror extension, sin^2(wx) b(wy)^2 + sin^2(wy) b(wx)^2 with
/// b(w) = (1 + 2 cos w) / 3, plus the penalty symbol.
std::vector<double> solve_plane_fit(const Grid& p, const Grid& q, const IntegrateOptions& opts)
{
    const std::size_t R = p.rows(), C = p.cols(), N = R * C;
    const PlaneFitGradient op(R, C);
    const double eps = opts.damping;
    if (!(eps > 0.0))
        throw std::invalid_argument("integrate_surface: damping must be positive");

    std::vector<double> symbol(N);
    for (std::size_t k = 0; k < R; ++k) {
        const double wy = std::numbers::pi * k / R;
        const double by = (1.0 + 2.0 * std::cos(wy)) / 3.0;
        for (std::size_t l = 0; l < C; ++l) {
            const double wx = std::numbers::pi * l / C;
            const double bx = (1.0 + 2.0 * std::cos(wx)) / 3.0;
            const double ex = 2.0 - 2.0 * std::cos(wx), ey = 2.0 - 2.0 * std::cos(wy);
            const double s = std::pow(std::sin(wx) * by, 2) + std::pow(std::sin(wy) * bx, 2) +
                             eps * (ex * ex + ey * ey);
            symbol[k * C + l] = s > 0.0 ? s : 1.0; // the constant mode is free
        }
    }
    const double dct_norm = 1.0 / (4.0 * R * C);
    auto precondition = [&](const std::vector<double>& in, std::vector<double>& out) {
        out = in;
        dct2d(out, R, C, false);
        out[0] = 0.0; // residuals stay orthogonal to the constant mode
        for (std::size_t i = 1; i < N; ++i)
            out[i] /= symbol[i];
        dct2d(out, R, C, true);
        for (double& v : out)
            v *= dct_norm;
    };
    std::vector<double> gx(N), gy(N);
    auto normal_op = [&](const std::vector<double>& in, std::vector<double>& out) {
        op.apply(in, gx, gy);
        op.apply_transpose(gx, gy, out);
        add_curvature_penalty(in, out, R, C, eps);
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a[i] * b[i];
        return s;
    };

    std::vector<double> b(N), x(N, 0.0), r, zvec, d, Ad(N);
    op.apply_transpose(std::vector<double>(p.values().begin(), p.values().end()),
                       std::vector<double>(q.values().begin(), q.values().end()), b);
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0)
        return x;
    r = b;
    precondition(r, zvec);
    d = zvec;
    double rz = dot(r, zvec);
    for (int it = 0; it < opts.max_iterations; ++it) {
        normal_op(d, Ad);
        const double step = rz / dot(d, Ad);
        for (std::size_t i = 0; i < N; ++i) {
            x[i] += step * d[i];
            r[i] -= step * Ad[i];
        }
        if (std::sqrt(dot(r, r)) <= opts.tolerance * bnorm)
            break;
        precondition(r, zvec);
        const double rz_next = dot(r, zvec);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < N; ++i)
            d[i] = zvec[i] + beta * d[i];
    }
    return x;
}

} // namespace

synth::HeightMap integrate_surface(const NormalField& nf, const IntegrateOptions& opts)
{
    require_same_shape(nf.nx, nf.ny, "integrate_surface");
    require_same_shape(nf.nx, nf.nz, "integrate_surface");
    if (!(opts.max_slope > 0.0))
        throw std::invalid_argument("integrate_surface: max_slope must be positive");
    const std::size_t R = nf.rows();
    const std::size_t C = nf.cols();
    if (R == 0 || C == 0)
        throw std::invalid_argument("integrate_surface: empty field");
    const double h = nf.pixel_pitch;

    Grid p(R, C), q(R, C);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double nz = nf.nz.values()[i];
        double gx = -nf.nx.values()[i];
        double gy = -nf.ny.values()[i];
        const double slope = std::hypot(gx, gy);
        if (slope >= opts.max_slope * nz) {
            const double scale = slope > 0.0 ? opts.max_slope / slope : 0.0;
            gx *= scale;
            gy *= scale;
        } else {
            gx /= nz;
            gy /= nz;
        }
        p.values()[i] = gx * h;
        q.values()[i] = gy * h;
    }

    if (opts.model == GradientModel::plane_fit) {
        synth::HeightMap hm{Grid(R, C, solve_plane_fit(p, q, opts)), h};
        const double m = mean(hm.heights);
        for (double& v : hm.heights.values())
            v -= m;
        return hm;
    }

    // Normal equations of sum (z[r][c+1] - z[r][c] - gx)^2 + (z[r+1][c] - z[r][c] - gy)^2,
    // with gx, gy the gradients averaged over each edge.
    std::vector<double> f(R * C, 0.0);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c + 1 < C; ++c) {
            const double g = 0.5 * (p(r, c) + p(r, c + 1));
            f[r * C + c] -= g;
            f[r * C + c + 1] += g;
        }
    for (std::size_t r = 0; r + 1 < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            const double g = 0.5 * (q(r, c) + q(r + 1, c));
            f[r * C + c] -= g;
            f[(r + 1) * C + c] += g;
        }

    dct2d(f, R, C, false);
    for (std::size_t k = 0; k < R; ++k) {
        const double ey = 2.0 - 2.0 * std::cos(std::numbers::pi * k / R);
        for (std::size_t l = 0; l < C; ++l) {
            const double ex = 2.0 - 2.0 * std::cos(std::numbers::pi * l / C);
            const double eig = ex + ey;
            f[k * C + l] = eig > 0.0 ? f[k * C + l] / eig : 0.0;
        }
    }
    dct2d(f, R, C, true);
    const double norm = 1.0 / (4.0 * R * C);
    synth::HeightMap hm{Grid(R, C), h};
    for (std::size_t i = 0; i < f.size(); ++i)
        hm.heights.values()[i] = f[i] * norm;
    const double m = mean(hm.heights);
    for (double& v : hm.heights.values())
        v -= m;
    return hm;
}

synth::HeightMap detrend(const synth::HeightMap& hm, double trend_sigma)
{
    if (!(trend_sigma > 0.0))
        throw std::invalid_argument("detrend: trend_sigma must be positive");
    return {hm.heights - gaussian_blur(hm.heights, trend_sigma), hm.pixel_pitch};
}

namespace {

void require_dog_args(int levels, double sigma)
{
    if (levels < 2)
        throw std::invalid_argument("dog: need at least 2 levels");
    if (!(sigma > 1.0))
        throw std::invalid_argument("dog: sigma must exceed 1");
}

Grid dog_gaussian(const Grid& map, int n, int levels, double sigma)
{
    if (n == 1)
        return map;
    if (n == levels + 1)
        return Grid(map.rows(), map.cols());
    return gaussian_blur(map, std::pow(sigma, n - 1));
}

} // namespace

SubbandStack dog_decompose(const Grid& map, int levels, double sigma)
{
    require_dog_args(levels, sigma);
    SubbandStack stack;
    stack.dog_base_sigma = sigma;
    Grid current = map;
    for (int n = 1; n <= levels; ++n) {
        Grid next = dog_gaussian(map, n + 1, levels, sigma);
        stack.levels.push_back(current - next);
        current = std::move(next);
    }
    return stack;
}

Grid dog_level(const Grid& map, int n, int levels, double sigma)
{
    require_dog_args(levels, sigma);
    if (n < 1 || n > levels)
        throw std::out_of_range("dog_level: subband index out of range");
    return dog_gaussian(map, n, levels, sigma) - dog_gaussian(map, n + 1, levels, sigma);
}

std::string FeatureSpec::to_string() const
{
    switch (kind) {
    case FeatureKind::norm_map_x: return "norm_map_x";
    case FeatureKind::norm_map_y: return "norm_map_y";
    case FeatureKind::heightmap: return "heightmap";
    case FeatureKind::detrended: return "detrended";
    case FeatureKind::subband: return "subband:" + std::to_string(subband);
    }
    return "unknown";
}

FeatureSpec FeatureSpec::parse(const std::string& text)
{
    if (text == "norm_map_x")
        return {FeatureKind::norm_map_x, 0};
    if (text == "norm_map_y")
        return {FeatureKind::norm_map_y, 0};
    if (text == "heightmap")
        return {FeatureKind::heightmap, 0};
    if (text == "detrended")
        return {FeatureKind::detrended, 0};
    const std::string prefix = "subband:";
    if (text.rfind(prefix, 0) == 0) {
        std::size_t used = 0;
        const std::string digits = text.substr(prefix.size());
        int n = 0;
        try {
            n = std::stoi(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == digits.size() && used > 0 && n >= 1)
            return {FeatureKind::subband, n};
    }
    throw std::invalid_argument("unknown feature kind '" + text + "'");
}

Grid feature_from_heightmap(const synth::HeightMap& hm, const FeatureSpec& spec, int levels, double sigma)
{
    switch (spec.kind) {
    case FeatureKind::norm_map_x: return synth::normals_from_heightmap(hm).nx;
    case FeatureKind::norm_map_y: return synth::normals_from_heightmap(hm).ny;
    case FeatureKind::heightmap: return hm.heights;
    case FeatureKind::detrended: return detrend(hm).heights;
    case FeatureKind::subband:
        if (spec.subband < 1 || spec.subband > levels)
            throw std::out_of_range("feature_from_heightmap: invalid subband index");
        return dog_level(hm.heights, spec.subband, levels, sigma);
    }
    throw std::invalid_argument("feature_from_heightmap: unknown kind");
}

} // namespace paperprint::reconstruct
