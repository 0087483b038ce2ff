#include "paperprint/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "paperprint/filter.hpp"
#include "paperprint/rng.hpp"

namespace paperprint::registration {

FiducialLayout FiducialLayout::standard(double canvas_px, double patch_px, double circle_radius, double overshoot)
{
    if (!(patch_px > 0.0) || !(circle_radius > 0.0) || overshoot <= circle_radius)
        throw std::invalid_argument("FiducialLayout: invalid dimensions");
    const double c0 = 0.5 * (canvas_px - patch_px);
    const double c1 = c0 + patch_px;
    const double q = std::min(40.0, c0 - overshoot - 10.0);
    if (q < 10.0)
        throw std::invalid_argument("FiducialLayout: canvas too small for the target");
    FiducialLayout l;
    l.patch_square = {Point(c0, c0), Point(c1, c0), Point(c1, c1), Point(c0, c1)};
    l.guide_lines = {
        {Point(c0 - overshoot, c0), Point(c1 + overshoot, c0)},
        {Point(c0 - overshoot, c1), Point(c1 + overshoot, c1)},
        {Point(c0, c0 - overshoot), Point(c0, c1 + overshoot)},
        {Point(c1, c0 - overshoot), Point(c1, c1 + overshoot)},
    };
    for (const Point& p : l.patch_square)
        l.circles.push_back({p, circle_radius});
    l.qr_region = {canvas_px - 5.0 - q, 5.0, canvas_px - 5.0, 5.0 + q};
    l.validate();
    return l;
}

namespace {

double distance_to_segment(const Point& p, const Segment& s)
{
    const Point d = s.b - s.a;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (p - (s.a + t * d)).norm();
}

/// Number of segments passing within tol of p.
int lines_through(const Point& p, const std::vector<Segment>& lines, double tol)
{
    int hits = 0;
    for (const auto& s : lines)
        if (distance_to_segment(p, s) <= tol)
            ++hits;
    return hits;
}

} // namespace

void FiducialLayout::validate() const
{
    if (!(line_width > 0.0))
        throw std::invalid_argument("FiducialLayout: line width must be positive");
    for (const auto& c : circles)
        if (lines_through(c.center, guide_lines, 0.5) < 2)
            throw std::invalid_argument("FiducialLayout: circle center is not a guide-line intersection");
    for (const auto& p : patch_square)
        if (lines_through(p, guide_lines, 0.5) < 2)
            throw std::invalid_argument("FiducialLayout: patch corner is not a guide-line intersection");
}

bool CornerSet::convex() const
{
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
        const Point& a = corners[i];
        const Point& b = corners[(i + 1) % 4];
        const Point& c = corners[(i + 2) % 4];
        const double cross = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
        if (!std::isfinite(cross) || cross == 0.0)
            return false;
        const int s = cross > 0.0 ? 1 : -1;
        if (sign != 0 && s != sign)
            return false;
        sign = s;
    }
    return true;
}

namespace {

/// Smooth patch texture in [0.6, 0.95], fixed per process.
double patch_texture(const Point& p)
{
    static const auto modes = [] {
        std::vector<std::array<double, 3>> m;
        Rng rng(0x7E47u);
        std::normal_distribution<double> freq(0.0, 0.15);
        std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
        for (int i = 0; i < 24; ++i)
            m.push_back({freq(rng), freq(rng), ph(rng)});
        return m;
    }();
    double acc = 0.0;
    for (const auto& m : modes)
        acc += std::cos(m[0] * p.x() + m[1] * p.y() + m[2]);
    return 0.775 + 0.175 * std::tanh(acc / std::sqrt(static_cast<double>(modes.size())));
}

double qr_module(long long i, long long j)
{
    const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL ^
                                       static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4FULL);
    return (h >> 11) & 1 ? 0.0 : 1.0;
}

double layout_intensity(const FiducialLayout& l, const Point& p)
{
    for (const auto& c : l.circles)
        if ((p - c.center).squaredNorm() <= c.radius * c.radius)
            return 0.0;
    for (const auto& s : l.guide_lines)
        if (distance_to_segment(p, s) <= 0.5 * l.line_width)
            return 0.0;
    const auto& q = l.qr_region;
    if (p.x() >= q.x0 && p.x() < q.x1 && p.y() >= q.y0 && p.y() < q.y1)
        return qr_module(static_cast<long long>(std::floor((p.x() - q.x0) / 5.0)),
                         static_cast<long long>(std::floor((p.y() - q.y0) / 5.0)));
    const Point& tl = l.patch_square[0];
    const Point& br = l.patch_square[2];
    if (p.x() > tl.x() && p.x() < br.x() && p.y() > tl.y() && p.y() < br.y())
        return patch_texture(p);
    return 1.0;
}

} // namespace

Grid render_fiducial(const FiducialLayout& layout, const Eigen::Matrix3d& transform, const RenderOptions& opts)
{
    if (opts.supersample < 1 || opts.rows == 0 || opts.cols == 0)
        throw std::invalid_argument("render_fiducial: invalid render options");
    const double det = transform.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-12 * std::pow(transform.norm(), 3))
        throw std::invalid_argument("render_fiducial: degenerate transform");
    const Eigen::Matrix3d inv = transform.inverse();
    const int s = opts.supersample;
    Grid out(opts.rows, opts.cols);
    for (std::size_t r = 0; r < opts.rows; ++r)
        for (std::size_t c = 0; c < opts.cols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) {
                    const Eigen::Vector3d img(c - 0.5 + (j + 0.5) / s, r - 0.5 + (i + 0.5) / s, 1.0);
                    const Eigen::Vector3d lay = inv * img;
                    acc += layout_intensity(layout, Point(lay.x() / lay.z(), lay.y() / lay.z()));
                }
            out(r, c) = acc / (s * s);
        }
    if (opts.blur_sigma > 0.0)
        out = gaussian_blur(out, opts.blur_sigma);
    if (opts.noise_std > 0.0)
        out += white_noise(opts.rows, opts.cols, opts.noise_std, derive_seed(opts.seed, {0xF1D}));
    return out;
}

namespace {

struct Line
{
    double theta = 0.0; ///< normal angle (rad); points satisfy x cos + y sin = rho
    double rho = 0.0;
    double votes = 0.0;

    Point normal() const { return {std::cos(theta), std::sin(theta)}; }
    double distance(const Point& p) const { return std::abs(p.dot(normal()) - rho); }
};

double percentile(std::vector<double> v, double q)
{
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
    return v[k];
}

/// Total-least-squares line through the dark pixels near `line`.
Line refine_line(const std::vector<Point>& dark, const Line& line, double band)
{
    // Weights taper to zero at the band edge so pixels entering or leaving
    // the band do not shift the fit.
    Line cur = line;
    for (int iter = 0; iter < 6; ++iter) {
        auto weight = [&](const Point& p) {
            const double t = cur.distance(p) / band;
            return t < 1.0 ? (1.0 - t * t) * (1.0 - t * t) : 0.0;
        };
        Point mean = Point::Zero();
        double wsum = 0.0;
        std::size_t n = 0;
        for (const auto& p : dark) {
            const double w = weight(p);
            if (w > 0.0) {
                mean += w * p;
                wsum += w;
                ++n;
            }
        }
        if (n < 10)
            return cur;
        mean /= wsum;
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (const auto& p : dark) {
            const double w = weight(p);
            if (w > 0.0)
                cov += w * (p - mean) * (p - mean).transpose();
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
        const Point nrm = es.eigenvectors().col(0); // smallest spread: line normal
        cur.theta = std::atan2(nrm.y(), nrm.x());
        cur.rho = mean.dot(nrm);
    }
    return cur;
}

double angle_between(const Line& a, const Line& b)
{
    double d = std::fmod(std::abs(a.theta - b.theta), std::numbers::pi);
    return std::min(d, std::numbers::pi - d);
}

Point intersect(const Line& a, const Line& b)
{
    Eigen::Matrix2d A;
    A << std::cos(a.theta), std::sin(a.theta), std::cos(b.theta), std::sin(b.theta);
    return A.colPivHouseholderQr().solve(Eigen::Vector2d(a.rho, b.rho));
}

} // namespace

CornerSet detect_fiducial(const Grid& img, const DetectOptions& opts)
{
    if (img.rows() < 16 || img.cols() < 16)
        throw NoFiducial("detect_fiducial: image too small");
    const std::vector<double> values(img.values().begin(), img.values().end());
    const double lo = percentile(values, 0.01);
    const double hi = percentile(values, 0.99);
    if (!(hi - lo > 0.2))
        throw NoFiducial("detect_fiducial: no contrast");
    const double thr = 0.5 * (lo + hi);

    std::vector<Point> dark;
    for (std::size_t r = 0; r < img.rows(); ++r)
        for (std::size_t c = 0; c < img.cols(); ++c)
            if (img(r, c) < thr)
                dark.emplace_back(static_cast<double>(c), static_cast<double>(r));
    if (dark.size() < 20)
        throw NoFiducial("detect_fiducial: no ink found");

    const int n_theta = static_cast<int>(std::lround(180.0 / opts.angle_step_deg));
    const double diag = std::hypot(static_cast<double>(img.rows()), static_cast<double>(img.cols()));
    const int n_rho = static_cast<int>(std::ceil(2.0 * diag / opts.rho_step)) + 1;
    std::vector<double> acc(static_cast<std::size_t>(n_theta) * n_rho, 0.0);
    std::vector<double> cs(n_theta), sn(n_theta);
    for (int t = 0; t < n_theta; ++t) {
        const double th = t * opts.angle_step_deg * std::numbers::pi / 180.0;
        cs[t] = std::cos(th);
        sn[t] = std::sin(th);
    }
    for (const auto& p : dark)
        for (int t = 0; t < n_theta; ++t) {
            const double rho = p.x() * cs[t] + p.y() * sn[t];
            const auto k = static_cast<int>(std::lround((rho + diag) / opts.rho_step));
            acc[static_cast<std::size_t>(t) * n_rho + k] += 1.0;
        }
    const double peak = *std::max_element(acc.begin(), acc.end());

    std::vector<Line> cand;
    for (int t = 0; t < n_theta; ++t)
        for (int k = 0; k < n_rho; ++k) {
            const double v = acc[static_cast<std::size_t>(t) * n_rho + k];
            if (v < opts.peak_fraction * peak)
                continue;
            cand.push_back({t * opts.angle_step_deg * std::numbers::pi / 180.0, k * opts.rho_step - diag, v});
        }
    std::sort(cand.begin(), cand.end(), [](const Line& a, const Line& b) { return a.votes > b.votes; });

    // Non-maximum suppression in line space: two candidates are the same line
    // when nearly parallel and close at the image center.
    const Point center(0.5 * img.cols(), 0.5 * img.rows());
    std::vector<Line> lines;
    const double sep = 3.0 * opts.circle_radius;
    for (const auto& c : cand) {
        bool dup = false;
        for (const auto& l : lines) {
            if (angle_between(c, l) > 5.0 * std::numbers::pi / 180.0)
                continue;
            const Point foot = center - (center.dot(c.normal()) - c.rho) * c.normal();
            if (l.distance(foot) < sep) {
                dup = true;
                break;
            }
        }
        if (!dup)
            lines.push_back(c);
    }
    if (lines.size() < 4)
        throw NoFiducial("detect_fiducial: fewer than four guide lines");

    for (auto& l : lines)
        l = refine_line(dark, l, opts.circle_radius * 0.5 + 1.0);

    std::vector<Line> fam_a, fam_b;
    fam_a.push_back(lines.front());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const double d = angle_between(lines[i], lines.front());
        if (d < 20.0 * std::numbers::pi / 180.0)
            fam_a.push_back(lines[i]);
        else if (d > 70.0 * std::numbers::pi / 180.0)
            fam_b.push_back(lines[i]);
        else
            throw AmbiguousFiducial("detect_fiducial: line at an unexpected angle");
    }
    if (fam_a.size() < 2 || fam_b.size() < 2)
        throw NoFiducial("detect_fiducial: need two lines in each direction");
    if (fam_a.size() > 2 || fam_b.size() > 2)
        throw AmbiguousFiducial("detect_fiducial: more than two lines in one direction");

    std::array<Point, 4> pts;
    int n = 0;
    const double window = opts.refine_window * opts.circle_radius;
    for (const auto& a : fam_a)
        for (const auto& b : fam_b) {
            const Point guess = intersect(a, b);
            Point cur = guess;
            for (int iter = 0; iter < 30; ++iter) {
                Point sum = Point::Zero();
                double wsum = 0.0;
                const auto r0 = static_cast<long long>(std::floor(cur.y() - window));
                const auto r1 = static_cast<long long>(std::ceil(cur.y() + window));
                const auto c0 = static_cast<long long>(std::floor(cur.x() - window));
                const auto c1 = static_cast<long long>(std::ceil(cur.x() + window));
                for (long long r = std::max(0LL, r0); r <= std::min<long long>(img.rows() - 1, r1); ++r)
                    for (long long c = std::max(0LL, c0); c <= std::min<long long>(img.cols() - 1, c1); ++c) {
                        const Point p(static_cast<double>(c), static_cast<double>(r));
                        const double t = (p - cur).norm() / window;
                        if (t >= 1.0)
                            continue;
                        const double taper = (1.0 - t * t) * (1.0 - t * t);
                        const double w =
                            taper * std::max(0.0, thr - img(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
                        sum += w * p;
                        wsum += w;
                    }
                if (!(wsum > 0.0))
                    throw AmbiguousFiducial("detect_fiducial: no disk at an intersection");
                const Point next = sum / wsum;
                const double move = (next - cur).norm();
                cur = next;
                if (move < 1e-4)
                    break;
            }
            if ((cur - guess).norm() > window)
                throw AmbiguousFiducial("detect_fiducial: disk centroid far from line intersection");
            pts[static_cast<std::size_t>(n++)] = cur;
        }

    Point mid = Point::Zero();
    for (const auto& p : pts)
        mid += p / 4.0;
    std::sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) {
        return std::atan2(a.y() - mid.y(), a.x() - mid.x()) < std::atan2(b.y() - mid.y(), b.x() - mid.x());
    });
    CornerSet out{pts};
    if (!out.convex())
        throw AmbiguousFiducial("detect_fiducial: corners are not convex");
    return out;
}

Eigen::Matrix3d homography(const std::array<Point, 4>& src, const std::array<Point, 4>& dst)
{
    Eigen::Matrix<double, 8, 8> A;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double x = src[i].x(), y = src[i].y();
        const double u = dst[i].x(), v = dst[i].y();
        A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
        A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
    if (!lu.isInvertible())
        throw std::invalid_argument("homography: degenerate correspondences");
    const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
    Eigen::Matrix3d H;
    H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    return H;
}

Grid rectify(const Grid& img, const CornerSet& corners, std::size_t out_rows, std::size_t out_cols)
{
    if (out_rows < 2 || out_cols < 2)
        throw std::invalid_argument("rectify: output must be at least 2x2");
    if (!corners.convex())
        throw std::invalid_argument("rectify: corners must be convex");
    const double w = static_cast<double>(out_cols - 1);
    const double h = static_cast<double>(out_rows - 1);
    const Eigen::Matrix3d H = homography({Point(0, 0), Point(w, 0), Point(w, h), Point(0, h)}, corners.corners);
    Grid out(out_rows, out_cols);
    for (std::size_t r = 0; r < out_rows; ++r)
        for (std::size_t c = 0; c < out_cols; ++c) {
            const Eigen::Vector3d p = H * Eigen::Vector3d(static_cast<double>(c), static_cast<double>(r), 1.0);
            out(r, c) = sample_bilinear(img, p.x() / p.z(), p.y() / p.z());
        }
    return out;
}

CornerSet perturb_corners(const CornerSet& corners, double L, std::uint64_t seed)
{
    if (!(L >= 0.0))
        throw std::invalid_argument("perturb_corners: L must be >= 0");
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    CornerSet out = corners;
    for (auto& p : out.corners) {
        const double ex = z(rng);
        const double ey = z(rng);
        p += L * Point(ex, ey);
    }
    return out;
}

CornerSet block_corners(double col0, double row0, std::size_t rows, std::size_t cols)
{
    const double c1 = col0 + static_cast<double>(cols) - 1.0;
    const double r1 = row0 + static_cast<double>(rows) - 1.0;
    return {{Point(col0, row0), Point(c1, row0), Point(c1, r1), Point(col0, r1)}};
}

} // namespace paperprint::registration
