#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/LU>

#include "paperprint/filter.hpp"
#include "paperprint/registration.hpp"
#include "paperprint/rng.hpp"
#include "paperprint/synth.hpp"

using namespace paperprint;
using namespace paperprint::registration;

namespace {

const FiducialLayout kLayout = FiducialLayout::standard(300, 160);

Eigen::Matrix3d translation(double dx, double dy)
{
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 2) = dx;
    t(1, 2) = dy;
    return t;
}

Eigen::Matrix3d rotation_about(double deg, double cx, double cy)
{
    const double a = deg * std::numbers::pi / 180;
    Eigen::Matrix3d r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return translation(cx, cy) * r * translation(-cx, -cy);
}

Point apply(const Eigen::Matrix3d& h, const Point& p)
{
    const Eigen::Vector3d v = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
    return {v.x() / v.z(), v.y() / v.z()};
}

double max_corner_error(const CornerSet& got, const Eigen::Matrix3d& t)
{
    double err = 0;
    for (int i = 0; i < 4; ++i)
        err = std::max(err, (got.corners[i] - apply(t, kLayout.patch_square[i])).norm());
    return err;
}

double corr(const Grid& a, const Grid& b)
{
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.values()[i] - ma, y = b.values()[i] - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    return sab / std::sqrt(saa * sbb);
}

/// DFT coefficient of the ink (1 - intensity) at integer frequency (kx, ky).
std::complex<double> ink_dft(const Grid& g, int kx, int ky)
{
    std::complex<double> acc = 0;
    const double R = g.rows(), C = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) {
            const double ph = -2 * std::numbers::pi * (kx * c / C + ky * r / R);
            acc += (1.0 - g(r, c)) * std::polar(1.0, ph);
        }
    return acc;
}

/// Warps src by h into an image of the given size (bilinear, inverse map).
Grid warp(const Grid& src, const Eigen::Matrix3d& h, std::size_t rows, std::size_t cols)
{
    const Eigen::Matrix3d inv = h.inverse();
    Grid out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const Point p = apply(inv, Point(double(c), double(r)));
            out(r, c) = sample_bilinear(src, p.x(), p.y());
        }
    return out;
}

} // namespace

TEST_CASE("render_fiducial: ink is dark and paper is light")
{
    const Grid img = render_fiducial(kLayout, Eigen::Matrix3d::Identity(), {});
    const Segment& line = kLayout.guide_lines.front();
    const Point mid = 0.5 * (line.a + line.b);
    const double ink = img(std::size_t(std::lround(mid.y())), std::size_t(std::lround(mid.x())));
    const double paper = img(3, 3);
    CHECK(paper - ink >= 0.5 * (max_value(img) - min_value(img)));
    CHECK(paper == doctest::Approx(1.0));
}

TEST_CASE("render_fiducial: a subpixel translation shifts the content exactly")
{
    const double dx = 3.25, dy = -1.5;
    const Grid a = render_fiducial(kLayout, Eigen::Matrix3d::Identity(), {});
    const Grid b = render_fiducial(kLayout, translation(dx, dy), {});
    // Phase of the cross power spectrum at the lowest frequencies.
    const double N = 300;
    double ex = 0, ey = 0;
    for (int k = 1; k <= 3; ++k) {
        ex += -std::arg(ink_dft(b, k, 0) * std::conj(ink_dft(a, k, 0))) * N / (2 * std::numbers::pi * k);
        ey += -std::arg(ink_dft(b, 0, k) * std::conj(ink_dft(a, 0, k))) * N / (2 * std::numbers::pi * k);
    }
    CHECK(ex / 3 == doctest::Approx(dx).epsilon(0.02 / dx));
    CHECK(ey / 3 == doctest::Approx(dy).epsilon(0.02 / std::abs(dy)));
}

TEST_CASE("render_fiducial is deterministic and rejects degenerate transforms")
{
    RenderOptions o;
    o.noise_std = 0.05;
    o.blur_sigma = 0.7;
    o.seed = 4;
    CHECK(render_fiducial(kLayout, Eigen::Matrix3d::Identity(), o) ==
          render_fiducial(kLayout, Eigen::Matrix3d::Identity(), o));
    RenderOptions other = o;
    other.seed = 5;
    CHECK_FALSE(render_fiducial(kLayout, Eigen::Matrix3d::Identity(), o) ==
                render_fiducial(kLayout, Eigen::Matrix3d::Identity(), other));
    Eigen::Matrix3d flat = Eigen::Matrix3d::Identity();
    flat(1, 1) = 0;
    CHECK_THROWS(render_fiducial(kLayout, flat, o));
}

TEST_CASE("layout invariants")
{
    CHECK_NOTHROW(kLayout.validate());
    FiducialLayout bad = kLayout;
    bad.circles[0].center += Point(2.0, 0.0);
    CHECK_THROWS(bad.validate());
    CHECK_THROWS(FiducialLayout::standard(100, 160));
}

TEST_CASE("detect_fiducial on a clean identity render")
{
    const Grid img = render_fiducial(kLayout, Eigen::Matrix3d::Identity(), {});
    const CornerSet cs = detect_fiducial(img);
    CHECK(max_corner_error(cs, Eigen::Matrix3d::Identity()) < 0.5);
    CHECK(cs.convex());
}

TEST_CASE("detect_fiducial under rotation and translation")
{
    for (double deg : {7.0, -7.0}) {
        const Eigen::Matrix3d t = translation(4.3, -2.6) * rotation_about(deg, 150, 150);
        RenderOptions o;
        o.blur_sigma = 0.6;
        o.noise_std = 0.02;
        const CornerSet cs = detect_fiducial(render_fiducial(kLayout, t, o));
        CHECK(max_corner_error(cs, t) < 0.8);
    }
}

TEST_CASE("detect_fiducial on a blank page")
{
    CHECK_THROWS_AS(detect_fiducial(Grid(300, 300, 1.0)), NoFiducial);
    CHECK_THROWS_AS(detect_fiducial(white_noise(300, 300, 0.01, 2) + Grid(300, 300, 0.9)), NoFiducial);
}

TEST_CASE("detection is equivariant to integer translations")
{
    const Eigen::Matrix3d base = rotation_about(3.0, 150, 150);
    const CornerSet a = detect_fiducial(render_fiducial(kLayout, base, {}));
    for (auto [dx, dy] : {std::pair{5, -3}, std::pair{-8, 2}}) {
        const CornerSet b = detect_fiducial(render_fiducial(kLayout, translation(dx, dy) * base, {}));
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(b.corners[i].x() - a.corners[i].x() - dx) <= 0.2);
            CHECK(std::abs(b.corners[i].y() - a.corners[i].y() - dy) <= 0.2);
        }
    }
}

TEST_CASE("rectify with axis-aligned corners is the identity")
{
    const Grid img = white_noise(40, 50, 1.0, 3);
    const Grid out = rectify(img, block_corners(0, 0, 40, 50), 40, 50);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(out.values()[i] - img.values()[i]) <= 1e-9);
    CornerSet twisted = block_corners(0, 0, 40, 50);
    std::swap(twisted.corners[1], twisted.corners[2]);
    CHECK_THROWS(rectify(img, twisted, 40, 50));
}

TEST_CASE("warp then rectify recovers the source")
{
    const Grid src = synth::smooth_random_field(120, 120, 4.0, 8);
    Eigen::Matrix3d h = translation(40, 35) * rotation_about(9.0, 60, 60);
    h(2, 0) = 2e-4;
    h(2, 1) = -1e-4;
    const Grid img = warp(src, h, 220, 220);
    CornerSet truth;
    const CornerSet unit = block_corners(0, 0, 120, 120);
    for (int i = 0; i < 4; ++i)
        truth.corners[i] = apply(h, unit.corners[i]);

    const Grid back = rectify(img, truth, 120, 120);
    CHECK(corr(center_crop(back, 100, 100), center_crop(src, 100, 100)) >= 0.99);

    // Perturbed corners give a strictly worse reconstruction.
    for (std::uint64_t seed : {1, 2, 3}) {
        const Grid off = rectify(img, perturb_corners(truth, 1.0, seed), 120, 120);
        CHECK(corr(center_crop(off, 100, 100), center_crop(src, 100, 100)) <
              corr(center_crop(back, 100, 100), center_crop(src, 100, 100)));
    }
}

TEST_CASE("perturb_corners")
{
    const CornerSet c = block_corners(10, 20, 100, 120);
    const CornerSet same = perturb_corners(c, 0.0, 7);
    for (int i = 0; i < 4; ++i)
        CHECK(same.corners[i] == c.corners[i]);

    double s1 = 0, s2 = 0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
        const double d = perturb_corners(c, 0.5, k + 1).corners[2].y() - c.corners[2].y();
        s1 += d;
        s2 += d * d;
    }
    const double sd = std::sqrt(s2 / draws - std::pow(s1 / draws, 2));
    CHECK(std::abs(sd - 0.5) <= 0.02);

    const CornerSet a = perturb_corners(c, 0.5, 1), b = perturb_corners(c, 0.5, 2);
    CHECK(a.corners[0] != b.corners[0]);
    CHECK_THROWS(perturb_corners(c, -0.1, 1));
}

TEST_CASE("rectified patches of two renders agree")
{
    const Eigen::Matrix3d t1 = translation(2.4, -1.7) * rotation_about(4.0, 150, 150);
    const Eigen::Matrix3d t2 = translation(-3.1, 0.6) * rotation_about(-5.0, 150, 150);
    RenderOptions o1, o2;
    o1.blur_sigma = o2.blur_sigma = 0.6;
    o1.noise_std = o2.noise_std = 0.01;
    o1.seed = 1;
    o2.seed = 2;
    const Grid a = render_fiducial(kLayout, t1, o1), b = render_fiducial(kLayout, t2, o2);
    const Grid ra = rectify(a, detect_fiducial(a), 160, 160);
    const Grid rb = rectify(b, detect_fiducial(b), 160, 160);
    CHECK(corr(center_crop(ra, 120, 120), center_crop(rb, 120, 120)) >= 0.95);
}

TEST_CASE("homography maps the four correspondences")
{
    const std::array<Point, 4> src{Point(0, 0), Point(10, 0), Point(10, 8), Point(0, 8)};
    const std::array<Point, 4> dst{Point(1, 2), Point(13, 1), Point(12, 11), Point(0, 9)};
    const Eigen::Matrix3d h = homography(src, dst);
    for (int i = 0; i < 4; ++i)
        CHECK((apply(h, src[i]) - dst[i]).norm() <= 1e-9);
}
