#include "doctest.h"

#include <cmath>
#include <numbers>

#include "paperprint/filter.hpp"
#include "paperprint/rng.hpp"
#include "paperprint/synth.hpp"

using namespace paperprint;
using namespace paperprint::synth;

TEST_CASE("generate_surface is deterministic per seed")
{
    const auto p = default_fiber_params(64, 64, 84.7, 42);
    const HeightMap a = generate_surface(p, 64, 64, 84.7);
    const HeightMap b = generate_surface(p, 64, 64, 84.7);
    CHECK(a.heights == b.heights);
    const HeightMap c = generate_surface(default_fiber_params(64, 64, 84.7, 43), 64, 64, 84.7);
    CHECK_FALSE(a.heights == c.heights);
}

TEST_CASE("generate_surface with no fibers and no noise is flat zero")
{
    FiberModelParams p;
    p.fiber_count = 0;
    p.noise_floor_um = 0.0;
    const HeightMap hm = generate_surface(p, 32, 40, 84.7);
    CHECK(hm.heights.rows() == 32);
    CHECK(hm.heights.cols() == 40);
    CHECK(max_value(hm.heights) == 0.0);
    CHECK(min_value(hm.heights) == 0.0);
}

TEST_CASE("default surfaces have the calibrated tilt statistics")
{
    for (std::uint64_t seed : {1, 2, 3}) {
        const HeightMap hm = generate_surface(default_fiber_params(200, 200, 84.7, seed), 200, 200, 84.7);
        const Grid s = sin_theta(normals_from_heightmap(hm));
        CHECK(mean(s) >= 0.05);
        CHECK(mean(s) <= 0.11);
        CHECK(stddev(s) >= 0.03);
        CHECK(stddev(s) <= 0.06);
    }
}

TEST_CASE("normals_from_heightmap recovers a plane")
{
    HeightMap hm{Grid(15, 17), 1.0};
    for (std::size_t r = 0; r < 15; ++r)
        for (std::size_t c = 0; c < 17; ++c)
            hm.heights(r, c) = 0.1 * c + 0.2 * r;
    const NormalField nf = normals_from_heightmap(hm);
    const Eigen::Vector3d expected = Eigen::Vector3d(-0.1, -0.2, 1.0).normalized();
    for (std::size_t r = 1; r + 1 < 15; ++r)
        for (std::size_t c = 1; c + 1 < 17; ++c)
            CHECK((nf.at(r, c) - expected).norm() <= 1e-12);
}

TEST_CASE("normals_from_heightmap of a constant map points straight up")
{
    const NormalField nf = normals_from_heightmap({Grid(8, 8, 3.5), 84.7});
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK((nf.at(r, c) - Eigen::Vector3d(0, 0, 1)).norm() <= 1e-12);
}

TEST_CASE("plane-fit normals agree with central differences on smooth surfaces")
{
    const double pitch = 84.7;
    HeightMap hm{smooth_random_field(60, 60, 10.0, 17) * 300.0, pitch};
    const NormalField nf = normals_from_heightmap(hm);
    double worst = 0;
    for (std::size_t r = 2; r + 2 < 60; ++r)
        for (std::size_t c = 2; c + 2 < 60; ++c) {
            const double gx = (hm.heights(r, c + 1) - hm.heights(r, c - 1)) / (2 * pitch);
            const double gy = (hm.heights(r + 1, c) - hm.heights(r - 1, c)) / (2 * pitch);
            const Eigen::Vector3d ref = Eigen::Vector3d(-gx, -gy, 1).normalized();
            const double ang = std::acos(std::clamp(ref.dot(nf.at(r, c)), -1.0, 1.0)) * 180 / std::numbers::pi;
            worst = std::max(worst, ang);
        }
    CHECK(worst <= 2.0);
    CHECK(max_value(sin_theta(nf)) > 0.05); // the surface is not trivially flat
}

TEST_CASE("degrade_scan without blur or noise is the identity")
{
    optics::ScanImage img{white_noise(9, 11, 1.0, 3), 90, 84.7};
    const auto out = degrade_scan(img, 0.0, 0.0, 0.0, 5);
    CHECK(out.intensities == img.intensities);
    CHECK(out.orientation == 90);
}

TEST_CASE("degrade_scan leaves a constant image unchanged")
{
    optics::ScanImage img{Grid(20, 20, 0.37), 0, 84.7};
    const auto out = degrade_scan(img, 1.3, 0.4, 0.0, 5);
    for (double v : out.intensities.values())
        CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("degrade_scan impulse response is the sampled separable Gaussian")
{
    const double sx = 0.8, sy = 1.5;
    const std::size_t n = 31, mid = 15;
    optics::ScanImage img{Grid(n, n), 0, 84.7};
    img.intensities(mid, mid) = 1.0;
    const Grid out = degrade_scan(img, sx, sy, 0.0, 1).intensities;

    auto taps = [](double s) {
        const int h = static_cast<int>(std::ceil(4 * s));
        std::vector<double> t;
        double sum = 0;
        for (int k = -h; k <= h; ++k) {
            t.push_back(std::exp(-0.5 * k * k / (s * s)));
            sum += t.back();
        }
        for (double& v : t)
            v /= sum;
        return t;
    };
    const auto tx = taps(sx), ty = taps(sy);
    const int hx = static_cast<int>(tx.size() / 2), hy = static_cast<int>(ty.size() / 2);
    double err = 0;
    for (int r = 0; r < static_cast<int>(n); ++r)
        for (int c = 0; c < static_cast<int>(n); ++c) {
            const int dr = r - static_cast<int>(mid), dc = c - static_cast<int>(mid);
            const double want = (std::abs(dr) <= hy && std::abs(dc) <= hx) ? ty[dr + hy] * tx[dc + hx] : 0.0;
            err = std::max(err, std::abs(out(r, c) - want));
        }
    CHECK(err <= 1e-10);
}

TEST_CASE("degrade_scan noise is deterministic per seed with the requested level")
{
    optics::ScanImage img{Grid(100, 100, 0.5), 0, 84.7};
    const auto a = degrade_scan(img, 0.0, 0.0, 0.1, 8);
    const auto b = degrade_scan(img, 0.0, 0.0, 0.1, 8);
    CHECK(a.intensities == b.intensities);
    CHECK(stddev(a.intensities) == doctest::Approx(0.1).epsilon(0.03));
    CHECK_THROWS(degrade_scan(img, -1.0, 0.0, 0.0, 1));
}

TEST_CASE("blur preserves the grid mean")
{
    const Grid g = white_noise(50, 50, 1.0, 4) + Grid(50, 50, 2.0);
    const Grid b = gaussian_blur(g, 1.2, 0.7);
    const double range = max_value(g) - min_value(g);
    CHECK(std::abs(mean(b) - mean(g)) <= 1e-6 * range);
}

TEST_CASE("default surfaces have normals close to vertical")
{
    const HeightMap hm = generate_surface(default_fiber_params(100, 100, 84.7, 9), 100, 100, 84.7);
    const NormalField nf = normals_from_heightmap(hm);
    std::size_t steep = 0;
    for (double z : nf.nz.values())
        steep += z < 0.95;
    CHECK(steep < nf.nz.size() / 20);
    CHECK(all_finite(hm.heights));
}
