#include "doctest.h"

#include <cmath>
#include <random>

#include "json.hpp"
#include "paperprint/experiments.hpp"
#include "paperprint/match.hpp"
#include "paperprint/rng.hpp"

using namespace paperprint;
using namespace paperprint::experiments;

namespace {

/// Pairs of white-noise features: matched pairs share a common component.
struct NoiseFeatures
{
    std::vector<Grid> features;
    PairDesign pairs;
};

NoiseFeatures noise_features(std::size_t n, int groups, int per_group, double shared, std::uint64_t seed)
{
    NoiseFeatures out;
    for (int g = 0; g < groups; ++g) {
        const Grid base = white_noise(n, n, 1.0, derive_seed(seed, {std::uint64_t(g)}));
        for (int k = 0; k < per_group; ++k)
            out.features.push_back(base * shared +
                                   white_noise(n, n, 1.0, derive_seed(seed, {std::uint64_t(g), std::uint64_t(k + 1)})));
    }
    for (int g = 0; g < groups; ++g)
        for (int a = 0; a < per_group; ++a)
            for (int b = a + 1; b < per_group; ++b)
                out.pairs.matched.emplace_back(g * per_group + a, g * per_group + b);
    for (int g = 0; g + 1 < groups; ++g)
        for (int a = 0; a < per_group; ++a)
            out.pairs.unmatched.emplace_back(g * per_group + a, (g + 1) * per_group + a);
    return out;
}

CorpusConfig tiny_corpus()
{
    CorpusConfig cfg;
    cfg.patches = 3;
    cfg.repeats = 2;
    cfg.rows = cfg.cols = 64;
    cfg.scanners.resize(1);
    return cfg;
}

} // namespace

TEST_CASE("StudyReport CSV quoting, numbers and line endings")
{
    StudyReport r;
    r.name = "demo";
    r.columns = {"label", "count", "value"};
    r.rows.push_back({std::string("plain"), 3LL, 0.1});
    r.rows.push_back({std::string("with,comma \"q\""), -1LL, std::nan("")});
    const std::string csv = r.to_csv();
    CHECK(csv == "label,count,value\r\nplain,3,0.10000000000000001\r\n\"with,comma \"\"q\"\"\",-1,nan\r\n");
    CHECK(r.column("value") == 2);
    CHECK(r.number(0, "count") == 3.0);
    CHECK_THROWS(r.column("missing"));
    CHECK_THROWS(r.number(0, "label"));

    r.seed = 9;
    r.summary["slope"] = -0.5;
    r.config["feature"] = "subband:2";
    const auto j = nlohmann::json::parse(r.manifest_json());
    CHECK(j.at("study") == "demo");
    CHECK(j.at("seed") == 9);
    CHECK(j.at("summary").at("slope") == -0.5);
    CHECK(j.at("config").at("feature") == "subband:2");
}

TEST_CASE("specular_ablation on a small grid")
{
    SpecularAblationOptions o;
    o.n_fields = 2;
    o.rows = o.cols = 64;
    const StudyReport r = specular_ablation(o);
    REQUIRE(r.rows.size() == o.w_s_values.size() * o.v_cx_values.size());
    CHECK(r.to_csv() == specular_ablation(o).to_csv());

    auto cell = [&](double ws, double vcx, const char* col) {
        for (std::size_t i = 0; i < r.rows.size(); ++i)
            if (r.number(i, "w_s") == ws && r.number(i, "v_cx") == vcx)
                return r.number(i, col);
        FAIL("missing cell");
        return 0.0;
    };
    // The diffuse model has no sensor-direction dependence.
    for (double vcx : o.v_cx_values)
        CHECK(cell(0.0, vcx, "corr_truth_ny") == cell(0.0, 0.0, "corr_truth_ny"));
    CHECK(std::abs(cell(0.3, 0.0, "corr_truth_ny") - cell(0.0, 0.0, "corr_truth_ny")) <= 0.005);
    CHECK(cell(0.3, 0.0, "corr_diffuse_ny") >= 0.999);
    CHECK(cell(0.3, 0.3, "corr_truth_ny") < cell(0.3, 0.0, "corr_truth_ny"));
    CHECK(cell(0.3, 0.3, "corr_diffuse_ny") < 0.999);
}

TEST_CASE("subblock residual and quadrant correlations")
{
    const Grid x = white_noise(20, 20, 1.0, 1);
    CHECK(subblock_residual(x, x) == 0.0);
    for (double q : quadrant_correlations(x, x))
        CHECK(q == doctest::Approx(1.0).epsilon(1e-15));

    // y equals x in the top-left quadrant and -x in the bottom-right.
    Grid y = white_noise(20, 20, 1.0, 2);
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) {
            y(r, c) = x(r, c);
            y(r + 10, c + 10) = -x(r + 10, c + 10);
        }
    const auto q = quadrant_correlations(x, y);
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[3] == doctest::Approx(-1.0));
    CHECK(std::abs(q[1]) < 0.5);
    const double rho = match::correlation(x, y);
    CHECK(subblock_residual(x, y) == doctest::Approx(rho - (q[0] + q[1] + q[2] + q[3]) / 4).epsilon(1e-14));

    CHECK_THROWS(subblock_residual(white_noise(9, 10, 1.0, 1), white_noise(9, 10, 1.0, 2)));
    Grid flat = x;
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c)
            flat(r, c) = 1.0;
    CHECK_THROWS(subblock_residual(flat, x));
}

TEST_CASE("residual_study: spread shrinks with block size")
{
    const NoiseFeatures nf = noise_features(200, 6, 4, 1.0, 3);
    const StudyReport r = residual_study(nf.features, nf.pairs.matched, {50, 100, 200});
    REQUIRE(r.rows.size() == 3);
    CHECK(r.number(0, "subblock_edge") == 25);
    CHECK(r.number(2, "subblock_edge") == 100);
    CHECK(r.number(0, "pairs") == double(nf.pairs.matched.size()));
    CHECK(r.number(1, "std_rn") < r.number(0, "std_rn"));
    CHECK(r.number(2, "std_rn") < r.number(1, "std_rn"));
}

TEST_CASE("subblock covariance test: matched, unmatched and shuffled")
{
    // Quadrant scores per pair: a shared pair effect plus independent noise.
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    std::vector<std::array<double, 4>> dependent, independent;
    for (int p = 0; p < 40; ++p) {
        const double shared = 0.1 * z(rng);
        std::array<double, 4> d, u;
        for (int k = 0; k < 4; ++k) {
            d[k] = 0.5 + shared + 0.05 * z(rng);
            u[k] = 0.05 * z(rng);
        }
        dependent.push_back(d);
        independent.push_back(u);
    }
    const StudyReport m = subblock_covariance_test({dependent}, Hypothesis::matched);
    CHECK(m.rows.size() == 6);
    CHECK(m.summary.at("p_value") < 0.01);
    CHECK(m.summary.at("mean_z") > 0);
    CHECK(m.summary.at("df") == 5);

    const StudyReport u = subblock_covariance_test({independent}, Hypothesis::unmatched);
    CHECK(u.summary.at("p_value") >= 0.01);

    int rejections = 0;
    for (std::uint64_t s = 1; s <= 100; ++s) {
        const StudyReport sh = subblock_covariance_test({dependent}, Hypothesis::matched, {true, s});
        rejections += sh.summary.at("p_value") < 0.001;
    }
    CHECK(rejections <= 5);

    const std::vector<std::array<double, 4>> few(dependent.begin(), dependent.begin() + 19);
    CHECK_THROWS(subblock_covariance_test({few}, Hypothesis::matched));
}

TEST_CASE("subblock covariance p-value against an independent t computation")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    std::vector<std::array<double, 4>> t1, t2;
    for (int p = 0; p < 25; ++p) {
        t1.push_back({z(rng), z(rng), z(rng), z(rng)});
        t2.push_back({z(rng), z(rng), z(rng), z(rng)});
    }
    const StudyReport r = subblock_covariance_test({t1, t2}, Hypothesis::unmatched);
    REQUIRE(r.rows.size() == 12);
    double s = 0, ss = 0;
    for (std::size_t i = 0; i < 12; ++i) {
        const double fz = r.number(i, "fisher_z");
        CHECK(fz == doctest::Approx(std::atanh(r.number(i, "corr"))).epsilon(1e-12));
        s += fz;
        ss += fz * fz;
    }
    const double mean = s / 12, sd = std::sqrt((ss - 12 * mean * mean) / 11);
    CHECK(r.summary.at("t") == doctest::Approx(mean / (sd / std::sqrt(12.0))).epsilon(1e-10));
    CHECK(r.summary.at("df") == 11);
}

TEST_CASE("block_cut_study on white-noise features")
{
    const NoiseFeatures nf = noise_features(200, 30, 4, 1.0, 7);
    const StudyReport r = block_cut_study(nf.features, nf.pairs);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.number(0, "edge_px") == 160);
    CHECK(r.number(3, "edge_px") == 20);
    CHECK(r.number(3, "blocks") == 64);
    CHECK(std::isnan(r.number(0, "std_ratio0")));
    // Independent white noise: each cut quarters the pixels, doubling the spread.
    for (std::size_t i = 1; i < 4; ++i)
        CHECK(r.number(i, "std_ratio0") == doctest::Approx(2.0).epsilon(0.15));
    CHECK(r.summary.count("eer_edge_slope") == 1);

    BlockCutOptions o;
    o.min_block = 50;
    CHECK(block_cut_study(nf.features, nf.pairs, o).rows.size() == 2);
}

TEST_CASE("resolution_study equals fitting on block-averaged heights")
{
    const synth::HeightMap src = resolution_source(480, 4800.0, 3);
    const std::vector<double> ppi{300, 600, 1200, 2400};
    const StudyReport r = resolution_study(src, ppi);
    REQUIRE(r.rows.size() == ppi.size());
    for (std::size_t i = 0; i < ppi.size(); ++i) {
        const auto f = static_cast<std::size_t>(4800 / ppi[i]);
        Grid avg(480 / f, 480 / f);
        for (std::size_t rr = 0; rr < avg.rows(); ++rr)
            for (std::size_t cc = 0; cc < avg.cols(); ++cc) {
                double s = 0;
                for (std::size_t a = 0; a < f; ++a)
                    for (std::size_t b = 0; b < f; ++b)
                        s += src.heights(rr * f + a, cc * f + b);
                avg(rr, cc) = s / double(f * f);
            }
        const Grid st = synth::sin_theta(synth::normals_from_heightmap({avg, src.pixel_pitch * f}));
        CHECK(std::abs(r.number(i, "mean_sin_theta") - mean(st)) <= 1e-6);
        CHECK(std::abs(r.number(i, "std_sin_theta") - stddev(st)) <= 1e-6);
        CHECK(r.number(i, "factor") == double(f));
    }
    CHECK_THROWS(resolution_study(src, {9600}));
    CHECK_THROWS(resolution_study(src, {700}));
}

TEST_CASE("perturbation_study at L = 0 reproduces the unperturbed pipeline")
{
    const CorpusConfig cfg = tiny_corpus();
    PerturbationOptions o;
    o.L_values = {0.0, 0.8};
    o.candidate_subbands = {2};
    const StudyReport r = perturbation_study(cfg, o);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.number(0, "L") == 0.0);
    CHECK(r.number(0, "subband") == 2);

    const Corpus corpus = build_corpus(cfg);
    const PairDesign pairs = make_pairs(corpus, o.pair_seed);
    const StudyReport base = feature_study(corpus, pairs, {reconstruct::FeatureSpec{reconstruct::FeatureKind::subband, 2}});
    CHECK(r.number(0, "mu1") == base.number(0, "mu1"));
    CHECK(r.number(0, "sigma0") == base.number(0, "sigma0"));
    CHECK(r.number(0, "log10_eer_l") == base.number(0, "log10_eer_l"));
    CHECK(r.to_csv() == perturbation_study(cfg, o).to_csv());
}

TEST_CASE("make_pairs design sizes")
{
    const CorpusConfig cfg = tiny_corpus();
    Corpus shell;
    shell.config = cfg;
    for (int p = 0; p < cfg.patches; ++p)
        for (int s = 0; s < int(cfg.scanners.size()); ++s)
            for (int k = 0; k < cfg.repeats; ++k)
                shell.ids.push_back({p, s, k});
    const PairDesign d = make_pairs(shell, 7);
    // Within-patch pairs: patches * C(acquisitions, 2).
    CHECK(d.matched.size() == 3u);
    for (auto [a, b] : d.matched)
        CHECK(shell.ids[a][0] == shell.ids[b][0]);
    for (auto [a, b] : d.unmatched)
        CHECK(shell.ids[a][0] != shell.ids[b][0]);
    CHECK(make_pairs(shell, 7).unmatched == d.unmatched);
}
