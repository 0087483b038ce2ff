#include "paperprint/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include "json.hpp"

#include "paperprint/filter.hpp"
#include "paperprint/match.hpp"
#include "paperprint/normmap.hpp"
#include "paperprint/optics.hpp"
#include "paperprint/registration.hpp"
#include "paperprint/rng.hpp"

namespace paperprint::experiments {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_real(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

std::string cell_text(const Cell& c)
{
    if (const auto* d = std::get_if<double>(&c))
        return format_real(*d);
    if (const auto* i = std::get_if<long long>(&c))
        return std::to_string(*i);
    return std::get<std::string>(c);
}

double mean_of(std::span<const double> v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(std::span<const double> v)
{
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

struct Eers
{
    match::MatchStats stats;
    double log10_g = kNaN;
    double log10_l = kNaN;
};

Eers closed_form(std::span<const double> matched, std::span<const double> unmatched)
{
    Eers e;
    e.stats = match::hypothesis_stats(matched, unmatched);
    if (e.stats.mu0 <= e.stats.mu1) {
        e.log10_g = match::eer_gaussian(e.stats).log10;
        e.log10_l = match::eer_laplace(e.stats).log10;
    }
    return e;
}

NormalField patch_normals(std::size_t rows, std::size_t cols, double pitch, std::uint64_t seed)
{
    const auto params = synth::default_fiber_params(rows, cols, pitch, seed);
    return synth::normals_from_heightmap(synth::generate_surface(params, rows, cols, pitch));
}

} // namespace

std::size_t StudyReport::column(const std::string& n) const
{
    const auto it = std::find(columns.begin(), columns.end(), n);
    if (it == columns.end())
        throw std::out_of_range("StudyReport: no column " + n);
    return static_cast<std::size_t>(it - columns.begin());
}

double StudyReport::number(std::size_t row, const std::string& col) const
{
    const Cell& c = rows.at(row).at(column(col));
    if (const auto* d = std::get_if<double>(&c))
        return *d;
    if (const auto* i = std::get_if<long long>(&c))
        return static_cast<double>(*i);
    throw std::invalid_argument("StudyReport: column " + col + " is not numeric");
}

std::string StudyReport::to_csv() const
{
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        out += (i ? "," : "") + csv_field(columns[i]);
    out += "\r\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out += (i ? "," : "") + csv_field(cell_text(row[i]));
        out += "\r\n";
    }
    return out;
}

std::string StudyReport::manifest_json() const
{
    nlohmann::ordered_json j;
    j["study"] = name;
    j["seed"] = seed;
    j["config"] = config;
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [k, v] : summary)
        s[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(format_real(v));
    j["summary"] = s;
    j["columns"] = columns;
    j["rows"] = rows.size();
    return j.dump(2) + "\n";
}

void StudyReport::write(const std::string& csv_path, const std::string& manifest_path) const
{
    const auto put = [](const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("StudyReport: cannot open " + path);
        f << text;
        if (!f.flush())
            throw std::runtime_error("StudyReport: write failed for " + path);
    };
    put(csv_path, to_csv());
    put(manifest_path, manifest_json());
}

// --- specular ablation -------------------------------------------------------

StudyReport specular_ablation(const SpecularAblationOptions& opts)
{
    if (opts.n_fields < 1 || opts.w_s_values.empty() || opts.v_cx_values.empty())
        throw std::invalid_argument("specular_ablation: empty grid");

    struct Field
    {
        NormalField truth;
        Grid diffuse_ny;
    };
    std::vector<Field> fields;
    optics::ScannerGeometry base;
    for (int f = 0; f < opts.n_fields; ++f) {
        Field fd;
        fd.truth = patch_normals(opts.rows, opts.cols, opts.pixel_pitch,
                                 derive_seed(opts.seed, {0x5BEC, static_cast<std::uint64_t>(f)}));
        std::array<optics::ScanImage, 4> scans;
        for (int q = 0; q < 4; ++q)
            scans[static_cast<std::size_t>(q)] = optics::render_scan(fd.truth, base, {1.0, 0.0, 1.0}, 90 * q);
        fd.diffuse_ny = normmap::estimate_normmap(scans).ny_scaled;
        fields.push_back(std::move(fd));
    }

    StudyReport rep;
    rep.name = "specular";
    rep.seed = opts.seed;
    rep.columns = {"w_s", "v_cx", "corr_truth_ny", "corr_truth_nx", "corr_diffuse_ny", "min_corr_diffuse_ny"};
    rep.config = {{"n_fields", std::to_string(opts.n_fields)},
                  {"rows", std::to_string(opts.rows)},
                  {"cols", std::to_string(opts.cols)},
                  {"pixel_pitch", format_real(opts.pixel_pitch)}};
    for (double ws : opts.w_s_values)
        for (double vcx : opts.v_cx_values) {
            optics::ScannerGeometry geom;
            geom.sensor_dir = optics::ScannerGeometry::tilted_sensor_dir(vcx);
            const optics::ReflectanceParams refl{1.0, ws, 1.0};
            double ct_y = 0.0, ct_x = 0.0, cd = 0.0, cd_min = 1.0;
            for (const auto& fd : fields) {
                std::array<optics::ScanImage, 4> scans;
                for (int q = 0; q < 4; ++q)
                    scans[static_cast<std::size_t>(q)] = optics::render_scan(fd.truth, geom, refl, 90 * q);
                const normmap::NormMap nm = normmap::estimate_normmap(scans);
                ct_y += match::correlation(nm.ny_scaled, fd.truth.ny);
                ct_x += match::correlation(nm.nx_scaled, fd.truth.nx);
                const double c = match::correlation(nm.ny_scaled, fd.diffuse_ny);
                cd += c;
                cd_min = std::min(cd_min, c);
            }
            const double n = static_cast<double>(fields.size());
            rep.rows.push_back({ws, vcx, ct_y / n, ct_x / n, cd / n, cd_min});
        }
    return rep;
}

// --- feature comparison ------------------------------------------------------

void pair_scores(std::span<const Grid> features, const PairDesign& pairs, std::vector<double>& matched,
                 std::vector<double>& unmatched)
{
    matched.clear();
    unmatched.clear();
    for (const auto& [i, j] : pairs.matched)
        matched.push_back(match::correlation(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]));
    for (const auto& [i, j] : pairs.unmatched)
        unmatched.push_back(
            match::correlation(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]));
}

StudyReport feature_study(const Corpus& corpus, const PairDesign& pairs,
                          const std::vector<reconstruct::FeatureSpec>& specs)
{
    StudyReport rep;
    rep.name = "features";
    rep.seed = corpus.config.seed;
    rep.columns = {"feature", "mu0", "sigma0", "mu1", "sigma1", "log10_eer_g", "log10_eer_l", "eer_empirical"};
    rep.config = {{"patches", std::to_string(corpus.config.patches)},
                  {"acquisitions_per_patch", std::to_string(corpus.config.acquisitions_per_patch())},
                  {"matched_pairs", std::to_string(pairs.matched.size())},
                  {"unmatched_pairs", std::to_string(pairs.unmatched.size())}};
    std::vector<double> m, u;
    for (const auto& spec : specs) {
        std::vector<Grid> f;
        f.reserve(corpus.features.size());
        for (const auto& a : corpus.features)
            f.push_back(a.feature(spec));
        pair_scores(f, pairs, m, u);
        const Eers e = closed_form(m, u);
        rep.rows.push_back({spec.to_string(), e.stats.mu0, e.stats.sigma0, e.stats.mu1, e.stats.sigma1, e.log10_g,
                            e.log10_l, match::empirical_eer(m, u)});
    }
    return rep;
}

// --- block cutting -----------------------------------------------------------

StudyReport block_cut_study(std::span<const Grid> features, const PairDesign& pairs, const BlockCutOptions& opts)
{
    if (features.empty())
        throw std::invalid_argument("block_cut_study: no features");
    if (!(opts.root_fraction > 0.0) || opts.root_fraction > 1.0 || opts.max_cuts < 0)
        throw std::invalid_argument("block_cut_study: invalid options");
    const Grid& first = features.front();
    const auto root_r = static_cast<std::size_t>(std::lround(first.rows() * opts.root_fraction));
    const auto root_c = static_cast<std::size_t>(std::lround(first.cols() * opts.root_fraction));
    if (root_r < opts.min_block || root_c < opts.min_block)
        throw std::invalid_argument("block_cut_study: root region smaller than the minimum block");

    std::vector<Grid> roots;
    roots.reserve(features.size());
    for (const auto& f : features) {
        require_same_shape(f, first, "block_cut_study");
        roots.push_back(center_crop(f, root_r, root_c));
    }

    StudyReport rep;
    rep.name = "blocks";
    rep.columns = {"level",       "edge_px",     "blocks",      "mu0",          "sigma0",      "mu1",
                   "sigma1",      "std_ratio0",  "std_ratio1",  "log10_eer_g", "log10_eer_l", "log10_eer_l_pred"};
    rep.config = {{"root_rows", std::to_string(root_r)},
                  {"root_cols", std::to_string(root_c)},
                  {"max_cuts", std::to_string(opts.max_cuts)},
                  {"min_block", std::to_string(opts.min_block)}};

    double mu0_root = 0.0, mu1_root = 0.0, s0_root = 0.0, s1_root = 0.0;
    double prev_s0 = 0.0, prev_s1 = 0.0;
    std::vector<double> edges, logs;
    for (int level = 0; level <= opts.max_cuts; ++level) {
        const std::size_t k = std::size_t{1} << level;
        if (root_r % k != 0 || root_c % k != 0)
            break;
        const std::size_t br = root_r / k, bc = root_c / k;
        if (br < opts.min_block || bc < opts.min_block)
            break;
        std::vector<double> m, u;
        const auto score = [&](const std::vector<std::pair<int, int>>& list, std::vector<double>& out) {
            for (const auto& [i, j] : list) {
                const Grid& a = roots[static_cast<std::size_t>(i)];
                const Grid& b = roots[static_cast<std::size_t>(j)];
                for (std::size_t r = 0; r < root_r; r += br)
                    for (std::size_t c = 0; c < root_c; c += bc)
                        out.push_back(match::correlation(crop(a, r, c, br, bc), crop(b, r, c, br, bc)));
            }
        };
        score(pairs.matched, m);
        score(pairs.unmatched, u);
        const Eers e = closed_form(m, u);
        const auto& s = e.stats;
        double ratio0 = kNaN, ratio1 = kNaN, pred = kNaN;
        if (level == 0) {
            mu0_root = s.mu0;
            mu1_root = s.mu1;
            s0_root = s.sigma0;
            s1_root = s.sigma1;
        } else {
            ratio0 = s.sigma0 / prev_s0;
            ratio1 = s.sigma1 / prev_s1;
        }
        // Root means with the measured std growth; equals the root EER at level 0.
        if (mu0_root <= mu1_root) {
            const double g0 = s.sigma0 / s0_root, g1 = s.sigma1 / s1_root;
            const double ln = std::log(0.5) + std::numbers::sqrt2 * (mu0_root - mu1_root) / (g0 * s0_root + g1 * s1_root);
            pred = ln / std::numbers::ln10;
        }
        prev_s0 = s.sigma0;
        prev_s1 = s.sigma1;
        const double edge = std::sqrt(static_cast<double>(br * bc));
        rep.rows.push_back({static_cast<long long>(level), edge, static_cast<long long>(k * k), s.mu0, s.sigma0, s.mu1,
                            s.sigma1, ratio0, ratio1, e.log10_g, e.log10_l, pred});
        if (std::isfinite(e.log10_l)) {
            edges.push_back(edge);
            logs.push_back(e.log10_l);
        }
    }

    rep.summary["levels"] = static_cast<double>(rep.rows.size());
    if (edges.size() >= 2) {
        const double mx = mean_of(edges), my = mean_of(logs);
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            sxx += (edges[i] - mx) * (edges[i] - mx);
            sxy += (edges[i] - mx) * (logs[i] - my);
            syy += (logs[i] - my) * (logs[i] - my);
        }
        const double slope = sxy / sxx;
        rep.summary["eer_edge_slope"] = slope;
        rep.summary["eer_edge_intercept"] = my - slope * mx;
        rep.summary["eer_edge_r2"] = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    }
    return rep;
}

// --- subblock statistics -----------------------------------------------------

std::array<double, 4> quadrant_correlations(const Grid& x, const Grid& y)
{
    require_same_shape(x, y, "quadrant_correlations");
    if (x.rows() % 2 != 0 || x.cols() % 2 != 0 || x.rows() < 4 || x.cols() < 4)
        throw std::invalid_argument("quadrant_correlations: dimensions must be even and >= 4");
    const std::size_t h = x.rows() / 2, w = x.cols() / 2;
    std::array<double, 4> out{};
    const std::size_t r0[4] = {0, 0, h, h};
    const std::size_t c0[4] = {0, w, 0, w};
    for (int i = 0; i < 4; ++i)
        out[static_cast<std::size_t>(i)] = match::correlation(crop(x, r0[i], c0[i], h, w), crop(y, r0[i], c0[i], h, w));
    return out;
}

double subblock_residual(const Grid& x, const Grid& y)
{
    const auto q = quadrant_correlations(x, y);
    return match::correlation(x, y) - 0.25 * (q[0] + q[1] + q[2] + q[3]);
}

StudyReport residual_study(std::span<const Grid> features, const std::vector<std::pair<int, int>>& pairs,
                           const std::vector<std::size_t>& block_edges)
{
    if (pairs.size() < 2)
        throw std::invalid_argument("residual_study: need at least two pairs");
    StudyReport rep;
    rep.name = "residual";
    rep.columns = {"block_edge", "subblock_edge", "pairs", "mean_rn", "std_rn", "mean_abs_rn"};
    rep.config = {{"pairs", std::to_string(pairs.size())}};
    for (std::size_t e : block_edges) {
        std::vector<double> rn;
        rn.reserve(pairs.size());
        for (const auto& [i, j] : pairs) {
            const Grid& a = features[static_cast<std::size_t>(i)];
            const Grid& b = features[static_cast<std::size_t>(j)];
            if (e > a.rows() || e > a.cols())
                throw std::invalid_argument("residual_study: block edge exceeds the feature size");
            rn.push_back(subblock_residual(center_crop(a, e, e), center_crop(b, e, e)));
        }
        double mabs = 0.0;
        for (double v : rn)
            mabs += std::abs(v);
        rep.rows.push_back({static_cast<long long>(e), static_cast<long long>(e / 2),
                            static_cast<long long>(rn.size()), mean_of(rn), std_of(rn),
                            mabs / static_cast<double>(rn.size())});
    }
    return rep;
}

StudyReport subblock_covariance_test(const std::vector<std::vector<std::array<double, 4>>>& tables,
                                     Hypothesis hypothesis, const CovarianceTestOptions& opts)
{
    if (tables.empty())
        throw std::invalid_argument("subblock_covariance_test: no score tables");
    StudyReport rep;
    rep.name = hypothesis == Hypothesis::matched ? "covariance_matched" : "covariance_unmatched";
    rep.seed = opts.seed;
    rep.columns = {"table", "quadrant_i", "quadrant_j", "corr", "fisher_z"};
    rep.config = {{"tables", std::to_string(tables.size())},
                  {"pairs", std::to_string(tables.front().size())},
                  {"hypothesis", hypothesis == Hypothesis::matched ? "matched" : "unmatched"},
                  {"alternative", hypothesis == Hypothesis::matched ? "greater" : "two-sided"},
                  {"shuffle", opts.shuffle ? "true" : "false"}};

    std::vector<double> z;
    Rng rng(derive_seed(opts.seed, {0x5F1E}));
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const auto& table = tables[t];
        if (table.size() < 20)
            throw std::invalid_argument("subblock_covariance_test: need at least 20 pairs");
        std::array<std::vector<double>, 4> cols;
        for (std::size_t k = 0; k < 4; ++k)
            for (const auto& q : table)
                cols[k].push_back(q[k]);
        if (opts.shuffle)
            for (auto& c : cols)
                std::shuffle(c.begin(), c.end(), rng);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i + 1; j < 4; ++j) {
                const double c = match::correlation(cols[i], cols[j]);
                const double zi = std::atanh(std::clamp(c, -1.0 + 1e-15, 1.0 - 1e-15));
                z.push_back(zi);
                rep.rows.push_back({static_cast<long long>(t), static_cast<long long>(i + 1),
                                    static_cast<long long>(j + 1), c, zi});
            }
    }

    const double k = static_cast<double>(z.size());
    const double mz = mean_of(z);
    double ss = 0.0;
    for (double v : z)
        ss += (v - mz) * (v - mz);
    const double se = std::sqrt(ss / (k - 1.0) / k);
    const double t = se > 0.0 ? mz / se : (mz == 0.0 ? 0.0 : std::copysign(INFINITY, mz));
    const boost::math::students_t dist(k - 1.0);
    double p = 0.0;
    if (hypothesis == Hypothesis::matched)
        p = std::isinf(t) ? (t > 0 ? 0.0 : 1.0) : boost::math::cdf(boost::math::complement(dist, t));
    else
        p = std::isinf(t) ? 0.0 : 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    rep.summary = {{"t", t}, {"df", k - 1.0}, {"p_value", p}, {"mean_z", mz}};
    return rep;
}

// --- registration perturbation ----------------------------------------------

StudyReport perturbation_study(const CorpusConfig& cfg, const PerturbationOptions& opts)
{
    cfg.validate();
    if (opts.L_values.empty() || opts.trials < 1 || opts.candidate_subbands.empty())
        throw std::invalid_argument("perturbation_study: empty L grid, trials or candidates");
    for (double L : opts.L_values)
        if (!(L >= 0.0))
            throw std::invalid_argument("perturbation_study: L must be >= 0");

    std::vector<PatchTruth> truths;
    std::vector<Acquisition> acqs;
    for (int p = 0; p < cfg.patches; ++p) {
        truths.push_back(make_patch(cfg, p));
        for (int s = 0; s < static_cast<int>(cfg.scanners.size()); ++s)
            for (int r = 0; r < cfg.repeats; ++r)
                acqs.push_back(acquire(cfg, truths.back(), p, s, r));
    }
    Corpus shell;
    shell.config = cfg;
    shell.truths = truths;
    for (const auto& a : acqs)
        shell.ids.push_back({a.patch, a.scanner, a.repeat});
    shell.features.resize(acqs.size());
    const PairDesign pairs = make_pairs(shell, opts.pair_seed);

    const auto features_at = [&](double L, int trial) {
        std::vector<AcquisitionFeatures> out;
        out.reserve(acqs.size());
        for (std::size_t a = 0; a < acqs.size(); ++a) {
            std::array<optics::ScanImage, 4> scans;
            for (int q = 0; q < 4; ++q) {
                const auto& src = acqs[a].scans[static_cast<std::size_t>(q)];
                const bool swap = q % 2 == 1;
                const std::size_t R = swap ? cfg.cols : cfg.rows;
                const std::size_t C = swap ? cfg.rows : cfg.cols;
                const auto truth_corners = registration::block_corners(static_cast<double>(cfg.margin),
                                                                       static_cast<double>(cfg.margin), R, C);
                const auto corners = registration::perturb_corners(
                    truth_corners, L,
                    derive_seed(opts.seed, {0x9E47, static_cast<std::uint64_t>(trial), a, static_cast<std::uint64_t>(q)}));
                scans[static_cast<std::size_t>(q)] = {registration::rectify(src.intensities, corners, R, C),
                                                      src.orientation, src.pixel_pitch};
            }
            out.push_back(extract_features(scans, truths[static_cast<std::size_t>(acqs[a].patch)].normals));
        }
        return out;
    };

    const auto evaluate_subband = [&](const std::vector<AcquisitionFeatures>& feats, int subband) {
        std::vector<Grid> f;
        f.reserve(feats.size());
        for (const auto& a : feats)
            f.push_back(a.feature({reconstruct::FeatureKind::subband, subband}));
        std::vector<double> m, u;
        pair_scores(f, pairs, m, u);
        return closed_form(m, u);
    };

    StudyReport rep;
    rep.name = "perturb";
    rep.seed = opts.seed;
    rep.columns = {"L", "subband", "trials", "mu0", "sigma0", "mu1", "sigma1", "log10_eer_g", "log10_eer_l"};
    rep.config = {{"patches", std::to_string(cfg.patches)},
                  {"acquisitions", std::to_string(acqs.size())},
                  {"corpus_seed", std::to_string(cfg.seed)},
                  {"pair_seed", std::to_string(opts.pair_seed)}};

    int best = opts.candidate_subbands.front();
    std::vector<std::vector<AcquisitionFeatures>> first_level;
    {
        double best_log = INFINITY;
        for (int t = 0; t < opts.trials; ++t)
            first_level.push_back(features_at(opts.L_values.front(), t));
        for (int sb : opts.candidate_subbands) {
            double acc = 0.0;
            for (const auto& feats : first_level)
                acc += evaluate_subband(feats, sb).log10_l;
            if (acc < best_log) {
                best_log = acc;
                best = sb;
            }
        }
    }
    rep.config["subband"] = std::to_string(best);

    for (std::size_t li = 0; li < opts.L_values.size(); ++li) {
        const double L = opts.L_values[li];
        double mu0 = 0, s0 = 0, mu1 = 0, s1 = 0, lg = 0, ll = 0;
        for (int t = 0; t < opts.trials; ++t) {
            const Eers e = li == 0 ? evaluate_subband(first_level[static_cast<std::size_t>(t)], best)
                                   : evaluate_subband(features_at(L, t), best);
            mu0 += e.stats.mu0;
            s0 += e.stats.sigma0;
            mu1 += e.stats.mu1;
            s1 += e.stats.sigma1;
            lg += e.log10_g;
            ll += e.log10_l;
        }
        const double n = opts.trials;
        rep.rows.push_back({L, static_cast<long long>(best), static_cast<long long>(opts.trials), mu0 / n, s0 / n,
                            mu1 / n, s1 / n, lg / n, ll / n});
    }
    return rep;
}

// --- resolution sweep --------------------------------------------------------

StudyReport resolution_study(const synth::HeightMap& source, const std::vector<double>& ppi_values)
{
    if (!(source.pixel_pitch > 0.0))
        throw std::invalid_argument("resolution_study: source pitch must be positive");
    const double src_ppi = 25400.0 / source.pixel_pitch;
    StudyReport rep;
    rep.name = "resolution";
    rep.columns = {"ppi", "pitch_um", "factor", "mean_sin_theta", "std_sin_theta"};
    rep.config = {{"source_ppi", format_real(src_ppi)},
                  {"source_rows", std::to_string(source.heights.rows())},
                  {"source_cols", std::to_string(source.heights.cols())}};
    for (double ppi : ppi_values) {
        if (!(ppi > 0.0))
            throw std::invalid_argument("resolution_study: ppi must be positive");
        if (ppi > src_ppi * (1.0 + 1e-9))
            throw std::invalid_argument("resolution_study: requested ppi is finer than the source");
        const double ratio = src_ppi / ppi;
        const double factor = std::round(ratio);
        if (std::abs(ratio - factor) > 1e-6 * ratio)
            throw std::invalid_argument("resolution_study: ppi must divide the source resolution");
        const auto f = static_cast<std::size_t>(factor);
        const synth::HeightMap working{block_average(source.heights, f), source.pixel_pitch * factor};
        if (working.heights.rows() < 3 || working.heights.cols() < 3)
            throw std::invalid_argument("resolution_study: source too small for the requested ppi");
        const Grid st = synth::sin_theta(synth::normals_from_heightmap(working));
        rep.rows.push_back({ppi, working.pixel_pitch, static_cast<long long>(f), mean(st), stddev(st)});
    }
    return rep;
}

synth::HeightMap resolution_source(std::size_t size, double ppi, std::uint64_t seed)
{
    const double pitch = 25400.0 / ppi;
    return synth::generate_surface(synth::default_fiber_params(size, size, pitch, seed), size, size, pitch);
}

} // namespace paperprint::experiments
