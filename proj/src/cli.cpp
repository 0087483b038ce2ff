#include "paperprint/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "paperprint/corpus.hpp"
#include "paperprint/experiments.hpp"
#include "paperprint/io.hpp"
#include "paperprint/normmap.hpp"
#include "paperprint/optics.hpp"
#include "paperprint/reconstruct.hpp"
#include "paperprint/rng.hpp"
#include "paperprint/store.hpp"
#include "paperprint/synth.hpp"

namespace paperprint::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Reads typed values from a JSON object, remembering which keys were used
/// so that misspelled keys are rejected instead of silently ignored.
class Params
{
public:
    explicit Params(json j) : j_(std::move(j))
    {
        if (!j_.is_object())
            throw io::InvalidInput("config must be a JSON object");
    }

    template <typename T>
    T get(const std::string& key, T fallback)
    {
        used_.insert(key);
        if (!j_.contains(key))
            return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw io::InvalidInput("config key '" + key + "' has the wrong type");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    json raw(const std::string& key)
    {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k))
                throw io::InvalidInput("unknown config key '" + k + "'");
    }

private:
    json j_;
    std::set<std::string> used_;
};

json load_config(const std::string& path)
{
    if (path.empty())
        return json::object();
    const auto bytes = io::read_file(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw io::InvalidInput(path + ": invalid JSON: " + e.what());
    }
}

std::uint64_t fresh_seed()
{
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string real(double v)
{
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

io::GridFile with_provenance(Grid g, const io::Provenance& prov, std::map<std::string, std::string> md)
{
    io::GridFile f{std::move(g), std::move(md)};
    f.metadata["config"] = io::canonical_json(prov.config);
    f.metadata["config_digest"] = prov.digest;
    return f;
}

double pitch_of(const io::GridFile& f)
{
    const auto it = f.metadata.find("pixel_pitch");
    if (it == f.metadata.end())
        throw io::InvalidInput("grid file has no pixel_pitch");
    return std::stod(it->second);
}

std::string meta(const io::GridFile& f, const std::string& key)
{
    const auto it = f.metadata.find(key);
    if (it == f.metadata.end())
        throw io::InvalidInput("grid file has no '" + key + "' entry");
    return it->second;
}

void require_stage(const io::Provenance& p, const std::string& stage, const std::string& path)
{
    if (p.config.value("stage", "") != stage)
        throw io::InvalidInput(path + ": expected a '" + stage + "' artifact, got '" +
                               p.config.value("stage", "?") + "'");
}

std::string store_dir(const std::string& given)
{
    if (!given.empty())
        return given;
    if (const char* env = std::getenv("PAPERPRINT_STORE"))
        return env;
    throw io::InvalidInput("no store given (use --store or PAPERPRINT_STORE)");
}

// --- stages --------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_path, std::ostream& out)
{
    Params p(load_config(config_path));
    const auto rows = p.get<std::size_t>("rows", 200);
    const auto cols = p.get<std::size_t>("cols", 200);
    const double pitch = p.get<double>("pixel_pitch", 84.7);
    const std::uint64_t seed = p.has("seed") ? p.get<std::uint64_t>("seed", 0) : fresh_seed();
    synth::FiberModelParams fp = synth::default_fiber_params(rows, cols, pitch, seed);
    fp.fiber_count = p.get<int>("fiber_count", fp.fiber_count);
    fp.fiber_width_um = p.get<double>("fiber_width_um", fp.fiber_width_um);
    fp.fiber_length_um = p.get<double>("fiber_length_um", fp.fiber_length_um);
    fp.ridge_height_um = p.get<double>("ridge_height_um", fp.ridge_height_um);
    fp.noise_floor_um = p.get<double>("noise_floor_um", fp.noise_floor_um);
    fp.formation_contrast = p.get<double>("formation_contrast", fp.formation_contrast);
    fp.formation_scale_um = p.get<double>("formation_scale_um", fp.formation_scale_um);
    p.finish();

    synth::HeightMap hm;
    try {
        hm = synth::generate_surface(fp, rows, cols, pitch);
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }
    const json params = {{"rows", rows},
                         {"cols", cols},
                         {"pixel_pitch", pitch},
                         {"seed", seed},
                         {"fiber_count", fp.fiber_count},
                         {"fiber_width_um", fp.fiber_width_um},
                         {"fiber_length_um", fp.fiber_length_um},
                         {"ridge_height_um", fp.ridge_height_um},
                         {"noise_floor_um", fp.noise_floor_um},
                         {"formation_contrast", fp.formation_contrast},
                         {"formation_scale_um", fp.formation_scale_um}};
    const auto prov = io::make_provenance("synth", params, {});
    io::write_grid_file(out_path, with_provenance(hm.heights, prov,
                                                  {{"pixel_pitch", real(pitch)},
                                                   {"units", "um"},
                                                   {"source", "synth"},
                                                   {"seed", std::to_string(seed)}}));
    out << out_path << " seed=" << seed << " digest=" << prov.digest << "\n";
    return kOk;
}

int cmd_scan(const std::string& in_path, const std::string& config_path, const std::string& prefix, std::ostream& out)
{
    const io::GridFile surface = io::read_grid_file(in_path);
    const io::Provenance up = io::provenance_of(surface);
    require_stage(up, "synth", in_path);

    Params p(load_config(config_path));
    optics::ScannerGeometry geom;
    geom.light_span_near = p.get<double>("light_span_near", geom.light_span_near);
    geom.light_offset_y = p.get<double>("light_offset_y", geom.light_offset_y);
    geom.light_offset_z = p.get<double>("light_offset_z", geom.light_offset_z);
    const double v_cx = p.get<double>("v_cx", 0.0);
    geom.sensor_dir = optics::ScannerGeometry::tilted_sensor_dir(v_cx);
    optics::ReflectanceParams refl;
    refl.w_d = p.get<double>("w_d", refl.w_d);
    refl.w_s = p.get<double>("w_s", refl.w_s);
    refl.k_e = p.get<double>("k_e", refl.k_e);
    const double blur_along = p.get<double>("blur_along", 1.0);
    const double blur_across = p.get<double>("blur_across", 0.5);
    const double noise = p.get<double>("noise_std", 0.09);
    const std::uint64_t seed = p.has("seed") ? p.get<std::uint64_t>("seed", 0) : fresh_seed();
    const auto orientations = p.get<std::vector<int>>("orientations", {0, 90, 180, 270});
    p.finish();
    try {
        geom.validate();
        refl.validate();
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }

    // Sensor noise is keyed to the surface too, so one scan seed never
    // produces shared noise across different surfaces.
    const std::uint64_t surface_key = std::stoull(up.digest.substr(0, 16), nullptr, 16);
    const double pitch = pitch_of(surface);
    const NormalField normals = synth::normals_from_heightmap({surface.grid, pitch});
    for (int deg : orientations) {
        const int q = quarter_turns_from_degrees(deg);
        const json params = {{"light_span_near", geom.light_span_near},
                             {"light_offset_y", geom.light_offset_y},
                             {"light_offset_z", geom.light_offset_z},
                             {"v_cx", v_cx},
                             {"w_d", refl.w_d},
                             {"w_s", refl.w_s},
                             {"k_e", refl.k_e},
                             {"blur_along", blur_along},
                             {"blur_across", blur_across},
                             {"noise_std", noise},
                             {"seed", seed},
                             {"orientation", deg}};
        const auto prov = io::make_provenance("scan", params, {up});
        const optics::ScanImage clean = optics::render_scan(normals, geom, refl, deg);
        const optics::ScanImage scan = synth::degrade_scan(clean, blur_along, blur_across, noise,
                                                           derive_seed(seed, {0x5CA9, surface_key, static_cast<std::uint64_t>(q)}));
        const std::string path = prefix + "_" + std::to_string(deg) + ".pgrd";
        io::write_grid_file(path, with_provenance(scan.intensities, prov,
                                                  {{"pixel_pitch", real(pitch)},
                                                   {"units", "intensity"},
                                                   {"source", "scan"},
                                                   {"seed", std::to_string(seed)},
                                                   {"orientation", std::to_string(deg)},
                                                   {"upstream_digest", up.digest}}));
        out << path << "\n";
    }
    return kOk;
}

int cmd_estimate(const std::vector<std::string>& inputs, const std::string& prefix, std::ostream& out)
{
    std::vector<optics::ScanImage> scans;
    std::vector<io::Provenance> provs;
    std::string upstream;
    for (const auto& path : inputs) {
        const io::GridFile f = io::read_grid_file(path);
        const io::Provenance p = io::provenance_of(f);
        require_stage(p, "scan", path);
        const std::string up = meta(f, "upstream_digest");
        if (p.config.at("inputs").size() != 1 || io::config_digest(p.config.at("inputs").at(0)) != up)
            throw io::IntegrityError(path + ": upstream digest does not match the embedded upstream config");
        if (upstream.empty())
            upstream = up;
        else if (up != upstream)
            throw io::IntegrityError("scans come from different surfaces: " + path + " has upstream " + up +
                                     ", expected " + upstream);
        scans.push_back({f.grid, std::stoi(meta(f, "orientation")), pitch_of(f)});
        provs.push_back(p);
    }
    normmap::NormMap nm;
    try {
        nm = normmap::estimate_normmap(scans);
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }
    const auto prov = io::make_provenance("estimate", json::object(), provs);
    const std::string pitch = real(scans.front().pixel_pitch);
    for (const auto& [name, grid] : {std::pair{"x", &nm.nx_scaled}, std::pair{"y", &nm.ny_scaled}}) {
        const std::string path = prefix + "_n" + name + ".pgrd";
        io::write_grid_file(path, with_provenance(*grid, prov,
                                                  {{"pixel_pitch", pitch},
                                                   {"units", "scaled"},
                                                   {"source", "estimate"},
                                                   {"seed", "none"},
                                                   {"component", name}}));
        out << path << "\n";
    }
    return kOk;
}

int cmd_reconstruct(const std::string& nx_path, const std::string& ny_path, const std::string& reference_path,
                    double alpha_given, const std::string& out_path, std::ostream& out)
{
    const io::GridFile fx = io::read_grid_file(nx_path);
    const io::GridFile fy = io::read_grid_file(ny_path);
    const io::Provenance px = io::provenance_of(fx);
    const io::Provenance py = io::provenance_of(fy);
    require_stage(px, "estimate", nx_path);
    if (px.digest != py.digest)
        throw io::IntegrityError("norm map components come from different estimates");
    if (meta(fx, "component") != "x" || meta(fy, "component") != "y")
        throw io::InvalidInput("expected the x component first and the y component second");

    const normmap::NormMap nm{fx.grid, fy.grid, normmap::MapSource::scanner};
    double alpha = alpha_given;
    std::vector<io::Provenance> inputs{px};
    if (!reference_path.empty()) {
        const io::GridFile ref = io::read_grid_file(reference_path);
        const io::Provenance pr = io::provenance_of(ref);
        require_stage(pr, "synth", reference_path);
        if (!ref.grid.same_shape(fx.grid))
            throw io::InvalidInput("reference surface shape differs from the norm map");
        const NormalField rn = synth::normals_from_heightmap({ref.grid, pitch_of(ref)});
        alpha = normmap::estimate_alpha(nm, normmap::normmap_from_normals(rn));
        inputs.push_back(pr);
    } else if (!(alpha > 0.0)) {
        throw io::InvalidInput("reconstruct needs --reference or a positive --alpha");
    }

    normmap::Completion comp = normmap::complete_z(nm, alpha);
    comp.normals.pixel_pitch = pitch_of(fx);
    const synth::HeightMap hm = reconstruct::integrate_surface(comp.normals);
    const auto prov = io::make_provenance("reconstruct", {{"alpha", alpha}}, inputs);
    io::write_grid_file(out_path, with_provenance(hm.heights, prov,
                                                  {{"pixel_pitch", real(hm.pixel_pitch)},
                                                   {"units", "um"},
                                                   {"source", "reconstruct"},
                                                   {"seed", "none"},
                                                   {"alpha", real(alpha)},
                                                   {"clamped", std::to_string(comp.clamped)}}));
    out << out_path << " alpha=" << real(alpha) << " clamped=" << comp.clamped << "\n";
    return kOk;
}

int cmd_feature(const std::string& in_path, const std::string& kind, const std::string& out_path, std::ostream& out)
{
    const io::GridFile f = io::read_grid_file(in_path);
    const io::Provenance up = io::provenance_of(f);
    const std::string stage = up.config.value("stage", "");
    if (stage != "reconstruct" && stage != "synth")
        throw io::InvalidInput(in_path + ": features are computed from heightmaps");
    reconstruct::FeatureSpec spec;
    try {
        spec = reconstruct::FeatureSpec::parse(kind);
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }
    const Grid g = reconstruct::feature_from_heightmap({f.grid, pitch_of(f)}, spec);
    const auto prov = io::make_provenance("feature", {{"kind", spec.to_string()}}, {up});
    std::map<std::string, std::string> md{{"pixel_pitch", meta(f, "pixel_pitch")},
                                          {"units", "feature"},
                                          {"source", "feature"},
                                          {"seed", "none"},
                                          {"feature_kind", spec.to_string()}};
    if (spec.kind == reconstruct::FeatureKind::subband)
        md["subband_index"] = std::to_string(spec.subband);
    io::write_grid_file(out_path, with_provenance(g, prov, md));
    out << out_path << "\n";
    return kOk;
}

// --- store ------------------------------------------------------------------

int cmd_enroll(const std::string& dir, const std::string& id, const std::string& feature_path, std::ostream& out)
{
    const io::GridFile f = io::read_grid_file(feature_path);
    require_stage(io::provenance_of(f), "feature", feature_path);
    auto st = store::FeatureStore::open(store_dir(dir), true);
    const auto h = st.enroll(id, f);
    out << "enrolled " << h.patch_id << " " << h.feature_kind << " " << h.config_digest << "\n";
    return kOk;
}

double threshold_from_stats(const std::string& path, const std::string& kind)
{
    const json j = load_config(path);
    try {
        if (j.contains("mu0") && j.contains("mu1"))
            return 0.5 * (j.at("mu0").get<double>() + j.at("mu1").get<double>());
        const json& s = j.at("summary");
        return 0.5 * (s.at(kind + ".mu0").get<double>() + s.at(kind + ".mu1").get<double>());
    } catch (const json::exception&) {
        throw io::InvalidInput(path + ": no calibrated mu0/mu1 for feature " + kind);
    }
}

int cmd_verify(const std::string& dir, const std::string& id, const std::string& feature_path,
               std::optional<double> threshold, const std::string& stats_path, std::ostream& out)
{
    const io::GridFile f = io::read_grid_file(feature_path);
    require_stage(io::provenance_of(f), "feature", feature_path);
    const std::string kind = meta(f, "feature_kind");
    const auto st = store::FeatureStore::open(store_dir(dir));
    double thr = 0.0;
    if (threshold)
        thr = *threshold;
    else if (!stats_path.empty())
        thr = threshold_from_stats(stats_path, kind);
    else if (fs::exists(fs::path(st.root()) / "stats.json"))
        thr = threshold_from_stats((fs::path(st.root()) / "stats.json").string(), kind);
    else
        throw io::InvalidInput("no threshold: give --threshold, --stats or a store stats.json");

    const store::Match m = id.empty() ? st.best_match(f.grid) : st.score(f.grid, id);
    if (const auto h = st.find(m.patch_id); h && h->feature_kind != kind)
        throw io::InvalidInput("feature kind " + kind + " does not match record kind " + h->feature_kind);
    const bool accept = m.score >= thr;
    json r = {{"decision", accept ? "accept" : "reject"},
              {"patch_id", m.patch_id},
              {"score", m.score},
              {"threshold", thr}};
    out << r.dump() << "\n";
    return accept ? kOk : kReject;
}

int cmd_report(const std::string& dir, bool check, std::ostream& out)
{
    const auto st = store::FeatureStore::open(store_dir(dir));
    if (check)
        st.check();
    out << "patch_id,feature_kind,subband_index,rows,cols,config_digest\r\n";
    for (const auto& r : st.records())
        out << r.patch_id << "," << r.feature_kind << "," << r.subband_index << "," << r.rows << "," << r.cols << ","
            << r.config_digest << "\r\n";
    return kOk;
}

// --- experiments ------------------------------------------------------------

experiments::CorpusConfig corpus_config(Params& p, std::uint64_t seed)
{
    experiments::CorpusConfig c;
    c.patches = p.get<int>("patches", c.patches);
    c.repeats = p.get<int>("repeats", c.repeats);
    c.rows = p.get<std::size_t>("rows", c.rows);
    c.cols = p.get<std::size_t>("cols", c.cols);
    c.margin = p.get<std::size_t>("margin", c.margin);
    c.pixel_pitch = p.get<double>("pixel_pitch", c.pixel_pitch);
    c.formation_contrast = p.get<double>("formation_contrast", c.formation_contrast);
    c.warp_height_um = p.get<double>("warp_height_um", c.warp_height_um);
    c.reflectance.w_s = p.get<double>("w_s", c.reflectance.w_s);
    if (p.has("scanners")) {
        c.scanners.clear();
        for (const auto& s : p.raw("scanners")) {
            Params sp(s);
            experiments::ScannerProfile prof;
            prof.blur_along = sp.get<double>("blur_along", prof.blur_along);
            prof.blur_across = sp.get<double>("blur_across", prof.blur_across);
            prof.noise_std = sp.get<double>("noise_std", prof.noise_std);
            prof.noise_gain_contrast = sp.get<double>("noise_gain_contrast", prof.noise_gain_contrast);
            sp.finish();
            c.scanners.push_back(prof);
        }
    }
    c.seed = seed;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }
    return c;
}

reconstruct::FeatureSpec feature_spec(Params& p)
{
    try {
        return reconstruct::FeatureSpec::parse(p.get<std::string>("feature", "subband:2"));
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }
}

std::vector<Grid> corpus_features(const experiments::Corpus& c, const reconstruct::FeatureSpec& spec)
{
    std::vector<Grid> f;
    f.reserve(c.features.size());
    for (const auto& a : c.features)
        f.push_back(a.feature(spec));
    return f;
}

experiments::StudyReport run_study(const std::string& name, Params& p, std::uint64_t seed)
{
    using namespace experiments;
    const auto pair_seed = p.get<std::uint64_t>("pair_seed", 7);
    if (name == "specular") {
        SpecularAblationOptions o;
        o.n_fields = p.get<int>("n_fields", o.n_fields);
        o.rows = p.get<std::size_t>("rows", o.rows);
        o.cols = p.get<std::size_t>("cols", o.cols);
        o.w_s_values = p.get<std::vector<double>>("w_s_values", o.w_s_values);
        o.v_cx_values = p.get<std::vector<double>>("v_cx_values", o.v_cx_values);
        o.seed = seed;
        p.finish();
        return specular_ablation(o);
    }
    if (name == "resolution") {
        const auto size = p.get<std::size_t>("source_size", 2400);
        const double src_ppi = p.get<double>("source_ppi", 4800.0);
        const auto ppi = p.get<std::vector<double>>("ppi_values", {150, 200, 300, 400, 600, 800, 1200});
        p.finish();
        auto rep = resolution_study(resolution_source(size, src_ppi, seed), ppi);
        rep.seed = seed;
        return rep;
    }
    if (name == "perturb") {
        PerturbationOptions o;
        o.L_values = p.get<std::vector<double>>("L_values", o.L_values);
        o.trials = p.get<int>("trials", o.trials);
        o.candidate_subbands = p.get<std::vector<int>>("candidate_subbands", o.candidate_subbands);
        o.seed = p.get<std::uint64_t>("perturb_seed", 1);
        o.pair_seed = pair_seed;
        const auto cfg = corpus_config(p, seed);
        p.finish();
        auto rep = perturbation_study(cfg, o);
        rep.seed = seed;
        return rep;
    }
    if (name != "blocks" && name != "residual" && name != "features" && name != "covariance")
        throw io::InvalidInput("unknown study '" + name +
                               "' (expected specular, blocks, residual, covariance, perturb, resolution or features)");

    const auto spec = feature_spec(p);
    BlockCutOptions bo;
    bo.max_cuts = p.get<int>("max_cuts", bo.max_cuts);
    const auto edges = p.get<std::vector<std::size_t>>("block_edges", {50, 100, 200});
    const auto cfg = corpus_config(p, seed);
    p.finish();
    const Corpus corpus = build_corpus(cfg);
    const PairDesign pairs = make_pairs(corpus, pair_seed);
    StudyReport rep;
    if (name == "features") {
        std::vector<reconstruct::FeatureSpec> specs;
        for (const char* k : {"norm_map_x", "norm_map_y", "heightmap", "detrended", "subband:1", "subband:2",
                              "subband:3", "subband:4", "subband:5", "subband:6"})
            specs.push_back(reconstruct::FeatureSpec::parse(k));
        rep = feature_study(corpus, pairs, specs);
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const std::string k = std::get<std::string>(rep.rows[i][0]);
            rep.summary[k + ".mu0"] = rep.number(i, "mu0");
            rep.summary[k + ".mu1"] = rep.number(i, "mu1");
        }
    } else if (name == "blocks") {
        rep = block_cut_study(corpus_features(corpus, spec), pairs, bo);
    } else if (name == "residual") {
        const auto f = corpus_features(corpus, spec);
        rep = residual_study(f, pairs.matched, edges);
    } else {
        std::vector<std::vector<std::array<double, 4>>> tables;
        for (int sb = 2; sb <= 4; ++sb) {
            auto f = corpus_features(corpus, {reconstruct::FeatureKind::subband, sb});
            std::vector<std::array<double, 4>> t;
            for (const auto& [i, j] : pairs.matched)
                t.push_back(quadrant_correlations(f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>(j)]));
            tables.push_back(std::move(t));
        }
        rep = subblock_covariance_test(tables, Hypothesis::matched);
    }
    rep.seed = seed;
    rep.config["corpus_seed"] = std::to_string(cfg.seed);
    rep.config["pair_seed"] = std::to_string(pair_seed);
    rep.config["feature"] = spec.to_string();
    return rep;
}

int cmd_experiment(const std::string& name, const std::string& config_path, std::optional<std::uint64_t> seed_arg,
                   const std::string& out_dir, std::ostream& out)
{
    json cfg = load_config(config_path);
    Params p(cfg);
    std::uint64_t seed = p.get<std::uint64_t>("seed", name == "resolution" ? 5 : 2024);
    if (seed_arg)
        seed = *seed_arg;
    experiments::StudyReport rep;
    try {
        rep = run_study(name, p, seed);
    } catch (const std::invalid_argument& e) {
        throw io::InvalidInput(e.what());
    }
    rep.config["config_digest"] = io::config_digest(cfg);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw io::InvalidInput("cannot create " + out_dir + ": " + ec.message());
    const std::string csv = (fs::path(out_dir) / (name + ".csv")).string();
    const std::string man = (fs::path(out_dir) / (name + ".manifest.json")).string();
    io::write_file_atomic(csv, rep.to_csv());
    io::write_file_atomic(man, rep.manifest_json());
    out << csv << "\n" << man << "\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    if (const char* fault = std::getenv("PAPERPRINT_FAULT")) {
        const std::string stage = fault;
        io::set_fault_hook([stage](std::string_view at) {
            if (at == stage)
                std::_Exit(86);
        });
    }

    CLI::App app{"Paper surface fingerprinting: synthesis, scanning, features and verification", "paperprint"};
    app.require_subcommand(1);

    std::string config, out_path, in_path, prefix, store_path, id, feature, kind, nx, ny, reference, stats, out_dir;
    std::vector<std::string> inputs;
    double alpha = 0.0;
    std::optional<double> threshold;
    std::optional<std::uint64_t> seed;
    bool check = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic surface heightmap");
    synth->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
    synth->add_option("--out", out_path, "Output grid file")->required();

    auto* scan = app.add_subcommand("scan", "Simulate orientation scans of a surface");
    scan->add_option("--in", in_path, "Surface grid file")->required();
    scan->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
    scan->add_option("--out-prefix", prefix, "Output prefix; writes <prefix>_<deg>.pgrd")->required();

    auto* estimate = app.add_subcommand("estimate", "Estimate the norm map from four orientation scans");
    estimate->add_option("--in", inputs, "Scan grid files")->required()->expected(4);
    estimate->add_option("--out-prefix", prefix, "Output prefix; writes <prefix>_nx/_ny.pgrd")->required();

    auto* recon = app.add_subcommand("reconstruct", "Complete normals and integrate to a heightmap");
    recon->add_option("--nx", nx, "x component file")->required();
    recon->add_option("--ny", ny, "y component file")->required();
    recon->add_option("--reference", reference, "Reference surface for scale recovery");
    recon->add_option("--alpha", alpha, "Known scale factor");
    recon->add_option("--out", out_path, "Output heightmap")->required();

    auto* feat = app.add_subcommand("feature", "Compute a feature map from a heightmap");
    feat->add_option("--in", in_path, "Heightmap grid file")->required();
    feat->add_option("--kind", kind, "norm_map_x|norm_map_y|heightmap|detrended|subband:<n>")->required();
    feat->add_option("--out", out_path, "Output feature file")->required();

    auto* enroll = app.add_subcommand("enroll", "Add a reference feature to a store");
    enroll->add_option("--store", store_path, "Store directory (default $PAPERPRINT_STORE)");
    enroll->add_option("--id", id, "Patch id")->required();
    enroll->add_option("--feature", feature, "Feature file")->required();

    auto* verify = app.add_subcommand("verify", "Score a test feature against a store");
    verify->add_option("--store", store_path, "Store directory (default $PAPERPRINT_STORE)");
    verify->add_option("--id", id, "Compare with this record only");
    verify->add_option("--feature", feature, "Test feature file")->required();
    verify->add_option("--threshold", threshold, "Decision threshold");
    verify->add_option("--stats", stats, "JSON with calibrated mu0/mu1");

    auto* report = app.add_subcommand("report", "List store records as CSV");
    report->alias("list");
    report->add_option("--store", store_path, "Store directory (default $PAPERPRINT_STORE)");
    report->add_flag("--check", check, "Verify every record checksum");

    auto* experiment = app.add_subcommand("experiment", "Run a study and write CSV plus manifest");
    std::string study;
    experiment->add_option("study", study, "specular|blocks|residual|covariance|perturb|resolution|features")
        ->required();
    experiment->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
    experiment->add_option("--seed", seed, "Seed (overrides the config)");
    experiment->add_option("--out-dir", out_dir, "Output directory")->default_val(".");

    std::vector<const char*> argv{"paperprint"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kInvalidInput;
    }

    try {
        if (*synth)
            return cmd_synth(config, out_path, out);
        if (*scan)
            return cmd_scan(in_path, config, prefix, out);
        if (*estimate)
            return cmd_estimate(inputs, prefix, out);
        if (*recon)
            return cmd_reconstruct(nx, ny, reference, alpha, out_path, out);
        if (*feat)
            return cmd_feature(in_path, kind, out_path, out);
        if (*enroll)
            return cmd_enroll(store_path, id, feature, out);
        if (*verify)
            return cmd_verify(store_path, id, feature, threshold, stats, out);
        if (*report)
            return cmd_report(store_path, check, out);
        if (*experiment)
            return cmd_experiment(study, config, seed, out_dir, out);
    } catch (const io::IntegrityError& e) {
        err << "integrity failure: " << e.what() << "\n";
        return kIntegrityFailure;
    } catch (const io::InvalidInput& e) {
        err << "invalid input: " << e.what() << "\n";
        return kInvalidInput;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kInvalidInput;
    } catch (const std::out_of_range& e) {
        err << "invalid input: " << e.what() << "\n";
        return kInvalidInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kInvalidInput;
}

} // namespace paperprint::cli
