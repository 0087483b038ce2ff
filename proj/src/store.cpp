#include "paperprint/store.hpp"

#include <cctype>
#include <filesystem>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "paperprint/match.hpp"

namespace paperprint::store {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kLock = ".lock";

class LockFile
{
public:
    LockFile(const fs::path& path, int op)
    {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0)
            throw io::InvalidInput("cannot open lock file " + path.string());
        if (::flock(fd_, op) != 0) {
            ::close(fd_);
            throw std::runtime_error("cannot lock " + path.string());
        }
    }
    ~LockFile()
    {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    int fd_ = -1;
};

nlohmann::json to_json(const RecordHeader& h)
{
    return {{"patch_id", h.patch_id},   {"feature_kind", h.feature_kind}, {"subband_index", h.subband_index},
            {"file", h.file},           {"sha256", h.sha256},             {"config_digest", h.config_digest},
            {"rows", h.rows},           {"cols", h.cols}};
}

RecordHeader from_json(const nlohmann::json& j)
{
    RecordHeader h;
    h.patch_id = j.at("patch_id").get<std::string>();
    h.feature_kind = j.at("feature_kind").get<std::string>();
    h.subband_index = j.at("subband_index").get<int>();
    h.file = j.at("file").get<std::string>();
    h.sha256 = j.at("sha256").get<std::string>();
    h.config_digest = j.at("config_digest").get<std::string>();
    h.rows = j.at("rows").get<std::size_t>();
    h.cols = j.at("cols").get<std::size_t>();
    return h;
}

std::string manifest_text(const std::vector<RecordHeader>& records)
{
    nlohmann::json j;
    j["store_version"] = FeatureStore::kVersion;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records)
        j["records"].push_back(to_json(r));
    return j.dump(2) + "\n";
}

} // namespace

bool valid_patch_id(const std::string& id)
{
    if (id.empty() || id.size() > 64 || id.front() == '.')
        return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
            return false;
    return true;
}

FeatureStore FeatureStore::open(const std::string& root, bool create)
{
    FeatureStore s;
    s.root_ = root;
    const fs::path dir(root);
    if (!fs::exists(dir / kManifest)) {
        if (!create)
            throw io::InvalidInput("no feature store at " + root);
        std::error_code ec;
        fs::create_directories(dir / "records", ec);
        if (ec)
            throw io::InvalidInput("cannot create store directory " + root + ": " + ec.message());
        const LockFile lock(dir / kLock, LOCK_EX);
        if (!fs::exists(dir / kManifest))
            io::write_file_atomic((dir / kManifest).string(), manifest_text({}));
    }
    s.reload();
    return s;
}

void FeatureStore::reload()
{
    const auto bytes = io::read_file((fs::path(root_) / kManifest).string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
        if (j.at("store_version").get<int>() != kVersion)
            throw io::InvalidInput("unsupported store version");
        records_.clear();
        for (const auto& r : j.at("records"))
            records_.push_back(from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw io::IntegrityError(std::string("store manifest is malformed: ") + e.what());
    }
}

std::optional<RecordHeader> FeatureStore::find(const std::string& patch_id) const
{
    for (const auto& r : records_)
        if (r.patch_id == patch_id)
            return r;
    return std::nullopt;
}

RecordHeader FeatureStore::enroll(const std::string& patch_id, const io::GridFile& feature)
{
    if (!valid_patch_id(patch_id))
        throw io::InvalidInput("invalid patch id '" + patch_id + "'");
    const auto kind = feature.metadata.find("feature_kind");
    if (kind == feature.metadata.end())
        throw io::InvalidInput("feature file has no feature_kind");
    const io::Provenance prov = io::provenance_of(feature);

    const fs::path dir(root_);
    const LockFile lock(dir / kLock, LOCK_EX);
    reload(); // another process may have enrolled since open
    if (find(patch_id))
        throw io::InvalidInput("patch id '" + patch_id + "' is already enrolled");

    io::GridFile rec = feature;
    rec.metadata["patch_id"] = patch_id;
    const auto bytes = io::encode_grid_file(rec);
    RecordHeader h;
    h.patch_id = patch_id;
    h.feature_kind = kind->second;
    const auto sb = feature.metadata.find("subband_index");
    h.subband_index = sb == feature.metadata.end() ? 0 : std::stoi(sb->second);
    h.file = "records/" + patch_id + ".pgrd";
    h.sha256 = io::to_hex(io::sha256(bytes));
    h.config_digest = prov.digest;
    h.rows = feature.grid.rows();
    h.cols = feature.grid.cols();

    io::write_file_atomic((dir / h.file).string(), bytes);
    auto next = records_;
    next.push_back(h);
    io::write_file_atomic((dir / kManifest).string(), manifest_text(next));
    records_ = std::move(next);
    return h;
}

io::GridFile FeatureStore::load(const RecordHeader& h) const
{
    const fs::path path = fs::path(root_) / h.file;
    if (!fs::exists(path))
        throw io::IntegrityError("store record missing: " + h.file);
    const auto bytes = io::read_file(path.string());
    if (io::to_hex(io::sha256(bytes)) != h.sha256)
        throw io::IntegrityError("store record checksum mismatch: " + h.file);
    io::GridFile f = io::decode_grid_file(bytes);
    if (io::provenance_of(f).digest != h.config_digest)
        throw io::IntegrityError("store record digest does not match the manifest: " + h.file);
    if (f.grid.rows() != h.rows || f.grid.cols() != h.cols)
        throw io::IntegrityError("store record shape does not match the manifest: " + h.file);
    return f;
}

void FeatureStore::check() const
{
    for (const auto& r : records_)
        load(r);
}

Match FeatureStore::score(const Grid& feature, const std::string& patch_id) const
{
    const auto h = find(patch_id);
    if (!h)
        throw io::InvalidInput("unknown patch id '" + patch_id + "'");
    const io::GridFile ref = load(*h);
    if (!ref.grid.same_shape(feature))
        throw io::InvalidInput("feature shape does not match record '" + patch_id + "'");
    return {patch_id, match::correlation(ref.grid, feature)};
}

Match FeatureStore::best_match(const Grid& feature) const
{
    if (records_.empty())
        throw io::InvalidInput("feature store is empty");
    Match best{"", -2.0};
    for (const auto& r : records_) {
        const Match m = score(feature, r.patch_id);
        if (m.score > best.score)
            best = m;
    }
    return best;
}

} // namespace paperprint::store
