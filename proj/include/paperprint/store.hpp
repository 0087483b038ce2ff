#pragma once

#include <optional>
#include <string>
#include <vector>

#include "paperprint/io.hpp"

namespace paperprint::store {

/// Manifest entry of one enrolled feature.
struct RecordHeader
{
    std::string patch_id;
    std::string feature_kind; ///< FeatureSpec::to_string()
    int subband_index = 0;    ///< 0 unless the kind is a subband
    std::string file;         ///< relative to the store root
    std::string sha256;       ///< of the record file bytes
    std::string config_digest;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct Match
{
    std::string patch_id;
    double score = 0.0;
};

/// Directory store: manifest.json plus records/<patch_id>.pgrd. Every change
/// writes the record, then the manifest, each by atomic rename, under an
/// exclusive lock file, so an interrupted enroll leaves the previous manifest
/// in force.
class FeatureStore
{
public:
    static constexpr int kVersion = 1;

    /// Opens an existing store; with create, initializes an empty one.
    static FeatureStore open(const std::string& root, bool create = false);

    const std::string& root() const { return root_; }
    const std::vector<RecordHeader>& records() const { return records_; }
    std::optional<RecordHeader> find(const std::string& patch_id) const;

    /// Adds a record; the feature file must carry provenance and a
    /// feature_kind entry. Throws InvalidInput for a duplicate id.
    RecordHeader enroll(const std::string& patch_id, const io::GridFile& feature);

    /// Loads a record after checking its file checksum and provenance.
    io::GridFile load(const RecordHeader& h) const;

    /// Every listed file exists and verifies; throws IntegrityError otherwise.
    void check() const;

    /// Correlation against one record, or the best over all records.
    Match score(const Grid& feature, const std::string& patch_id) const;
    Match best_match(const Grid& feature) const;

private:
    std::string root_;
    std::vector<RecordHeader> records_;

    void reload();
};

/// Patch ids are 1 to 64 characters of [A-Za-z0-9._-], not starting with '.'.
bool valid_patch_id(const std::string& id);

} // namespace paperprint::store
