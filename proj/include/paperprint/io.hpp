#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "paperprint/grid.hpp"

namespace paperprint::io {

/// Malformed or unusable input (exit code 2 at the command line).
class InvalidInput : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Checksum, digest or manifest inconsistency (exit code 3).
class IntegrityError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Compact JSON with object keys in lexicographic order; the digest input.
std::string canonical_json(const nlohmann::json& j);
std::string config_digest(const nlohmann::json& config);

/// Binary grid container, all integers little-endian:
///   "PGRD" | u16 version | u32 rows | u32 cols | u8 dtype (8 = f64) |
///   u8 byte order (0 = LE) | u32 metadata length | metadata |
///   rows*cols f64 row-major | SHA-256 of all preceding bytes.
/// Metadata is UTF-8 "key=value\n" lines sorted by key.
struct GridFile
{
    static constexpr std::uint16_t kVersion = 1;
    static constexpr std::size_t kFixedHeader = 4 + 2 + 4 + 4 + 1 + 1 + 4;

    Grid grid;
    std::map<std::string, std::string> metadata;

    bool operator==(const GridFile&) const = default;
};

std::vector<std::uint8_t> encode_grid_file(const GridFile& f);
/// Throws InvalidInput on a malformed header and IntegrityError on a
/// checksum mismatch or truncated payload.
GridFile decode_grid_file(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
GridFile read_grid_file(const std::string& path);
void write_grid_file(const std::string& path, const GridFile& f);

/// Called at named points of write_file_atomic ("temp_written" after the
/// temporary file is synced, before the rename). Used for crash testing.
using FaultHook = std::function<void(std::string_view stage)>;
void set_fault_hook(FaultHook hook);

/// Writes to a unique temporary file in the target directory, fsyncs it,
/// renames it over path and fsyncs the directory.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, std::string_view text);

/// Stage provenance stored in GridFile metadata: "config" holds the canonical
/// JSON of {stage, params, inputs}, "config_digest" its SHA-256.
struct Provenance
{
    nlohmann::json config;
    std::string digest;
};

Provenance make_provenance(const std::string& stage, const nlohmann::json& params,
                           const std::vector<Provenance>& inputs);
/// Parses and checks the embedded config against its digest.
Provenance provenance_of(const GridFile& f);

} // namespace paperprint::io
