#include "paperprint/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <fcntl.h>
#include <unistd.h>

#include <openssl/evp.h>

namespace paperprint::io {

namespace {

static_assert(std::endian::native == std::endian::little, "GridFile I/O assumes a little-endian host");

FaultHook& fault_hook()
{
    static FaultHook hook;
    return hook;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v)
{
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t at)
{
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
    return static_cast<T>(v);
}

std::string encode_metadata(const std::map<std::string, std::string>& md)
{
    std::string out;
    for (const auto& [k, v] : md) {
        if (k.empty() || k.find_first_of("=\n") != std::string::npos)
            throw InvalidInput("GridFile: invalid metadata key '" + k + "'");
        if (v.find('\n') != std::string::npos)
            throw InvalidInput("GridFile: metadata value for '" + k + "' contains a newline");
        out += k + "=" + v + "\n";
    }
    return out;
}

std::map<std::string, std::string> decode_metadata(std::string_view text)
{
    std::map<std::string, std::string> md;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        if (nl == std::string_view::npos)
            throw InvalidInput("GridFile: unterminated metadata line");
        const std::string_view line = text.substr(0, nl);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw InvalidInput("GridFile: malformed metadata line");
        md.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
        text.remove_prefix(nl + 1);
    }
    return md;
}

void fsync_path(const std::string& path, int flags)
{
    const int fd = ::open(path.c_str(), flags);
    if (fd < 0)
        return;
    ::fsync(fd);
    ::close(fd);
}

} // namespace

Digest sha256(std::span<const std::uint8_t> bytes)
{
    Digest d{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 || len != d.size())
        throw std::runtime_error("sha256: digest computation failed");
    return d;
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += kDigits[b >> 4];
        out += kDigits[b & 0xF];
    }
    return out;
}

std::string sha256_hex(std::string_view text)
{
    const auto d = sha256({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    return to_hex(d);
}

std::string canonical_json(const nlohmann::json& j)
{
    // nlohmann::json stores objects in std::map, so dump() is key-sorted.
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string config_digest(const nlohmann::json& config)
{
    return sha256_hex(canonical_json(config));
}

std::vector<std::uint8_t> encode_grid_file(const GridFile& f)
{
    if (f.grid.rows() > 0xFFFFFFFFu || f.grid.cols() > 0xFFFFFFFFu)
        throw InvalidInput("GridFile: grid too large");
    const std::string md = encode_metadata(f.metadata);
    std::vector<std::uint8_t> out;
    out.reserve(GridFile::kFixedHeader + md.size() + f.grid.size() * 8 + 32);
    out.insert(out.end(), {'P', 'G', 'R', 'D'});
    put_le<std::uint16_t>(out, GridFile::kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.cols()));
    out.push_back(8);
    out.push_back(0);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(md.size()));
    out.insert(out.end(), md.begin(), md.end());
    for (double v : f.grid.values())
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    const Digest d = sha256(out);
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

GridFile decode_grid_file(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < GridFile::kFixedHeader + 32)
        throw IntegrityError("GridFile: file truncated");
    if (std::memcmp(bytes.data(), "PGRD", 4) != 0)
        throw InvalidInput("GridFile: bad magic");
    const auto body = bytes.first(bytes.size() - 32);
    const Digest d = sha256(body);
    if (std::memcmp(d.data(), bytes.data() + body.size(), 32) != 0)
        throw IntegrityError("GridFile: checksum mismatch");

    const auto version = get_le<std::uint16_t>(bytes, 4);
    if (version != GridFile::kVersion)
        throw InvalidInput("GridFile: unsupported version " + std::to_string(version));
    const auto rows = get_le<std::uint32_t>(bytes, 6);
    const auto cols = get_le<std::uint32_t>(bytes, 10);
    if (bytes[14] != 8)
        throw InvalidInput("GridFile: unsupported dtype");
    if (bytes[15] != 0)
        throw InvalidInput("GridFile: unsupported byte order");
    const auto md_len = get_le<std::uint32_t>(bytes, 16);
    const std::size_t payload = static_cast<std::size_t>(rows) * cols * 8;
    if (GridFile::kFixedHeader + md_len + payload != body.size())
        throw IntegrityError("GridFile: payload length does not match the header");

    GridFile f;
    f.metadata = decode_metadata(
        {reinterpret_cast<const char*>(bytes.data() + GridFile::kFixedHeader), static_cast<std::size_t>(md_len)});
    std::vector<double> values(static_cast<std::size_t>(rows) * cols);
    const std::size_t base = GridFile::kFixedHeader + md_len;
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, base + 8 * i));
    f.grid = Grid(rows, cols, std::move(values));
    return f;
}

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidInput("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GridFile read_grid_file(const std::string& path)
{
    try {
        return decode_grid_file(read_file(path));
    } catch (const IntegrityError& e) {
        throw IntegrityError(path + ": " + e.what());
    } catch (const InvalidInput& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

void write_grid_file(const std::string& path, const GridFile& f)
{
    write_file_atomic(path, encode_grid_file(f));
}

void set_fault_hook(FaultHook hook)
{
    fault_hook() = std::move(hook);
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    std::random_device rd;
    const fs::path tmp = dir / ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                                std::to_string(rd()));

    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd < 0)
        throw InvalidInput("cannot create " + tmp.string());
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            ::close(fd);
            ::unlink(tmp.c_str());
            throw std::runtime_error("write failed for " + tmp.string());
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        ::unlink(tmp.c_str());
        throw std::runtime_error("fsync failed for " + tmp.string());
    }
    if (fault_hook())
        fault_hook()("temp_written");
    if (::rename(tmp.c_str(), target.c_str()) != 0) {
        ::unlink(tmp.c_str());
        throw InvalidInput("cannot rename into " + path);
    }
    fsync_path(dir.string(), O_RDONLY | O_DIRECTORY);
}

void write_file_atomic(const std::string& path, std::string_view text)
{
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                          text.size()));
}

Provenance make_provenance(const std::string& stage, const nlohmann::json& params,
                           const std::vector<Provenance>& inputs)
{
    nlohmann::json cfg;
    cfg["stage"] = stage;
    cfg["params"] = params;
    cfg["inputs"] = nlohmann::json::array();
    for (const auto& in : inputs)
        cfg["inputs"].push_back(in.config);
    return {cfg, config_digest(cfg)};
}

Provenance provenance_of(const GridFile& f)
{
    const auto c = f.metadata.find("config");
    const auto d = f.metadata.find("config_digest");
    if (c == f.metadata.end() || d == f.metadata.end())
        throw IntegrityError("GridFile: missing config provenance");
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(c->second);
    } catch (const nlohmann::json::exception&) {
        throw IntegrityError("GridFile: embedded config is not valid JSON");
    }
    const std::string digest = config_digest(cfg);
    if (digest != d->second)
        throw IntegrityError("GridFile: embedded config does not match its digest");
    return {cfg, digest};
}

} // namespace paperprint::io
