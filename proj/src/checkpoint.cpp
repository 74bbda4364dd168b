#include "ppdeid/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/hash.hpp"

namespace ppdeid {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'G', 'N'};
constexpr const char* kModule = "training";

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    // Host is little-endian on every supported target.
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) raise(kModule, "CorruptCheckpoint", "truncated blob");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    uint32_t len = get<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) raise(kModule, "CorruptCheckpoint", "truncated string");
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const CheckpointBlob& blob) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(kModule, "IoError", "cannot open for write: " + path);
    out.write(kMagic, 4);
    put<uint32_t>(out, blob.format_version);
    put_string(out, blob.module_name);
    put<uint64_t>(out, blob.config_hash);
    put<uint64_t>(out, blob.step);
    put<uint32_t>(out, blob.frozen ? 1u : 0u);
    put_string(out, blob.meta_json);
    put<uint32_t>(out, static_cast<uint32_t>(blob.arrays.size()));
    for (const auto& a : blob.arrays) {
        put<uint64_t>(out, a.size());
        out.write(reinterpret_cast<const char*>(a.data()),
                  static_cast<std::streamsize>(a.size() * sizeof(float)));
    }
    if (!out) raise(kModule, "IoError", "write failed: " + path);
}

CheckpointBlob load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(kModule, "MissingFile", path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        raise(kModule, "CorruptCheckpoint", "bad magic in " + path);
    CheckpointBlob blob;
    blob.format_version = get<uint32_t>(in);
    if (blob.format_version != 1)
        raise(kModule, "CorruptCheckpoint",
              "unsupported format_version " + std::to_string(blob.format_version));
    blob.module_name = get_string(in);
    blob.config_hash = get<uint64_t>(in);
    blob.step = get<uint64_t>(in);
    blob.frozen = get<uint32_t>(in) & 1u;
    blob.meta_json = get_string(in);
    const uint32_t count = get<uint32_t>(in);
    blob.arrays.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint64_t len = get<uint64_t>(in);
        blob.arrays[i].resize(len);
        in.read(reinterpret_cast<char*>(blob.arrays[i].data()),
                static_cast<std::streamsize>(len * sizeof(float)));
        if (!in) raise(kModule, "CorruptCheckpoint", "truncated array " + std::to_string(i));
    }
    return blob;
}

} // namespace ppdeid
