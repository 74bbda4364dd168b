#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ppdeid {

/// On-disk checkpoint blob. Layout, all little-endian:
///   magic "PPGN" | u32 format_version | u32 name_len + module_name
///   | u64 config_hash | u64 step | u32 flags (bit0 = frozen)
///   | u32 meta_len + meta (JSON: config snapshot, channel schedule, ...)
///   | u32 array_count | per array: u64 element_count + f32 payload
struct CheckpointBlob {
    uint32_t format_version = 1;
    std::string module_name;
    uint64_t config_hash = 0;
    uint64_t step = 0;
    bool frozen = false;
    std::string meta_json;
    std::vector<std::vector<float>> arrays;
};

void save_checkpoint(const std::string& path, const CheckpointBlob& blob);
CheckpointBlob load_checkpoint(const std::string& path);

} // namespace ppdeid
