#pragma once

#include <cstdint>
#include <string>

#include "ppdeid/data/image.hpp"
#include "ppdeid/data/manifest.hpp"

namespace ppdeid {

/// Procedural 128x128 "face": parametric ellipse head with eyes, brows,
/// nose and mouth. Geometry is a deterministic function of subject_id;
/// per-image jitter (shift, scale, brightness, noise) is a deterministic
/// function of (seed, image index). Stands in for real face data, which
/// is not redistributable.
struct SyntheticFaceSpec {
    std::string subject_id;
    Race race = Race::black;     // drives base skin tone
    AgeBand age_band = AgeBand::youth; // drives face aspect + wrinkle count
};

GrayImage render_synthetic_face(const SyntheticFaceSpec& spec, uint64_t seed,
                                int image_index);

struct SyntheticDatasetOptions {
    int subjects = 10;
    int per_subject = 20;
    uint64_t seed = 1;
};

/// Writes `<out_dir>/sXX_YY.png` images plus `<out_dir>/manifest.csv`
/// (schema `image_path,subject_id,gender,race,age`). Returns the
/// manifest path. Byte-deterministic for identical options.
std::string generate_synthetic_dataset(const std::string& out_dir,
                                       const SyntheticDatasetOptions& options);

} // namespace ppdeid
