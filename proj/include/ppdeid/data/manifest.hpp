#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppdeid/data/image.hpp"

namespace ppdeid {

enum class Gender { male, female };
enum class Race { black, white, other };
enum class AgeBand { youth, middle, senior, all };

const char* to_string(Gender g);
const char* to_string(Race r);
const char* to_string(AgeBand b);

/// youth: age <= 25, middle: 25 < age < 40, senior: age >= 40.
AgeBand age_band_of(int age);

struct ManifestRecord {
    std::string image_path;
    std::string subject_id;
    Gender gender = Gender::male;
    Race race = Race::other;
    int age = 0;
};

struct GroupKey {
    Race race = Race::black;
    AgeBand age_band = AgeBand::all;

    bool operator<(const GroupKey& o) const {
        if (race != o.race) return race < o.race;
        return age_band < o.age_band;
    }
    bool operator==(const GroupKey& o) const {
        return race == o.race && age_band == o.age_band;
    }
};

std::string to_string(const GroupKey& k);
/// Parses names like "black_youth", "white", "white_senior".
GroupKey parse_group_key(const std::string& name);

struct ManifestLoadResult {
    std::vector<ManifestRecord> records;
    /// (row index, path, reason) for rows whose image file could not be
    /// resolved; reported rather than silently dropped.
    std::vector<std::string> failures;
};

/// CSV with header `image_path,subject_id,gender,race,age`. Relative
/// image paths resolve against the manifest's directory.
ManifestLoadResult load_manifest(const std::string& path);

struct GroupPartition {
    std::map<GroupKey, std::vector<ManifestRecord>> groups;
    /// Groups with fewer than 2 subjects (no positive pairs possible).
    std::vector<std::string> warnings;
};

/// The 8 groups: {black, white} x {all, youth, middle, senior}. Only
/// male records participate; race `other` is excluded.
GroupPartition partition_groups(const std::vector<ManifestRecord>& records);

struct TrainTestSplit {
    std::vector<ManifestRecord> train;
    std::vector<ManifestRecord> test;
};

/// Subject-level split: no subject appears on both sides.
TrainTestSplit split_train_test(const std::vector<ManifestRecord>& group,
                                double fraction, uint64_t seed);

struct PairSample {
    FaceImage a;
    FaceImage b;
    int indicator = 0; // 0 = same subject, 1 = different subjects
};

/// Pair of manifest records plus the contrastive indicator; images are
/// materialized lazily by the caller.
struct RecordPair {
    ManifestRecord a;
    ManifestRecord b;
    int indicator = 0;
};

/// Exactly floor(n * positive_fraction) positives, remainder negatives.
std::vector<RecordPair> sample_pairs(const std::vector<ManifestRecord>& records,
                                     int n, double positive_fraction, uint64_t seed);

} // namespace ppdeid
