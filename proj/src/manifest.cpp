#include "ppdeid/data/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/rng.hpp"

namespace ppdeid {

namespace {
constexpr const char* kModule = "data_pipeline";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    return s;
}

} // namespace

const char* to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

const char* to_string(Race r) {
    switch (r) {
        case Race::black: return "black";
        case Race::white: return "white";
        default: return "other";
    }
}

const char* to_string(AgeBand b) {
    switch (b) {
        case AgeBand::youth: return "youth";
        case AgeBand::middle: return "middle";
        case AgeBand::senior: return "senior";
        default: return "all";
    }
}

AgeBand age_band_of(int age) {
    if (age <= 25) return AgeBand::youth;
    if (age < 40) return AgeBand::middle;
    return AgeBand::senior;
}

std::string to_string(const GroupKey& k) {
    std::string s = to_string(k.race);
    if (k.age_band != AgeBand::all) s += std::string("_") + to_string(k.age_band);
    return s;
}

GroupKey parse_group_key(const std::string& name) {
    GroupKey key;
    std::string n = lower(trim(name));
    auto us = n.find('_');
    std::string race = us == std::string::npos ? n : n.substr(0, us);
    std::string band = us == std::string::npos ? "all" : n.substr(us + 1);
    if (race == "black")
        key.race = Race::black;
    else if (race == "white")
        key.race = Race::white;
    else
        raise(kModule, "UnknownGroup", name);
    if (band == "all")
        key.age_band = AgeBand::all;
    else if (band == "youth")
        key.age_band = AgeBand::youth;
    else if (band == "middle")
        key.age_band = AgeBand::middle;
    else if (band == "senior")
        key.age_band = AgeBand::senior;
    else
        raise(kModule, "UnknownGroup", name);
    return key;
}

ManifestLoadResult load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(kModule, "MissingFile", path);

    std::string header;
    if (!std::getline(in, header)) raise(kModule, "EmptyManifest", path);
    auto cols = split_csv_line(trim(header));
    const std::vector<std::string> expected = {"image_path", "subject_id", "gender", "race", "age"};
    if (cols.size() != expected.size())
        raise(kModule, "SchemaMismatch",
              "expected 5 columns, got " + std::to_string(cols.size()) + " in " + path);
    for (size_t i = 0; i < expected.size(); ++i)
        if (lower(trim(cols[i])) != expected[i])
            raise(kModule, "SchemaMismatch",
                  "column " + std::to_string(i) + " is '" + trim(cols[i]) + "', expected '" +
                      expected[i] + "'");

    const auto base = std::filesystem::path(path).parent_path();
    ManifestLoadResult result;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != expected.size())
            raise(kModule, "SchemaMismatch",
                  "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " fields");
        ManifestRecord rec;
        rec.image_path = trim(fields[0]);
        rec.subject_id = trim(fields[1]);
        std::string gender = lower(trim(fields[2]));
        std::string race = lower(trim(fields[3]));
        std::string age = trim(fields[4]);

        if (rec.subject_id.empty())
            raise(kModule, "SchemaMismatch", "row " + std::to_string(row) + ": empty subject_id");
        if (gender == "male")
            rec.gender = Gender::male;
        else if (gender == "female")
            rec.gender = Gender::female;
        else
            raise(kModule, "SchemaMismatch",
                  "row " + std::to_string(row) + ": bad gender '" + gender + "'");
        if (race == "black")
            rec.race = Race::black;
        else if (race == "white")
            rec.race = Race::white;
        else if (race == "other")
            rec.race = Race::other;
        else
            raise(kModule, "SchemaMismatch",
                  "row " + std::to_string(row) + ": bad race '" + race + "'");
        try {
            rec.age = std::stoi(age);
        } catch (...) {
            raise(kModule, "SchemaMismatch", "row " + std::to_string(row) + ": bad age '" + age + "'");
        }
        if (rec.age < 0)
            raise(kModule, "SchemaMismatch", "row " + std::to_string(row) + ": negative age");

        std::filesystem::path img(rec.image_path);
        if (img.is_relative()) img = base / img;
        rec.image_path = img.string();
        if (!std::filesystem::exists(img)) {
            result.failures.push_back("row " + std::to_string(row) + ": unresolvable image path " +
                                      rec.image_path);
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    if (result.records.empty() && result.failures.empty())
        raise(kModule, "EmptyManifest", path);
    return result;
}

GroupPartition partition_groups(const std::vector<ManifestRecord>& records) {
    if (records.empty()) raise(kModule, "EmptyManifest", "no records to partition");
    GroupPartition part;
    for (Race race : {Race::black, Race::white})
        for (AgeBand band : {AgeBand::all, AgeBand::youth, AgeBand::middle, AgeBand::senior})
            part.groups[{race, band}] = {};

    for (const auto& rec : records) {
        if (rec.gender != Gender::male) continue;
        if (rec.race != Race::black && rec.race != Race::white) continue;
        part.groups[{rec.race, AgeBand::all}].push_back(rec);
        part.groups[{rec.race, age_band_of(rec.age)}].push_back(rec);
    }

    for (const auto& [key, recs] : part.groups) {
        std::set<std::string> subjects;
        for (const auto& r : recs) subjects.insert(r.subject_id);
        if (subjects.size() < 2)
            part.warnings.push_back("group " + to_string(key) + " has " +
                                    std::to_string(subjects.size()) +
                                    " subjects; cannot form positive pairs");
    }
    return part;
}

TrainTestSplit split_train_test(const std::vector<ManifestRecord>& group, double fraction,
                                uint64_t seed) {
    if (group.empty()) raise(kModule, "EmptyGroup", "cannot split an empty group");
    if (fraction <= 0.0 || fraction >= 1.0)
        raise(kModule, "InvalidFraction", std::to_string(fraction));

    std::vector<std::string> subjects;
    for (const auto& r : group)
        if (std::find(subjects.begin(), subjects.end(), r.subject_id) == subjects.end())
            subjects.push_back(r.subject_id);
    if (subjects.size() < 2)
        raise(kModule, "TooFewSubjects",
              "need at least 2 subjects, got " + std::to_string(subjects.size()));

    std::sort(subjects.begin(), subjects.end());
    Rng rng(derive_seed(seed, 0x5117));
    rng.shuffle(subjects);

    size_t n_train = static_cast<size_t>(std::floor(fraction * subjects.size() + 0.5));
    n_train = std::min(n_train, subjects.size() - 1);
    n_train = std::max<size_t>(n_train, 1);

    std::set<std::string> train_subjects(subjects.begin(), subjects.begin() + n_train);
    TrainTestSplit split;
    for (const auto& r : group) {
        if (train_subjects.count(r.subject_id))
            split.train.push_back(r);
        else
            split.test.push_back(r);
    }
    return split;
}

std::vector<RecordPair> sample_pairs(const std::vector<ManifestRecord>& records, int n,
                                     double positive_fraction, uint64_t seed) {
    if (n < 0) raise(kModule, "InvalidArgument", "negative pair count");
    std::map<std::string, std::vector<const ManifestRecord*>> by_subject;
    for (const auto& r : records) by_subject[r.subject_id].push_back(&r);

    std::vector<std::string> subjects;
    std::vector<std::string> multi_image_subjects;
    for (const auto& [id, imgs] : by_subject) {
        subjects.push_back(id);
        if (imgs.size() >= 2) multi_image_subjects.push_back(id);
    }

    const int n_pos = static_cast<int>(std::floor(n * positive_fraction));
    const int n_neg = n - n_pos;
    if (n_pos > 0 && multi_image_subjects.empty())
        raise(kModule, "InfeasiblePositives", "no subject has 2 or more images");
    if (n_neg > 0 && subjects.size() < 2)
        raise(kModule, "TooFewSubjects", "need 2 subjects for negative pairs");

    Rng rng(derive_seed(seed, 0x9a1c5));
    std::vector<RecordPair> pairs;
    pairs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n_pos; ++i) {
        const auto& sid = multi_image_subjects[rng.range_int(0, static_cast<int>(multi_image_subjects.size()))];
        const auto& imgs = by_subject[sid];
        int a = rng.range_int(0, static_cast<int>(imgs.size()));
        int b = rng.range_int(0, static_cast<int>(imgs.size() - 1));
        if (b >= a) ++b;
        pairs.push_back({*imgs[a], *imgs[b], 0});
    }
    for (int i = 0; i < n_neg; ++i) {
        int sa = rng.range_int(0, static_cast<int>(subjects.size()));
        int sb = rng.range_int(0, static_cast<int>(subjects.size() - 1));
        if (sb >= sa) ++sb;
        const auto& imgs_a = by_subject[subjects[sa]];
        const auto& imgs_b = by_subject[subjects[sb]];
        const ManifestRecord* a = imgs_a[rng.range_int(0, static_cast<int>(imgs_a.size()))];
        const ManifestRecord* b = imgs_b[rng.range_int(0, static_cast<int>(imgs_b.size()))];
        pairs.push_back({*a, *b, 1});
    }
    return pairs;
}

} // namespace ppdeid
