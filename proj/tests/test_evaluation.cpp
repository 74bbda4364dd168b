#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ppdeid/core/error.hpp"
#include "ppdeid/data/synthetic.hpp"
#include "ppdeid/eval/attribute.hpp"
#include "ppdeid/eval/evaluation.hpp"

using namespace ppdeid;
namespace fs = std::filesystem;

namespace {

/// Brute-force re-implementation of the k-fold calibration, with its own
/// candidate enumeration and accuracy scan.
ThresholdCalibration brute_force_calibration(const std::vector<ScoredPair>& pairs, int folds) {
    ThresholdCalibration cal;
    cal.pair_count = static_cast<int>(pairs.size());
    double sum = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<const ScoredPair*> rest, held;
        for (int i = 0; i < static_cast<int>(pairs.size()); ++i)
            (i % folds == f ? held : rest).push_back(&pairs[i]);

        std::vector<double> distances;
        for (auto* p : rest) distances.push_back(p->distance);
        std::sort(distances.begin(), distances.end());
        distances.erase(std::unique(distances.begin(), distances.end()), distances.end());
        std::vector<double> candidates;
        for (size_t i = 0; i + 1 < distances.size(); ++i)
            candidates.push_back((distances[i] + distances[i + 1]) / 2.0);
        if (candidates.empty() && !distances.empty()) candidates.push_back(distances[0]);

        auto acc_of = [](const std::vector<const ScoredPair*>& set, double theta) {
            int ok = 0;
            for (auto* p : set)
                if ((p->distance < theta) == (p->indicator == 0)) ++ok;
            return set.empty() ? 0.0 : static_cast<double>(ok) / set.size();
        };
        double best = -1, best_theta = 0;
        for (double theta : candidates) {
            double a = acc_of(rest, theta);
            if (a > best) {
                best = a;
                best_theta = theta;
            }
        }
        sum += best_theta;
        cal.fold_accuracies.push_back(acc_of(held, best_theta));
    }
    cal.threshold = sum / folds;
    return cal;
}

std::vector<ScoredPair> separable_fixture(int n) {
    std::vector<ScoredPair> pairs;
    Rng rng(1);
    for (int i = 0; i < n / 2; ++i) {
        pairs.push_back({rng.uniform(0.05, 0.30), 0});
        pairs.push_back({rng.uniform(0.80, 1.40), 1});
    }
    return pairs;
}

GrayImage face_of(const std::string& id, Race race, AgeBand band, uint64_t seed, int idx) {
    return render_synthetic_face({id, race, band}, seed, idx);
}

struct ConstantDetector : DetectorAdapter {
    bool verdict;
    explicit ConstantDetector(bool v) : verdict(v) {}
    bool detect(const GrayImage&) override { return verdict; }
};

struct RecordingDetector : DetectorAdapter {
    std::vector<std::pair<int, int>> sizes;
    bool detect(const GrayImage& img) override {
        sizes.emplace_back(img.h, img.w);
        return true;
    }
};

struct MeanDetector : DetectorAdapter {
    bool detect(const GrayImage& img) override {
        double m = 0;
        for (float v : img.v) m += v;
        return m / img.v.size() > 0.25;
    }
};

} // namespace

TEST_CASE("calibration: perfectly separable distances give unit fold accuracies") {
    auto pairs = separable_fixture(200);
    ThresholdCalibration cal = calibrate_threshold_from_distances(pairs, 10);
    REQUIRE(cal.fold_accuracies.size() == 10);
    for (double a : cal.fold_accuracies) CHECK(a == doctest::Approx(1.0));
    CHECK(cal.threshold > 0.30);
    CHECK(cal.threshold < 0.80);
    CHECK(cal.pair_count == 200);
}

TEST_CASE("calibration: random labels hover at chance") {
    std::vector<ScoredPair> pairs;
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) pairs.push_back({rng.uniform(0.0, 2.0), i % 2});
    Rng shuffle_rng(8);
    shuffle_rng.shuffle(pairs);
    int positives = 0;
    for (auto& p : pairs) positives += p.indicator == 0;
    REQUIRE(positives == 1000);

    ThresholdCalibration cal = calibrate_threshold_from_distances(pairs, 10);
    double mean = 0;
    for (double a : cal.fold_accuracies) mean += a / 10;
    CHECK(mean > 0.4);
    CHECK(mean < 0.6);
}

TEST_CASE("calibration: equals an independent brute force exactly") {
    Rng rng(17);
    std::vector<ScoredPair> pairs;
    for (int i = 0; i < 100; ++i) {
        pairs.push_back({rng.uniform(0.1, 1.1), 0}); // deliberately overlapping
        pairs.push_back({rng.uniform(0.5, 1.6), 1});
    }
    Rng shuffle_rng(18);
    shuffle_rng.shuffle(pairs);

    ThresholdCalibration a = calibrate_threshold_from_distances(pairs, 10);
    ThresholdCalibration b = brute_force_calibration(pairs, 10);
    CHECK(a.threshold == b.threshold);
    REQUIRE(a.fold_accuracies.size() == b.fold_accuracies.size());
    for (size_t i = 0; i < a.fold_accuracies.size(); ++i)
        CHECK(a.fold_accuracies[i] == b.fold_accuracies[i]);
}

TEST_CASE("calibration: error paths") {
    std::vector<ScoredPair> few = {{0.1, 0}, {0.9, 1}};
    CHECK_THROWS_WITH_AS(calibrate_threshold_from_distances(few, 10),
                         doctest::Contains("TooFewPairs"), Error);

    std::vector<ScoredPair> unbalanced;
    for (int i = 0; i < 30; ++i) unbalanced.push_back({0.5, i % 3 == 0 ? 0 : 1});
    CHECK_THROWS_WITH_AS(calibrate_threshold_from_distances(unbalanced, 10),
                         doctest::Contains("UnbalancedPairs"), Error);
}

TEST_CASE("deid rate: identity generator scores zero and the rate falls as the threshold grows") {
    LightCnn9<float> verif(3, VerificatorSchedule::scaled(0.125));
    std::vector<GrayImage> originals;
    for (int i = 0; i < 4; ++i)
        originals.push_back(face_of("d" + std::to_string(i), Race::black, AgeBand::youth, 2, i));

    CHECK(deid_rate_images(verif, originals, originals, 0.5) == doctest::Approx(0.0));

    std::vector<GrayImage> generated;
    for (int i = 0; i < 4; ++i)
        generated.push_back(face_of("g" + std::to_string(i + 9), Race::white, AgeBand::senior, 3, i));
    const double rate_tight = deid_rate_images(verif, originals, generated, 0.2);
    const double rate_loose = deid_rate_images(verif, originals, generated, 1.9);
    CHECK(rate_tight >= rate_loose);
}

TEST_CASE("ids count: planted switch, vacuous cases and the identity-generator floor") {
    LightCnn9<float> verif(5, VerificatorSchedule::scaled(0.125));
    std::vector<LabeledImage> gallery;
    for (int s = 0; s < 3; ++s)
        for (int i = 0; i < 2; ++i)
            gallery.push_back({"s" + std::to_string(s),
                               face_of("s" + std::to_string(s), Race::black, AgeBand::middle, 4, i)});

    // a generated image that *is* another subject's gallery image
    std::vector<LabeledImage> planted = {{"s0", gallery[2].image}};
    CHECK(ids_count(planted, gallery, verif, 0.5) >= 1);

    CHECK(ids_count({}, gallery, verif, 0.5) == 0);
    CHECK_THROWS_WITH_AS(ids_count(planted, {}, verif, 0.5), doctest::Contains("EmptyInput"),
                         Error);

    // identity generator, threshold below the smallest inter-subject distance
    double min_inter = 1e9;
    for (size_t i = 0; i < gallery.size(); ++i)
        for (size_t j = 0; j < gallery.size(); ++j) {
            if (gallery[i].subject_id == gallery[j].subject_id) continue;
            std::vector<const GrayImage*> a{&gallery[i].image}, b{&gallery[j].image};
            Tensor<float> ta = to_tensor(a), tb = to_tensor(b);
            min_inter = std::min(min_inter,
                                 static_cast<double>(verif.embed(ta, true).distance(verif.embed(tb, true))));
        }
    CHECK(ids_count(gallery, gallery, verif, min_inter * 0.99) == 0);
}

TEST_CASE("detection rate: constant adapter, exact stub fractions, padded geometry") {
    std::vector<GrayImage> images;
    for (int i = 0; i < 5; ++i)
        images.push_back(face_of("p" + std::to_string(i), Race::white, AgeBand::youth, 6, i));

    ConstantDetector always(true);
    CHECK(detection_rate(always, images, 0) == doctest::Approx(1.0));
    ConstantDetector never(false);
    CHECK(detection_rate(never, images, 0) == doctest::Approx(0.0));

    RecordingDetector recorder;
    detection_rate(recorder, images, 50);
    REQUIRE(recorder.sizes.size() == 5);
    for (auto [h, w] : recorder.sizes) {
        CHECK(h == 228);
        CHECK(w == 228);
    }

    MeanDetector mean_stub;
    int expected_unpadded = 0;
    for (const auto& img : images) {
        double m = 0;
        for (float v : img.v) m += v;
        if (m / img.v.size() > 0.25) ++expected_unpadded;
    }
    CHECK(detection_rate(mean_stub, images, 0) ==
          doctest::Approx(static_cast<double>(expected_unpadded) / images.size()));

    CHECK_THROWS_WITH_AS(detection_rate(always, images, -1), doctest::Contains("InvalidArgument"),
                         Error);
}

TEST_CASE("builtin detector: separates faces from shuffled patches on the fixture") {
    std::vector<GrayImage> faces;
    for (int s = 0; s < 6; ++s)
        for (int i = 0; i < 5; ++i)
            faces.push_back(face_of("f" + std::to_string(s),
                                    s % 2 ? Race::white : Race::black,
                                    AgeBand::middle, 7, i));
    auto detector = BuiltinDetector::train(faces, 3);

    int face_hits = 0;
    for (int i = 0; i < 10; ++i)
        if (detector->detect(faces[i])) ++face_hits;
    CHECK(face_hits >= 8);

    int negative_hits = 0;
    for (int i = 0; i < 10; ++i)
        if (detector->detect(shuffle_patches(faces[i], 32, 1000 + i))) ++negative_hits;
    CHECK(negative_hits <= 2);
}

TEST_CASE("attribute accuracy: training-set sanity, permuted-label null, specific vs nonspecific") {
    const std::vector<AgeBand> bands = {AgeBand::youth, AgeBand::middle, AgeBand::senior};
    std::vector<GrayImage> train_images;
    std::vector<int> train_labels;
    for (int s = 0; s < 12; ++s)
        for (int i = 0; i < 6; ++i) {
            train_images.push_back(face_of("a" + std::to_string(s),
                                           s % 2 ? Race::white : Race::black, bands[s % 3], 8, i));
            train_labels.push_back(s % 3);
        }

    AttributeClassifier clf("age_band", {"youth", "middle", "senior"}, 5);
    clf.fit(train_images, train_labels, 400, 6);

    const double train_acc = attribute_accuracy(clf, train_images, train_labels);
    CHECK(train_acc > 0.6); // well above the 1/3 chance floor

    std::vector<int> permuted = train_labels;
    Rng rng(9);
    rng.shuffle(permuted);
    const double null_acc = attribute_accuracy(clf, train_images, permuted);
    CHECK(null_acc > 1.0 / 3 - 0.15);
    CHECK(null_acc < 1.0 / 3 + 0.15);

    // age-specific regeneration preserves the attribute better than
    // band-randomized regeneration
    std::vector<GrayImage> specific, nonspecific;
    std::vector<int> labels;
    Rng band_rng(10);
    for (int s = 0; s < 12; ++s) {
        const int band = s % 3;
        specific.push_back(face_of("z" + std::to_string(s), Race::black, bands[band], 11, 0));
        nonspecific.push_back(face_of("z" + std::to_string(s), Race::black,
                                      bands[band_rng.range_int(0, 3)], 11, 0));
        labels.push_back(band);
    }
    const double specific_acc = attribute_accuracy(clf, specific, labels);
    const double nonspecific_acc = attribute_accuracy(clf, nonspecific, labels);
    CHECK(specific_acc >= nonspecific_acc);

    std::vector<int> short_labels = {0};
    CHECK_THROWS_WITH_AS(attribute_accuracy(clf, specific, short_labels),
                         doctest::Contains("LabelMismatch"), Error);
}

TEST_CASE("tradeoff csv: one row per run, stable header") {
    const std::string path = "/tmp/ppdeid_tradeoff_test.csv";
    write_tradeoff_csv(path, {{Ablation::cgan_sim_verif, "black_youth", 97.5, 0.61}});
    std::ifstream in(path);
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    const bool more = static_cast<bool>(std::getline(in, extra)) && !extra.empty();
    CHECK(header == "ablation,group,mean_ssim,deid_rate");
    CHECK(row == "cgan_sim_verif,black_youth,0.61,97.5");
    CHECK_FALSE(more);
    fs::remove(path);
}

TEST_CASE("montage: 2xN tile layout with exact pixel copies") {
    std::vector<GrayImage> originals, generated;
    for (int i = 0; i < 5; ++i) {
        originals.push_back(face_of("m" + std::to_string(i), Race::black, AgeBand::youth, 12, i));
        generated.push_back(face_of("n" + std::to_string(i), Race::white, AgeBand::senior, 13, i));
    }
    const std::string path = "/tmp/ppdeid_montage_test.png";
    montage(originals, generated, path);
    GrayImage grid = read_gray_image(path);
    fs::remove(path);
    CHECK(grid.h == 2 * kFaceSize);
    CHECK(grid.w == 5 * kFaceSize);

    for (int k = 0; k < 5; ++k) {
        double max_err = 0;
        for (int y = 0; y < kFaceSize; ++y)
            for (int x = 0; x < kFaceSize; ++x)
                max_err = std::max(max_err,
                                   std::abs(static_cast<double>(grid.at(kFaceSize + y, k * kFaceSize + x)) -
                                            generated[k].at(y, x)));
        CHECK(max_err <= 0.5 / 255 + 1e-6);
    }

    CHECK_THROWS_WITH_AS(montage({}, {}, path), doctest::Contains("EmptyInput"), Error);
}

TEST_CASE("eval report: json and csv emission") {
    EvalReport report;
    report.group = "black_youth";
    report.ablation = Ablation::cgan_sim_verif;
    report.config_hash = 0xabcdef;
    report.threshold = 0.8;
    report.deid_rate_test = 95.0;
    report.ids_count = 0;
    report.mean_ssim = 0.66;
    report.attribute_accuracy["age_band"] = 0.9;

    const std::string json_path = "/tmp/ppdeid_report_test.json";
    const std::string csv_path = "/tmp/ppdeid_report_test.csv";
    write_report_json(json_path, report);
    write_report_csv(csv_path, report);

    std::ifstream jin(json_path);
    std::string text((std::istreambuf_iterator<char>(jin)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"deid_rate_test\": 95.0") != std::string::npos);
    CHECK(text.find("black_youth") != std::string::npos);

    std::ifstream cin(csv_path);
    std::string header;
    std::getline(cin, header);
    CHECK(header == "metric,value");
    fs::remove(json_path);
    fs::remove(csv_path);
}
