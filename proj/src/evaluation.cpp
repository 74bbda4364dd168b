#include "ppdeid/eval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ppdeid/core/error.hpp"
#include "ppdeid/ssim/ssim.hpp"
#include "ppdeid/train/trainer.hpp"

namespace ppdeid {

namespace {
constexpr const char* kModule = "evaluation";

double accuracy_at(const std::vector<ScoredPair>& pairs, const std::vector<int>& idx,
                   double threshold) {
    int correct = 0;
    for (int i : idx) {
        const bool same = pairs[i].distance < threshold;
        if (same == (pairs[i].indicator == 0)) ++correct;
    }
    return idx.empty() ? 0.0 : static_cast<double>(correct) / idx.size();
}

std::vector<double> candidate_thresholds(const std::vector<ScoredPair>& pairs,
                                         const std::vector<int>& idx) {
    std::vector<double> d;
    d.reserve(idx.size());
    for (int i : idx) d.push_back(pairs[i].distance);
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    std::vector<double> mids;
    for (size_t i = 0; i + 1 < d.size(); ++i) mids.push_back(0.5 * (d[i] + d[i + 1]));
    if (mids.empty() && !d.empty()) mids.push_back(d[0]);
    return mids;
}

Embedding<float> embed_one(LightCnn9<float>& net, const GrayImage& img) {
    std::vector<const GrayImage*> one{&img};
    Tensor<float> x = to_tensor(one);
    return net.embed(x, true);
}

} // namespace

ThresholdCalibration calibrate_threshold_from_distances(const std::vector<ScoredPair>& pairs,
                                                        int folds) {
    if (static_cast<int>(pairs.size()) < folds)
        raise(kModule, "TooFewPairs",
              std::to_string(pairs.size()) + " pairs for " + std::to_string(folds) + " folds");
    int positives = 0;
    for (const auto& p : pairs) positives += p.indicator == 0 ? 1 : 0;
    if (positives * 2 != static_cast<int>(pairs.size()))
        raise(kModule, "UnbalancedPairs",
              std::to_string(positives) + " positives in " + std::to_string(pairs.size()) +
                  " pairs");

    ThresholdCalibration cal;
    cal.pair_count = static_cast<int>(pairs.size());
    double threshold_sum = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> held, rest;
        for (int i = 0; i < static_cast<int>(pairs.size()); ++i)
            (i % folds == f ? held : rest).push_back(i);

        double best_theta = 0, best_acc = -1;
        for (double theta : candidate_thresholds(pairs, rest)) {
            const double acc = accuracy_at(pairs, rest, theta);
            if (acc > best_acc) {
                best_acc = acc;
                best_theta = theta;
            }
        }
        threshold_sum += best_theta;
        cal.fold_accuracies.push_back(accuracy_at(pairs, held, best_theta));
    }
    cal.threshold = threshold_sum / folds;
    return cal;
}

std::vector<ScoredPair> score_pairs(LightCnn9<float>& verificator,
                                    const std::vector<PairSample>& pairs) {
    std::vector<ScoredPair> scored;
    scored.reserve(pairs.size());
    for (const auto& p : pairs) {
        Embedding<float> ea = embed_one(verificator, p.a.pixels);
        Embedding<float> eb = embed_one(verificator, p.b.pixels);
        scored.push_back({static_cast<double>(ea.distance(eb)), p.indicator});
    }
    return scored;
}

ThresholdCalibration calibrate_threshold(LightCnn9<float>& verificator,
                                         const std::vector<PairSample>& pairs, int folds) {
    return calibrate_threshold_from_distances(score_pairs(verificator, pairs), folds);
}

double deid_rate_images(LightCnn9<float>& verificator, const std::vector<GrayImage>& originals,
                        const std::vector<GrayImage>& generated, double threshold) {
    if (originals.size() != generated.size())
        raise(kModule, "LabelMismatch", "originals and generated counts differ");
    if (originals.empty()) return 0.0;
    int different = 0;
    for (size_t i = 0; i < originals.size(); ++i) {
        Embedding<float> ea = embed_one(verificator, originals[i]);
        Embedding<float> eb = embed_one(verificator, generated[i]);
        if (!(ea.distance(eb) < threshold)) ++different;
    }
    return 100.0 * different / static_cast<double>(originals.size());
}

double deid_rate(LightCnn9<float>& verificator, const std::vector<GrayImage>& originals,
                 UNetGenerator<float>& generator, double threshold) {
    std::vector<GrayImage> generated = deidentify_batch(generator, originals);
    return deid_rate_images(verificator, originals, generated, threshold);
}

double original_pair_deid_rate(LightCnn9<float>& verificator,
                               const std::vector<PairSample>& positive_pairs, double threshold) {
    int total = 0, different = 0;
    for (const auto& p : positive_pairs) {
        if (p.indicator != 0) continue;
        ++total;
        Embedding<float> ea = embed_one(verificator, p.a.pixels);
        Embedding<float> eb = embed_one(verificator, p.b.pixels);
        if (!(ea.distance(eb) < threshold)) ++different;
    }
    return total == 0 ? 0.0 : 100.0 * different / total;
}

int ids_count(const std::vector<LabeledImage>& generated,
              const std::vector<LabeledImage>& gallery, LightCnn9<float>& verificator,
              double threshold) {
    if (gallery.empty()) raise(kModule, "EmptyInput", "gallery is empty");
    std::vector<Embedding<float>> gallery_emb;
    gallery_emb.reserve(gallery.size());
    for (const auto& g : gallery) gallery_emb.push_back(embed_one(verificator, g.image));

    int switches = 0;
    for (const auto& gen : generated) {
        Embedding<float> e = embed_one(verificator, gen.image);
        for (size_t j = 0; j < gallery.size(); ++j) {
            if (gallery[j].subject_id == gen.subject_id) continue;
            if (e.distance(gallery_emb[j]) < threshold) ++switches;
        }
    }
    return switches;
}

double detection_rate(DetectorAdapter& adapter, const std::vector<GrayImage>& images,
                      int padding) {
    if (padding < 0) raise(kModule, "InvalidArgument", "padding must be >= 0");
    if (images.empty()) return 0.0;
    int detected = 0;
    for (const auto& img : images)
        if (adapter.detect(pad_image(img, padding))) ++detected;
    return static_cast<double>(detected) / static_cast<double>(images.size());
}

double mean_ssim(const std::vector<GrayImage>& originals,
                 const std::vector<GrayImage>& generated) {
    if (originals.size() != generated.size() || originals.empty())
        raise(kModule, "LabelMismatch", "image lists must be non-empty and equal-length");
    double total = 0;
    for (size_t i = 0; i < originals.size(); ++i) total += ssim(originals[i], generated[i]);
    return total / static_cast<double>(originals.size());
}

void write_tradeoff_csv(const std::string& path, const std::vector<TradeoffRun>& runs) {
    std::ofstream out(path);
    if (!out) raise(kModule, "IoError", "cannot write " + path);
    out << "ablation,group,mean_ssim,deid_rate\n";
    char line[256];
    for (const auto& r : runs) {
        std::snprintf(line, sizeof(line), "%s,%s,%.9g,%.9g\n", to_string(r.ablation),
                      r.group.c_str(), r.mean_ssim, r.deid_rate);
        out << line;
    }
}

void montage(const std::vector<GrayImage>& originals, const std::vector<GrayImage>& generated,
             const std::string& path) {
    if (originals.empty()) raise(kModule, "EmptyInput", "no image pairs for the montage");
    if (originals.size() != generated.size())
        raise(kModule, "LabelMismatch", "originals and generated counts differ");
    const int tile_h = originals[0].h, tile_w = originals[0].w;
    GrayImage grid(2 * tile_h, static_cast<int>(originals.size()) * tile_w);
    for (size_t i = 0; i < originals.size(); ++i) {
        for (int y = 0; y < tile_h; ++y)
            for (int x = 0; x < tile_w; ++x) {
                grid.at(y, static_cast<int>(i) * tile_w + x) = originals[i].at(y, x);
                grid.at(tile_h + y, static_cast<int>(i) * tile_w + x) = generated[i].at(y, x);
            }
    }
    write_gray_image(grid, path);
}

} // namespace ppdeid
