#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppdeid/data/manifest.hpp"
#include "ppdeid/eval/detector.hpp"
#include "ppdeid/gan/generator.hpp"
#include "ppdeid/train/config.hpp"
#include "ppdeid/verif/verificator.hpp"

namespace ppdeid {

struct ThresholdCalibration {
    double threshold = 0;
    std::vector<double> fold_accuracies;
    int pair_count = 0;
};

struct ScoredPair {
    double distance = 0;
    int indicator = 0; // 0 = same subject, 1 = different subjects
};

/// Distance-level k-fold calibration: per fold, the threshold maximizing
/// verification accuracy on the remaining folds (candidates are the
/// midpoints of sorted unique distances, exhaustively scanned; ties take
/// the smallest candidate) is evaluated on the held-out fold; the
/// returned threshold is the mean of the fold-optimal thresholds.
/// Folds are assigned round-robin in input order.
ThresholdCalibration calibrate_threshold_from_distances(const std::vector<ScoredPair>& pairs,
                                                        int folds = 10);

/// Embeds both sides of every pair (L2-normalized) and calibrates on the
/// resulting distances. Pairs must be 50/50 balanced.
ThresholdCalibration calibrate_threshold(LightCnn9<float>& verificator,
                                         const std::vector<PairSample>& pairs, int folds = 10);

std::vector<ScoredPair> score_pairs(LightCnn9<float>& verificator,
                                    const std::vector<PairSample>& pairs);

/// Percentage of (x, x_hat) pairs judged *different* by the verificator
/// at the given threshold.
double deid_rate_images(LightCnn9<float>& verificator, const std::vector<GrayImage>& originals,
                        const std::vector<GrayImage>& generated, double threshold);

/// Runs the generator (deterministic mode) and measures the rate.
double deid_rate(LightCnn9<float>& verificator, const std::vector<GrayImage>& originals,
                 UNetGenerator<float>& generator, double threshold);

/// "Original Test" floor: rate at which original same-subject pairs are
/// (mistakenly) judged different.
double original_pair_deid_rate(LightCnn9<float>& verificator,
                               const std::vector<PairSample>& positive_pairs, double threshold);

struct LabeledImage {
    std::string subject_id;
    GrayImage image;
};

/// Identification switches: generated images matching a *different*
/// subject's gallery image under the threshold.
int ids_count(const std::vector<LabeledImage>& generated,
              const std::vector<LabeledImage>& gallery, LightCnn9<float>& verificator,
              double threshold);

/// Zero-pads each image by `padding` on all sides, runs the adapter,
/// returns the detected fraction.
double detection_rate(DetectorAdapter& adapter, const std::vector<GrayImage>& images,
                      int padding);

double mean_ssim(const std::vector<GrayImage>& originals, const std::vector<GrayImage>& generated);

struct TradeoffRun {
    Ablation ablation;
    std::string group;
    double deid_rate = 0;
    double mean_ssim = 0;
};

/// CSV with header `ablation,group,mean_ssim,deid_rate` (the Fig.-6
/// axes), one row per run, in input order.
void write_tradeoff_csv(const std::string& path, const std::vector<TradeoffRun>& runs);

/// Two-row grid (originals on top, generated below) written as PNG.
void montage(const std::vector<GrayImage>& originals, const std::vector<GrayImage>& generated,
             const std::string& path);

/// Full per-group metric bundle.
struct EvalReport {
    std::string group;
    Ablation ablation = Ablation::cgan_sim_verif;
    uint64_t config_hash = 0;
    double threshold = 0;
    double original_deid_rate = 0; // floor reference, percent
    double deid_rate_train = 0;    // percent
    double deid_rate_test = 0;     // percent
    int ids_count = 0;
    double detection_rate_original_unpadded = 0;
    double detection_rate_original_padded = 0;
    double detection_rate_deid_unpadded = 0;
    double detection_rate_deid_padded = 0;
    std::map<std::string, double> attribute_accuracy;
    double mean_ssim = 0;
};

void write_report_json(const std::string& path, const EvalReport& report);
void write_report_csv(const std::string& path, const EvalReport& report);

} // namespace ppdeid
