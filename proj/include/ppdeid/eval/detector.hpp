#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ppdeid/data/image.hpp"
#include "ppdeid/eval/small_cnn.hpp"

namespace ppdeid {

/// Pluggable face detector. Implementations must be deterministic for
/// identical input bytes.
class DetectorAdapter {
public:
    virtual ~DetectorAdapter() = default;
    virtual bool detect(const GrayImage& image) = 0;
};

/// Default adapter: a small binary face/non-face classifier trained on
/// the evaluation set's originals versus shuffled-patch negatives.
class BuiltinDetector : public DetectorAdapter {
public:
    /// Trains the classifier; deterministic given (faces, seed).
    static std::unique_ptr<BuiltinDetector> train(const std::vector<GrayImage>& faces,
                                                  uint64_t seed);

    bool detect(const GrayImage& image) override;

private:
    SmallCnn net_;
};

/// External-process adapter. Wire contract: the detector executable is
/// invoked with a PNG path as its single argument and answers with one
/// JSON line `{"face": true|false}` on stdout (exit status 0/1 is the
/// fallback verdict).
class ProcessDetector : public DetectorAdapter {
public:
    explicit ProcessDetector(std::string executable, std::string scratch_dir = "");
    bool detect(const GrayImage& image) override;

private:
    std::string executable_;
    std::string scratch_dir_;
    uint64_t counter_ = 0;
};

/// Shuffled-patch negative used for detector training: the image cut
/// into a grid of blocks and deterministically permuted.
GrayImage shuffle_patches(const GrayImage& img, int block, uint64_t seed);

} // namespace ppdeid
