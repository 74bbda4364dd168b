#pragma once

#include <string>
#include <vector>

#include "ppdeid/data/image.hpp"
#include "ppdeid/eval/small_cnn.hpp"

namespace ppdeid {

/// Per-attribute classifier (age band, race, ...) trained on original
/// images; applied to generated ones to probe attribute preservation.
class AttributeClassifier {
public:
    AttributeClassifier() = default;
    AttributeClassifier(std::string attribute, std::vector<std::string> class_names,
                        uint64_t seed);

    /// Trains on originals; labels index into class_names.
    void fit(const std::vector<GrayImage>& images, const std::vector<int>& labels, int steps,
             uint64_t seed);

    int predict(const GrayImage& image);
    const std::string& attribute() const { return attribute_; }
    int classes() const { return static_cast<int>(class_names_.size()); }

private:
    std::string attribute_;
    std::vector<std::string> class_names_;
    SmallCnn net_;
};

/// Fraction of images classified into their source attribute class.
double attribute_accuracy(AttributeClassifier& classifier, const std::vector<GrayImage>& images,
                          const std::vector<int>& labels);

} // namespace ppdeid
