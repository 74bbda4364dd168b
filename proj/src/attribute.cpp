#include "ppdeid/eval/attribute.hpp"

#include "ppdeid/core/error.hpp"

namespace ppdeid {

AttributeClassifier::AttributeClassifier(std::string attribute,
                                         std::vector<std::string> class_names, uint64_t seed)
    : attribute_(std::move(attribute)),
      class_names_(std::move(class_names)),
      net_(static_cast<int>(class_names_.size()), seed) {}

void AttributeClassifier::fit(const std::vector<GrayImage>& images,
                              const std::vector<int>& labels, int steps, uint64_t seed) {
    if (images.size() != labels.size())
        raise("evaluation", "LabelMismatch",
              std::to_string(images.size()) + " images vs " + std::to_string(labels.size()) +
                  " labels");
    std::vector<const GrayImage*> ptrs;
    for (const auto& img : images) ptrs.push_back(&img);
    net_.fit(ptrs, labels, steps, 16, 1e-3, seed);
}

int AttributeClassifier::predict(const GrayImage& image) { return net_.predict(image); }

double attribute_accuracy(AttributeClassifier& classifier, const std::vector<GrayImage>& images,
                          const std::vector<int>& labels) {
    if (images.size() != labels.size())
        raise("evaluation", "LabelMismatch",
              std::to_string(images.size()) + " images vs " + std::to_string(labels.size()) +
                  " labels");
    if (images.empty()) return 0.0;
    int hits = 0;
    for (size_t i = 0; i < images.size(); ++i)
        if (classifier.predict(images[i]) == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

} // namespace ppdeid
