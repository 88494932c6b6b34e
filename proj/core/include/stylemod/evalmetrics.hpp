#pragma once

#include <functional>
#include <optional>

#include "stylemod/classifiers.hpp"
#include "stylemod/embedder.hpp"

namespace stylemod {

struct GaussianStats {
    Tensor mean;  // [D]
    Tensor cov;   // [D,D], symmetric
    int count = 0;
};

GaussianStats gaussian_stats(const std::vector<Tensor>& features);

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}); diagonals regularized by
// 1e-6 and tiny negative results clamped to 0. This is a Frechet-distance
// analog over the frozen embedder's features, not Inception-based FID.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

GaussianStats embed_stats(const JointEmbedder& e, const std::vector<Image>& images);

struct QualityDiversity {
    double quality = 0.0;    // mean cosine to the domain description embedding
    double diversity = 0.0;  // mean pairwise cosine distance
};
// domain_text empty -> quality computed against the exemplar-image embedding
QualityDiversity quality_diversity(const JointEmbedder& e, const std::vector<Image>& images,
                                   const std::string& domain_text,
                                   const Image* exemplar = nullptr);

double id_similarity(const AttributeClassifiers& feats, const Image& a, const Image& b);

double clip_similarity(const JointEmbedder& e, const Image& a, const Image& b);

// Attribute Manipulation Accuracy. Each probe = (source image, target
// attribute values per slot, -1 for untouched); the edit function maps
// (source, requested caption text) to an output image. Slots whose
// classifier misses the accuracy floor are skipped.
struct AmaProbe {
    Image source;
    std::array<int, kNumSlots> target{};  // -1 = slot not edited
    std::string caption;                  // edit request text
};
struct AmaResult {
    std::array<double, kNumSlots> per_slot{};   // single-attribute accuracy
    std::array<bool, kNumSlots> slot_used{};
    double single = 0.0;    // mean over qualifying slots
    double multiple = 0.0;  // all mentioned attributes must flip
    int multi_probes = 0;
};
using EditFn = std::function<Image(const Image&, const std::string&)>;
AmaResult ama(const AttributeClassifiers& cls, const EditFn& edit_fn,
              const std::vector<AmaProbe>& probes, double accuracy_floor = 0.9);

// (1 - mean |out - in|) * cosine(embed_image(out), embed_text(caption))
double cmp(const JointEmbedder& e, const Image& input_img, const Image& output_img,
           const std::string& caption);

}  // namespace stylemod
