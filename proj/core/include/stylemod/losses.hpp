#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stylemod/embedder.hpp"
#include "stylemod/image.hpp"

namespace stylemod {

// Guarded cosine: <u,v> / max(|u||v|, 1e-8), defined as 0 when either norm
// is below 1e-8 so the derived losses stay finite on degenerate deltas.
Var cosine_guarded(const Var& u, const Var& v);

// 1 - <c_recon, c_target> for unit-norm embeddings; throws on zero-norm input.
Var clip_similarity_loss(const Var& c_recon, const Var& c_target);

enum class AdaptTask { Adaptation, Reference };

struct DirectionalLossPair {
    Var across;  // 1 - cos(dc_sample, dc_fixed)
    Var within;  // 1 - cos(dc_source, dc_target)
};

// Anchor wiring:
//   dc_sample = E(x_trained) - E(x_sample)   dc_fixed  = E(x_target) - E(x_fixed)
//   dc_source = E(x_fixed)  - E(x_sample)    dc_target = E(x_target) - E(x_trained)
// Adaptation: x_fixed is the truncated inversion of the exemplar; x_recon is
// ignored. Reference: x_fixed is the mean-generator image and x_recon stands
// in for x_target inside dc_target.
DirectionalLossPair directional_losses(AdaptTask task, const JointEmbedder& embedder,
                                       const Var& x_sample, const Var& x_trained,
                                       const Var& x_target, const Var& x_fixed,
                                       const Var& x_recon = {});

// InfoNCE over K domains: positive is (exemplar_k, recon_k); negatives pair
// recon_k against flip/color-jitter augmented exemplars of the other domains.
Var contrastive_adaptation_loss(const JointEmbedder& embedder, const std::vector<Image>& targets,
                                const std::vector<Var>& recons, int k, std::uint64_t aug_seed);

// 1 - cos between frozen feature-net outputs of the two images
using FeatureFn = std::function<Var(const Var&)>;
Var identity_loss(const FeatureFn& feature_net, const Var& x_sample, const Var& x_trained);

struct ReconstructionLosses {
    Var l2;     // sqrt(mean squared pixel difference)
    Var lpips;  // sum over perceptual taps of sqrt(mean squared feature difference)
};
ReconstructionLosses reconstruction_losses(const JointEmbedder& embedder, const Var& x_target,
                                           const Var& x_recon);

struct LossWeights {
    double clip = 30.0;
    double across = 1.5;
    double within = 0.5;
    double cgan = 0.2;
    double contrastive = 1.0;
    double id = 3.0;
    double l2 = 8.0;
    double lpips = 12.0;
};

// Undefined terms count as zero (ablations drop whole terms).
struct LossTerms {
    Var clip, across, within, cgan, contrastive, id, l2, lpips;
};

struct LossBreakdown {
    double clip = 0, across = 0, within = 0, cgan = 0, contrastive = 0, id = 0, l2 = 0, lpips = 0;
    double total = 0;
    Var total_var;  // differentiable weighted sum
};

// Weighted sum; throws naming the offending term if any value is non-finite.
LossBreakdown total_loss(const LossWeights& w, const LossTerms& terms);

// augmentations used by the contrastive negatives (exposed for tests)
Image flip_horizontal(const Image& img);
Image color_jitter(const Image& img, std::uint64_t seed);

}  // namespace stylemod
