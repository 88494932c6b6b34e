#pragma once

#include "stylemod/checkpoint.hpp"
#include "stylemod/embedder.hpp"

namespace stylemod {

// Embedding-conditioned projection critic: score = psi(h(x)) + <c, V h(x)>
// with h the frozen embedder image trunk and only the head layers trainable.
class ProjectionCritic {
public:
    ProjectionCritic(const JointEmbedder& embedder, std::uint64_t seed);

    Var score(const Var& img, const Var& condition) const;
    double score(const Image& img, const Tensor& condition) const;

    ParamSet& params() { return params_; }  // heads only; backbone lives in the embedder
    const ParamSet& params() const { return params_; }

    Checkpoint to_checkpoint() const;
    void load_params(const Checkpoint& ck);

private:
    const JointEmbedder* embedder_;
    ParamSet params_;
    LinearLayer head1_, head2_;  // psi
    Var proj_;                   // V: [D, K]
};

struct DiffAugmentOptions {
    double probability = 1.0;  // per-op apply probability; 0 disables everything
    int max_shift_num = 1;     // translation up to max_shift_num/max_shift_den of the side
    int max_shift_den = 8;     // i.e. +-12.5%
    double brightness = 0.2;
    double saturation = 0.5;
    double contrast = 0.3;
    int cutout_den = 4;  // cutout square side = canvas/cutout_den
};

// Random translation, color jitter (brightness/saturation/contrast) and
// cutout, all differentiable w.r.t. the image; deterministic given seed.
Var diff_augment(const Var& img, std::uint64_t seed, const DiffAugmentOptions& opts = {});

// Non-saturating logistic losses with augmentation applied to both real and
// fake. Separate seeds per call site keep the augmentation streams aligned
// between the two losses.
struct AdversarialLosses {
    Var d_loss;
    Var g_loss;
};
AdversarialLosses adversarial_losses(const ProjectionCritic& critic,
                                     const std::vector<Var>& real,
                                     const std::vector<Var>& fake,
                                     const std::vector<Var>& conditions,
                                     std::uint64_t aug_seed,
                                     const DiffAugmentOptions& opts = {});

}  // namespace stylemod
