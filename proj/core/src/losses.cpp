#include "stylemod/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace stylemod {

namespace {
double flat_norm(const Tensor& t) {
    double s = 0.0;
    for (double x : t.v) s += x * x;
    return std::sqrt(s);
}

Var one_minus(const Var& x) { return add_scalar(neg(x), 1.0); }
}  // namespace

Var cosine_guarded(const Var& u, const Var& v) {
    const double nu = flat_norm(u.val());
    const double nv = flat_norm(v.val());
    if (nu < 1e-8 || nv < 1e-8) return constant(Tensor::scalar(0.0));
    if (nu * nv < 1e-8) return mul_scalar(dot(u, v), 1e8);
    return mul(dot(u, v), inv_v(sqrt_v(mul(dot(u, u), dot(v, v)))));
}

Var clip_similarity_loss(const Var& c_recon, const Var& c_target) {
    if (flat_norm(c_recon.val()) < 1e-8 || flat_norm(c_target.val()) < 1e-8)
        throw std::runtime_error("clip_similarity_loss: zero-norm embedding");
    return one_minus(dot(c_recon, c_target));
}

DirectionalLossPair directional_losses(AdaptTask task, const JointEmbedder& embedder,
                                       const Var& x_sample, const Var& x_trained,
                                       const Var& x_target, const Var& x_fixed,
                                       const Var& x_recon) {
    Var e_sample = embedder.embed_image(x_sample);
    Var e_trained = embedder.embed_image(x_trained);
    Var e_target = embedder.embed_image(x_target);
    Var e_fixed = embedder.embed_image(x_fixed);

    Var dc_sample = sub(e_trained, e_sample);
    Var dc_fixed = sub(e_target, e_fixed);
    Var dc_source = sub(e_fixed, e_sample);
    Var dc_target;
    if (task == AdaptTask::Reference) {
        if (!x_recon.defined())
            throw std::runtime_error("directional_losses: reference task needs x_recon");
        dc_target = sub(embedder.embed_image(x_recon), e_trained);
    } else {
        dc_target = sub(e_target, e_trained);
    }

    DirectionalLossPair out;
    out.across = one_minus(cosine_guarded(dc_sample, dc_fixed));
    out.within = one_minus(cosine_guarded(dc_source, dc_target));
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out = img;
    const int C = img.shape[0], H = img.shape[1], W = img.shape[2];
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at3(c, y, x) = img.v[(c * H + y) * W + (W - 1 - x)];
    return out;
}

Image color_jitter(const Image& img, std::uint64_t seed) {
    Rng rng(seed);
    const double b = rng.uniform(-0.15, 0.15);
    const double s = rng.uniform(0.7, 1.3);
    const int C = img.shape[0], H = img.shape[1], W = img.shape[2];
    Image out = img;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double grey = 0.0;
            for (int c = 0; c < C; ++c) grey += img.v[(c * H + y) * W + x];
            grey /= C;
            for (int c = 0; c < C; ++c) {
                double v = grey + s * (img.v[(c * H + y) * W + x] - grey) + b;
                out.at3(c, y, x) = std::min(1.0, std::max(0.0, v));
            }
        }
    return out;
}

Var contrastive_adaptation_loss(const JointEmbedder& embedder, const std::vector<Image>& targets,
                                const std::vector<Var>& recons, int k, std::uint64_t aug_seed) {
    const int K = static_cast<int>(targets.size());
    if (K < 2) throw std::runtime_error("contrastive_adaptation_loss: needs K >= 2 domains");
    if (static_cast<int>(recons.size()) != K || k < 0 || k >= K)
        throw std::runtime_error("contrastive_adaptation_loss: bad index or recon count");

    Var e_recon = embedder.embed_image(recons[k]);
    std::vector<Var> logits;
    logits.push_back(dot(constant(embedder.embed_image(targets[k])), e_recon));
    for (int j = 0; j < K; ++j) {
        if (j == k) continue;
        Image aug = targets[j];
        Rng coin(derive_seed(aug_seed, "contrastive-flip", static_cast<std::uint64_t>(j)));
        if (coin.uniform() < 0.5) aug = flip_horizontal(aug);
        aug = color_jitter(aug, derive_seed(aug_seed, "contrastive-jitter", static_cast<std::uint64_t>(j)));
        logits.push_back(dot(constant(embedder.embed_image(aug)), e_recon));
    }
    Var row = reshape(concat_flat(logits), {1, K});
    return softmax_cross_entropy(row, {0});
}

Var identity_loss(const FeatureFn& feature_net, const Var& x_sample, const Var& x_trained) {
    return one_minus(cosine_guarded(feature_net(x_sample), feature_net(x_trained)));
}

ReconstructionLosses reconstruction_losses(const JointEmbedder& embedder, const Var& x_target,
                                           const Var& x_recon) {
    if (x_target.val().shape != x_recon.val().shape)
        throw std::runtime_error("reconstruction_losses: shape mismatch");
    auto rms_dist = [](const Var& a, const Var& b) {
        return sqrt_v(add_scalar(mean(square(sub(a, b))), 1e-16));
    };
    ReconstructionLosses out;
    out.l2 = rms_dist(x_target, x_recon);
    std::vector<Var> ft = embedder.perceptual_features(x_target);
    std::vector<Var> fr = embedder.perceptual_features(x_recon);
    Var acc;
    for (std::size_t i = 0; i < ft.size(); ++i) {
        Var d = rms_dist(ft[i], fr[i]);
        acc = acc.defined() ? add(acc, d) : d;
    }
    out.lpips = acc;
    return out;
}

LossBreakdown total_loss(const LossWeights& w, const LossTerms& terms) {
    struct Entry {
        const char* name;
        const Var* term;
        double weight;
        double* slot;
    };
    LossBreakdown bd;
    const Entry entries[] = {
        {"clip", &terms.clip, w.clip, &bd.clip},
        {"across", &terms.across, w.across, &bd.across},
        {"within", &terms.within, w.within, &bd.within},
        {"cgan", &terms.cgan, w.cgan, &bd.cgan},
        {"contrastive", &terms.contrastive, w.contrastive, &bd.contrastive},
        {"id", &terms.id, w.id, &bd.id},
        {"l2", &terms.l2, w.l2, &bd.l2},
        {"lpips", &terms.lpips, w.lpips, &bd.lpips},
    };
    Var acc;
    for (const Entry& e : entries) {
        if (!e.term->defined()) continue;
        const double v = e.term->val()[0];
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("total_loss: non-finite term: ") + e.name);
        *e.slot = v;
        Var weighted = mul_scalar(*e.term, e.weight);
        acc = acc.defined() ? add(acc, weighted) : weighted;
        bd.total += e.weight * v;
    }
    bd.total_var = acc.defined() ? acc : constant(Tensor::scalar(0.0));
    return bd;
}

}  // namespace stylemod
