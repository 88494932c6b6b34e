#include "stylemod/critic.hpp"

#include <stdexcept>

namespace stylemod {

ProjectionCritic::ProjectionCritic(const JointEmbedder& embedder, std::uint64_t seed)
    : embedder_(&embedder) {
    if (!embedder.frozen()) throw std::runtime_error("critic requires a frozen embedder backbone");
    Rng rng(seed);
    const int K = embedder.trunk_dim();
    const int hidden = 128;
    const int D = embedder.config().embed_dim;
    head1_ = LinearLayer(params_, "head1", K, hidden, rng);
    head2_ = LinearLayer(params_, "head2", hidden, 1, rng);
    proj_ = params_.add("proj", randn_tensor({D, K}, rng, 1.0 / std::sqrt(static_cast<double>(K))));
}

Var ProjectionCritic::score(const Var& img, const Var& condition) const {
    Var h = embedder_->trunk_features(img);  // [K]
    Var psi = head2_(leaky_relu(head1_(h)));  // [1]
    Var vh = linear(h, proj_, Var{});         // [D]
    return add(psi, dot(condition, vh));
}

double ProjectionCritic::score(const Image& img, const Tensor& condition) const {
    return score(constant(img), constant(condition)).val()[0];
}

Checkpoint ProjectionCritic::to_checkpoint() const {
    Checkpoint ck;
    ck.kind = "critic";
    ck.put_params(params_);
    return ck;
}

void ProjectionCritic::load_params(const Checkpoint& ck) {
    if (ck.kind != "critic") throw std::runtime_error("checkpoint kind mismatch: " + ck.kind);
    ck.fill_params(params_);
}

Var diff_augment(const Var& img, std::uint64_t seed, const DiffAugmentOptions& opts) {
    Rng rng(seed);
    const int C = img.val().shape[0];
    const int H = img.val().shape[1];
    const int W = img.val().shape[2];
    Var x = img;

    auto apply = [&]() { return rng.uniform() < opts.probability; };

    if (apply()) {  // brightness
        double b = (rng.uniform() * 2.0 - 1.0) * opts.brightness;
        x = add_scalar(x, b);
    }
    if (apply()) {  // saturation: interpolate against per-pixel grey
        double s = 1.0 + (rng.uniform() * 2.0 - 1.0) * opts.saturation;
        Var grey = channel_mean_spatial(x);
        x = add(grey, mul_scalar(sub(x, grey), s));
    }
    if (apply()) {  // contrast: interpolate against the image mean
        double c = 1.0 + (rng.uniform() * 2.0 - 1.0) * opts.contrast;
        Var m = mean(x);
        x = bcast_add(mul_scalar(bcast_add(x, neg(m)), c), m);
    }
    if (apply()) {  // translation
        const int max_dy = H * opts.max_shift_num / opts.max_shift_den;
        const int max_dx = W * opts.max_shift_num / opts.max_shift_den;
        int dy = static_cast<int>(rng.uniform_int(-max_dy, max_dy));
        int dx = static_cast<int>(rng.uniform_int(-max_dx, max_dx));
        if (dy != 0 || dx != 0) x = shift2d(x, dy, dx);
    }
    if (apply() && opts.cutout_den > 0) {  // cutout
        const int ch = H / opts.cutout_den;
        const int cw = W / opts.cutout_den;
        int y0 = static_cast<int>(rng.uniform_int(0, H - ch));
        int x0 = static_cast<int>(rng.uniform_int(0, W - cw));
        Tensor mask = Tensor::full({C, H, W}, 1.0);
        for (int c = 0; c < C; ++c)
            for (int y = y0; y < y0 + ch; ++y)
                for (int xx = x0; xx < x0 + cw; ++xx) mask.at3(c, y, xx) = 0.0;
        x = mul(x, constant(std::move(mask)));
    }
    return clamp01(x);
}

AdversarialLosses adversarial_losses(const ProjectionCritic& critic, const std::vector<Var>& real,
                                     const std::vector<Var>& fake,
                                     const std::vector<Var>& conditions, std::uint64_t aug_seed,
                                     const DiffAugmentOptions& opts) {
    if (real.size() != fake.size() || real.size() != conditions.size() || real.empty())
        throw std::runtime_error("adversarial_losses: batch size mismatch");
    std::vector<Var> d_terms, g_terms;
    for (std::size_t i = 0; i < real.size(); ++i) {
        Var xr = diff_augment(real[i], derive_seed(aug_seed, "real", i), opts);
        Var xf = diff_augment(fake[i], derive_seed(aug_seed, "fake", i), opts);
        Var sr = critic.score(xr, conditions[i]);
        Var sf = critic.score(xf, conditions[i]);
        d_terms.push_back(add(softplus_v(neg(sr)), softplus_v(sf)));
        g_terms.push_back(softplus_v(neg(sf)));
    }
    AdversarialLosses out;
    out.d_loss = mean(concat_flat(d_terms));
    out.g_loss = mean(concat_flat(g_terms));
    return out;
}

}  // namespace stylemod
