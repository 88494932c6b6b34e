#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "stylemod/autodiff.hpp"
#include "stylemod/checkpoint.hpp"
#include "stylemod/nn.hpp"
#include "stylemod/synthdata.hpp"

namespace stylemod {

struct GeneratorConfig {
    int z_dim = 64;
    int base_res = 4;
    int img_size = 32;
    int const_ch = 64;
    // conv output widths; two layers per resolution after the first
    std::vector<int> layer_out = {64, 32, 32, 16, 16, 16, 16};
    int mapping_layers = 3;
    double truncation_psi = 0.7;
    double demod_eps = 1e-8;

    int num_layers() const { return static_cast<int>(layer_out.size()); }
    int layer_in(int i) const { return i == 0 ? const_ch : layer_out[static_cast<std::size_t>(i - 1)]; }
    bool upsample_before(int i) const { return i >= 1 && i % 2 == 1; }
    std::uint64_t hash() const;
};

struct LatentCode {
    Tensor z;
    Tensor w;
    std::vector<Tensor> styles;  // per layer, length C_in(i)
};

// Var-based latent, used when gradients must flow through w (pre-training,
// inversion).
struct LatentVars {
    Var w;
    std::vector<Var> styles;
};

// Per-layer features of one synthesis pass. `frozen` is always populated;
// `modulated` and `injected` only when a hypernetwork condition is active.
struct FeatureTrace {
    std::vector<Var> frozen;
    std::vector<Var> modulated;
    std::vector<Var> injected;
    Var image;  // [3,S,S] in [0,1]
};

// theta'' = (phi * s_cin) / sqrt(sum_{cin,k} (phi*s)^2 + eps), per output row.
Var modulate_demodulate(const Var& phi, const Var& style, double eps = 1e-8);

// Miniature style-based generator: constant input, mapping MLP, per-layer
// style affines, modulated/demodulated 3x3 convs, single toRGB head.
class StyleGenerator {
public:
    StyleGenerator(const GeneratorConfig& config, std::uint64_t seed);

    const GeneratorConfig& config() const { return config_; }

    LatentVars map_latent_v(const Var& z) const;
    LatentCode map_latent(const Tensor& z) const;
    std::vector<Var> styles_from_w(const Var& w) const;

    // frozen-path synthesis (F_i = lrelu(conv(F_{i-1}, demod(phi_i, s_i)) + b_i))
    FeatureTrace forward_frozen(const LatentVars& latent) const;
    Image synthesize(const Tensor& z) const;
    Image synthesize_w(const Tensor& w) const;

    Var to_rgb(const Var& features) const;  // tanh head mapped to [0,1]

    Tensor sample_z(Rng& rng) const;
    Tensor truncate(const Tensor& w, const Tensor& w_mean, double psi) const;

    int num_layers() const { return config_.num_layers(); }
    Var conv_weight(int i) const { return conv_w_[static_cast<std::size_t>(i)]; }
    Var conv_bias(int i) const { return conv_b_[static_cast<std::size_t>(i)]; }
    Var const_input() const { return const_input_; }

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::uint64_t checksum() const { return params_.checksum(); }
    void freeze() { params_.freeze(); }

    Checkpoint to_checkpoint() const;
    static StyleGenerator from_checkpoint(const Checkpoint& ck);

private:
    GeneratorConfig config_;
    ParamSet params_;
    Var const_input_;
    std::vector<LinearLayer> mapping_;
    std::vector<Var> conv_w_, conv_b_;
    std::vector<LinearLayer> style_affine_;
    Var torgb_w_, torgb_b_;
};

// Small conv discriminator for base-distribution pre-training only.
class BaseDiscriminator {
public:
    BaseDiscriminator(int canvas, std::uint64_t seed);
    Var score(const Var& img) const;
    ParamSet& params() { return params_; }

private:
    ParamSet params_;
    ConvLayer c1_, c2_, c3_;
    LinearLayer fc_;
};

struct PretrainConfig {
    int steps = 3000;
    int batch = 8;
    double lr_g = 2e-3;
    double lr_d = 2e-3;
    double r1_gamma = 1.0;
    int r1_interval = 8;
    int collapse_patience = 500;  // consecutive near-zero d_loss steps before abort
    int log_every = 100;
};

struct PretrainResult {
    std::vector<double> g_loss_curve;
    std::vector<double> d_loss_curve;
};

// Non-saturating GAN pre-training on the synthetic base distribution with
// lazy R1 regularization. Throws on discriminator collapse. Optional progress
// callback receives (step, g_loss, d_loss).
PretrainResult pretrain_base(StyleGenerator& gen, BaseDiscriminator& disc,
                             const std::vector<Sample>& dataset, const PretrainConfig& cfg,
                             std::uint64_t seed,
                             const std::function<void(int, double, double)>& progress = {});

}  // namespace stylemod
