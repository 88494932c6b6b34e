#pragma once

#include "stylemod/checkpoint.hpp"
#include "stylemod/embedder.hpp"
#include "stylemod/stylegen.hpp"

namespace stylemod {

struct HyperConfig {
    int embed_dim = 128;
    bool hidden_layer = false;  // optional hidden layer in the heads; off by default
    int hidden_dim = 64;
    // feeds the injected features F'_{i-1} (instead of the frozen F_{i-1})
    // to the modulated branch; ablation reading, off by default
    bool modulated_input_injected = false;
    bool modulate_torgb = false;  // toRGB heads are left unmodulated by default

    std::uint64_t hash() const;
};

// Per-layer modulation parameters predicted from a delta embedding.
struct ModulationParams {
    std::vector<Var> delta_phi;  // [O,C,3,3] per layer
    std::vector<Var> delta;      // [O] per layer, parameterized as 1 + head output
};

// Per conv layer, two affine heads: a weight-offset head mapping the delta
// embedding to a full conv-weight offset, and a channel-scale head mapping it
// to per-output-channel scales. Zero-initialized so the modulated branch
// starts as the plain demodulated generator.
class HyperNetworkBank {
public:
    HyperNetworkBank(const GeneratorConfig& gen_cfg, const HyperConfig& cfg, std::uint64_t seed);

    const HyperConfig& config() const { return config_; }

    ModulationParams predict(const Var& delta_embedding) const;
    ModulationParams predict(const DeltaClip& dc) const;

    // closed-form parameter count D*(|phi_i| + C_out(i)) plus biases, for the
    // default affine heads
    static std::int64_t expected_param_count(const GeneratorConfig& gen_cfg,
                                             const HyperConfig& cfg);

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    Checkpoint to_checkpoint(std::uint64_t generator_hash) const;
    static HyperNetworkBank from_checkpoint(const Checkpoint& ck, const GeneratorConfig& gen_cfg,
                                            std::uint64_t expected_generator_hash);

private:
    HyperConfig config_;
    GeneratorConfig gen_cfg_;
    ParamSet params_;
    struct Heads {
        LinearLayer hidden_phi, hidden_delta;  // only when hidden_layer
        LinearLayer phi, delta;
        int cout = 0, cin = 0;
    };
    std::vector<Heads> heads_;
};

// theta*_i = delta_i ⊙ modulate_demodulate(phi_i + delta_phi_i, s_i)
std::vector<Var> modulated_weights(const StyleGenerator& gen, const ModulationParams& params,
                                   const std::vector<Var>& styles);

struct InjectionOptions {
    double eta = 0.1;
    double beta = 1.0;  // inference-time residual scale; training uses 1
    // ablation: replace F'_i = F_i + eta*F*_i with F'_i = F*_i (pure
    // modulated path, the "baseline" configuration)
    bool residual_injection = true;
};

// Dual-path synthesis with residual feature injection:
//   F_i  = lrelu(conv(F'_{i-1}, theta_i)  + b_i)   (frozen branch)
//   F*_i = lrelu(conv(F_{i-1},  theta*_i) + b_i)   (modulated branch)
//   F'_i = F_i + (eta*beta) * F*_i
// The frozen/modulated input asymmetry is deliberate; see HyperConfig for
// the alternative reading.
FeatureTrace forward_injected(const StyleGenerator& gen, const HyperNetworkBank& bank,
                              const LatentVars& latent, const Var& delta_embedding,
                              const InjectionOptions& opts);

FeatureTrace forward_injected(const StyleGenerator& gen, const HyperNetworkBank& bank,
                              const LatentVars& latent, const DeltaClip& dc,
                              const InjectionOptions& opts);

// variant with a precomputed bank prediction, so two synthesis passes under
// the same condition (sample + reconstruction) share one hypernetwork forward
FeatureTrace forward_injected(const StyleGenerator& gen, const HyperNetworkBank& bank,
                              const LatentVars& latent, const ModulationParams& mp,
                              const InjectionOptions& opts);

// w_hat = alpha*w + (1-alpha)*w_target, returned with refreshed styles
LatentVars style_mix(const StyleGenerator& gen, const Tensor& w, const Tensor& w_target,
                     double alpha);

}  // namespace stylemod
