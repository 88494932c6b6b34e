#include "stylemod/hypermod.hpp"

#include <stdexcept>

namespace stylemod {

std::uint64_t HyperConfig::hash() const {
    std::string s = "hypermod|" + std::to_string(embed_dim) + "|" +
                    std::to_string(hidden_layer ? hidden_dim : 0) + "|" +
                    std::to_string(modulated_input_injected) + "|" +
                    std::to_string(modulate_torgb);
    return hash_label(s);
}

HyperNetworkBank::HyperNetworkBank(const GeneratorConfig& gen_cfg, const HyperConfig& cfg,
                                   std::uint64_t seed)
    : config_(cfg), gen_cfg_(gen_cfg) {
    if (cfg.modulate_torgb)
        throw std::invalid_argument("HyperNetworkBank: toRGB modulation is not implemented");
    Rng rng(derive_seed(seed, "hypermod.init"));
    for (int i = 0; i < gen_cfg.num_layers(); ++i) {
        Heads h;
        h.cin = gen_cfg.layer_in(i);
        h.cout = gen_cfg.layer_out[static_cast<std::size_t>(i)];
        const int phi_size = h.cout * h.cin * 9;
        const std::string base = "layer" + std::to_string(i);
        int in_dim = cfg.embed_dim;
        if (cfg.hidden_layer) {
            h.hidden_phi = LinearLayer(params_, base + ".hidden_phi", cfg.embed_dim,
                                       cfg.hidden_dim, rng);
            h.hidden_delta = LinearLayer(params_, base + ".hidden_delta", cfg.embed_dim,
                                         cfg.hidden_dim, rng);
            in_dim = cfg.hidden_dim;
        }
        // zero init: delta_phi(dc) == 0 and delta(dc) == 1 for every dc
        h.phi = LinearLayer(params_, base + ".phi", in_dim, phi_size, rng);
        h.phi.w.mutable_val() = Tensor::zeros({phi_size, in_dim});
        h.delta = LinearLayer(params_, base + ".delta", in_dim, h.cout, rng);
        h.delta.w.mutable_val() = Tensor::zeros({h.cout, in_dim});
        heads_.push_back(std::move(h));
    }
}

std::int64_t HyperNetworkBank::expected_param_count(const GeneratorConfig& gen_cfg,
                                                    const HyperConfig& cfg) {
    if (cfg.hidden_layer)
        throw std::invalid_argument("expected_param_count: closed form covers affine heads only");
    std::int64_t total = 0;
    for (int i = 0; i < gen_cfg.num_layers(); ++i) {
        const std::int64_t phi_size =
            static_cast<std::int64_t>(gen_cfg.layer_out[static_cast<std::size_t>(i)]) *
            gen_cfg.layer_in(i) * 9;
        const std::int64_t cout = gen_cfg.layer_out[static_cast<std::size_t>(i)];
        total += cfg.embed_dim * (phi_size + cout) + phi_size + cout;  // weights + biases
    }
    return total;
}

ModulationParams HyperNetworkBank::predict(const Var& delta_embedding) const {
    if (delta_embedding.val().size() != config_.embed_dim)
        throw std::invalid_argument("predict_modulation: delta dimension " +
                                    delta_embedding.val().shape_str() + " != " +
                                    std::to_string(config_.embed_dim));
    ModulationParams out;
    for (const Heads& h : heads_) {
        Var in_phi = delta_embedding, in_delta = delta_embedding;
        if (config_.hidden_layer) {
            in_phi = leaky_relu(h.hidden_phi(in_phi));
            in_delta = leaky_relu(h.hidden_delta(in_delta));
        }
        out.delta_phi.push_back(reshape(h.phi(in_phi), {h.cout, h.cin, 3, 3}));
        out.delta.push_back(add_scalar(h.delta(in_delta), 1.0));
    }
    return out;
}

ModulationParams HyperNetworkBank::predict(const DeltaClip& dc) const {
    return predict(constant(dc.delta));
}

Checkpoint HyperNetworkBank::to_checkpoint(std::uint64_t generator_hash) const {
    Checkpoint ck;
    ck.kind = "bank";
    ck.config_hash = config_.hash();
    ck.meta["generator_hash"] = generator_hash;
    ck.meta["embed_dim"] = config_.embed_dim;
    ck.meta["hidden_layer"] = config_.hidden_layer;
    ck.meta["hidden_dim"] = config_.hidden_dim;
    ck.meta["modulated_input_injected"] = config_.modulated_input_injected;
    ck.put_params(params_);
    return ck;
}

HyperNetworkBank HyperNetworkBank::from_checkpoint(const Checkpoint& ck,
                                                   const GeneratorConfig& gen_cfg,
                                                   std::uint64_t expected_generator_hash) {
    const std::uint64_t stored = ck.meta.at("generator_hash").get<std::uint64_t>();
    if (expected_generator_hash != 0 && stored != expected_generator_hash)
        throw std::runtime_error(
            "bank checkpoint: generator hash mismatch (bank was trained against a different "
            "generator)");
    HyperConfig cfg;
    cfg.embed_dim = ck.meta.at("embed_dim").get<int>();
    cfg.hidden_layer = ck.meta.at("hidden_layer").get<bool>();
    cfg.hidden_dim = ck.meta.at("hidden_dim").get<int>();
    cfg.modulated_input_injected = ck.meta.at("modulated_input_injected").get<bool>();
    if (ck.config_hash != cfg.hash())
        throw std::runtime_error("bank checkpoint: config hash mismatch");
    HyperNetworkBank bank(gen_cfg, cfg, 0);
    ck.fill_params(bank.params_);
    return bank;
}

std::vector<Var> modulated_weights(const StyleGenerator& gen, const ModulationParams& params,
                                   const std::vector<Var>& styles) {
    const int L = gen.num_layers();
    if (static_cast<int>(params.delta_phi.size()) != L ||
        static_cast<int>(styles.size()) != L)
        throw std::invalid_argument("modulated_weights: layer count mismatch");
    std::vector<Var> out;
    for (int i = 0; i < L; ++i) {
        Var offset_w = add(gen.conv_weight(i), params.delta_phi[static_cast<std::size_t>(i)]);
        Var demod = modulate_demodulate(offset_w, styles[static_cast<std::size_t>(i)],
                                        gen.config().demod_eps);
        out.push_back(scale_rows(demod, params.delta[static_cast<std::size_t>(i)]));
    }
    return out;
}

FeatureTrace forward_injected(const StyleGenerator& gen, const HyperNetworkBank& bank,
                              const LatentVars& latent, const Var& delta_embedding,
                              const InjectionOptions& opts) {
    return forward_injected(gen, bank, latent, bank.predict(delta_embedding), opts);
}

FeatureTrace forward_injected(const StyleGenerator& gen, const HyperNetworkBank& bank,
                              const LatentVars& latent, const ModulationParams& mp,
                              const InjectionOptions& opts) {
    if (opts.eta < 0 || opts.beta < 0)
        throw std::invalid_argument("forward_injected: eta and beta must be >= 0");
    std::vector<Var> theta_star = modulated_weights(gen, mp, latent.styles);
    const double scale = opts.eta * opts.beta;

    FeatureTrace trace;
    Var prev_injected = gen.const_input();
    Var prev_frozen = gen.const_input();
    for (int i = 0; i < gen.num_layers(); ++i) {
        if (gen.config().upsample_before(i)) {
            prev_injected = upsample2(prev_injected);
            prev_frozen = upsample2(prev_frozen);
        }
        Var theta = modulate_demodulate(gen.conv_weight(i),
                                        latent.styles[static_cast<std::size_t>(i)],
                                        gen.config().demod_eps);
        Var frozen = leaky_relu(conv2d(prev_injected, theta, gen.conv_bias(i), 1, 1));
        const Var& mod_in = bank.config().modulated_input_injected ? prev_injected : prev_frozen;
        Var modulated = leaky_relu(
            conv2d(mod_in, theta_star[static_cast<std::size_t>(i)], gen.conv_bias(i), 1, 1));
        Var injected = opts.residual_injection
                           ? (scale == 0.0 ? frozen : add(frozen, mul_scalar(modulated, scale)))
                           : modulated;

        trace.frozen.push_back(frozen);
        trace.modulated.push_back(modulated);
        trace.injected.push_back(injected);
        // the frozen branch tracks pre-injection features of the *frozen*
        // forward pass, which consumes injected features from below
        prev_frozen = frozen;
        prev_injected = injected;
    }
    trace.image = gen.to_rgb(trace.injected.back());
    return trace;
}

FeatureTrace forward_injected(const StyleGenerator& gen, const HyperNetworkBank& bank,
                              const LatentVars& latent, const DeltaClip& dc,
                              const InjectionOptions& opts) {
    return forward_injected(gen, bank, latent, constant(dc.delta), opts);
}

LatentVars style_mix(const StyleGenerator& gen, const Tensor& w, const Tensor& w_target,
                     double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("style_mix: alpha must lie in [0,1]");
    if (w.shape != w_target.shape) throw std::invalid_argument("style_mix: latent shape mismatch");
    Tensor mixed(w.shape);
    for (std::int64_t i = 0; i < w.size(); ++i)
        mixed[i] = alpha * w[i] + (1.0 - alpha) * w_target[i];
    LatentVars out;
    out.w = constant(mixed);
    out.styles = gen.styles_from_w(out.w);
    return out;
}

}  // namespace stylemod
