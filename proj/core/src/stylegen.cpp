#include "stylemod/stylegen.hpp"

#include <cmath>
#include <stdexcept>

namespace stylemod {

std::uint64_t GeneratorConfig::hash() const {
    std::string s = "stylegen|" + std::to_string(z_dim) + "|" + std::to_string(base_res) + "|" +
                    std::to_string(img_size) + "|" + std::to_string(const_ch) + "|";
    for (int c : layer_out) s += std::to_string(c) + ",";
    s += "|" + std::to_string(mapping_layers);
    return hash_label(s);
}

Var modulate_demodulate(const Var& phi, const Var& style, double eps) {
    Var m = modulate_cin(phi, style);
    Var inv_norm = inv_v(sqrt_v(add_scalar(rows_sumsq(m), eps)));
    return scale_rows(m, inv_norm);
}

StyleGenerator::StyleGenerator(const GeneratorConfig& config, std::uint64_t seed)
    : config_(config) {
    Rng rng(derive_seed(seed, "stylegen.init"));
    const int L = config_.num_layers();
    const int expected_doublings = L / 2;
    if (config_.base_res << expected_doublings != config_.img_size)
        throw std::invalid_argument("GeneratorConfig: layer count does not reach img_size");

    const_input_ = params_.add("const_input",
                               randn_tensor({config_.const_ch, config_.base_res, config_.base_res},
                                            rng, 1.0));
    for (int i = 0; i < config_.mapping_layers; ++i)
        mapping_.emplace_back(params_, "mapping." + std::to_string(i), config_.z_dim,
                              config_.z_dim, rng);
    for (int i = 0; i < L; ++i) {
        const int cin = config_.layer_in(i), cout = config_.layer_out[static_cast<std::size_t>(i)];
        const double ws = 1.0 / std::sqrt(static_cast<double>(cin * 9));
        conv_w_.push_back(params_.add("conv" + std::to_string(i) + ".w",
                                      randn_tensor({cout, cin, 3, 3}, rng, ws)));
        conv_b_.push_back(params_.add("conv" + std::to_string(i) + ".b", Tensor::zeros({cout})));
        // style affine biased to 1 so initial modulation is near-identity
        style_affine_.emplace_back(params_, "style" + std::to_string(i), config_.z_dim, cin, rng,
                                   0.2 / std::sqrt(static_cast<double>(config_.z_dim)), 1.0);
    }
    const int last = config_.layer_out.back();
    torgb_w_ = params_.add("torgb.w", randn_tensor({3, last, 1, 1}, rng,
                                                   1.0 / std::sqrt(static_cast<double>(last))));
    torgb_b_ = params_.add("torgb.b", Tensor::zeros({3}));
}

LatentVars StyleGenerator::map_latent_v(const Var& z) const {
    for (double x : z.val().v)
        if (!std::isfinite(x)) throw std::invalid_argument("map_latent: non-finite z");
    // pixel-norm the noise, then the mapping MLP
    Var ms = mean(square(z));
    Var zn = bcast_mul(z, inv_v(sqrt_v(add_scalar(ms, 1e-8))));
    Var h = zn;
    for (std::size_t i = 0; i < mapping_.size(); ++i) {
        h = mapping_[i](h);
        if (i + 1 < mapping_.size()) h = leaky_relu(h);
    }
    LatentVars out;
    out.w = h;
    out.styles = styles_from_w(h);
    return out;
}

std::vector<Var> StyleGenerator::styles_from_w(const Var& w) const {
    std::vector<Var> styles;
    for (const auto& affine : style_affine_) styles.push_back(affine(w));
    return styles;
}

LatentCode StyleGenerator::map_latent(const Tensor& z) const {
    LatentVars lv = map_latent_v(constant(z));
    LatentCode out;
    out.z = z;
    out.w = lv.w.val();
    for (const Var& s : lv.styles) out.styles.push_back(s.val());
    return out;
}

Var StyleGenerator::to_rgb(const Var& features) const {
    Var raw = tanh_v(conv2d(features, torgb_w_, torgb_b_, 1, 0));
    return mul_scalar(add_scalar(raw, 1.0), 0.5);
}

FeatureTrace StyleGenerator::forward_frozen(const LatentVars& latent) const {
    FeatureTrace trace;
    Var f = const_input_;
    for (int i = 0; i < num_layers(); ++i) {
        if (config_.upsample_before(i)) f = upsample2(f);
        Var theta = modulate_demodulate(conv_w_[static_cast<std::size_t>(i)],
                                        latent.styles[static_cast<std::size_t>(i)],
                                        config_.demod_eps);
        f = leaky_relu(conv2d(f, theta, conv_b_[static_cast<std::size_t>(i)], 1, 1));
        trace.frozen.push_back(f);
    }
    trace.image = to_rgb(f);
    return trace;
}

Image StyleGenerator::synthesize(const Tensor& z) const {
    return forward_frozen(map_latent_v(constant(z))).image.val();
}

Image StyleGenerator::synthesize_w(const Tensor& w) const {
    LatentVars lv;
    lv.w = constant(w);
    lv.styles = styles_from_w(lv.w);
    return forward_frozen(lv).image.val();
}

Tensor StyleGenerator::sample_z(Rng& rng) const {
    Tensor z({config_.z_dim});
    for (auto& x : z.v) x = rng.normal();
    return z;
}

Tensor StyleGenerator::truncate(const Tensor& w, const Tensor& w_mean, double psi) const {
    if (w.shape != w_mean.shape) throw std::invalid_argument("truncate: shape mismatch");
    Tensor out(w.shape);
    for (std::int64_t i = 0; i < w.size(); ++i) out[i] = psi * w[i] + (1.0 - psi) * w_mean[i];
    return out;
}

Checkpoint StyleGenerator::to_checkpoint() const {
    Checkpoint ck;
    ck.kind = "generator";
    ck.config_hash = config_.hash();
    ck.meta["z_dim"] = config_.z_dim;
    ck.meta["base_res"] = config_.base_res;
    ck.meta["img_size"] = config_.img_size;
    ck.meta["const_ch"] = config_.const_ch;
    ck.meta["layer_out"] = config_.layer_out;
    ck.meta["mapping_layers"] = config_.mapping_layers;
    ck.meta["truncation_psi"] = config_.truncation_psi;
    ck.put_params(params_);
    return ck;
}

StyleGenerator StyleGenerator::from_checkpoint(const Checkpoint& ck) {
    GeneratorConfig cfg;
    cfg.z_dim = ck.meta.at("z_dim").get<int>();
    cfg.base_res = ck.meta.at("base_res").get<int>();
    cfg.img_size = ck.meta.at("img_size").get<int>();
    cfg.const_ch = ck.meta.at("const_ch").get<int>();
    cfg.layer_out = ck.meta.at("layer_out").get<std::vector<int>>();
    cfg.mapping_layers = ck.meta.at("mapping_layers").get<int>();
    cfg.truncation_psi = ck.meta.value("truncation_psi", 0.7);
    if (ck.config_hash != cfg.hash())
        throw std::runtime_error("generator checkpoint: config hash mismatch");
    StyleGenerator g(cfg, 0);
    ck.fill_params(g.params_);
    return g;
}

// ------------------------------------------------------------ discriminator

BaseDiscriminator::BaseDiscriminator(int canvas, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "basedisc.init"));
    c1_ = ConvLayer(params_, "c1", 3, 32, 3, rng, 2, 1);
    c2_ = ConvLayer(params_, "c2", 32, 64, 3, rng, 2, 1);
    c3_ = ConvLayer(params_, "c3", 64, 64, 3, rng, 2, 1);
    const int s = canvas / 8;
    fc_ = LinearLayer(params_, "fc", 64 * s * s, 1, rng);
}

Var BaseDiscriminator::score(const Var& img) const {
    Var h = leaky_relu(c1_(img));
    h = leaky_relu(c2_(h));
    h = leaky_relu(c3_(h));
    return linear(reshape(h, {static_cast<int>(h.val().size())}), fc_.w, fc_.b);
}

// ------------------------------------------------------------ pre-training

PretrainResult pretrain_base(StyleGenerator& gen, BaseDiscriminator& disc,
                             const std::vector<Sample>& dataset, const PretrainConfig& cfg,
                             std::uint64_t seed,
                             const std::function<void(int, double, double)>& progress) {
    if (dataset.empty()) throw std::invalid_argument("pretrain_base: empty dataset");
    Adam opt_g(gen.params().vars(), cfg.lr_g, 0.0, 0.99);
    Adam opt_d(disc.params().vars(), cfg.lr_d, 0.0, 0.99);
    Rng rng(derive_seed(seed, "pretrain"));
    PretrainResult result;
    int collapse_run = 0;

    for (int step = 0; step < cfg.steps; ++step) {
        // ---- discriminator update
        std::vector<Image> fakes;
        Var d_loss = constant(Tensor::scalar(0.0));
        std::vector<Var> real_vars;
        for (int b = 0; b < cfg.batch; ++b) {
            const Sample& s =
                dataset[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(dataset.size()) - 1))];
            Image fake = gen.synthesize(gen.sample_z(rng));
            fakes.push_back(fake);
            Var real = constant(s.image);
            real_vars.push_back(real);
            Var ds = add(softplus_v(neg(disc.score(real))), softplus_v(disc.score(constant(fake))));
            d_loss = add(d_loss, ds);
        }
        d_loss = mul_scalar(d_loss, 1.0 / cfg.batch);
        opt_d.zero_grads();
        backward(d_loss);

        // lazy R1 on real images: gamma/2 * ||grad_x D(x)||^2. The parameter
        // gradient is a Hessian-vector product, taken by central differencing
        // the backward pass along the input gradient direction.
        if (cfg.r1_gamma > 0 && step % cfg.r1_interval == 0) {
            for (const Var& rv : real_vars) {
                Var x = param(rv.val());
                // input-gradient pass only: keep critic params out of it
                disc.params().set_requires_grad(false);
                Var s0 = disc.score(x);
                backward(s0);
                disc.params().set_requires_grad(true);
                const Tensor& g = x.grad();
                double gnorm = 0.0;
                for (double v : g.v) gnorm += v * v;
                gnorm = std::sqrt(gnorm);
                if (gnorm < 1e-12) continue;
                const double fd_eps = 1e-4;
                Tensor xp = rv.val(), xm = rv.val();
                for (std::int64_t i = 0; i < xp.size(); ++i) {
                    const double u = g[i] / gnorm;
                    xp[i] += fd_eps * u;
                    xm[i] -= fd_eps * u;
                }
                const double w = cfg.r1_gamma * static_cast<double>(cfg.r1_interval) * gnorm /
                                 (2.0 * fd_eps * cfg.batch);
                backward(mul_scalar(disc.score(constant(xp)), w));
                backward(mul_scalar(disc.score(constant(xm)), -w));
            }
        }
        opt_d.step();

        // ---- generator update
        Var g_loss = constant(Tensor::scalar(0.0));
        for (int b = 0; b < cfg.batch; ++b) {
            LatentVars lv = gen.map_latent_v(constant(gen.sample_z(rng)));
            Var img = gen.forward_frozen(lv).image;
            g_loss = add(g_loss, softplus_v(neg(disc.score(img))));
        }
        g_loss = mul_scalar(g_loss, 1.0 / cfg.batch);
        opt_g.zero_grads();
        backward(g_loss);
        opt_g.step();

        result.g_loss_curve.push_back(g_loss.val()[0]);
        result.d_loss_curve.push_back(d_loss.val()[0]);
        collapse_run = d_loss.val()[0] < 1e-3 ? collapse_run + 1 : 0;
        if (collapse_run >= cfg.collapse_patience)
            throw std::runtime_error("pretrain_base: discriminator loss collapsed for " +
                                     std::to_string(cfg.collapse_patience) + " steps");
        if (progress && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
            progress(step, g_loss.val()[0], d_loss.val()[0]);
    }
    return result;
}

}  // namespace stylemod
