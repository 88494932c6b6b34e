#include "stylemod/invert.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stylemod {

Tensor mean_latent(const StyleGenerator& gen, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::runtime_error("mean_latent: n_samples must be >= 1");
    Rng rng(seed);
    Tensor acc;
    for (int i = 0; i < n_samples; ++i) {
        Tensor w = gen.map_latent(gen.sample_z(rng)).w;
        if (acc.v.empty())
            acc = w;
        else
            for (std::int64_t j = 0; j < w.size(); ++j) acc[j] += w[j];
    }
    for (double& x : acc.v) x /= n_samples;
    return acc;
}

InversionResult invert_latent(const StyleGenerator& gen, const JointEmbedder& embedder,
                              const Image& img, const Tensor& w_mean,
                              const InversionConfig& cfg) {
    Var w = param(w_mean);
    Adam opt({w}, cfg.lr, 0.9, 0.999);
    Var target = constant(img);

    InversionResult out;
    const double pi = 3.14159265358979323846;
    for (int step = 0; step < cfg.steps; ++step) {
        opt.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(pi * step / cfg.steps)));
        LatentVars lat{w, gen.styles_from_w(w)};
        FeatureTrace trace = gen.forward_frozen(lat);
        ReconstructionLosses rec = reconstruction_losses(embedder, target, trace.image);
        Var obj = add(rec.l2, rec.lpips);
        const double v = obj.val()[0];
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "invert_latent: non-finite objective at step " << step << " (|w|="
                << std::sqrt([&] {
                       double s = 0;
                       for (double x : w.val().v) s += x * x;
                       return s;
                   }())
                << ")";
            throw std::runtime_error(msg.str());
        }
        out.objective_curve.push_back(v);
        opt.zero_grads();
        backward(obj);
        opt.step();
    }

    out.w_inv = w.val();
    out.w_trunc = gen.truncate(out.w_inv, w_mean, cfg.psi);
    out.x_fixed = gen.synthesize_w(out.w_trunc);
    {
        ReconstructionLosses rec =
            reconstruction_losses(embedder, target, constant(gen.synthesize_w(out.w_inv)));
        out.residual = rec.l2.val()[0] + rec.lpips.val()[0];
    }
    return out;
}

std::uint64_t image_digest(const Image& img) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (int d : img.shape) mix(&d, sizeof(d));
    mix(img.v.data(), img.v.size() * sizeof(double));
    return h;
}

InversionResult InversionCache::get_or_compute(const StyleGenerator& gen,
                                               const JointEmbedder& embedder, const Image& img,
                                               const Tensor& w_mean, const InversionConfig& cfg) {
    std::ostringstream key;
    key << std::hex << image_digest(img) << "-" << gen.checksum() << "-" << cfg.psi;
    if (auto it = mem_.find(key.str()); it != mem_.end()) return it->second;

    std::filesystem::path file;
    if (!dir_.empty()) {
        std::filesystem::create_directories(dir_);
        file = dir_ / (key.str() + ".inv");
        if (std::filesystem::exists(file)) {
            Checkpoint ck = load_checkpoint(file, "inversion");
            InversionResult r;
            r.w_inv = ck.tensors.at("w_inv");
            r.w_trunc = ck.tensors.at("w_trunc");
            r.x_fixed = ck.tensors.at("x_fixed");
            r.residual = ck.meta.at("residual").get<double>();
            mem_[key.str()] = r;
            return r;
        }
    }

    InversionResult r = invert_latent(gen, embedder, img, w_mean, cfg);
    mem_[key.str()] = r;
    if (!file.empty()) {
        Checkpoint ck;
        ck.kind = "inversion";
        ck.meta["residual"] = r.residual;
        ck.meta["psi"] = cfg.psi;
        ck.tensors["w_inv"] = r.w_inv;
        ck.tensors["w_trunc"] = r.w_trunc;
        ck.tensors["x_fixed"] = r.x_fixed;
        save_checkpoint(file, ck);
    }
    return r;
}

}  // namespace stylemod
