#include "stylemod/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stylemod {

namespace {

LatentVars latent_of(const StyleGenerator& gen, const Tensor& w) {
    Var wv = constant(w);
    return LatentVars{wv, gen.styles_from_w(wv)};
}

Var mean_of(const std::vector<Var>& xs) {
    if (xs.empty()) return {};
    return mean(concat_flat(xs));
}

std::vector<int> pick_distinct(Rng& rng, int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i)
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(rng.uniform_int(i, n - 1))]);
    idx.resize(static_cast<std::size_t>(std::min(k, n)));
    return idx;
}

HyperConfig bank_config(const Assets& assets) {
    HyperConfig hc;
    hc.embed_dim = assets.embedder.config().embed_dim;
    return hc;
}

nlohmann::json checkpoint_digests(const Assets& assets) {
    std::ostringstream e, g, c;
    e << std::hex << assets.embedder.checksum();
    g << std::hex << assets.gen.checksum();
    c << std::hex << assets.classifiers.checksum();
    return {{"embedder", e.str()}, {"generator", g.str()}, {"classifiers", c.str()}};
}

void assert_frozen_unchanged(const Assets& assets, std::uint64_t emb, std::uint64_t gen,
                             std::uint64_t cls) {
    if (assets.embedder.checksum() != emb)
        throw std::runtime_error("frozen embedder parameters changed during training");
    if (assets.gen.checksum() != gen)
        throw std::runtime_error("frozen generator parameters changed during training");
    if (assets.classifiers.checksum() != cls)
        throw std::runtime_error("frozen classifier parameters changed during training");
}

nlohmann::json breakdown_json(int step, const LossBreakdown& bd, double d_loss, bool has_d) {
    nlohmann::json j{{"step", step},          {"clip", bd.clip},
                     {"across", bd.across},   {"within", bd.within},
                     {"cgan", bd.cgan},       {"contrastive", bd.contrastive},
                     {"id", bd.id},           {"l2", bd.l2},
                     {"lpips", bd.lpips},     {"total", bd.total}};
    if (has_d) j["d_loss"] = d_loss;
    return j;
}

}  // namespace

Assets Assets::from_parts(JointEmbedder embedder, StyleGenerator gen,
                          AttributeClassifiers classifiers) {
    embedder.freeze();
    gen.freeze();
    classifiers.freeze();
    Tensor w_mean = mean_latent(gen, 2000, derive_seed(7, "mean-latent"));
    Image mean_image = gen.synthesize_w(w_mean);
    return Assets{std::move(embedder), std::move(gen), std::move(classifiers), std::move(w_mean),
                  std::move(mean_image)};
}

Assets Assets::load(const std::filesystem::path& embedder_ck,
                    const std::filesystem::path& generator_ck,
                    const std::filesystem::path& classifiers_ck) {
    return from_parts(JointEmbedder::from_checkpoint(load_checkpoint(embedder_ck, "embedder")),
                      StyleGenerator::from_checkpoint(load_checkpoint(generator_ck, "generator")),
                      AttributeClassifiers::from_checkpoint(
                          load_checkpoint(classifiers_ck, "classifiers")));
}

nlohmann::json TrainConfig::to_json() const {
    return {{"task", task},
            {"lr", lr},
            {"beta1", beta1},
            {"beta2", beta2},
            {"batch", batch},
            {"eta", eta},
            {"steps", steps},
            {"seed", seed},
            {"use_critic", use_critic},
            {"use_residual_injection", use_residual_injection},
            {"canvas", canvas},
            {"ref_pool", ref_pool},
            {"log_every", log_every},
            {"checkpoint_every", checkpoint_every},
            {"grid_samples", grid_samples},
            {"weights",
             {{"clip", weights.clip},
              {"across", weights.across},
              {"within", weights.within},
              {"cgan", weights.cgan},
              {"contrastive", weights.contrastive},
              {"id", weights.id},
              {"l2", weights.l2},
              {"lpips", weights.lpips}}}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    auto get = [&](const char* k, auto& slot) {
        if (j.contains(k)) slot = j.at(k).get<std::decay_t<decltype(slot)>>();
    };
    get("task", c.task);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("batch", c.batch);
    get("eta", c.eta);
    get("steps", c.steps);
    get("seed", c.seed);
    get("use_critic", c.use_critic);
    get("use_residual_injection", c.use_residual_injection);
    get("canvas", c.canvas);
    get("ref_pool", c.ref_pool);
    get("log_every", c.log_every);
    get("checkpoint_every", c.checkpoint_every);
    get("grid_samples", c.grid_samples);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        auto getw = [&](const char* k, double& slot) {
            if (w.contains(k)) slot = w.at(k).get<double>();
        };
        getw("clip", c.weights.clip);
        getw("across", c.weights.across);
        getw("within", c.weights.within);
        getw("cgan", c.weights.cgan);
        getw("contrastive", c.weights.contrastive);
        getw("id", c.weights.id);
        getw("l2", c.weights.l2);
        getw("lpips", c.weights.lpips);
    }
    return c;
}

std::uint64_t TrainConfig::hash() const { return hash_label(to_json().dump()); }

// --------------------------------------------------------------- adaptation

namespace {

struct DomainContext {
    Image exemplar;
    Image x_fixed;
    Tensor w_fixed;
    Tensor dc;
    std::string caption;  // empty when the domain has none
};

DomainContext make_domain_context(const Assets& assets, const DomainSpec& spec,
                                  InversionCache& cache) {
    DomainContext d;
    d.exemplar = spec.exemplar;
    InversionResult inv =
        cache.get_or_compute(assets.gen, assets.embedder, spec.exemplar, assets.w_mean);
    d.x_fixed = inv.x_fixed;
    d.w_fixed = inv.w_trunc;
    d.dc = assets.embedder.delta_clip_images(spec.exemplar, inv.x_fixed).delta;
    if (spec.caption) d.caption = spec.caption->text();
    return d;
}

void emit_adaptation_grid(const Assets& assets, const HyperNetworkBank& bank,
                          const std::vector<DomainContext>& doms, const TrainConfig& cfg,
                          const std::filesystem::path& file) {
    InjectionOptions inj{cfg.eta, 1.0, cfg.use_residual_injection};
    std::vector<Image> tiles;
    Rng rng(derive_seed(cfg.seed, "grid"));
    for (const DomainContext& d : doms) {
        tiles.push_back(d.exemplar);
        for (int i = 0; i < cfg.grid_samples; ++i) {
            Tensor w = assets.gen.map_latent(assets.gen.sample_z(rng)).w;
            FeatureTrace t = forward_injected(assets.gen, bank, latent_of(assets.gen, w),
                                              constant(d.dc), inj);
            tiles.push_back(t.image.val());
        }
    }
    write_ppm(file, tile_grid(tiles, cfg.grid_samples + 1));
}

}  // namespace

TrainResult train_adaptation(const Assets& assets, const std::vector<DomainSpec>& domains,
                             const TrainConfig& cfg, const std::filesystem::path& root,
                             InversionCache* cache, const ProgressFn& progress) {
    if (domains.size() < 2)
        throw std::runtime_error("train_adaptation: needs >= 2 domains for contrastive negatives");
    InversionCache local;
    if (!cache) cache = &local;

    RunDir run(root, "train-adapt", cfg.hash());
    run.write_config_snapshot(cfg.to_json());
    run.write_manifest({{"seed", cfg.seed},
                        {"checkpoints", checkpoint_digests(assets)},
                        {"domains", [&] {
                             std::vector<std::string> names;
                             for (const auto& d : domains) names.push_back(d.name);
                             return names;
                         }()}});

    const std::uint64_t emb_sum = assets.embedder.checksum();
    const std::uint64_t gen_sum = assets.gen.checksum();
    const std::uint64_t cls_sum = assets.classifiers.checksum();

    std::vector<DomainContext> doms;
    for (const DomainSpec& d : domains) doms.push_back(make_domain_context(assets, d, *cache));

    HyperNetworkBank bank(assets.gen.config(), bank_config(assets), derive_seed(cfg.seed, "bank"));
    ProjectionCritic critic(assets.embedder, derive_seed(cfg.seed, "critic"));
    Adam opt_bank(bank.params().vars(), cfg.lr, cfg.beta1, cfg.beta2);
    Adam opt_critic(critic.params().vars(), cfg.lr, cfg.beta1, cfg.beta2);

    LossWeights weights = cfg.weights;
    if (!cfg.use_critic) weights.cgan = 0.0;
    const InjectionOptions inj{cfg.eta, 1.0, cfg.use_residual_injection};
    const FeatureFn id_feats = assets.classifiers.feature_fn();

    TrainResult result;
    result.run_dir = run.path();
    result.bank_ck = run.file("bank.ck");
    if (cfg.use_critic) result.critic_ck = run.file("critic.ck");

    auto save_checkpoints = [&] {
        save_checkpoint(result.bank_ck, bank.to_checkpoint(assets.gen.checksum()));
        if (cfg.use_critic) save_checkpoint(result.critic_ck, critic.to_checkpoint());
    };
    save_checkpoints();

    const int k_batch = std::min<int>(cfg.batch, static_cast<int>(doms.size()));
    for (int step = 0; step < cfg.steps; ++step) {
        Rng pick(derive_seed(cfg.seed, "pick", static_cast<std::uint64_t>(step)));
        std::vector<int> batch = pick_distinct(pick, static_cast<int>(doms.size()), k_batch);

        std::vector<Image> exemplars;
        std::vector<Var> recons, traineds, conds, reals;
        std::vector<Var> clips, acrosses, withins, ids, l2s, lpipss;

        for (int j = 0; j < k_batch; ++j) {
            const DomainContext& d = doms[static_cast<std::size_t>(batch[static_cast<std::size_t>(j)])];
            Rng zr(derive_seed(cfg.seed, "z",
                               static_cast<std::uint64_t>(step) * cfg.batch +
                                   static_cast<std::uint64_t>(j)));
            Tensor w_s = assets.gen.map_latent(assets.gen.sample_z(zr)).w;
            Var x_sample = constant(assets.gen.synthesize_w(w_s));
            Var dcv = constant(d.dc);

            ModulationParams mp = bank.predict(dcv);
            Var x_trained =
                forward_injected(assets.gen, bank, latent_of(assets.gen, w_s), mp, inj).image;
            Var x_recon =
                forward_injected(assets.gen, bank, latent_of(assets.gen, d.w_fixed), mp, inj)
                    .image;

            Var e_target = constant(assets.embedder.embed_image(d.exemplar));
            clips.push_back(
                clip_similarity_loss(assets.embedder.embed_image(x_recon), e_target));
            DirectionalLossPair dir = directional_losses(
                AdaptTask::Adaptation, assets.embedder, x_sample, x_trained,
                constant(d.exemplar), constant(d.x_fixed));
            acrosses.push_back(dir.across);
            withins.push_back(dir.within);
            ids.push_back(identity_loss(id_feats, x_sample, x_trained));
            ReconstructionLosses rec =
                reconstruction_losses(assets.embedder, constant(d.exemplar), x_recon);
            l2s.push_back(rec.l2);
            lpipss.push_back(rec.lpips);

            exemplars.push_back(d.exemplar);
            recons.push_back(x_recon);
            traineds.push_back(x_trained);
            conds.push_back(e_target);
            reals.push_back(constant(d.exemplar));
        }

        std::vector<Var> contrs;
        for (int k = 0; k < k_batch; ++k)
            contrs.push_back(contrastive_adaptation_loss(
                assets.embedder, exemplars, recons, k,
                derive_seed(cfg.seed, "contrastive-aug", static_cast<std::uint64_t>(step))));

        LossTerms terms;
        terms.clip = mean_of(clips);
        terms.across = mean_of(acrosses);
        terms.within = mean_of(withins);
        terms.contrastive = mean_of(contrs);
        terms.id = mean_of(ids);
        terms.l2 = mean_of(l2s);
        terms.lpips = mean_of(lpipss);

        const std::uint64_t aug_seed =
            derive_seed(cfg.seed, "diffaug", static_cast<std::uint64_t>(step));
        if (cfg.use_critic)
            terms.cgan = adversarial_losses(critic, reals, traineds, conds, aug_seed).g_loss;

        LossBreakdown bd = total_loss(weights, terms);
        opt_bank.zero_grads();
        critic.params().zero_grads();
        backward(bd.total_var);
        opt_bank.step();

        double d_loss_v = 0.0;
        if (cfg.use_critic) {
            std::vector<Var> fakes_detached;
            for (const Var& f : traineds) fakes_detached.push_back(constant(f.val()));
            Var d_loss =
                adversarial_losses(critic, reals, fakes_detached, conds, aug_seed).d_loss;
            d_loss_v = d_loss.val()[0];
            opt_critic.zero_grads();
            backward(d_loss);
            opt_critic.step();
        }

        result.total_curve.push_back(bd.total);
        if (step % cfg.log_every == 0)
            run.append_loss_record(breakdown_json(step, bd, d_loss_v, cfg.use_critic));
        if ((step + 1) % cfg.checkpoint_every == 0) save_checkpoints();
        if (progress) progress(step, bd);
    }

    save_checkpoints();
    emit_adaptation_grid(assets, bank, doms, cfg, run.file("samples.ppm"));
    assert_frozen_unchanged(assets, emb_sum, gen_sum, cls_sum);
    run.finalize({{"final_total", result.total_curve.empty() ? 0.0 : result.total_curve.back()}});
    check_run_integrity(run.path());
    return result;
}

// ---------------------------------------------------------------- reference

TrainResult train_reference(const Assets& assets, const std::vector<Sample>& dataset,
                            const TrainConfig& cfg, const std::filesystem::path& root,
                            InversionCache* cache, const ProgressFn& progress) {
    const int pool = std::min<int>(cfg.ref_pool, static_cast<int>(dataset.size()));
    if (pool < 2) throw std::runtime_error("train_reference: needs >= 2 pool samples");
    InversionCache local;
    if (!cache) cache = &local;

    RunDir run(root, "train-ref", cfg.hash());
    run.write_config_snapshot(cfg.to_json());
    run.write_manifest(
        {{"seed", cfg.seed}, {"checkpoints", checkpoint_digests(assets)}, {"pool", pool}});

    const std::uint64_t emb_sum = assets.embedder.checksum();
    const std::uint64_t gen_sum = assets.gen.checksum();
    const std::uint64_t cls_sum = assets.classifiers.checksum();

    // precompute source-side inversions and their renders
    std::vector<InversionResult> invs;
    std::vector<Tensor> pool_embeds, inv_embeds;
    for (int i = 0; i < pool; ++i) {
        invs.push_back(cache->get_or_compute(assets.gen, assets.embedder,
                                             dataset[static_cast<std::size_t>(i)].image,
                                             assets.w_mean));
        pool_embeds.push_back(
            assets.embedder.embed_image(dataset[static_cast<std::size_t>(i)].image));
        inv_embeds.push_back(assets.embedder.embed_image(invs.back().x_fixed));
    }

    HyperNetworkBank bank(assets.gen.config(), bank_config(assets), derive_seed(cfg.seed, "bank"));
    ProjectionCritic critic(assets.embedder, derive_seed(cfg.seed, "critic"));
    Adam opt_bank(bank.params().vars(), cfg.lr, cfg.beta1, cfg.beta2);
    Adam opt_critic(critic.params().vars(), cfg.lr, cfg.beta1, cfg.beta2);

    LossWeights weights = cfg.weights;
    if (!cfg.use_critic) weights.cgan = 0.0;
    const InjectionOptions inj{cfg.eta, 1.0, cfg.use_residual_injection};
    const FeatureFn id_feats = assets.classifiers.feature_fn();
    const Var mean_img = constant(assets.mean_image);

    TrainResult result;
    result.run_dir = run.path();
    result.bank_ck = run.file("bank.ck");
    if (cfg.use_critic) result.critic_ck = run.file("critic.ck");
    auto save_checkpoints = [&] {
        save_checkpoint(result.bank_ck, bank.to_checkpoint(assets.gen.checksum()));
        if (cfg.use_critic) save_checkpoint(result.critic_ck, critic.to_checkpoint());
    };
    save_checkpoints();

    for (int step = 0; step < cfg.steps; ++step) {
        Rng pick(derive_seed(cfg.seed, "pairs", static_cast<std::uint64_t>(step)));

        std::vector<Image> targets;
        std::vector<Var> recons, traineds, conds, reals;
        std::vector<Var> clips, acrosses, withins, ids, l2s, lpipss;

        for (int j = 0; j < cfg.batch; ++j) {
            const int s = pick.uniform_int(0, pool - 1);
            int t = pick.uniform_int(0, pool - 2);
            if (t >= s) ++t;
            const Image& x_target = dataset[static_cast<std::size_t>(t)].image;

            Tensor dc = pool_embeds[static_cast<std::size_t>(t)];
            for (std::int64_t i = 0; i < dc.size(); ++i)
                dc[i] -= inv_embeds[static_cast<std::size_t>(s)][i];
            Var dcv = constant(dc);

            Rng zr(derive_seed(cfg.seed, "z",
                               static_cast<std::uint64_t>(step) * cfg.batch +
                                   static_cast<std::uint64_t>(j)));
            Tensor w_s = assets.gen.map_latent(assets.gen.sample_z(zr)).w;
            Var x_sample = constant(assets.gen.synthesize_w(w_s));

            ModulationParams mp = bank.predict(dcv);
            Var x_trained =
                forward_injected(assets.gen, bank, latent_of(assets.gen, w_s), mp, inj).image;
            // reconstruct the target from its own inverted latent: the latent
            // already carries the target's geometry, so the modulation branch
            // only has to learn the appearance shift encoded by dc; at edit
            // time the same shift applied to a source latent transfers
            // attributes without overriding the source's structure
            Var x_recon = forward_injected(assets.gen, bank,
                                           latent_of(assets.gen,
                                                     invs[static_cast<std::size_t>(t)].w_trunc),
                                           mp, inj)
                              .image;

            Var e_target = constant(pool_embeds[static_cast<std::size_t>(t)]);
            clips.push_back(
                clip_similarity_loss(assets.embedder.embed_image(x_recon), e_target));
            DirectionalLossPair dir =
                directional_losses(AdaptTask::Reference, assets.embedder, x_sample, x_trained,
                                   constant(x_target), mean_img, x_recon);
            acrosses.push_back(dir.across);
            withins.push_back(dir.within);
            ids.push_back(identity_loss(id_feats, x_sample, x_trained));
            ReconstructionLosses rec =
                reconstruction_losses(assets.embedder, constant(x_target), x_recon);
            l2s.push_back(rec.l2);
            lpipss.push_back(rec.lpips);

            targets.push_back(x_target);
            recons.push_back(x_recon);
            traineds.push_back(x_trained);
            conds.push_back(e_target);
            reals.push_back(constant(x_target));
        }

        std::vector<Var> contrs;
        for (int k = 0; k < cfg.batch; ++k)
            contrs.push_back(contrastive_adaptation_loss(
                assets.embedder, targets, recons, k,
                derive_seed(cfg.seed, "contrastive-aug", static_cast<std::uint64_t>(step))));

        LossTerms terms;
        terms.clip = mean_of(clips);
        terms.across = mean_of(acrosses);
        terms.within = mean_of(withins);
        terms.contrastive = mean_of(contrs);
        terms.id = mean_of(ids);
        terms.l2 = mean_of(l2s);
        terms.lpips = mean_of(lpipss);

        const std::uint64_t aug_seed =
            derive_seed(cfg.seed, "diffaug", static_cast<std::uint64_t>(step));
        if (cfg.use_critic)
            terms.cgan = adversarial_losses(critic, reals, traineds, conds, aug_seed).g_loss;

        LossBreakdown bd = total_loss(weights, terms);
        opt_bank.zero_grads();
        critic.params().zero_grads();
        backward(bd.total_var);
        opt_bank.step();

        double d_loss_v = 0.0;
        if (cfg.use_critic) {
            std::vector<Var> fakes_detached;
            for (const Var& f : traineds) fakes_detached.push_back(constant(f.val()));
            Var d_loss = adversarial_losses(critic, reals, fakes_detached, conds, aug_seed).d_loss;
            d_loss_v = d_loss.val()[0];
            opt_critic.zero_grads();
            backward(d_loss);
            opt_critic.step();
        }

        result.total_curve.push_back(bd.total);
        if (step % cfg.log_every == 0)
            run.append_loss_record(breakdown_json(step, bd, d_loss_v, cfg.use_critic));
        if ((step + 1) % cfg.checkpoint_every == 0) save_checkpoints();
        if (progress) progress(step, bd);
    }

    save_checkpoints();
    {  // sample grid: source / target / output triples
        std::vector<Image> tiles;
        Rng rng(derive_seed(cfg.seed, "grid"));
        for (int j = 0; j < std::min(4, pool); ++j) {
            const int s = rng.uniform_int(0, pool - 1);
            int t = rng.uniform_int(0, pool - 2);
            if (t >= s) ++t;
            Tensor dc = pool_embeds[static_cast<std::size_t>(t)];
            for (std::int64_t i = 0; i < dc.size(); ++i)
                dc[i] -= inv_embeds[static_cast<std::size_t>(s)][i];
            FeatureTrace tr = forward_injected(
                assets.gen, bank,
                latent_of(assets.gen, invs[static_cast<std::size_t>(s)].w_trunc), constant(dc),
                inj);
            tiles.push_back(dataset[static_cast<std::size_t>(s)].image);
            tiles.push_back(dataset[static_cast<std::size_t>(t)].image);
            tiles.push_back(tr.image.val());
        }
        write_ppm(run.file("samples.ppm"), tile_grid(tiles, 3));
    }
    assert_frozen_unchanged(assets, emb_sum, gen_sum, cls_sum);
    run.finalize({{"final_total", result.total_curve.empty() ? 0.0 : result.total_curve.back()}});
    check_run_integrity(run.path());
    return result;
}

// ------------------------------------------------------------------ editing

Image edit(const Assets& assets, const HyperNetworkBank& bank, const Image& source,
           const EditCondition& cond, const EditOptions& opts, InversionCache* cache) {
    InversionCache local;
    if (!cache) cache = &local;
    InversionResult inv_src =
        cache->get_or_compute(assets.gen, assets.embedder, source, assets.w_mean);

    Tensor dc;
    switch (cond.kind) {
        case EditCondition::Kind::Image:
            dc = assets.embedder.delta_clip_images(cond.target_image, source).delta;
            break;
        case EditCondition::Kind::Text:
            dc = assets.embedder
                     .delta_clip_texts(cond.target_caption, cond.source_caption)
                     .delta;
            break;
        case EditCondition::Kind::Mixed: {
            dc = assets.embedder.mixed_embedding(cond.target_image, cond.target_caption,
                                                 cond.mix_alpha);
            Tensor e_src = assets.embedder.embed_image(source);
            for (std::int64_t i = 0; i < dc.size(); ++i) dc[i] -= e_src[i];
            break;
        }
    }

    LatentVars lat = latent_of(assets.gen, inv_src.w_trunc);
    if (cond.kind != EditCondition::Kind::Text && opts.style_alpha < 1.0) {
        InversionResult inv_t =
            cache->get_or_compute(assets.gen, assets.embedder, cond.target_image, assets.w_mean);
        lat = style_mix(assets.gen, inv_src.w_trunc, inv_t.w_trunc, opts.style_alpha);
    }

    InjectionOptions inj{opts.eta, opts.beta, opts.residual_injection};
    return forward_injected(assets.gen, bank, lat, constant(dc), inj).image.val();
}

// --------------------------------------------------------------- evaluation

namespace {

AdaptationReport evaluate_domains(const Assets& assets, const HyperNetworkBank* bank,
                                  const std::vector<DomainSpec>& domains,
                                  const InjectionOptions& inj, int n_samples, std::uint64_t seed,
                                  InversionCache& cache) {
    AdaptationReport rep;
    for (const DomainSpec& spec : domains) {
        // real side: the domain transform applied to fresh base scenes
        std::vector<Sample> base =
            make_dataset(n_samples, derive_seed(seed, "real-" + spec.name), spec.exemplar.dim(1));
        std::vector<Image> real;
        for (const Sample& s : base) real.push_back(apply_domain_transform(s.image, spec));

        Tensor dc;
        if (bank) {
            InversionResult inv =
                cache.get_or_compute(assets.gen, assets.embedder, spec.exemplar, assets.w_mean);
            dc = assets.embedder.delta_clip_images(spec.exemplar, inv.x_fixed).delta;
        }

        std::vector<Image> gen_imgs;
        Rng rng(derive_seed(seed, "gen-" + spec.name));
        for (int i = 0; i < n_samples; ++i) {
            Tensor w = assets.gen.map_latent(assets.gen.sample_z(rng)).w;
            if (bank) {
                FeatureTrace t = forward_injected(assets.gen, *bank, latent_of(assets.gen, w),
                                                  constant(dc), inj);
                gen_imgs.push_back(t.image.val());
            } else {
                gen_imgs.push_back(assets.gen.synthesize_w(w));
            }
        }

        DomainMetricsRow row;
        row.name = spec.name;
        row.frechet = frechet_distance(embed_stats(assets.embedder, real),
                                       embed_stats(assets.embedder, gen_imgs));
        QualityDiversity qd = quality_diversity(
            assets.embedder, gen_imgs, spec.caption ? spec.caption->text() : std::string{},
            &spec.exemplar);
        row.quality = qd.quality;
        row.diversity = qd.diversity;
        rep.rows.push_back(row);

        rep.mean_frechet += row.frechet;
        rep.mean_quality += row.quality;
        rep.mean_diversity += row.diversity;
    }
    const double n = static_cast<double>(rep.rows.size());
    rep.mean_frechet /= n;
    rep.mean_quality /= n;
    rep.mean_diversity /= n;
    return rep;
}

}  // namespace

AdaptationReport evaluate_adaptation(const Assets& assets, const HyperNetworkBank& bank,
                                     const std::vector<DomainSpec>& domains, const TrainConfig& cfg,
                                     int n_samples, std::uint64_t seed, InversionCache* cache) {
    InversionCache local;
    if (!cache) cache = &local;
    InjectionOptions inj{cfg.eta, 1.0, cfg.use_residual_injection};
    return evaluate_domains(assets, &bank, domains, inj, n_samples, seed, *cache);
}

AdaptationReport evaluate_unadapted(const Assets& assets, const std::vector<DomainSpec>& domains,
                                    int n_samples, std::uint64_t seed, InversionCache* cache) {
    InversionCache local;
    if (!cache) cache = &local;
    return evaluate_domains(assets, nullptr, domains, InjectionOptions{}, n_samples, seed, *cache);
}

ReferenceReport evaluate_reference(const Assets& assets, const HyperNetworkBank& bank,
                                   const std::vector<Sample>& dataset, const EditOptions& opts,
                                   int n_probes, std::uint64_t seed, InversionCache* cache) {
    InversionCache local;
    if (!cache) cache = &local;
    Rng rng(derive_seed(seed, "ref-probes"));
    const int n = static_cast<int>(dataset.size());
    if (n < 2) throw std::runtime_error("evaluate_reference: dataset too small");

    ReferenceReport rep;
    std::vector<Image> outputs, reals;
    int color_hits = 0, shape_hits = 0, color_total = 0;
    for (int i = 0; i < n_probes; ++i) {
        const int s = rng.uniform_int(0, n - 1);
        int t = rng.uniform_int(0, n - 2);
        if (t >= s) ++t;
        const Sample& src = dataset[static_cast<std::size_t>(s)];
        const Sample& tgt = dataset[static_cast<std::size_t>(t)];

        EditCondition cond;
        cond.kind = EditCondition::Kind::Image;
        cond.target_image = tgt.image;
        Image out = edit(assets, bank, src.image, cond, opts, cache);

        rep.id_source += id_similarity(assets.classifiers, src.image, out);
        rep.id_target += id_similarity(assets.classifiers, tgt.image, out);
        rep.clip_sim += clip_similarity(assets.embedder, out, tgt.image);
        if (tgt.scene.fill_color != src.scene.fill_color) {
            ++color_total;
            if (assets.classifiers.predict(Slot::Color, out) ==
                static_cast<int>(tgt.scene.fill_color))
                ++color_hits;
        }
        if (assets.classifiers.predict(Slot::Shape, out) == static_cast<int>(src.scene.shape))
            ++shape_hits;

        outputs.push_back(out);
        reals.push_back(tgt.image);
    }
    rep.probes = n_probes;
    rep.id_source /= n_probes;
    rep.id_target /= n_probes;
    rep.clip_sim /= n_probes;
    rep.color_transfer = color_total ? static_cast<double>(color_hits) / color_total : 0.0;
    rep.shape_agreement = static_cast<double>(shape_hits) / n_probes;
    rep.frechet = frechet_distance(embed_stats(assets.embedder, reals),
                                   embed_stats(assets.embedder, outputs));
    return rep;
}

TextReport evaluate_text(const Assets& assets, const HyperNetworkBank& bank,
                         const std::vector<Sample>& dataset, const EditOptions& opts, int n_probes,
                         std::uint64_t seed, InversionCache* cache) {
    InversionCache local;
    if (!cache) cache = &local;
    Rng rng(derive_seed(seed, "text-probes"));
    const int n = static_cast<int>(dataset.size());

    // single-attribute probes across all four slots, plus two-slot probes
    std::vector<AmaProbe> probes;
    for (int i = 0; i < n_probes; ++i) {
        const Sample& src = dataset[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
        const Slot slot = static_cast<Slot>(i % kNumSlots);
        const int classes = slot_classes(slot);
        int value = rng.uniform_int(0, classes - 2);
        if (value >= src.scene.attribute(slot)) ++value;  // ensure the attribute is absent

        ShapeScene want = src.scene;
        switch (slot) {
            case Slot::Size: want.size = static_cast<SizeClass>(value); break;
            case Slot::Color: want.fill_color = static_cast<FillColor>(value); break;
            case Slot::Shape: want.shape = static_cast<Shape>(value); break;
            case Slot::Background: want.background = static_cast<Background>(value); break;
        }
        std::array<bool, kNumSlots> mask{};
        mask[static_cast<std::size_t>(slot)] = true;
        const bool multi = (i % 3 == 2) && slot != Slot::Color;
        if (multi) {  // add a color flip for the multi-attribute pool
            int cv = rng.uniform_int(0, kNumFillColors - 2);
            if (cv >= static_cast<int>(src.scene.fill_color)) ++cv;
            want.fill_color = static_cast<FillColor>(cv);
            mask[static_cast<std::size_t>(Slot::Color)] = true;
        }

        AmaProbe p;
        p.source = src.image;
        p.caption = Caption::masked(want, mask).text();
        for (int k = 0; k < kNumSlots; ++k)
            p.target[static_cast<std::size_t>(k)] =
                mask[static_cast<std::size_t>(k)] ? want.attribute(static_cast<Slot>(k)) : -1;
        probes.push_back(std::move(p));
    }

    EditFn edit_fn = [&](const Image& img, const std::string& caption) {
        EditCondition cond;
        cond.kind = EditCondition::Kind::Text;
        cond.target_caption = caption;
        return edit(assets, bank, img, cond, opts, cache);
    };
    EditFn noop_fn = [](const Image& img, const std::string&) { return img; };

    TextReport rep;
    rep.ama_edit = ama(assets.classifiers, edit_fn, probes);
    rep.ama_noop = ama(assets.classifiers, noop_fn, probes);

    std::vector<Image> outputs, reals;
    Rng noise_rng(derive_seed(seed, "noise"));
    int cmp_count = 0;
    for (const AmaProbe& p : probes) {
        Image out = edit_fn(p.source, p.caption);
        rep.cmp_edits += cmp(assets.embedder, p.source, out, p.caption);
        Image noise = p.source;
        for (double& x : noise.v) x = noise_rng.uniform();
        rep.cmp_noise += cmp(assets.embedder, p.source, noise, p.caption);
        ++cmp_count;
        outputs.push_back(out);
        reals.push_back(p.source);
    }
    rep.cmp_edits /= cmp_count;
    rep.cmp_noise /= cmp_count;
    rep.frechet = frechet_distance(embed_stats(assets.embedder, reals),
                                   embed_stats(assets.embedder, outputs));
    return rep;
}

// ----------------------------------------------------------------- ablation

AblationTable run_ablation(const Assets& assets, const std::vector<DomainSpec>& domains,
                           const TrainConfig& base_cfg, const std::filesystem::path& root,
                           int eval_samples, InversionCache* cache,
                           const ProgressFn& progress) {
    InversionCache local;
    if (!cache) cache = &local;

    struct Variant {
        const char* name;
        bool critic, residual;
        double paper_fid;  // full-scale reference values, reported not asserted
    };
    const Variant variants[] = {{"B", false, false, 43.43},
                                {"B+CD", true, false, 33.76},
                                {"B+RF", false, true, 33.43},
                                {"full", true, true, 30.55}};

    AblationTable table;
    std::ostringstream out;
    out << "variant  critic residual  frechet   quality  diversity  full-scale-ref-fid\n";
    for (const Variant& v : variants) {
        TrainConfig cfg = base_cfg;
        cfg.use_critic = v.critic;
        cfg.use_residual_injection = v.residual;
        TrainResult tr = train_adaptation(assets, domains, cfg, root, cache, progress);
        HyperNetworkBank bank = HyperNetworkBank::from_checkpoint(
            load_checkpoint(tr.bank_ck, "bank"), assets.gen.config(), assets.gen.checksum());

        AblationRow row;
        row.name = v.name;
        row.use_critic = v.critic;
        row.use_residual = v.residual;
        row.report = evaluate_adaptation(assets, bank, domains, cfg, eval_samples,
                                         derive_seed(base_cfg.seed, "ablation-eval"), cache);
        table.rows.push_back(row);

        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-8s %-6s %-9s %8.4f %9.4f %10.4f %12.2f\n", v.name,
                      v.critic ? "yes" : "no", v.residual ? "yes" : "no",
                      row.report.mean_frechet, row.report.mean_quality,
                      row.report.mean_diversity, v.paper_fid);
        out << buf;
    }
    table.rendered = out.str();
    return table;
}

}  // namespace stylemod
