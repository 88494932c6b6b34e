#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "stylemod/classifiers.hpp"
#include "stylemod/evalmetrics.hpp"
#include "stylemod/invert.hpp"
#include "stylemod/losses.hpp"
#include "testutil.hpp"

using namespace stylemod;

namespace {

EmbedderConfig tiny_embedder_config() {
    EmbedderConfig ec;
    ec.canvas = 8;
    ec.embed_dim = 16;
    ec.conv1_ch = 4;
    ec.conv2_ch = 8;
    ec.conv3_ch = 8;
    ec.token_dim = 8;
    ec.text_hidden = 16;
    return ec;
}

GeneratorConfig tiny_gen_config() {
    GeneratorConfig gc;
    gc.z_dim = 8;
    gc.base_res = 4;
    gc.img_size = 8;
    gc.const_ch = 4;
    gc.layer_out = {4, 4};
    return gc;
}

}  // namespace

TEST_CASE("guarded cosine: aligned, opposed, orthogonal, degenerate") {
    Tensor u({3});
    u.v = {1, 2, 3};
    Tensor nu({3});
    nu.v = {-2, -4, -6};
    Tensor perp({3});
    perp.v = {-2, 1, 0};
    Tensor zero = Tensor::zeros({3});

    CHECK(cosine_guarded(constant(u), constant(u)).val()[0] == doctest::Approx(1.0));
    CHECK(cosine_guarded(constant(u), constant(nu)).val()[0] == doctest::Approx(-1.0));
    CHECK(cosine_guarded(constant(u), constant(perp)).val()[0] == doctest::Approx(0.0));
    CHECK(cosine_guarded(constant(u), constant(zero)).val()[0] == 0.0);
    CHECK(cosine_guarded(constant(zero), constant(zero)).val()[0] == 0.0);
}

TEST_CASE("clip similarity loss: zero for identical targets, throws on zero-norm") {
    Tensor e({4});
    e.v = {0.5, 0.5, 0.5, 0.5};
    CHECK(clip_similarity_loss(constant(e), constant(e)).val()[0] == doctest::Approx(0.0));
    CHECK_THROWS(clip_similarity_loss(constant(Tensor::zeros({4})), constant(e)));
}

TEST_CASE("directional losses degrade to 1 on degenerate deltas") {
    JointEmbedder emb(tiny_embedder_config(), 3);
    emb.freeze();
    Rng rng(4);
    Var a = constant(testutil::rand_image(8, rng));
    Var b = constant(testutil::rand_image(8, rng));
    Var c = constant(testutil::rand_image(8, rng));
    // x_trained == x_sample: dc_sample vanishes, across degrades to 1; the
    // source and target shifts coincide here, so within is exactly 0
    DirectionalLossPair p = directional_losses(AdaptTask::Adaptation, emb, a, a, b, b);
    CHECK(p.across.val()[0] == doctest::Approx(1.0));
    CHECK(p.within.val()[0] == doctest::Approx(0.0));
    // x_target == x_trained: dc_target vanishes, within degrades to 1
    DirectionalLossPair q = directional_losses(AdaptTask::Adaptation, emb, a, b, b, c);
    CHECK(q.within.val()[0] == doctest::Approx(1.0));
    CHECK_THROWS(directional_losses(AdaptTask::Reference, emb, a, a, b, b));  // needs x_recon
}

TEST_CASE("contrastive loss matches an independent cross-entropy oracle") {
    JointEmbedder emb(tiny_embedder_config(), 3);
    emb.freeze();
    Rng rng(5);
    int checked = 0;
    for (int K : {2, 4, 8}) {
        for (int rep = 0; rep < 12; ++rep) {
            std::vector<Image> targets;
            std::vector<Var> recons;
            for (int j = 0; j < K; ++j) {
                targets.push_back(testutil::rand_image(8, rng));
                recons.push_back(constant(testutil::rand_image(8, rng)));
            }
            const int k = rng.uniform_int(0, K - 1);
            const std::uint64_t seed = rng.next_u64();
            const double got = contrastive_adaptation_loss(emb, targets, recons, k, seed).val()[0];

            // oracle: rebuild the logit row with plain doubles and take
            // -log softmax at the positive
            Tensor er = emb.embed_image(recons[static_cast<std::size_t>(k)].val());
            std::vector<double> logits;
            auto dotp = [&](const Tensor& t) {
                double s = 0;
                for (std::int64_t i = 0; i < t.size(); ++i) s += t[i] * er[i];
                return s;
            };
            logits.push_back(dotp(emb.embed_image(targets[static_cast<std::size_t>(k)])));
            for (int j = 0; j < K; ++j) {
                if (j == k) continue;
                Image aug = targets[static_cast<std::size_t>(j)];
                Rng coin(derive_seed(seed, "contrastive-flip", static_cast<std::uint64_t>(j)));
                if (coin.uniform() < 0.5) aug = flip_horizontal(aug);
                aug = color_jitter(aug,
                                   derive_seed(seed, "contrastive-jitter",
                                               static_cast<std::uint64_t>(j)));
                logits.push_back(dotp(emb.embed_image(aug)));
            }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double denom = 0;
            for (double l : logits) denom += std::exp(l - mx);
            const double want = -(logits[0] - mx) + std::log(denom);
            CHECK(std::abs(got - want) < 1e-9);
            ++checked;
        }
    }
    CHECK(checked == 36);
    CHECK_THROWS(contrastive_adaptation_loss(emb, {testutil::rand_image(8, rng)},
                                             {constant(testutil::rand_image(8, rng))}, 0, 1));
}

TEST_CASE("total loss: weighted sum, undefined terms, non-finite naming") {
    LossWeights w;
    CHECK(w.clip + w.across + w.within + w.cgan + w.contrastive + w.id + w.l2 + w.lpips ==
          doctest::Approx(56.2));

    auto c = [](double v) {
        Tensor t({1});
        t.v = {v};
        return constant(t);
    };
    LossTerms all{c(1), c(1), c(1), c(1), c(1), c(1), c(1), c(1)};
    LossBreakdown bd = total_loss(w, all);
    CHECK(bd.total == doctest::Approx(56.2));
    CHECK(bd.total_var.val()[0] == doctest::Approx(56.2));

    // linearity: bumping one term by 1 adds exactly its weight
    LossTerms bumped = all;
    bumped.id = c(2);
    CHECK(total_loss(w, bumped).total - bd.total == doctest::Approx(w.id));

    LossTerms only_clip;
    only_clip.clip = c(0.5);
    CHECK(total_loss(w, only_clip).total == doctest::Approx(15.0));

    LossTerms bad = all;
    bad.contrastive = c(std::nan(""));
    try {
        total_loss(w, bad);
        FAIL("expected throw");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("contrastive") != std::string::npos);
    }
}

TEST_CASE("loss gradients match finite differences on random images") {
    JointEmbedder emb(tiny_embedder_config(), 3);
    emb.freeze();
    Rng rng(6);
    Tensor x = testutil::rand_image(8, rng);
    Image anchor = testutil::rand_image(8, rng);
    Image anchor2 = testutil::rand_image(8, rng);

    auto check_fd = [&](const std::function<Var(const std::vector<Var>&)>& f) {
        CHECK(testutil::max_rel_error(f, {x}) < 1e-3);
    };
    check_fd([&](const std::vector<Var>& v) {
        return reconstruction_losses(emb, constant(anchor), v[0]).l2;
    });
    check_fd([&](const std::vector<Var>& v) {
        return reconstruction_losses(emb, constant(anchor), v[0]).lpips;
    });
    check_fd([&](const std::vector<Var>& v) {
        return clip_similarity_loss(emb.embed_image(v[0]), constant(emb.embed_image(anchor)));
    });
    check_fd([&](const std::vector<Var>& v) {
        DirectionalLossPair p = directional_losses(AdaptTask::Adaptation, emb,
                                                   constant(anchor), v[0],
                                                   constant(anchor2), constant(anchor));
        return add(p.across, p.within);
    });
    check_fd([&](const std::vector<Var>& v) {
        return contrastive_adaptation_loss(emb, {anchor, anchor2},
                                           {v[0], constant(anchor2)}, 0, 11);
    });
}

TEST_CASE("identity loss vanishes on identical inputs") {
    AttributeClassifiers cls(32, 2);
    Rng rng(7);
    Image img = testutil::rand_image(32, rng);
    CHECK(identity_loss(cls.feature_fn(), constant(img), constant(img)).val()[0] ==
          doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("gaussian stats match a hand computation") {
    std::vector<Tensor> feats;
    const double rows[4][2] = {{1, 2}, {3, 0}, {-1, 4}, {5, 2}};
    for (auto& r : rows) {
        Tensor t({2});
        t.v = {r[0], r[1]};
        feats.push_back(t);
    }
    GaussianStats s = gaussian_stats(feats);
    CHECK(s.count == 4);
    CHECK(s.mean[0] == doctest::Approx(2.0));
    CHECK(s.mean[1] == doctest::Approx(2.0));
    // unbiased covariance, denominator n-1 = 3
    CHECK(s.cov[0] == doctest::Approx((1 + 1 + 9 + 9) / 3.0));    // var(x)
    CHECK(s.cov[1] == doctest::Approx((-1 * 0 + 1 * -2 + -3 * 2 + 3 * 0) / 3.0));
    CHECK(s.cov[2] == doctest::Approx(s.cov[1]));
    CHECK(s.cov[3] == doctest::Approx((0 + 4 + 4 + 0) / 3.0));    // var(y)
}

TEST_CASE("frechet distance: identity and the 1-D closed form") {
    auto make = [](double mu, double var) {
        GaussianStats s;
        s.mean = Tensor({1});
        s.mean[0] = mu;
        s.cov = Tensor({1, 1});
        s.cov[0] = var;
        s.count = 100;
        return s;
    };
    // (mu-mu')^2 + s + s' - 2 sqrt(s s') = 1 + 1 + 4 - 4 = 2
    CHECK(frechet_distance(make(0, 1), make(1, 4)) == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(frechet_distance(make(0.3, 2), make(0.3, 2)) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(frechet_distance(make(0, 1), make(5, 1)) == doctest::Approx(25.0).epsilon(1e-4));

    // 2-D diagonal case decomposes per coordinate
    GaussianStats a, b;
    a.mean = Tensor({2});
    b.mean = Tensor({2});
    b.mean[0] = 2;
    a.cov = Tensor({2, 2});
    b.cov = Tensor({2, 2});
    a.cov[0] = 1;
    a.cov[3] = 9;
    b.cov[0] = 4;
    b.cov[3] = 1;
    // 4 + (1+4-4) + (9+1-6) = 9
    CHECK(frechet_distance(a, b) == doctest::Approx(9.0).epsilon(1e-4));
}

TEST_CASE("quality/diversity and cmp trivial cases") {
    JointEmbedder emb(tiny_embedder_config(), 3);
    emb.freeze();
    Rng rng(8);
    Image img = testutil::rand_image(8, rng);
    Image other = testutil::rand_image(8, rng);

    QualityDiversity qd = quality_diversity(emb, {img, img, img}, "", &img);
    CHECK(qd.quality == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(qd.diversity == doctest::Approx(0.0).epsilon(1e-9));
    QualityDiversity qd2 = quality_diversity(emb, {img, other}, "", &img);
    CHECK(qd2.diversity > 0.0);

    // untouched output: cmp reduces to the text-image cosine
    Tensor ei = emb.embed_image(img);
    Tensor et = emb.embed_text("red circle");
    double cos = 0;
    for (std::int64_t i = 0; i < ei.size(); ++i) cos += ei[i] * et[i];
    CHECK(cmp(emb, img, img, "red circle") == doctest::Approx(cos).epsilon(1e-9));
    CHECK(clip_similarity(emb, img, img) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("attribute classifiers learn the base distribution; ama oracle edits score 1") {
    std::vector<Sample> train = make_dataset(512, 31);
    std::vector<Sample> val = make_dataset(128, 32);
    AttributeClassifiers cls(32, 2);
    cls.train(train, val, /*epochs=*/8, /*lr=*/2e-3, /*seed=*/5);
    cls.freeze();

    int qualifying = 0;
    for (int s = 0; s < kNumSlots; ++s) {
        CHECK(cls.validation_accuracy(static_cast<Slot>(s)) > 0.5);
        if (cls.qualifies(static_cast<Slot>(s))) ++qualifying;
    }
    CHECK(qualifying >= 2);

    // oracle editor: re-render the scene with the requested attributes, so
    // qualifying slots must reach accuracy 1
    std::vector<Sample> probe_set = make_dataset(24, 33);
    std::vector<AmaProbe> probes;
    std::vector<ShapeScene> oracle_scenes;
    for (std::size_t i = 0; i < probe_set.size(); ++i) {
        AmaProbe p;
        p.source = probe_set[i].image;
        p.target = {-1, -1, -1, -1};
        const int slot = static_cast<int>(i) % kNumSlots;
        const int cur = probe_set[i].scene.attribute(static_cast<Slot>(slot));
        p.target[static_cast<std::size_t>(slot)] =
            (cur + 1) % slot_classes(static_cast<Slot>(slot));
        ShapeScene want = probe_set[i].scene;
        switch (static_cast<Slot>(slot)) {
            case Slot::Size: want.size = static_cast<SizeClass>(p.target[0]); break;
            case Slot::Color: want.fill_color = static_cast<FillColor>(p.target[1]); break;
            case Slot::Shape: want.shape = static_cast<Shape>(p.target[2]); break;
            case Slot::Background: want.background = static_cast<Background>(p.target[3]); break;
        }
        want.offset_x = 0;
        want.offset_y = 0;
        std::array<bool, kNumSlots> mask{};
        mask[static_cast<std::size_t>(slot)] = true;
        p.caption = Caption::masked(want, mask).text();
        probes.push_back(p);
        oracle_scenes.push_back(want);
    }
    std::size_t cursor = 0;
    AmaResult oracle = ama(cls,
                           [&](const Image&, const std::string& caption) {
                               ShapeScene want = oracle_scenes[cursor % oracle_scenes.size()];
                               ++cursor;
                               (void)caption;
                               return render_scene(want, 32);
                           },
                           probes);
    // clean re-renders of the requested scene: qualifying classifiers should
    // get nearly all of them (each slot sees 6 probes)
    for (int s = 0; s < kNumSlots; ++s)
        if (oracle.slot_used[static_cast<std::size_t>(s)])
            CHECK(oracle.per_slot[static_cast<std::size_t>(s)] >= 0.8);
    CHECK(oracle.single >= 0.8);

    // a no-op editor leaves every requested flip unsatisfied
    AmaResult noop = ama(cls, [](const Image& src, const std::string&) { return src; }, probes);
    CHECK(oracle.single - noop.single >= 0.4);
}

TEST_CASE("mean latent is reproducible and inversion recovers generated images") {
    GeneratorConfig gc = tiny_gen_config();
    StyleGenerator gen(gc, 5);
    gen.freeze();
    JointEmbedder emb(tiny_embedder_config(), 3);
    emb.freeze();

    Tensor wm1 = mean_latent(gen, 64, 7);
    Tensor wm2 = mean_latent(gen, 64, 7);
    CHECK(max_abs_diff(wm1, wm2) == 0.0);
    CHECK(wm1.shape == std::vector<int>{gc.z_dim});

    Rng rng(9);
    Image target = gen.synthesize(gen.sample_z(rng));
    InversionConfig icfg;
    icfg.steps = 80;
    InversionResult inv = invert_latent(gen, emb, target, wm1, icfg);
    CHECK(inv.objective_curve.size() == 80);
    CHECK(inv.objective_curve.back() < inv.objective_curve.front());
    const double baseline = mean_abs_diff(gen.synthesize_w(gen.truncate(wm1, wm1, icfg.psi)),
                                          target);
    CHECK(mean_abs_diff(inv.x_fixed, target) < baseline);

    // in-memory + on-disk cache reuse
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "stylemod-test-invcache";
    fs::remove_all(dir);
    fs::create_directories(dir);
    InversionCache cache(dir);
    InversionResult r1 = cache.get_or_compute(gen, emb, target, wm1, icfg);
    InversionResult r2 = cache.get_or_compute(gen, emb, target, wm1, icfg);
    CHECK(cache.memory_entries() == 1);
    CHECK(max_abs_diff(r1.w_inv, r2.w_inv) == 0.0);
    InversionCache cold(dir);  // fresh instance must hit the disk entry
    InversionResult r3 = cold.get_or_compute(gen, emb, target, wm1, icfg);
    CHECK(max_abs_diff(r1.w_inv, r3.w_inv) == 0.0);
    CHECK(max_abs_diff(r1.w_trunc, r3.w_trunc) == 0.0);
}
