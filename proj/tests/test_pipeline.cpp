#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stylemod/trainer.hpp"
#include "testutil.hpp"

using namespace stylemod;
namespace fs = std::filesystem;

namespace {

// smallest configuration that still exercises every code path: 24px canvas
// (large objects need radius 9 plus jitter), 4 conv layers, 16-d embeddings
Assets tiny_assets() {
    EmbedderConfig ec;
    ec.canvas = 24;
    ec.embed_dim = 16;
    ec.conv1_ch = 4;
    ec.conv2_ch = 8;
    ec.conv3_ch = 8;
    ec.token_dim = 8;
    ec.text_hidden = 16;
    JointEmbedder emb(ec, 3);

    GeneratorConfig gc;
    gc.z_dim = 8;
    gc.base_res = 6;
    gc.img_size = 24;
    gc.const_ch = 8;
    gc.layer_out = {8, 8, 8, 8};
    StyleGenerator gen(gc, 5);

    AttributeClassifiers cls(24, 2);
    return Assets::from_parts(std::move(emb), std::move(gen), std::move(cls));
}

TrainConfig tiny_cfg(const std::string& task) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.steps = 6;
    cfg.batch = 2;
    cfg.canvas = 24;
    cfg.ref_pool = 3;
    cfg.checkpoint_every = 3;
    cfg.grid_samples = 2;
    return cfg;
}

fs::path fresh_root(const std::string& tag) {
    fs::path root = fs::temp_directory_path() / ("stylemod-test-" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
    return root;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("one-shot adaptation training runs end to end and is reproducible") {
    Assets assets = tiny_assets();
    std::vector<DomainSpec> domains = make_domain_roster(24, 21, false);
    TrainConfig cfg = tiny_cfg("adaptation");

    fs::path root = fresh_root("adapt");
    InversionCache cache;
    TrainResult r1 = train_adaptation(assets, domains, cfg, root, &cache);
    CHECK(fs::exists(r1.bank_ck));
    CHECK(fs::exists(r1.critic_ck));
    CHECK(static_cast<int>(r1.total_curve.size()) == cfg.steps);
    for (double v : r1.total_curve) CHECK(std::isfinite(v));
    CHECK_NOTHROW(check_run_integrity(r1.run_dir));

    // the saved bank only loads against the generator it was trained with
    HyperNetworkBank bank = HyperNetworkBank::from_checkpoint(
        load_checkpoint(r1.bank_ck, "bank"), assets.gen.config(), assets.gen.checksum());
    CHECK_THROWS(HyperNetworkBank::from_checkpoint(load_checkpoint(r1.bank_ck, "bank"),
                                                   assets.gen.config(),
                                                   assets.gen.checksum() + 1));

    // identical config and seed: identical loss logs and identical bank bytes
    TrainResult r2 = train_adaptation(assets, domains, cfg, fresh_root("adapt2"), &cache);
    CHECK(slurp(r1.run_dir / "loss_log.jsonl") == slurp(r2.run_dir / "loss_log.jsonl"));
    CHECK(slurp(r1.bank_ck) == slurp(r2.bank_ck));

    // a different seed actually changes the trajectory
    TrainConfig cfg2 = cfg;
    cfg2.seed = 99;
    TrainResult r3 = train_adaptation(assets, domains, cfg2, fresh_root("adapt3"), &cache);
    CHECK(slurp(r1.run_dir / "loss_log.jsonl") != slurp(r3.run_dir / "loss_log.jsonl"));

    // evaluation produces one finite row per domain
    AdaptationReport rep = evaluate_adaptation(assets, bank, domains, cfg, 3, 77, &cache);
    CHECK(rep.rows.size() == domains.size());
    for (const auto& row : rep.rows) {
        CHECK(std::isfinite(row.frechet));
        CHECK(std::isfinite(row.quality));
        CHECK(std::isfinite(row.diversity));
    }
    AdaptationReport base = evaluate_unadapted(assets, domains, 3, 77, &cache);
    CHECK(base.rows.size() == domains.size());
}

TEST_CASE("reference-guided training and the edit entry point") {
    Assets assets = tiny_assets();
    std::vector<Sample> dataset = make_dataset(8, 41, 24);
    TrainConfig cfg = tiny_cfg("reference");
    cfg.steps = 4;

    InversionCache cache;
    TrainResult r = train_reference(assets, dataset, cfg, fresh_root("ref"), &cache);
    CHECK(fs::exists(r.bank_ck));
    CHECK(static_cast<int>(r.total_curve.size()) == cfg.steps);
    CHECK_NOTHROW(check_run_integrity(r.run_dir));

    HyperNetworkBank bank = HyperNetworkBank::from_checkpoint(
        load_checkpoint(r.bank_ck, "bank"), assets.gen.config(), assets.gen.checksum());

    const Image& src = dataset[0].image;
    EditCondition img_cond;
    img_cond.kind = EditCondition::Kind::Image;
    img_cond.target_image = dataset[1].image;
    EditCondition txt_cond;
    txt_cond.kind = EditCondition::Kind::Text;
    txt_cond.target_caption = "blue square";

    // beta=0 disables the residual entirely: the output is the plain frozen
    // render of the inverted source, identical for any condition
    EditOptions off;
    off.beta = 0.0;
    Image a = edit(assets, bank, src, img_cond, off, &cache);
    Image b = edit(assets, bank, src, txt_cond, off, &cache);
    CHECK(max_abs_diff(a, b) == 0.0);

    EditOptions on;
    Image edited_img = edit(assets, bank, src, img_cond, on, &cache);
    Image edited_txt = edit(assets, bank, src, txt_cond, on, &cache);
    CHECK(edited_img.shape == std::vector<int>{3, 24, 24});
    CHECK(mean_abs_diff(edited_img, a) > 0.0);
    CHECK(mean_abs_diff(edited_txt, edited_img) > 0.0);

    // mixed conditioning and style mixing go through the same path
    EditCondition mixed;
    mixed.kind = EditCondition::Kind::Mixed;
    mixed.target_image = dataset[2].image;
    mixed.target_caption = "red circle";
    EditOptions mixed_opts;
    mixed_opts.style_alpha = 0.6;
    Image edited_mixed = edit(assets, bank, src, mixed, mixed_opts, &cache);
    for (double v : edited_mixed.v) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    ReferenceReport ref = evaluate_reference(assets, bank, dataset, EditOptions{}, 3, 55, &cache);
    CHECK(ref.probes == 3);
    CHECK(std::isfinite(ref.frechet));
    CHECK(ref.id_source >= -1.0);
    CHECK(ref.id_source <= 1.0);
}

TEST_CASE("ablation grid covers all four variants deterministically") {
    Assets assets = tiny_assets();
    std::vector<DomainSpec> domains = make_domain_roster(24, 21, false);
    TrainConfig cfg = tiny_cfg("adaptation");
    cfg.steps = 3;

    InversionCache cache;
    AblationTable t1 = run_ablation(assets, domains, cfg, fresh_root("abl1"), 2, &cache);
    REQUIRE(t1.rows.size() == 4);
    CHECK(t1.rows[0].name == "B");
    CHECK(!t1.rows[0].use_critic);
    CHECK(!t1.rows[0].use_residual);
    CHECK(t1.rows[3].name == "full");
    CHECK(t1.rows[3].use_critic);
    CHECK(t1.rows[3].use_residual);
    CHECK(!t1.rendered.empty());

    AblationTable t2 = run_ablation(assets, domains, cfg, fresh_root("abl2"), 2, &cache);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(t1.rows[i].report.mean_frechet == t2.rows[i].report.mean_frechet);
        CHECK(t1.rows[i].report.mean_quality == t2.rows[i].report.mean_quality);
        CHECK(t1.rows[i].report.mean_diversity == t2.rows[i].report.mean_diversity);
    }
}
