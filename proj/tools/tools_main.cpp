// stylemod command-line interface: dataset generation, staged training,
// editing and evaluation. Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <iostream>

#include "stylemod/trainer.hpp"

namespace sm = stylemod;
namespace fs = std::filesystem;

namespace {

// --------------------------------------------------------------- sweep strip

// 3x5 bitmap glyphs for the panel labels (digits, dot, minus)
const std::map<char, std::array<std::uint8_t, 5>>& glyphs() {
    static const std::map<char, std::array<std::uint8_t, 5>> g = {
        {'0', {0b111, 0b101, 0b101, 0b101, 0b111}}, {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
        {'2', {0b111, 0b001, 0b111, 0b100, 0b111}}, {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
        {'4', {0b101, 0b101, 0b111, 0b001, 0b001}}, {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
        {'6', {0b111, 0b100, 0b111, 0b101, 0b111}}, {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
        {'8', {0b111, 0b101, 0b111, 0b101, 0b111}}, {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
        {'.', {0b000, 0b000, 0b000, 0b000, 0b010}}, {'-', {0b000, 0b000, 0b111, 0b000, 0b000}},
    };
    return g;
}

// stamps `text` into the top-left corner of a tile, black on white
void stamp_label(sm::Image& img, const std::string& text) {
    const int H = img.shape[1], W = img.shape[2];
    int x0 = 1;
    for (char ch : text) {
        auto it = glyphs().find(ch);
        if (it == glyphs().end()) continue;
        for (int y = 0; y < 5 && y + 1 < H; ++y)
            for (int x = 0; x < 3 && x0 + x < W; ++x) {
                const double v = (it->second[static_cast<std::size_t>(y)] >> (2 - x)) & 1 ? 0.0 : 1.0;
                for (int c = 0; c < 3; ++c) img.at3(c, y + 1, x0 + x) = v;
            }
        x0 += 4;
    }
}

std::string short_num(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void emit_sweep_strip(const sm::Assets& assets, const sm::HyperNetworkBank& bank,
                      const sm::Image& source, const sm::EditCondition& cond,
                      const sm::EditOptions& base_opts, const std::string& axis,
                      const std::vector<double>& values, const fs::path& out,
                      sm::InversionCache* cache) {
    if (values.empty()) throw std::runtime_error("sweep: empty value list");
    std::vector<sm::Image> panels;
    for (double v : values) {
        sm::EditOptions opts = base_opts;
        sm::EditCondition c = cond;
        if (axis == "beta")
            opts.beta = v;
        else if (axis == "alpha")
            opts.style_alpha = v;
        else if (axis == "mix_alpha")
            c.mix_alpha = v;
        else
            throw std::runtime_error("sweep: unknown axis " + axis);
        sm::Image panel = sm::edit(assets, bank, source, c, opts, cache);
        stamp_label(panel, short_num(v));
        panels.push_back(std::move(panel));
    }
    sm::write_ppm(out, sm::tile_grid(panels, static_cast<int>(panels.size())));
}

// ------------------------------------------------------------------ helpers

void ensure_parent_dir(const fs::path& p) {
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
}

struct AssetPaths {
    std::string embedder = "artifacts/embedder.ck";
    std::string generator = "artifacts/generator.ck";
    std::string classifiers = "artifacts/classifiers.ck";
};

void add_asset_flags(CLI::App* cmd, AssetPaths& p) {
    cmd->add_option("--embedder", p.embedder, "embedder checkpoint");
    cmd->add_option("--generator", p.generator, "generator checkpoint");
    cmd->add_option("--classifiers", p.classifiers, "attribute-classifier checkpoint");
}

sm::TrainConfig load_train_config(const std::string& config_file) {
    if (config_file.empty()) return {};
    std::ifstream in(config_file);
    if (!in) throw std::runtime_error("cannot open config file " + config_file);
    nlohmann::json j;
    in >> j;
    return sm::TrainConfig::from_json(j);
}

std::vector<sm::Sample> dataset_or_synth(const std::string& data_dir, int n, std::uint64_t seed,
                                         int canvas) {
    if (!data_dir.empty()) return sm::load_dataset(data_dir);
    return sm::make_dataset(n, seed, canvas);
}

void write_report(const fs::path& run_dir, const std::string& protocol,
                  const nlohmann::json& metrics, const std::string& table) {
    std::ofstream jl(run_dir / "report.jsonl");
    jl << nlohmann::json{{"protocol", protocol}, {"metrics", metrics}}.dump() << "\n";
    std::ofstream txt(run_dir / "report.txt");
    txt << table;
    std::cout << table;
}

std::string render_adaptation_table(const sm::AdaptationReport& rep, const char* title) {
    std::ostringstream out;
    out << title << "\n";
    out << "domain        frechet   quality  diversity\n";
    for (const auto& r : rep.rows) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f %9.4f %10.4f\n", r.name.c_str(), r.frechet,
                      r.quality, r.diversity);
        out << buf;
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-12s %8.4f %9.4f %10.4f\n", "mean", rep.mean_frechet,
                  rep.mean_quality, rep.mean_diversity);
    out << buf;
    out << "full-scale reference (Table 1 analog): frechet 24.74, quality 0.81, diversity 0.16\n";
    return out.str();
}

nlohmann::json adaptation_metrics(const sm::AdaptationReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"domain", r.name},
                        {"frechet", r.frechet},
                        {"quality", r.quality},
                        {"diversity", r.diversity}});
    return {{"rows", rows},
            {"mean_frechet", rep.mean_frechet},
            {"mean_quality", rep.mean_quality},
            {"mean_diversity", rep.mean_diversity}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CLIP-style conditioned hypernetwork modulation of a frozen style generator"};
    app.require_subcommand(1);

    std::string run_root_flag;
    app.add_option("--run-root", run_root_flag,
                   "run directory root (default: $STYLEMOD_RUN_ROOT or ./runs)");

    // ----- gen-data
    auto* gen_data = app.add_subcommand("gen-data", "generate the synthetic base dataset");
    struct {
        int n = 2048;
        std::uint64_t seed = 1;
        int canvas = 32;
        std::string out;
    } gd;
    gen_data->add_option("--n", gd.n, "sample count");
    gen_data->add_option("--seed", gd.seed, "root seed");
    gen_data->add_option("--canvas", gd.canvas, "canvas size");
    gen_data->add_option("--out", gd.out, "output directory")->required();

    // ----- train-embedder
    auto* tr_emb = app.add_subcommand(
        "train-embedder", "contrastively train the joint embedder and the attribute classifiers");
    struct {
        std::uint64_t seed = 1;
        int canvas = 32;
        std::string out_embedder = "artifacts/embedder.ck";
        std::string out_classifiers = "artifacts/classifiers.ck";
    } te;
    tr_emb->add_option("--seed", te.seed, "root seed");
    tr_emb->add_option("--canvas", te.canvas, "canvas size");
    tr_emb->add_option("--out-embedder", te.out_embedder, "embedder checkpoint path");
    tr_emb->add_option("--out-classifiers", te.out_classifiers, "classifier checkpoint path");

    // ----- pretrain-gan
    auto* pre = app.add_subcommand("pretrain-gan", "pre-train the base generator");
    struct {
        std::uint64_t seed = 1;
        int steps = 3000;
        int n = 2048;
        int canvas = 32;
        std::string data;
        std::string out = "artifacts/generator.ck";
    } pg;
    pre->add_option("--seed", pg.seed, "root seed");
    pre->add_option("--steps", pg.steps, "training steps");
    pre->add_option("--n", pg.n, "synthetic sample count when --data is not given");
    pre->add_option("--canvas", pg.canvas, "canvas size");
    pre->add_option("--data", pg.data, "dataset directory (default: synthesize)");
    pre->add_option("--out", pg.out, "generator checkpoint path");

    // ----- shared train flags
    struct TrainFlags {
        AssetPaths assets;
        std::string config;
        std::string cache;
        std::string data;
        sm::TrainConfig cfg;
        bool no_critic = false, no_residual = false;
    };
    auto add_train_flags = [](CLI::App* cmd, TrainFlags& f) {
        add_asset_flags(cmd, f.assets);
        cmd->add_option("--config", f.config, "JSON config file (flags override)");
        cmd->add_option("--cache", f.cache, "inversion cache directory");
        cmd->add_option("--steps", f.cfg.steps, "training steps");
        cmd->add_option("--seed", f.cfg.seed, "root seed");
        cmd->add_option("--lr", f.cfg.lr, "learning rate");
        cmd->add_option("--batch", f.cfg.batch, "batch size");
        cmd->add_option("--eta", f.cfg.eta, "residual injection strength");
        cmd->add_option("--canvas", f.cfg.canvas, "canvas size");
        cmd->add_flag("--no-critic", f.no_critic, "disable the adversarial term");
        cmd->add_flag("--no-residual", f.no_residual, "pure modulated path (baseline wiring)");
    };

    auto* tr_adapt = app.add_subcommand("train-adapt", "one-shot multi-domain adaptation");
    TrainFlags ta;
    add_train_flags(tr_adapt, ta);

    auto* tr_ref = app.add_subcommand("train-ref", "reference-guided synthesis training");
    TrainFlags tref;
    add_train_flags(tr_ref, tref);
    tr_ref->add_option("--data", tref.data, "base dataset directory (default: synthesize)");
    tr_ref->add_option("--ref-pool", tref.cfg.ref_pool, "source/target pool size");

    // ----- edit
    auto* ed = app.add_subcommand("edit", "reference- or text-guided editing");
    struct {
        AssetPaths assets;
        std::string bank;
        std::string source;
        std::string target_image;
        std::string caption;
        bool mixed = false;
        double mix_alpha = 0.5;
        double beta = 1.0;
        double style_alpha = 1.0;
        double eta = 0.1;
        std::string out = "edit.ppm";
        std::string cache;
        std::string sweep;
        std::vector<double> sweep_values;
    } ef;
    add_asset_flags(ed, ef.assets);
    ed->add_option("--bank", ef.bank, "trained hypernetwork bank checkpoint")->required();
    ed->add_option("--source", ef.source, "source image (ppm)")->required();
    ed->add_option("--target-image", ef.target_image, "conditioning image (ppm)");
    ed->add_option("--caption", ef.caption, "conditioning caption");
    ed->add_flag("--mixed", ef.mixed, "mixed image+text conditioning");
    ed->add_option("--mix-alpha", ef.mix_alpha, "text weight in mixed conditioning");
    ed->add_option("--beta", ef.beta, "residual scale at inference");
    ed->add_option("--style-alpha", ef.style_alpha, "style-mix weight toward the source latent");
    ed->add_option("--eta", ef.eta, "residual injection strength");
    ed->add_option("--out", ef.out, "output image path");
    ed->add_option("--cache", ef.cache, "inversion cache directory");
    ed->add_option("--sweep", ef.sweep, "emit a labeled strip over {beta, alpha, mix_alpha}");
    ed->add_option("--sweep-values", ef.sweep_values, "values for --sweep");

    // ----- eval
    auto* ev = app.add_subcommand("eval", "evaluate a finished run");
    struct {
        AssetPaths assets;
        std::string run;
        std::string protocol = "adaptation";
        std::string data;
        std::string cache;
        int samples = 100;
        int probes = 50;
        std::uint64_t seed = 1;
    } vf;
    add_asset_flags(ev, vf.assets);
    ev->add_option("--run", vf.run, "run directory containing bank.ck + config.json")->required();
    ev->add_option("--protocol", vf.protocol, "adaptation | reference | text")
        ->check(CLI::IsMember({"adaptation", "reference", "text"}));
    ev->add_option("--data", vf.data, "dataset directory (reference/text protocols)");
    ev->add_option("--samples", vf.samples, "per-domain sample count");
    ev->add_option("--probes", vf.probes, "probe count (reference/text)");
    ev->add_option("--seed", vf.seed, "evaluation seed");
    ev->add_option("--cache", vf.cache, "inversion cache directory");

    // ----- ablate
    auto* ab = app.add_subcommand("ablate", "train and compare {B, B+CD, B+RF, full}");
    TrainFlags abf;
    add_train_flags(ab, abf);
    int ab_eval_samples = 50;
    ab->add_option("--eval-samples", ab_eval_samples, "per-domain eval sample count");

    // ----- report
    auto* rp = app.add_subcommand("report", "aggregate reports from multiple runs");
    std::vector<std::string> rp_runs;
    std::string rp_out;
    rp->add_option("--runs", rp_runs, "run directories")->required();
    rp->add_option("--out", rp_out, "write the combined table here as well");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        const fs::path root = run_root_flag.empty() ? sm::run_root() : fs::path(run_root_flag);

        if (*gen_data) {
            sm::write_dataset(gd.out, sm::make_dataset(gd.n, gd.seed, gd.canvas));
            std::cout << "wrote " << gd.n << " samples to " << gd.out << "\n";
        } else if (*tr_emb) {
            sm::EmbedderConfig ec;
            ec.canvas = te.canvas;
            sm::JointEmbedder emb(ec, sm::derive_seed(te.seed, "embedder-init"));
            sm::EmbedderTrainResult r = sm::train_embedder(emb, te.seed);
            ensure_parent_dir(te.out_embedder);
            sm::save_checkpoint(te.out_embedder, emb.to_checkpoint());
            std::cout << "embedder holdout retrieval top-1: " << r.holdout_retrieval_top1 << "\n";

            sm::AttributeClassifiers cls(te.canvas, sm::derive_seed(te.seed, "classifier-init"));
            std::vector<sm::Sample> train =
                sm::make_dataset(1024, sm::derive_seed(te.seed, "classifier-train"), te.canvas);
            std::vector<sm::Sample> val =
                sm::make_dataset(256, sm::derive_seed(te.seed, "classifier-val"), te.canvas);
            cls.train(train, val);
            cls.freeze();
            ensure_parent_dir(te.out_classifiers);
            sm::save_checkpoint(te.out_classifiers, cls.to_checkpoint());
            for (int k = 0; k < sm::kNumSlots; ++k)
                std::cout << "classifier slot " << k << " val acc: "
                          << cls.validation_accuracy(static_cast<sm::Slot>(k)) << "\n";
        } else if (*pre) {
            std::vector<sm::Sample> data =
                dataset_or_synth(pg.data, pg.n, sm::derive_seed(pg.seed, "pretrain-data"),
                                 pg.canvas);
            sm::GeneratorConfig gc;
            gc.img_size = pg.canvas;
            sm::StyleGenerator gen(gc, sm::derive_seed(pg.seed, "generator-init"));
            sm::BaseDiscriminator disc(pg.canvas, sm::derive_seed(pg.seed, "disc-init"));
            sm::PretrainConfig pc;
            pc.steps = pg.steps;
            sm::pretrain_base(gen, disc, data, pc, pg.seed, [](int s, double g, double d) {
                if (s % 100 == 0)
                    std::cout << "step " << s << " g_loss " << g << " d_loss " << d << "\n";
            });
            ensure_parent_dir(pg.out);
            sm::save_checkpoint(pg.out, gen.to_checkpoint());
            std::cout << "wrote " << pg.out << "\n";
        } else if (*tr_adapt || *tr_ref || *ab) {
            TrainFlags& f = *tr_adapt ? ta : (*tr_ref ? tref : abf);
            sm::TrainConfig cfg = load_train_config(f.config);
            // reference training needs a longer schedule to cover the pair grid
            if (*tr_ref && f.config.empty()) cfg.steps = 10000;
            // explicit flags override the config file
            CLI::App* cmd = *tr_adapt ? tr_adapt : (*tr_ref ? tr_ref : ab);
            auto override_if = [&](const char* flag, auto& dst, auto& src) {
                if (cmd->count(flag)) dst = src;
            };
            override_if("--steps", cfg.steps, f.cfg.steps);
            override_if("--seed", cfg.seed, f.cfg.seed);
            override_if("--lr", cfg.lr, f.cfg.lr);
            override_if("--batch", cfg.batch, f.cfg.batch);
            override_if("--eta", cfg.eta, f.cfg.eta);
            override_if("--canvas", cfg.canvas, f.cfg.canvas);
            if (f.no_critic) cfg.use_critic = false;
            if (f.no_residual) cfg.use_residual_injection = false;

            sm::Assets assets =
                sm::Assets::load(f.assets.embedder, f.assets.generator, f.assets.classifiers);
            sm::InversionCache cache(f.cache.empty() ? fs::path{} : fs::path(f.cache));

            if (*tr_adapt) {
                cfg.task = "adaptation";
                std::vector<sm::DomainSpec> domains = sm::make_domain_roster(
                    cfg.canvas, sm::derive_seed(cfg.seed, "domains"), false);
                sm::TrainResult r =
                    sm::train_adaptation(assets, domains, cfg, root, &cache,
                                         [&](int s, const sm::LossBreakdown& bd) {
                                             if (s % 100 == 0)
                                                 std::cout << "step " << s << " total "
                                                           << bd.total << "\n";
                                         });
                std::cout << "run: " << r.run_dir.string() << "\n";
            } else if (*tr_ref) {
                cfg.task = "reference";
                if (cmd->count("--ref-pool")) cfg.ref_pool = f.cfg.ref_pool;
                std::vector<sm::Sample> data = dataset_or_synth(
                    f.data, 256, sm::derive_seed(cfg.seed, "ref-data"), cfg.canvas);
                sm::TrainResult r =
                    sm::train_reference(assets, data, cfg, root, &cache,
                                        [&](int s, const sm::LossBreakdown& bd) {
                                            if (s % 100 == 0)
                                                std::cout << "step " << s << " total "
                                                          << bd.total << "\n";
                                        });
                std::cout << "run: " << r.run_dir.string() << "\n";
            } else {
                cfg.task = "adaptation";
                std::vector<sm::DomainSpec> domains = sm::make_domain_roster(
                    cfg.canvas, sm::derive_seed(cfg.seed, "domains"), false);
                sm::AblationTable table =
                    sm::run_ablation(assets, domains, cfg, root, ab_eval_samples, &cache);
                std::cout << table.rendered;
                std::ostringstream name;
                name << "ablation-" << std::hex << cfg.hash() << ".txt";
                fs::create_directories(root);
                std::ofstream(root / name.str()) << table.rendered;
                std::cout << "table: " << (root / name.str()).string() << "\n";
            }
        } else if (*ed) {
            sm::Assets assets =
                sm::Assets::load(ef.assets.embedder, ef.assets.generator, ef.assets.classifiers);
            sm::HyperNetworkBank bank = sm::HyperNetworkBank::from_checkpoint(
                sm::load_checkpoint(ef.bank, "bank"), assets.gen.config(),
                assets.gen.checksum());
            sm::Image source = sm::read_ppm(ef.source);

            sm::EditCondition cond;
            if (ef.mixed) {
                if (ef.target_image.empty() || ef.caption.empty())
                    throw std::runtime_error("--mixed needs both --target-image and --caption");
                cond.kind = sm::EditCondition::Kind::Mixed;
                cond.target_image = sm::read_ppm(ef.target_image);
                cond.target_caption = ef.caption;
                cond.mix_alpha = ef.mix_alpha;
            } else if (!ef.target_image.empty()) {
                cond.kind = sm::EditCondition::Kind::Image;
                cond.target_image = sm::read_ppm(ef.target_image);
            } else if (!ef.caption.empty()) {
                cond.kind = sm::EditCondition::Kind::Text;
                cond.target_caption = ef.caption;
            } else {
                throw std::runtime_error("edit needs --target-image, --caption or --mixed");
            }

            sm::EditOptions opts;
            opts.beta = ef.beta;
            opts.style_alpha = ef.style_alpha;
            opts.eta = ef.eta;
            sm::InversionCache cache(ef.cache.empty() ? fs::path{} : fs::path(ef.cache));

            if (!ef.sweep.empty()) {
                emit_sweep_strip(assets, bank, source, cond, opts, ef.sweep, ef.sweep_values,
                                 ef.out, &cache);
            } else {
                sm::write_ppm(ef.out, sm::edit(assets, bank, source, cond, opts, &cache));
            }
            std::cout << "wrote " << ef.out << "\n";
        } else if (*ev) {
            sm::Assets assets =
                sm::Assets::load(vf.assets.embedder, vf.assets.generator, vf.assets.classifiers);
            const fs::path run_dir(vf.run);
            sm::HyperNetworkBank bank = sm::HyperNetworkBank::from_checkpoint(
                sm::load_checkpoint(run_dir / "bank.ck", "bank"), assets.gen.config(),
                assets.gen.checksum());
            std::ifstream cj(run_dir / "config.json");
            nlohmann::json cfg_json;
            cj >> cfg_json;
            sm::TrainConfig cfg = sm::TrainConfig::from_json(cfg_json);
            sm::InversionCache cache(vf.cache.empty() ? fs::path{} : fs::path(vf.cache));

            if (vf.protocol == "adaptation") {
                std::vector<sm::DomainSpec> domains = sm::make_domain_roster(
                    cfg.canvas, sm::derive_seed(cfg.seed, "domains"), false);
                sm::AdaptationReport rep = sm::evaluate_adaptation(
                    assets, bank, domains, cfg, vf.samples, vf.seed, &cache);
                write_report(run_dir, "adaptation", adaptation_metrics(rep),
                             render_adaptation_table(rep, "adaptation metrics"));
            } else if (vf.protocol == "reference") {
                std::vector<sm::Sample> data = dataset_or_synth(
                    vf.data, 256, sm::derive_seed(cfg.seed, "ref-data"), cfg.canvas);
                sm::EditOptions opts;
                opts.eta = cfg.eta;
                sm::ReferenceReport rep = sm::evaluate_reference(assets, bank, data, opts,
                                                                 vf.probes, vf.seed, &cache);
                std::ostringstream t;
                t << "reference metrics\n";
                char buf[240];
                std::snprintf(buf, sizeof(buf),
                              "frechet %8.4f  id_source %6.4f  id_target %6.4f  clip_sim %6.4f\n"
                              "color_transfer %5.3f  shape_agreement %5.3f  probes %d\n",
                              rep.frechet, rep.id_source, rep.id_target, rep.clip_sim,
                              rep.color_transfer, rep.shape_agreement, rep.probes);
                t << buf << "full-scale reference (Table 2 analog): ID 78.73\n";
                write_report(run_dir, "reference",
                             {{"frechet", rep.frechet},
                              {"id_source", rep.id_source},
                              {"id_target", rep.id_target},
                              {"clip_sim", rep.clip_sim},
                              {"color_transfer", rep.color_transfer},
                              {"shape_agreement", rep.shape_agreement}},
                             t.str());
            } else {
                std::vector<sm::Sample> data = dataset_or_synth(
                    vf.data, 256, sm::derive_seed(cfg.seed, "ref-data"), cfg.canvas);
                sm::EditOptions opts;
                opts.eta = cfg.eta;
                sm::TextReport rep =
                    sm::evaluate_text(assets, bank, data, opts, vf.probes, vf.seed, &cache);
                std::ostringstream t;
                t << "text-guided metrics\n";
                char buf[240];
                std::snprintf(buf, sizeof(buf),
                              "frechet %8.4f  cmp(edits) %6.4f  cmp(noise) %6.4f\n"
                              "ama_single %5.3f  ama_multiple %5.3f  ama_noop %5.3f\n",
                              rep.frechet, rep.cmp_edits, rep.cmp_noise, rep.ama_edit.single,
                              rep.ama_edit.multiple, rep.ama_noop.single);
                t << buf;
                write_report(run_dir, "text",
                             {{"frechet", rep.frechet},
                              {"cmp_edits", rep.cmp_edits},
                              {"cmp_noise", rep.cmp_noise},
                              {"ama_single", rep.ama_edit.single},
                              {"ama_multiple", rep.ama_edit.multiple},
                              {"ama_noop", rep.ama_noop.single}},
                             t.str());
            }
        } else if (*rp) {
            std::ostringstream out;
            out << "run  protocol  metrics\n";
            for (const std::string& r : rp_runs) {
                std::ifstream in(fs::path(r) / "report.jsonl");
                if (!in) throw std::runtime_error("no report.jsonl in " + r);
                std::string line;
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    nlohmann::json j = nlohmann::json::parse(line);
                    nlohmann::json metrics = j.at("metrics");
                    metrics.erase("rows");
                    out << r << "  " << j.at("protocol").get<std::string>() << "  "
                        << metrics.dump() << "\n";
                }
            }
            std::cout << out.str();
            if (!rp_out.empty()) std::ofstream(rp_out) << out.str();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
