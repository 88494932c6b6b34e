#pragma once

#include "stylemod/classifiers.hpp"
#include "stylemod/critic.hpp"
#include "stylemod/evalmetrics.hpp"
#include "stylemod/hypermod.hpp"
#include "stylemod/invert.hpp"
#include "stylemod/rundir.hpp"

namespace stylemod {

// Frozen prerequisites shared by every training/eval/edit entry point.
struct Assets {
    JointEmbedder embedder;
    StyleGenerator gen;
    AttributeClassifiers classifiers;
    Tensor w_mean;
    Image mean_image;

    static Assets load(const std::filesystem::path& embedder_ck,
                       const std::filesystem::path& generator_ck,
                       const std::filesystem::path& classifiers_ck);
    static Assets from_parts(JointEmbedder embedder, StyleGenerator gen,
                             AttributeClassifiers classifiers);
};

struct TrainConfig {
    std::string task = "adaptation";  // or "reference"
    double lr = 0.002;
    double beta1 = 0.0, beta2 = 0.99;
    int batch = 4;
    LossWeights weights;
    double eta = 0.1;
    int steps = 2000;
    std::uint64_t seed = 1;
    bool use_critic = true;
    bool use_residual_injection = true;
    int canvas = 32;
    int ref_pool = 32;        // source/target pool size for the reference task
    int log_every = 1;        // loss-log cadence
    int checkpoint_every = 200;
    int grid_samples = 8;     // per-domain samples in the final grid

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    std::uint64_t hash() const;
};

struct TrainResult {
    std::filesystem::path run_dir;
    std::filesystem::path bank_ck;
    std::filesystem::path critic_ck;  // empty when use_critic=false
    std::vector<double> total_curve;
};

using ProgressFn = std::function<void(int step, const LossBreakdown&)>;

TrainResult train_adaptation(const Assets& assets, const std::vector<DomainSpec>& domains,
                             const TrainConfig& cfg, const std::filesystem::path& root,
                             InversionCache* cache = nullptr, const ProgressFn& progress = {});

TrainResult train_reference(const Assets& assets, const std::vector<Sample>& dataset,
                            const TrainConfig& cfg, const std::filesystem::path& root,
                            InversionCache* cache = nullptr, const ProgressFn& progress = {});

// ------------------------------------------------------------------ editing

struct EditCondition {
    enum class Kind { Image, Text, Mixed };
    Kind kind = Kind::Text;
    Image target_image;            // Image / Mixed
    std::string target_caption;    // Text / Mixed
    std::string source_caption = "shape";  // generic source prompt for text deltas
    double mix_alpha = 0.5;        // weight of the text embedding in Mixed
};

struct EditOptions {
    double beta = 1.0;        // residual scale at inference
    double style_alpha = 1.0; // 1 = keep the source latent; <1 mixes toward the target's
    double eta = 0.1;
    bool residual_injection = true;
};

// Builds the delta embedding for the condition, inverts the source (cached),
// optionally style-mixes toward the inverted target latent, and renders.
Image edit(const Assets& assets, const HyperNetworkBank& bank, const Image& source,
           const EditCondition& cond, const EditOptions& opts = {},
           InversionCache* cache = nullptr);

// --------------------------------------------------------------- evaluation

struct DomainMetricsRow {
    std::string name;
    double frechet = 0, quality = 0, diversity = 0;
};
struct AdaptationReport {
    std::vector<DomainMetricsRow> rows;
    double mean_frechet = 0, mean_quality = 0, mean_diversity = 0;
};
AdaptationReport evaluate_adaptation(const Assets& assets, const HyperNetworkBank& bank,
                                     const std::vector<DomainSpec>& domains, const TrainConfig& cfg,
                                     int n_samples, std::uint64_t seed,
                                     InversionCache* cache = nullptr);
// the same protocol with the unadapted generator (delta embedding forced to 0)
AdaptationReport evaluate_unadapted(const Assets& assets, const std::vector<DomainSpec>& domains,
                                    int n_samples, std::uint64_t seed,
                                    InversionCache* cache = nullptr);

struct ReferenceReport {
    double frechet = 0;
    double id_source = 0;   // higher = source identity kept
    double id_target = 0;   // lower = output not collapsing onto the target
    double clip_sim = 0;    // output vs target
    double color_transfer = 0;  // fraction of probes whose hue follows the target
    double shape_agreement = 0; // fraction keeping the source shape
    int probes = 0;
};
ReferenceReport evaluate_reference(const Assets& assets, const HyperNetworkBank& bank,
                                   const std::vector<Sample>& dataset, const EditOptions& opts,
                                   int n_probes, std::uint64_t seed,
                                   InversionCache* cache = nullptr);

struct TextReport {
    double frechet = 0;
    double cmp_edits = 0;
    double cmp_noise = 0;
    AmaResult ama_edit;
    AmaResult ama_noop;
};
TextReport evaluate_text(const Assets& assets, const HyperNetworkBank& bank,
                         const std::vector<Sample>& dataset, const EditOptions& opts, int n_probes,
                         std::uint64_t seed, InversionCache* cache = nullptr);

// ----------------------------------------------------------------- ablation

struct AblationRow {
    std::string name;  // B, B+CD, B+RF, full
    bool use_critic = false, use_residual = false;
    AdaptationReport report;
};
struct AblationTable {
    std::vector<AblationRow> rows;
    std::string rendered;  // human-readable table
};
AblationTable run_ablation(const Assets& assets, const std::vector<DomainSpec>& domains,
                           const TrainConfig& base_cfg, const std::filesystem::path& root,
                           int eval_samples, InversionCache* cache = nullptr,
                           const ProgressFn& progress = {});

}  // namespace stylemod
