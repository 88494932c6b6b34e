#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stylemod/autodiff.hpp"
#include "stylemod/checkpoint.hpp"
#include "stylemod/nn.hpp"
#include "stylemod/synthdata.hpp"

namespace stylemod {

enum class DeltaKind { ImageImage, TextText, Mixed };

// The raw difference embed(conditioning) - embed(source). Deliberately not
// renormalized: it is zero when the inputs coincide, and its norm is bounded
// by 2 for unit-norm operands.
struct DeltaClip {
    Tensor delta;
    DeltaKind kind = DeltaKind::ImageImage;
    double norm() const {
        double s = 0.0;
        for (double x : delta.v) s += x * x;
        return std::sqrt(s);
    }
};

struct EmbedderConfig {
    int embed_dim = 128;
    int canvas = 32;
    int conv1_ch = 32, conv2_ch = 64, conv3_ch = 64;
    int token_dim = 32;
    int text_hidden = 128;
    double init_logit_scale = 2.659;  // ln(1/0.07)
    // training
    int train_samples = 3072;
    int holdout_samples = 512;
    int epochs = 48;
    int batch = 64;
    double lr = 2e-3;
    double slot_keep_prob = 0.8;  // caption slot dropout during training
    double retrieval_floor = 0.8;

    std::uint64_t hash() const;
};

// Joint image-text embedder (CLIP stand-in), contrastively trained on
// (image, caption) pairs and then frozen for all downstream use.
class JointEmbedder {
public:
    JointEmbedder(const EmbedderConfig& config, std::uint64_t seed);

    const EmbedderConfig& config() const { return config_; }

    // vocabulary: all attribute words plus the generic prompt word "shape"
    static const std::vector<std::string>& vocabulary();
    static int token_id(const std::string& word);

    // graph-building encoders; the non-Var overloads wrap inputs as constants
    Var embed_image(const Var& img) const;
    Tensor embed_image(const Image& img) const;
    Var embed_text_ids(const std::vector<int>& token_ids) const;
    Tensor embed_text(const Caption& cap) const;
    Tensor embed_text(const std::string& caption_text) const;

    // intermediate conv taps used as perceptual (LPIPS-style) features
    std::vector<Var> perceptual_features(const Var& img) const;
    std::vector<Tensor> perceptual_features(const Image& img) const;

    // frozen image trunk h(x) for the projection critic
    Var trunk_features(const Var& img) const;
    int trunk_dim() const;

    DeltaClip delta_clip(const Tensor& conditioning, const Tensor& source, DeltaKind kind) const;
    DeltaClip delta_clip_images(const Image& conditioning, const Image& source) const;
    DeltaClip delta_clip_texts(const std::string& target, const std::string& source) const;

    // embed_image(img) + alpha * embed_text(caption), not renormalized
    Tensor mixed_embedding(const Image& target_img, const std::string& target_caption,
                           double alpha) const;

    Var logit_scale() const { return logit_scale_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::uint64_t checksum() const { return params_.checksum(); }
    void freeze() {
        params_.freeze();
        frozen_ = true;
    }
    bool frozen() const { return frozen_; }

    Checkpoint to_checkpoint() const;
    static JointEmbedder from_checkpoint(const Checkpoint& ck);

private:
    EmbedderConfig config_;
    ParamSet params_;
    bool frozen_ = false;

    ConvLayer conv1_, conv2_, conv3_;
    LinearLayer img_fc_;
    Var token_table_;  // [V, token_dim]
    LinearLayer text_fc1_, text_fc2_;
    Var logit_scale_;  // [1]

    struct ImageTrace {
        Var tap1, tap2, trunk_flat, embedding;
    };
    ImageTrace encode_image(const Var& img) const;
    friend struct EmbedderTrainer;
};

struct EmbedderTrainResult {
    double holdout_retrieval_top1 = 0.0;
    std::vector<double> loss_curve;  // per-epoch mean InfoNCE
};

// Symmetric InfoNCE training; throws std::runtime_error if the held-out
// image->text retrieval accuracy ends below config.retrieval_floor. The
// returned embedder is frozen.
EmbedderTrainResult train_embedder(JointEmbedder& embedder, std::uint64_t seed);

// retrieval over the set of unique full captions: top-1 accuracy of
// classifying each image into its own caption
double retrieval_top1(const JointEmbedder& e, const std::vector<Sample>& samples);

}  // namespace stylemod
