#include "stylemod/embedder.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace stylemod {

std::uint64_t EmbedderConfig::hash() const {
    std::string s = "embedder|" + std::to_string(embed_dim) + "|" + std::to_string(canvas) + "|" +
                    std::to_string(conv1_ch) + "," + std::to_string(conv2_ch) + "," +
                    std::to_string(conv3_ch) + "|" + std::to_string(token_dim) + "|" +
                    std::to_string(text_hidden);
    return hash_label(s);
}

const std::vector<std::string>& JointEmbedder::vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (int i = 0; i < kNumSizes; ++i) v.push_back(to_word(static_cast<SizeClass>(i)));
        for (int i = 0; i < kNumFillColors; ++i) v.push_back(to_word(static_cast<FillColor>(i)));
        for (int i = 0; i < kNumShapes; ++i) v.push_back(to_word(static_cast<Shape>(i)));
        for (int i = 0; i < kNumBackgrounds; ++i) v.push_back(to_word(static_cast<Background>(i)));
        v.push_back("shape");  // generic source prompt
        return v;
    }();
    return vocab;
}

int JointEmbedder::token_id(const std::string& word) {
    static const std::map<std::string, int> ids = [] {
        std::map<std::string, int> m;
        const auto& v = vocabulary();
        for (std::size_t i = 0; i < v.size(); ++i) m[v[i]] = static_cast<int>(i);
        return m;
    }();
    auto it = ids.find(word);
    if (it == ids.end()) throw std::invalid_argument("unknown token: " + word);
    return it->second;
}

JointEmbedder::JointEmbedder(const EmbedderConfig& config, std::uint64_t seed) : config_(config) {
    Rng rng(derive_seed(seed, "embedder.init"));
    conv1_ = ConvLayer(params_, "img.conv1", 3, config.conv1_ch, 3, rng, 2, 1);
    conv2_ = ConvLayer(params_, "img.conv2", config.conv1_ch, config.conv2_ch, 3, rng, 2, 1);
    conv3_ = ConvLayer(params_, "img.conv3", config.conv2_ch, config.conv3_ch, 3, rng, 2, 1);
    const int spatial = config.canvas / 8;
    img_fc_ = LinearLayer(params_, "img.fc", config.conv3_ch * spatial * spatial,
                          config.embed_dim, rng);
    const int vocab = static_cast<int>(vocabulary().size());
    token_table_ = params_.add("text.tokens",
                               randn_tensor({vocab, config.token_dim}, rng, 0.5));
    text_fc1_ = LinearLayer(params_, "text.fc1", config.token_dim, config.text_hidden, rng);
    text_fc2_ = LinearLayer(params_, "text.fc2", config.text_hidden, config.embed_dim, rng);
    logit_scale_ = params_.add("logit_scale", Tensor::scalar(config.init_logit_scale));
}

JointEmbedder::ImageTrace JointEmbedder::encode_image(const Var& img) const {
    if (img.val().rank() != 3 || img.val().dim(0) != 3 || img.val().dim(1) != config_.canvas ||
        img.val().dim(2) != config_.canvas)
        throw std::invalid_argument("embed_image: expected [3," + std::to_string(config_.canvas) +
                                    "," + std::to_string(config_.canvas) + "], got " +
                                    img.val().shape_str());
    ImageTrace t;
    Var h1 = leaky_relu(conv1_(img));
    t.tap1 = leaky_relu(conv2_(h1));
    t.tap2 = leaky_relu(conv3_(t.tap1));
    t.trunk_flat = reshape(t.tap2, {static_cast<int>(t.tap2.val().size())});
    t.embedding = normalize_vec(linear(t.trunk_flat, img_fc_.w, img_fc_.b));
    return t;
}

Var JointEmbedder::embed_image(const Var& img) const { return encode_image(img).embedding; }

Tensor JointEmbedder::embed_image(const Image& img) const {
    return embed_image(constant(img)).val();
}

Var JointEmbedder::embed_text_ids(const std::vector<int>& token_ids) const {
    if (token_ids.empty()) throw std::invalid_argument("embed_text: empty caption");
    Var rows = gather_rows(token_table_, token_ids);
    Tensor ones({1, static_cast<int>(token_ids.size())});
    std::fill(ones.v.begin(), ones.v.end(), 1.0 / static_cast<double>(token_ids.size()));
    Var pooled = reshape(matmul(constant(ones), rows), {config_.token_dim});
    Var h = leaky_relu(text_fc1_(pooled));
    return normalize_vec(text_fc2_(h));
}

Tensor JointEmbedder::embed_text(const Caption& cap) const {
    std::vector<int> ids;
    for (const std::string& tok : cap.tokens) ids.push_back(token_id(tok));
    return embed_text_ids(ids).val();
}

Tensor JointEmbedder::embed_text(const std::string& caption_text) const {
    Caption cap;
    std::string cur;
    for (char c : caption_text + " ") {
        if (c == ' ') {
            if (!cur.empty()) cap.tokens.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return embed_text(cap);
}

std::vector<Var> JointEmbedder::perceptual_features(const Var& img) const {
    ImageTrace t = encode_image(img);
    return {t.tap1, t.tap2};
}

std::vector<Tensor> JointEmbedder::perceptual_features(const Image& img) const {
    auto vars = perceptual_features(constant(img));
    std::vector<Tensor> out;
    for (const Var& v : vars) out.push_back(v.val());
    return out;
}

Var JointEmbedder::trunk_features(const Var& img) const { return encode_image(img).trunk_flat; }

int JointEmbedder::trunk_dim() const {
    const int spatial = config_.canvas / 8;
    return config_.conv3_ch * spatial * spatial;
}

DeltaClip JointEmbedder::delta_clip(const Tensor& conditioning, const Tensor& source,
                                    DeltaKind kind) const {
    if (conditioning.shape != source.shape)
        throw std::invalid_argument("delta_clip: embedding shape mismatch");
    DeltaClip d;
    d.kind = kind;
    d.delta = Tensor(conditioning.shape);
    for (std::int64_t i = 0; i < d.delta.size(); ++i) d.delta[i] = conditioning[i] - source[i];
    return d;
}

DeltaClip JointEmbedder::delta_clip_images(const Image& conditioning, const Image& source) const {
    return delta_clip(embed_image(conditioning), embed_image(source), DeltaKind::ImageImage);
}

DeltaClip JointEmbedder::delta_clip_texts(const std::string& target,
                                          const std::string& source) const {
    return delta_clip(embed_text(target), embed_text(source), DeltaKind::TextText);
}

Tensor JointEmbedder::mixed_embedding(const Image& target_img, const std::string& target_caption,
                                      double alpha) const {
    if (alpha < 0) throw std::invalid_argument("mixed_embedding: alpha must be >= 0");
    Tensor img_e = embed_image(target_img);
    Tensor txt_e = embed_text(target_caption);
    for (std::int64_t i = 0; i < img_e.size(); ++i) img_e[i] += alpha * txt_e[i];
    return img_e;
}

Checkpoint JointEmbedder::to_checkpoint() const {
    Checkpoint ck;
    ck.kind = "embedder";
    ck.config_hash = config_.hash();
    ck.meta["vocabulary"] = vocabulary();
    ck.meta["embed_dim"] = config_.embed_dim;
    ck.meta["canvas"] = config_.canvas;
    ck.meta["conv_ch"] = {config_.conv1_ch, config_.conv2_ch, config_.conv3_ch};
    ck.meta["token_dim"] = config_.token_dim;
    ck.meta["text_hidden"] = config_.text_hidden;
    ck.put_params(params_);
    return ck;
}

JointEmbedder JointEmbedder::from_checkpoint(const Checkpoint& ck) {
    EmbedderConfig cfg;
    cfg.embed_dim = ck.meta.at("embed_dim").get<int>();
    cfg.canvas = ck.meta.at("canvas").get<int>();
    cfg.conv1_ch = ck.meta.at("conv_ch")[0].get<int>();
    cfg.conv2_ch = ck.meta.at("conv_ch")[1].get<int>();
    cfg.conv3_ch = ck.meta.at("conv_ch")[2].get<int>();
    cfg.token_dim = ck.meta.at("token_dim").get<int>();
    cfg.text_hidden = ck.meta.at("text_hidden").get<int>();
    if (ck.config_hash != cfg.hash())
        throw std::runtime_error("embedder checkpoint: config hash mismatch");
    JointEmbedder e(cfg, 0);
    ck.fill_params(e.params_);
    e.freeze();
    return e;
}

// ------------------------------------------------------------------ training

double retrieval_top1(const JointEmbedder& e, const std::vector<Sample>& samples) {
    // candidate set: every unique full caption over the closed vocabulary
    std::map<std::string, Tensor> caption_emb;
    for (const Sample& s : samples) caption_emb.emplace(s.caption.text(), Tensor());
    for (auto& [text, emb] : caption_emb) emb = e.embed_text(text);

    int correct = 0;
    for (const Sample& s : samples) {
        Tensor ie = e.embed_image(s.image);
        double best = -2.0;
        const std::string* best_text = nullptr;
        for (const auto& [text, te] : caption_emb) {
            double cos = 0.0;
            for (std::int64_t i = 0; i < ie.size(); ++i) cos += ie[i] * te[i];
            if (cos > best) {
                best = cos;
                best_text = &text;
            }
        }
        if (best_text && *best_text == s.caption.text()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

EmbedderTrainResult train_embedder(JointEmbedder& embedder, std::uint64_t seed) {
    const EmbedderConfig& cfg = embedder.config();
    std::vector<Sample> train =
        make_dataset(cfg.train_samples, derive_seed(seed, "embedder.train_data"), cfg.canvas);
    std::vector<Sample> holdout =
        make_dataset(cfg.holdout_samples, derive_seed(seed, "embedder.holdout_data"), cfg.canvas);

    Adam opt(embedder.params().vars(), cfg.lr, 0.9, 0.999);
    Rng rng(derive_seed(seed, "embedder.train"));
    EmbedderTrainResult result;

    const int n = static_cast<int>(train.size());
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the project Rng
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        double epoch_loss = 0.0;
        int steps = 0;
        for (int off = 0; off + cfg.batch <= n; off += cfg.batch) {
            std::vector<Var> img_rows, txt_rows;
            for (int b = 0; b < cfg.batch; ++b) {
                const Sample& s = train[static_cast<std::size_t>(perm[off + b])];
                img_rows.push_back(embedder.embed_image(constant(s.image)));
                // caption slot dropout: keep each slot with p, at least one kept
                std::array<bool, kNumSlots> mask{};
                bool any = false;
                for (int k = 0; k < kNumSlots; ++k) {
                    mask[static_cast<std::size_t>(k)] = rng.uniform() < cfg.slot_keep_prob;
                    any = any || mask[static_cast<std::size_t>(k)];
                }
                if (!any) mask[static_cast<std::size_t>(rng.uniform_int(0, kNumSlots - 1))] = true;
                Caption cap = Caption::masked(s.scene, mask);
                std::vector<int> ids;
                for (const std::string& tok : cap.tokens)
                    ids.push_back(JointEmbedder::token_id(tok));
                txt_rows.push_back(embedder.embed_text_ids(ids));
            }
            Var I = reshape(concat_flat(img_rows), {cfg.batch, cfg.embed_dim});
            Var T = reshape(concat_flat(txt_rows), {cfg.batch, cfg.embed_dim});
            Var scale = exp_v(embedder.logit_scale());
            Var logits = bcast_mul(reshape(matmul_nt(I, T), {cfg.batch * cfg.batch}), scale);
            logits = reshape(logits, {cfg.batch, cfg.batch});
            std::vector<int> diag(static_cast<std::size_t>(cfg.batch));
            for (int i = 0; i < cfg.batch; ++i) diag[static_cast<std::size_t>(i)] = i;
            // symmetric InfoNCE: image->text plus text->image
            Var loss_it = softmax_cross_entropy(logits, diag);
            Var logits_ti = bcast_mul(reshape(matmul_nt(T, I), {cfg.batch * cfg.batch}), scale);
            logits_ti = reshape(logits_ti, {cfg.batch, cfg.batch});
            Var loss = mul_scalar(add(loss_it, softmax_cross_entropy(logits_ti, diag)), 0.5);

            opt.zero_grads();
            backward(loss);
            opt.step();
            epoch_loss += loss.val()[0];
            ++steps;
        }
        result.loss_curve.push_back(epoch_loss / std::max(steps, 1));
    }

    embedder.freeze();
    result.holdout_retrieval_top1 = retrieval_top1(embedder, holdout);
    if (result.holdout_retrieval_top1 < cfg.retrieval_floor)
        throw std::runtime_error("train_embedder: held-out retrieval top-1 " +
                                 std::to_string(result.holdout_retrieval_top1) +
                                 " is below the floor " + std::to_string(cfg.retrieval_floor));
    return result;
}

}  // namespace stylemod
