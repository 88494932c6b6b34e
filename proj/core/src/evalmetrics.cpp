#include "stylemod/evalmetrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace stylemod {

namespace {
double cosine(const Tensor& a, const Tensor& b) {
    double num = 0, na = 0, nb = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double d = std::sqrt(na) * std::sqrt(nb);
    return d < 1e-12 ? 0.0 : num / d;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
    const int n = t.shape[0], m = t.shape[1];
    Eigen::MatrixXd out(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out(i, j) = t.v[static_cast<std::size_t>(i) * m + j];
    return out;
}
}  // namespace

GaussianStats gaussian_stats(const std::vector<Tensor>& features) {
    if (features.empty()) throw std::runtime_error("gaussian_stats: no features");
    const int d = static_cast<int>(features.front().size());
    GaussianStats st;
    st.count = static_cast<int>(features.size());
    st.mean = Tensor::zeros({d});
    for (const Tensor& f : features)
        for (int i = 0; i < d; ++i) st.mean[i] += f[i];
    for (int i = 0; i < d; ++i) st.mean[i] /= st.count;

    st.cov = Tensor::zeros({d, d});
    if (st.count > 1) {
        for (const Tensor& f : features)
            for (int i = 0; i < d; ++i) {
                const double di = f[i] - st.mean[i];
                for (int j = 0; j < d; ++j)
                    st.cov.v[static_cast<std::size_t>(i) * d + j] += di * (f[j] - st.mean[j]);
            }
        for (double& x : st.cov.v) x /= (st.count - 1);
    }
    return st;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size()) throw std::runtime_error("frechet_distance: dim mismatch");
    const int d = static_cast<int>(a.mean.size());
    double mean_term = 0;
    for (int i = 0; i < d; ++i) {
        const double dm = a.mean[i] - b.mean[i];
        mean_term += dm * dm;
    }
    Eigen::MatrixXd sa = to_eigen(a.cov) + 1e-6 * Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd sb = to_eigen(b.cov) + 1e-6 * Eigen::MatrixXd::Identity(d, d);

    // tr((Sa Sb)^{1/2}) via the symmetric form Sa^{1/2} Sb Sa^{1/2}
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esa(0.5 * (sa + sa.transpose()));
    Eigen::MatrixXd sqrt_sa =
        esa.eigenvectors() *
        esa.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
        esa.eigenvectors().transpose();
    Eigen::MatrixXd inner = sqrt_sa * sb * sqrt_sa;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esi(0.5 * (inner + inner.transpose()));
    const double tr_sqrt = esi.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    double dist = mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
    if (dist < 0) {
        if (dist < -1e-6) throw std::runtime_error("frechet_distance: negative beyond tolerance");
        dist = 0;
    }
    return dist;
}

GaussianStats embed_stats(const JointEmbedder& e, const std::vector<Image>& images) {
    std::vector<Tensor> feats;
    feats.reserve(images.size());
    for (const Image& img : images) feats.push_back(e.embed_image(img));
    return gaussian_stats(feats);
}

QualityDiversity quality_diversity(const JointEmbedder& e, const std::vector<Image>& images,
                                   const std::string& domain_text, const Image* exemplar) {
    if (images.size() < 2) throw std::runtime_error("quality_diversity: needs >= 2 images");
    Tensor anchor;
    if (!domain_text.empty())
        anchor = e.embed_text(domain_text);
    else if (exemplar)
        anchor = e.embed_image(*exemplar);
    else
        throw std::runtime_error("quality_diversity: no domain text and no exemplar");

    std::vector<Tensor> feats;
    feats.reserve(images.size());
    for (const Image& img : images) feats.push_back(e.embed_image(img));

    QualityDiversity qd;
    for (const Tensor& f : feats) qd.quality += cosine(f, anchor);
    qd.quality /= static_cast<double>(feats.size());

    int pairs = 0;
    for (std::size_t i = 0; i < feats.size(); ++i)
        for (std::size_t j = i + 1; j < feats.size(); ++j) {
            qd.diversity += 1.0 - cosine(feats[i], feats[j]);
            ++pairs;
        }
    qd.diversity /= pairs;
    return qd;
}

double id_similarity(const AttributeClassifiers& feats, const Image& a, const Image& b) {
    return cosine(feats.id_features(a), feats.id_features(b));
}

double clip_similarity(const JointEmbedder& e, const Image& a, const Image& b) {
    return cosine(e.embed_image(a), e.embed_image(b));
}

AmaResult ama(const AttributeClassifiers& cls, const EditFn& edit_fn,
              const std::vector<AmaProbe>& probes, double accuracy_floor) {
    AmaResult res;
    std::array<int, kNumSlots> hits{}, totals{};
    int multi_hits = 0;

    for (const AmaProbe& probe : probes) {
        Image out = edit_fn(probe.source, probe.caption);
        int mentioned = 0, flipped = 0;
        bool any_gated = false;
        for (int k = 0; k < kNumSlots; ++k) {
            const Slot slot = static_cast<Slot>(k);
            if (probe.target[static_cast<std::size_t>(k)] < 0) continue;
            if (!cls.qualifies(slot, accuracy_floor)) {
                any_gated = true;
                continue;
            }
            ++mentioned;
            const bool ok =
                cls.predict(slot, out) == probe.target[static_cast<std::size_t>(k)];
            if (ok) ++flipped;
            ++totals[static_cast<std::size_t>(k)];
            if (ok) ++hits[static_cast<std::size_t>(k)];
        }
        if (mentioned >= 2 && !any_gated) {
            ++res.multi_probes;
            if (flipped == mentioned) ++multi_hits;
        }
    }

    int used = 0;
    for (int k = 0; k < kNumSlots; ++k) {
        if (totals[static_cast<std::size_t>(k)] == 0) continue;
        res.slot_used[static_cast<std::size_t>(k)] = true;
        res.per_slot[static_cast<std::size_t>(k)] =
            static_cast<double>(hits[static_cast<std::size_t>(k)]) /
            totals[static_cast<std::size_t>(k)];
        res.single += res.per_slot[static_cast<std::size_t>(k)];
        ++used;
    }
    if (used > 0) res.single /= used;
    if (res.multi_probes > 0) res.multiple = static_cast<double>(multi_hits) / res.multi_probes;
    return res;
}

double cmp(const JointEmbedder& e, const Image& input_img, const Image& output_img,
           const std::string& caption) {
    const double diff = mean_abs_diff(input_img, output_img);
    const double sim = cosine(e.embed_image(output_img), e.embed_text(caption));
    return (1.0 - diff) * sim;
}

}  // namespace stylemod
