#include "stylemod/classifiers.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace stylemod {

namespace {
const char* slot_name(Slot s) {
    switch (s) {
        case Slot::Size: return "size";
        case Slot::Color: return "color";
        case Slot::Shape: return "shape";
        case Slot::Background: return "background";
    }
    return "?";
}
}  // namespace

AttributeClassifiers::AttributeClassifiers(int canvas, std::uint64_t seed) : canvas_(canvas) {
    Rng rng(seed);
    for (int i = 0; i < kNumSlots; ++i) {
        Net& n = nets_[static_cast<std::size_t>(i)];
        const std::string p = slot_name(static_cast<Slot>(i));
        n.classes = slot_classes(static_cast<Slot>(i));
        n.c1 = ConvLayer(params_, p + ".c1", 3, 8, 3, rng, 2, 1);
        n.c2 = ConvLayer(params_, p + ".c2", 8, 16, 3, rng, 2, 1);
        n.c3 = ConvLayer(params_, p + ".c3", 16, 32, 3, rng, 2, 1);
        // spatially pooled conv features: translation-invariant, so random
        // object placement does not have to be memorized position by position.
        // mean pooling carries the background, max picks out the small object
        n.f1 = LinearLayer(params_, p + ".f1", 2 * (16 + 32), 64, rng);
        n.f2 = LinearLayer(params_, p + ".f2", 64, n.classes, rng);
    }
}

Var AttributeClassifiers::penult(const Net& net, const Var& img) const {
    Var h2 = leaky_relu(net.c2(leaky_relu(net.c1(img))));
    Var h3 = leaky_relu(net.c3(h2));
    Var pooled = concat_flat(
        {spatial_mean(h2), spatial_mean(h3), spatial_max(h2), spatial_max(h3)});
    return leaky_relu(net.f1(pooled));
}

Var AttributeClassifiers::logits(const Net& net, const Var& img) const {
    return net.f2(penult(net, img));
}

void AttributeClassifiers::train(const std::vector<Sample>& train_set,
                                 const std::vector<Sample>& val_set, int epochs, double lr,
                                 std::uint64_t seed) {
    Adam opt(params_.vars(), lr, 0.9, 0.999);
    Rng rng(derive_seed(seed, "classifier-shuffle"));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(
                                        rng.uniform_int(0, static_cast<int>(i) - 1))]);
        for (std::size_t idx : order) {
            const Sample& s = train_set[idx];
            Var img = constant(s.image);
            Var loss;
            for (int k = 0; k < kNumSlots; ++k) {
                const Net& n = nets_[static_cast<std::size_t>(k)];
                Var row = reshape(logits(n, img), {1, n.classes});
                Var l = softmax_cross_entropy(row, {s.scene.attribute(static_cast<Slot>(k))});
                loss = loss.defined() ? add(loss, l) : l;
            }
            opt.zero_grads();
            backward(loss);
            opt.step();
        }
    }

    for (int k = 0; k < kNumSlots; ++k) {
        int correct = 0;
        for (const Sample& s : val_set)
            if (predict(static_cast<Slot>(k), s.image) == s.scene.attribute(static_cast<Slot>(k)))
                ++correct;
        val_acc_[static_cast<std::size_t>(k)] =
            val_set.empty() ? 0.0 : static_cast<double>(correct) / val_set.size();
    }
}

int AttributeClassifiers::predict(Slot slot, const Image& img) const {
    const Net& n = nets_[static_cast<std::size_t>(slot)];
    Tensor l = logits(n, constant(img)).val();
    return static_cast<int>(std::max_element(l.v.begin(), l.v.end()) - l.v.begin());
}

double AttributeClassifiers::validation_accuracy(Slot slot) const {
    return val_acc_[static_cast<std::size_t>(slot)];
}

bool AttributeClassifiers::qualifies(Slot slot, double floor) const {
    return validation_accuracy(slot) >= floor;
}

Var AttributeClassifiers::id_features(const Var& img) const {
    std::vector<Var> parts;
    for (const Net& n : nets_) parts.push_back(penult(n, img));
    return normalize_vec(concat_flat(parts));
}

Tensor AttributeClassifiers::id_features(const Image& img) const {
    return id_features(constant(img)).val();
}

FeatureFn AttributeClassifiers::feature_fn() const {
    return [this](const Var& img) { return id_features(img); };
}

Checkpoint AttributeClassifiers::to_checkpoint() const {
    Checkpoint ck;
    ck.kind = "classifiers";
    ck.meta["canvas"] = canvas_;
    for (int k = 0; k < kNumSlots; ++k)
        ck.meta["val_acc"][slot_name(static_cast<Slot>(k))] = val_acc_[static_cast<std::size_t>(k)];
    ck.put_params(params_);
    return ck;
}

AttributeClassifiers AttributeClassifiers::from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "classifiers") throw std::runtime_error("checkpoint kind mismatch: " + ck.kind);
    AttributeClassifiers c(ck.meta.at("canvas").get<int>(), 0);
    ck.fill_params(c.params_);
    for (int k = 0; k < kNumSlots; ++k)
        c.val_acc_[static_cast<std::size_t>(k)] =
            ck.meta.at("val_acc").at(slot_name(static_cast<Slot>(k))).get<double>();
    c.freeze();
    return c;
}

}  // namespace stylemod
