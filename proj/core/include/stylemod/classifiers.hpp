#pragma once

#include "stylemod/checkpoint.hpp"
#include "stylemod/losses.hpp"
#include "stylemod/synthdata.hpp"

namespace stylemod {

// One small conv classifier per attribute slot (size, color, shape,
// background), trained on the synthetic base distribution. Unit-normalized
// concatenated penultimate features double as the identity feature net.
class AttributeClassifiers {
public:
    AttributeClassifiers(int canvas, std::uint64_t seed);

    // supervised softmax training on scene labels; stores validation accuracy
    void train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
               int epochs = 12, double lr = 2e-3, std::uint64_t seed = 1);

    int predict(Slot slot, const Image& img) const;
    double validation_accuracy(Slot slot) const;
    // slots entering accuracy-gated metrics (validation accuracy >= floor)
    bool qualifies(Slot slot, double floor = 0.9) const;

    Var id_features(const Var& img) const;
    Tensor id_features(const Image& img) const;
    FeatureFn feature_fn() const;

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    void freeze() { params_.freeze(); }
    std::uint64_t checksum() const { return params_.checksum(); }

    Checkpoint to_checkpoint() const;
    static AttributeClassifiers from_checkpoint(const Checkpoint& ck);

    int canvas() const { return canvas_; }

private:
    struct Net {
        ConvLayer c1, c2, c3;
        LinearLayer f1, f2;
        int classes = 0;
    };
    Var penult(const Net& net, const Var& img) const;
    Var logits(const Net& net, const Var& img) const;

    int canvas_ = 32;
    ParamSet params_;
    std::array<Net, kNumSlots> nets_;
    std::array<double, kNumSlots> val_acc_{};
};

inline int slot_classes(Slot s) {
    switch (s) {
        case Slot::Size: return kNumSizes;
        case Slot::Color: return kNumFillColors;
        case Slot::Shape: return kNumShapes;
        case Slot::Background: return kNumBackgrounds;
    }
    return 0;
}

}  // namespace stylemod
