#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include "stylemod/losses.hpp"
#include "stylemod/stylegen.hpp"

namespace stylemod {

struct InversionConfig {
    int steps = 200;
    double lr = 0.05;  // cosine-decayed to 0 over the run
    double psi = 0.7;  // truncation toward the mean latent
};

struct InversionResult {
    Tensor w_inv;
    Tensor w_trunc;  // psi * w_inv + (1 - psi) * w_mean
    Image x_fixed;   // frozen render of w_trunc
    double residual = 0.0;
    std::vector<double> objective_curve;
};

// Empirical mean of mapped latents over n standard-normal draws.
Tensor mean_latent(const StyleGenerator& gen, int n_samples, std::uint64_t seed);

// Optimizes a single shared w (initialized at w_mean) against l2 + lpips
// reconstruction of img, then truncates. Throws on a non-finite objective.
InversionResult invert_latent(const StyleGenerator& gen, const JointEmbedder& embedder,
                              const Image& img, const Tensor& w_mean,
                              const InversionConfig& cfg = {});

std::uint64_t image_digest(const Image& img);

// Disk-backed inversion cache keyed by (image digest, generator hash, psi).
// With an empty directory path the cache is memory-only.
class InversionCache {
public:
    explicit InversionCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

    InversionResult get_or_compute(const StyleGenerator& gen, const JointEmbedder& embedder,
                                   const Image& img, const Tensor& w_mean,
                                   const InversionConfig& cfg = {});

    std::size_t memory_entries() const { return mem_.size(); }

private:
    std::filesystem::path dir_;
    std::map<std::string, InversionResult> mem_;
};

}  // namespace stylemod
