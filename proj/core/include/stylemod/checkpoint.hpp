#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "stylemod/nn.hpp"
#include "stylemod/tensor.hpp"

namespace stylemod {

// Versioned binary checkpoint container: a JSON header (kind, config hash,
// free-form metadata, tensor index) followed by raw little-endian doubles.
// Loading verifies magic, version, and — when the caller passes one — the
// expected config hash.
struct Checkpoint {
    std::string kind;
    std::uint64_t config_hash = 0;
    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;

    void put_params(const ParamSet& ps) {
        for (const auto& [name, p] : ps.items) tensors[name] = p.val();
    }
    // Loads values into an already-constructed ParamSet; shapes must match.
    void fill_params(ParamSet& ps) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_kind = "",
                           std::uint64_t expected_config_hash = 0);

}  // namespace stylemod
