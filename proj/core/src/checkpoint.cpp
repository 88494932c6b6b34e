#include "stylemod/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace stylemod {

namespace {
constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void Checkpoint::fill_params(ParamSet& ps) const {
    for (auto& [name, p] : ps.items) {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw std::runtime_error("checkpoint: missing tensor " + name);
        if (it->second.shape != p.val().shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        p.mutable_val() = it->second;
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    nlohmann::json header;
    header["kind"] = ck.kind;
    header["config_hash"] = ck.config_hash;
    header["meta"] = ck.meta;
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, t] : ck.tensors) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t.shape;
        index.push_back(e);
    }
    header["tensors"] = index;
    const std::string hs = header.dump();

    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    // write to a temp file then rename: checkpoints appear atomically
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("save_checkpoint: cannot open " + tmp.string());
        f.write(kMagic, 4);
        std::uint32_t ver = kVersion;
        std::uint64_t hlen = hs.size();
        f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
        f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
        f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& [name, t] : ck.tensors)
            f.write(reinterpret_cast<const char*>(t.v.data()),
                    static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (!f) throw std::runtime_error("save_checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind,
                           std::uint64_t expected_config_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[4];
    std::uint32_t ver = 0;
    std::uint64_t hlen = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f || std::string(magic, 4) != std::string(kMagic, 4))
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    if (ver != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version in " + path.string());
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.kind = header.at("kind").get<std::string>();
    ck.config_hash = header.at("config_hash").get<std::uint64_t>();
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        Tensor t(e.at("shape").get<std::vector<int>>());
        f.read(reinterpret_cast<char*>(t.v.data()),
               static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        ck.tensors.emplace(name, std::move(t));
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
    if (!expected_kind.empty() && ck.kind != expected_kind)
        throw std::runtime_error("load_checkpoint: expected kind '" + expected_kind + "', got '" +
                                 ck.kind + "'");
    if (expected_config_hash != 0 && ck.config_hash != expected_config_hash)
        throw std::runtime_error("load_checkpoint: config hash mismatch for " + path.string());
    return ck;
}

}  // namespace stylemod
