#include "stylemod/rundir.hpp"

#include <unistd.h>

#include <cstdlib>
#include <ctime>
#include <sstream>
#include <stdexcept>

namespace stylemod {

namespace fs = std::filesystem;

std::filesystem::path run_root() {
    if (const char* env = std::getenv("STYLEMOD_RUN_ROOT"); env && *env) return fs::path(env);
    return fs::path("runs");
}

const char* code_version() {
#ifdef STYLEMOD_CODE_VERSION
    return STYLEMOD_CODE_VERSION;
#else
    return "unknown";
#endif
}

namespace {
std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
    return buf;
}
}  // namespace

void RunDir::write_json_atomic(const fs::path& path, const nlohmann::json& j, int indent) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << j.dump(indent) << "\n";
    }
    fs::rename(tmp, path);
}

RunDir::RunDir(const fs::path& root, const std::string& task, std::uint64_t config_hash)
    : start_(std::chrono::steady_clock::now()) {
    std::ostringstream name;
    name << utc_timestamp() << "-" << task << "-" << std::hex << config_hash;
    dir_ = root / name.str();
    // timestamp resolution is one second; suffix on collision
    for (int k = 1; fs::exists(dir_); ++k) dir_ = root / (name.str() + "-" + std::to_string(k));
    fs::create_directories(dir_);

    const fs::path lock = dir_ / ".lock";
    std::ofstream lf(lock);
    lf << "pid " << ::getpid() << "\n";

    manifest_["task"] = task;
    manifest_["config_hash"] = config_hash;
    manifest_["code_version"] = code_version();
    manifest_["status"] = "running";
    write_json_atomic(dir_ / "manifest.json", manifest_);

    loss_log_.open(dir_ / "loss_log.jsonl");
}

RunDir::~RunDir() {
    if (!finalized_) {
        // abnormal exit path: leave the lock, mark the manifest
        manifest_["status"] = "aborted";
        try {
            write_json_atomic(dir_ / "manifest.json", manifest_);
        } catch (...) {
        }
    }
}

void RunDir::write_manifest(const nlohmann::json& manifest) {
    for (auto it = manifest.begin(); it != manifest.end(); ++it) manifest_[it.key()] = it.value();
    write_json_atomic(dir_ / "manifest.json", manifest_);
}

void RunDir::finalize(const nlohmann::json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest_[it.key()] = it.value();
    manifest_["status"] = "finished";
    manifest_["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    loss_log_.flush();
    write_json_atomic(dir_ / "manifest.json", manifest_);
    std::error_code ec;
    fs::remove(dir_ / ".lock", ec);
    finalized_ = true;
}

void RunDir::write_config_snapshot(const nlohmann::json& config) {
    write_json_atomic(dir_ / "config.json", config);
}

void RunDir::append_loss_record(const nlohmann::json& record) {
    loss_log_ << record.dump() << "\n";
}

void check_run_integrity(const fs::path& run_dir) {
    auto require = [&](const std::string& name) {
        if (!fs::exists(run_dir / name))
            throw std::runtime_error("run integrity: missing " + name + " in " + run_dir.string());
    };
    require("manifest.json");
    require("config.json");
    require("loss_log.jsonl");
    bool has_ck = false, has_grid = false;
    for (const auto& e : fs::directory_iterator(run_dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".ck") has_ck = true;
        if (ext == ".ppm") has_grid = true;
    }
    if (!has_ck) throw std::runtime_error("run integrity: no checkpoint in " + run_dir.string());
    if (!has_grid) throw std::runtime_error("run integrity: no sample grid in " + run_dir.string());
}

}  // namespace stylemod
