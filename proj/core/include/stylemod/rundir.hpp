#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace stylemod {

// Run root resolution: STYLEMOD_RUN_ROOT env var, else ./runs.
std::filesystem::path run_root();

// Returns the build's code version string (git commit when available).
const char* code_version();

// A per-run output directory named <utc-timestamp>-<task>-<confighash>,
// holding manifest, config snapshot, loss log, checkpoints and sample grids.
// A lock file guards against concurrent writers; it is removed on finalize.
class RunDir {
public:
    // creates the directory (and lock); task names the subcommand
    RunDir(const std::filesystem::path& root, const std::string& task, std::uint64_t config_hash);
    ~RunDir();

    RunDir(const RunDir&) = delete;
    RunDir& operator=(const RunDir&) = delete;

    const std::filesystem::path& path() const { return dir_; }
    std::filesystem::path file(const std::string& name) const { return dir_ / name; }

    // manifest written atomically now (status "running") and on finalize
    void write_manifest(const nlohmann::json& manifest);
    void finalize(const nlohmann::json& extra = {});

    void write_config_snapshot(const nlohmann::json& config);
    void append_loss_record(const nlohmann::json& record);  // line-delimited JSON

    static void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j,
                                  int indent = 2);

private:
    std::filesystem::path dir_;
    nlohmann::json manifest_;
    std::ofstream loss_log_;
    std::chrono::steady_clock::time_point start_;
    bool finalized_ = false;
};

// Post-run integrity check: manifest, config snapshot, loss log, at least one
// checkpoint and one sample grid. Throws with the missing piece named.
void check_run_integrity(const std::filesystem::path& run_dir);

}  // namespace stylemod
