#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgu/config.hpp"

namespace kgu {

// Pipeline stages. Each CLI subcommand runs exactly one; a stage checks that
// every upstream stage is complete (artifact hashes verified) and errors with
// a DependencyError naming the first missing one otherwise.
enum class Stage {
    Ingest,
    ValidateTemplate,
    Calibrate,
    SampleTargets,
    ExtractPre,
    Simulate,
    ExtractPost,
    Judge,
    Evaluate,
    Report,
};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view name);  // ConfigError on unknown names

// Direct upstream stages, in the order dependency errors should name them.
std::vector<Stage> stage_dependencies(Stage s);
// Artifact filenames the stage must produce, relative to the run directory.
std::vector<std::string> stage_artifacts(Stage s);

struct ManifestEntry {
    std::string kind;  // "config" or "stage"
    std::string stage;
    std::string config_sha256;
    std::string tool_version;
    std::map<std::string, std::string> artifacts;  // filename -> sha256
    nlohmann::json config;                         // config entries only

    nlohmann::json to_json() const;
    static ManifestEntry from_json(const nlohmann::json& j);
};

// Append-only run journal at <run_dir>/manifest.jsonl. Entries are never
// rewritten; append re-emits prior lines verbatim through an atomic rename.
struct RunManifest {
    std::vector<std::string> lines;
    std::vector<ManifestEntry> entries;

    static RunManifest load(const std::filesystem::path& run_dir);
    void append(const std::filesystem::path& run_dir, const ManifestEntry& entry);

    // Latest stage entry for `stage`, if any.
    const ManifestEntry* last_stage(std::string_view stage) const;
};

// Exclusive ownership of a run directory for the duration of a stage.
// A leftover lock from a crashed process must be removed by hand.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

class PipelineRunner {
public:
    explicit PipelineRunner(RunConfig config);

    // Runs one stage under the run-directory lock. Returns true if work was
    // done, false if the stage was already up to date (a no-op without
    // `force`). Upstream staleness or absence throws DependencyError.
    bool run_stage(Stage stage, bool force = false);

    // Optional human-ratings CSV (item_id,rater_id,score) scored against the
    // judge's verdicts during the judge stage; emits agreement.json.
    void set_human_ratings(std::filesystem::path csv);

    const std::filesystem::path& run_dir() const { return run_dir_; }
    const RunConfig& config() const { return config_; }

    // The manifest's config snapshot: the semantic config (output location
    // excluded, it is wherever the manifest lives) plus content hashes of
    // every referenced input file, so editing an input in place marks all
    // completed stages stale.
    const nlohmann::json& manifest_config() const { return snapshot_; }

    // True when the stage's latest manifest entry matches the current config
    // and tool version and every artifact hash matches the file on disk.
    bool stage_complete(const RunManifest& manifest, Stage stage) const;

private:
    void verify_dependencies(const RunManifest& manifest, Stage stage) const;
    void record_stage(RunManifest& manifest, Stage stage,
                      const std::map<std::string, std::string>& artifacts);
    std::string write_artifact(const std::string& name, std::string_view content) const;

    // Stage bodies return filename -> sha256 of everything they wrote.
    std::map<std::string, std::string> stage_ingest();
    std::map<std::string, std::string> stage_validate_template();
    std::map<std::string, std::string> stage_calibrate();
    std::map<std::string, std::string> stage_sample_targets();
    std::map<std::string, std::string> stage_extract(bool post);
    std::map<std::string, std::string> stage_simulate();
    std::map<std::string, std::string> stage_judge();
    std::map<std::string, std::string> stage_evaluate();
    std::map<std::string, std::string> stage_report();

    RunConfig config_;
    std::filesystem::path run_dir_;
    nlohmann::json snapshot_;
    std::string config_sha256_;
    std::optional<std::filesystem::path> human_ratings_;
};

}  // namespace kgu
