#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsmr/config.hpp"
#include "tsmr/evolvers.hpp"

namespace tsmr {

struct RunManifest {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::string code_version;
    std::string started_at;  // ISO 8601; excluded from determinism checks
    std::string finished_at;
    long evaluation_count = 0;
    double best_fitness_m = 0.0;
    std::string status = "pending"; // pending | completed | failed
    std::string error;
    std::vector<std::string> artifacts; // paths relative to the run directory
    std::filesystem::path run_dir;
};

// Archive persistence. Cells are written in ascending cell order; genome
// records go to one file per cell under genomes/.
void export_archive(const Archive& archive, const std::filesystem::path& csv_path,
                    const TaskSpec& task);
Archive import_archive(const std::filesystem::path& csv_path);

void save_projector(const FeatureProjector& projector, const std::filesystem::path& path);
FeatureProjector load_projector(const std::filesystem::path& path,
                                const std::vector<int>& fd_dims,
                                const std::vector<int>& schedule);

void write_run_log(const RunLog& log, const std::string& algorithm,
                   const std::filesystem::path& path);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

// Executes config.runs independent runs under out_dir/run_<i>, each with a
// seed derived from the master seed. A failing run is flagged in its
// manifest and does not abort the remaining runs.
std::vector<RunManifest> run_experiment(const ExperimentConfig& config,
                                        const std::filesystem::path& out_dir);

// Re-simulates every occupant of a DM-ME morphology archive, projects the
// controller descriptor with the stored final projector (clamping
// out-of-bounds values to the edge bins) and assembles the 4-D archive.
struct ProjectionResult {
    Archive single{std::vector<int>{kStiffnessLevels, kMaxModules, kStiffnessLevels, kMaxModules}};
    int clamped = 0; // occupants whose projection fell outside the bounds
    int resimulated = 0;
};
ProjectionResult project_double_to_single(const std::filesystem::path& run_dir);

// Heatmap CSVs: 2-D archives become a bins0 x bins1 matrix of f_s values in
// cm (empty cells left blank); 4-D archives produce the best-over-controller
// morphology slice plus the full cell list.
void emit_heatmaps(const std::filesystem::path& archive_csv, const std::filesystem::path& out_dir,
                   double initial_distance_m);

// Cross-run statistics: descriptive stats of best f_s and morphology-archive
// QD score per algorithm, pairwise Wilcoxon rank-sum p-values, best-fitness
// curves (mean +- std over runs) and per-run heatmaps.
void report(const std::vector<std::filesystem::path>& run_dirs,
            const std::filesystem::path& out_dir);

// Re-evaluates one stored individual and writes its trajectories as
// (target, seed, t, x, y) rows.
void replay(const std::filesystem::path& run_dir, const std::string& archive_name,
            const FeatureDescriptor& cell, const std::filesystem::path& out_csv);

extern const char* kCodeVersion;

} // namespace tsmr
