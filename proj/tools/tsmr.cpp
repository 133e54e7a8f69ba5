#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsmr/bench.hpp"
#include "tsmr/config.hpp"
#include "tsmr/errors.hpp"

namespace {

tsmr::FeatureDescriptor parse_cell(const std::string& spec) {
    tsmr::FeatureDescriptor fd;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) fd.push_back(std::stoi(tok));
    return fd;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quality-diversity co-design of tensegrity soft modular robots"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute an experiment (N independent runs)");
    std::string preset = "paper", config_path, task, algo, out_dir = "out";
    int runs = -1, threads = -1;
    long long seed = -1;
    std::vector<std::string> set_args;
    run->add_option("--preset", preset, "Parameter preset")->check(CLI::IsMember({"paper", "desk"}));
    run->add_option("--config", config_path, "Key=value config file applied over the preset");
    run->add_option("--task", task, "Task")->check(CLI::IsMember({"goal", "squeeze"}));
    run->add_option("--algo", algo, "Algorithm")->check(CLI::IsMember({"vie-neat", "me", "dm-me"}));
    run->add_option("--runs", runs, "Number of independent runs");
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--threads", threads, "Evaluation worker threads (0 = hardware)");
    run->add_option("--set", set_args, "Extra key=value overrides")->take_all();
    run->add_option("--out", out_dir, "Output directory");

    // report
    auto* report = app.add_subcommand("report", "Statistics and heatmaps across run directories");
    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    report->add_option("dirs", report_dirs, "Run directories")->required();
    report->add_option("--out", report_out, "Output directory");

    // project
    auto* project = app.add_subcommand(
        "project", "Project a DM-ME double archive onto a single 4-D archive (re-simulates)");
    std::string project_dir, project_out = "projected_single.csv";
    project->add_option("run_dir", project_dir, "DM-ME run directory")->required();
    project->add_option("--out", project_out, "Output archive CSV path");

    // heatmap
    auto* heatmap = app.add_subcommand("heatmap", "Emit heatmap CSV matrices for an archive");
    std::string heatmap_csv, heatmap_out = "heatmaps";
    double heatmap_dinit = 0.45;
    heatmap->add_option("archive", heatmap_csv, "Archive CSV")->required();
    heatmap->add_option("--out", heatmap_out, "Output directory");
    heatmap->add_option("--initial-distance", heatmap_dinit,
                        "Initial distance in m for the fitness transform");

    // replay
    auto* replay = app.add_subcommand("replay", "Re-simulate a stored individual");
    std::string replay_dir, replay_archive = "archive_morph.csv", replay_cell,
                replay_out = "trajectory.csv";
    replay->add_option("run_dir", replay_dir, "Run directory")->required();
    replay->add_option("--archive", replay_archive, "Archive CSV inside the run directory");
    replay->add_option("--cell", replay_cell, "Cell indices, e.g. 2,3")->required();
    replay->add_option("--out", replay_out, "Trajectory CSV output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            tsmr::ExperimentConfig config = preset == "desk"
                                                ? tsmr::ExperimentConfig::preset_desk()
                                                : tsmr::ExperimentConfig::preset_paper();
            if (!config_path.empty()) config.load_file(config_path);
            if (!task.empty()) config.set("task", task);
            if (!algo.empty()) config.set("algorithm", algo);
            if (runs >= 0) config.set("runs", std::to_string(runs));
            if (seed >= 0) config.set("master_seed", std::to_string(seed));
            if (threads >= 0) config.set("threads", std::to_string(threads));
            for (const auto& kv : set_args) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw tsmr::StructuralError("--set expects key=value, got: " + kv);
                config.set(kv.substr(0, eq), kv.substr(eq + 1));
            }
            const auto manifests = tsmr::run_experiment(config, out_dir);
            int failed = 0;
            for (const auto& m : manifests) {
                std::printf("%s: %s (%ld evaluations, best f = %.4f m)\n",
                            m.run_dir.string().c_str(), m.status.c_str(), m.evaluation_count,
                            m.best_fitness_m);
                if (m.status != "completed") ++failed;
            }
            return failed == 0 ? 0 : 1;
        }
        if (report->parsed()) {
            std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
            tsmr::report(dirs, report_out);
            std::printf("report written to %s\n", report_out.c_str());
            return 0;
        }
        if (project->parsed()) {
            const tsmr::ProjectionResult r = tsmr::project_double_to_single(project_dir);
            const tsmr::RunManifest m =
                tsmr::read_manifest(std::filesystem::path(project_dir) / "manifest.json");
            tsmr::export_archive(r.single, project_out, m.config.make_task());
            std::printf("projected %d occupants into %zu cells (%d clamped) -> %s\n",
                        r.resimulated, r.single.size(), r.clamped, project_out.c_str());
            return 0;
        }
        if (heatmap->parsed()) {
            tsmr::emit_heatmaps(heatmap_csv, heatmap_out, heatmap_dinit);
            std::printf("heatmaps written to %s\n", heatmap_out.c_str());
            return 0;
        }
        if (replay->parsed()) {
            tsmr::replay(replay_dir, replay_archive, parse_cell(replay_cell), replay_out);
            std::printf("trajectory written to %s\n", replay_out.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
