#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsmr/evolvers.hpp"
#include "tsmr/physics.hpp"

namespace tsmr {

// Fully resolved experiment parameters. Defaults reproduce the published
// table settings; every knob is overridable through the key=value config
// file or CLI flags, and overrides are recorded for the run manifest.
struct ExperimentConfig {
    std::string task = "goal";      // goal | squeeze
    std::string algorithm = "dm-me"; // vie-neat | me | dm-me
    int runs = 10;
    std::uint64_t master_seed = 1;
    int threads = 0; // 0 = hardware concurrency

    long budget = 45000;
    int initial_solutions = 1080;
    int batch_size = 24;
    std::vector<int> pca_schedule{0, 50, 150, 350, 750, 1550};

    int vie_population = 48;
    int vie_mutants = 48;
    NeatParams neat;

    SimConfig physics;
    SqueezeGeometry squeeze;

    std::vector<std::string> overrides; // "key=value" entries applied on top of defaults

    static ExperimentConfig preset_paper();
    static ExperimentConfig preset_desk(); // 2400 evals, 240 initial, schedule 0/10/30/70, 3 runs

    // Applies one key=value setting; throws StructuralError on unknown keys
    // or unparsable values.
    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);

    std::string to_text() const; // every key, sorted, round-trippable

    TaskSpec make_task() const;
    EvolverConfig make_evolver_config() const;
    int resolved_threads() const;

    void validate() const;
};

} // namespace tsmr
