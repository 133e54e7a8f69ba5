#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "tsmr/autofd.hpp"
#include "tsmr/physics.hpp"
#include "tsmr/qd.hpp"

namespace tsmr {

// Evaluation budget bookkeeping for the map-based algorithms.
struct RunBudget {
    long total = 45000;
    int initial_solutions = 1080;
    int batch_size = 24;

    long generations() const { return (total - initial_solutions) / batch_size; }
    int final_partial_batch() const {
        return static_cast<int>((total - initial_solutions) % batch_size);
    }
};

struct EvolverConfig {
    RunBudget budget;
    std::vector<int> pca_schedule{0, 50, 150, 350, 750, 1550};
    int vie_population = 48;
    int vie_mutants = 48;
    NeatParams neat;
    int threads = 1;
};

// Monotone non-increasing limit on the worst admissible fitness.
struct ViabilityBoundary {
    double threshold = std::numeric_limits<double>::infinity();
    bool initialized() const { return std::isfinite(threshold); }
};

struct VieIndividual {
    MorphologyGenome genome;
    double fitness = std::numeric_limits<double>::quiet_NaN();
};

// One ViE generation over an evaluated population: initialize the boundary
// on first use (worst fitness), drop individuals outside it, shrink it to
// the target_size-th best survivor (never past the best), then append fresh
// mutants for the caller to evaluate.
std::vector<VieIndividual> vie_generation(std::vector<VieIndividual> population,
                                          ViabilityBoundary& boundary, Rng& rng,
                                          int mutant_count, int target_size);

// Mutates a <morphology, controller> pair: with equal probability only the
// morphology, only the controller, or both (no crossover).
Solution mutate_pair(const Solution& solution, InnovationRegistry& registry, Rng& rng,
                     const NeatMutationParams& params);

struct GenerationLog {
    int generation = 0;
    long evaluations = 0;
    double best_fitness = std::numeric_limits<double>::infinity(); // best so far, m
    double gen_best_fitness = std::numeric_limits<double>::infinity();
    double qd_morph_cm = 0.0;
    double qd_nn_cm = 0.0;
    double qd_single_cm = 0.0;
    double coverage_morph = 0.0;
    double coverage_nn = 0.0;
    double coverage_single = 0.0;
    double boundary = std::numeric_limits<double>::quiet_NaN();
    int species_count = 0;
    int vie_population = 0;
    int neat_population = 0;
    bool refit = false;
    bool oob_recompute = false;
    bool restart = false;
    bool partial = false;
};

struct RunLog {
    std::vector<GenerationLog> generations;
    long evaluations = 0;
    double best_fitness = std::numeric_limits<double>::infinity();
    bool partial_final_generation = false;
};

struct TraceEvent {
    enum class Kind {
        GenerationStart,
        Refit,
        Transform,
        OutOfBounds,
        RecomputeBounds,
        Reinsert,
        Retransform,
        Insert,
        BoundaryShrink,
        Restart,
    };
    Kind kind;
    int generation = 0;
    int count = 0;
};

struct QdState {
    const Archive* morph_archive = nullptr;  // DM-ME only
    const Archive* nn_archive = nullptr;     // DM-ME only
    const Archive* single_archive = nullptr; // MAP-Elites only
    const FeatureProjector* projector = nullptr;
};

using QdObserver = std::function<void(const TraceEvent&, const QdState&)>;

struct DmMeResult {
    Archive morph_archive{kMorphologyDims};
    Archive nn_archive{std::vector<int>{kStiffnessLevels, kMaxModules}};
    FeatureProjector projector{{kStiffnessLevels, kMaxModules}, {}};
    RunLog log;
    std::optional<Solution> best;
};

struct MapElitesResult {
    Archive archive{std::vector<int>{kStiffnessLevels, kMaxModules, kStiffnessLevels, kMaxModules}};
    FeatureProjector projector{{kStiffnessLevels, kMaxModules}, {}};
    RunLog log;
    std::optional<Solution> best;
};

struct VieNeatResult {
    std::vector<VieIndividual> morph_population;
    std::vector<ControllerGenome> neat_population;
    Archive morph_projection{kMorphologyDims}; // every evaluated pair, by morphology FD
    ViabilityBoundary boundary;
    RunLog log;
    std::optional<Solution> best;
};

// Double-Map MAP-Elites: two 90-cell archives, morphology FD and adaptive
// PCA controller FD, with scheduled refits and out-of-bounds recomputation.
DmMeResult dm_me_run(const EvolverConfig& config, const TaskSpec& task, const SimConfig& sim,
                     std::uint64_t seed, const QdObserver& observer = {});

// Single-archive MAP-Elites over the concatenated (morphology, controller)
// descriptor; the projector follows the same schedule/recompute rules.
MapElitesResult map_elites_run(const EvolverConfig& config, const TaskSpec& task,
                               const SimConfig& sim, std::uint64_t seed,
                               const QdObserver& observer = {});

// ViE over morphologies and NEAT over controllers, coupled only through the
// random evaluation pairing (wrapped members of the smaller population score
// their partners through the spread-penalized aggregate).
VieNeatResult vie_neat_run(const EvolverConfig& config, const TaskSpec& task,
                           const SimConfig& sim, std::uint64_t seed,
                           const QdObserver& observer = {});

} // namespace tsmr
