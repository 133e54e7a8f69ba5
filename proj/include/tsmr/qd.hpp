#pragma once

#include <map>
#include <vector>

#include "tsmr/morphology.hpp"
#include "tsmr/neuro.hpp"
#include "tsmr/physics.hpp"
#include "tsmr/rng.hpp"

namespace tsmr {

using FeatureDescriptor = std::vector<int>;

// A <morphology, controller> pair with its evaluation payload. The sensory
// vector (the concatenated per-target mean head trajectories) is kept so
// archived occupants can be re-projected on projector refits.
struct Solution {
    MorphologyGenome morph;
    ControllerGenome ctrl;
    double fitness = 0.0; // m, minimized
    std::vector<double> sensory;
    std::vector<double> mean_final_distances;
    bool any_abort = false;
    bool any_bonus = false;
};

Solution make_solution(MorphologyGenome morph, ControllerGenome ctrl,
                       const EvaluationResult& eval);

// Morphology feature descriptor: (stiffness level, module count - 1),
// dimension sizes [9, 10].
FeatureDescriptor morphology_fd(const MorphologyGenome& g);

inline const std::vector<int> kMorphologyDims{kStiffnessLevels, kMaxModules};

enum class InsertOutcome { Inserted, Replaced, Rejected };

// Fixed-grid elite map: at most one solution per cell, replacement only on
// strictly better (lower) fitness, ties keep the occupant.
class Archive {
public:
    explicit Archive(std::vector<int> dims);

    InsertOutcome add(const FeatureDescriptor& fd, Solution solution);

    const std::map<FeatureDescriptor, Solution>& cells() const { return cells_; }
    const Solution* at(const FeatureDescriptor& fd) const;
    std::size_t size() const { return cells_.size(); }
    std::size_t total_cells() const;
    double coverage() const;
    const std::vector<int>& dims() const { return dims_; }
    bool in_bounds(const FeatureDescriptor& fd) const;

private:
    std::vector<int> dims_;
    std::map<FeatureDescriptor, Solution> cells_;
};

// Uniform selection with replacement over occupied cells. With two archives
// the batch is split exactly in half (first archive first); with one, all
// draws come from it. Every archive must be non-empty.
std::vector<const Solution*> random_selection(const std::vector<const Archive*>& archives,
                                              int batch_size, Rng& rng);

// Sum of the maximization-convention fitness (d_init - f, in cm) over all
// occupants. Empty archive scores 0.
double qd_score_cm(const Archive& archive, const TaskSpec& task);

// Best-per-morphology-cell reduction of a 4-D archive (the "projection"
// used when comparing single archives against DM-ME's morphology archive).
Archive slice_morphology(const Archive& archive4d);

} // namespace tsmr
