#include "tsmr/qd.hpp"

#include "tsmr/errors.hpp"

namespace tsmr {

Solution make_solution(MorphologyGenome morph, ControllerGenome ctrl,
                       const EvaluationResult& eval) {
    Solution s;
    s.morph = std::move(morph);
    s.ctrl = std::move(ctrl);
    s.fitness = eval.fitness;
    s.ctrl.fitness = eval.fitness;
    s.sensory = eval.sensory;
    s.mean_final_distances = eval.mean_final_distances;
    s.any_abort = eval.any_abort;
    s.any_bonus = eval.any_bonus;
    return s;
}

FeatureDescriptor morphology_fd(const MorphologyGenome& g) {
    return {g.stiffness_level, g.num_modules - 1};
}

Archive::Archive(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw StructuralError("archive needs at least one dimension");
    for (int d : dims_)
        if (d <= 0) throw StructuralError("archive dimension sizes must be positive");
}

bool Archive::in_bounds(const FeatureDescriptor& fd) const {
    if (fd.size() != dims_.size()) return false;
    for (std::size_t i = 0; i < fd.size(); ++i)
        if (fd[i] < 0 || fd[i] >= dims_[i]) return false;
    return true;
}

InsertOutcome Archive::add(const FeatureDescriptor& fd, Solution solution) {
    if (!in_bounds(fd))
        throw StructuralError("feature descriptor out of archive bounds");
    auto it = cells_.find(fd);
    if (it == cells_.end()) {
        cells_.emplace(fd, std::move(solution));
        return InsertOutcome::Inserted;
    }
    if (solution.fitness < it->second.fitness) {
        it->second = std::move(solution);
        return InsertOutcome::Replaced;
    }
    return InsertOutcome::Rejected;
}

const Solution* Archive::at(const FeatureDescriptor& fd) const {
    auto it = cells_.find(fd);
    return it == cells_.end() ? nullptr : &it->second;
}

std::size_t Archive::total_cells() const {
    std::size_t n = 1;
    for (int d : dims_) n *= static_cast<std::size_t>(d);
    return n;
}

double Archive::coverage() const {
    return static_cast<double>(cells_.size()) / static_cast<double>(total_cells());
}

std::vector<const Solution*> random_selection(const std::vector<const Archive*>& archives,
                                              int batch_size, Rng& rng) {
    if (archives.empty()) throw StructuralError("random_selection: no archives");
    for (const Archive* a : archives)
        if (a->size() == 0) throw StructuralError("random_selection: empty archive");

    std::vector<const Solution*> picked;
    picked.reserve(static_cast<std::size_t>(batch_size));
    const int n_archives = static_cast<int>(archives.size());
    for (int ai = 0; ai < n_archives; ++ai) {
        // Split the batch evenly; the leading archives absorb any remainder.
        int share = batch_size / n_archives;
        if (ai < batch_size % n_archives) ++share;
        std::vector<const Solution*> occupants;
        occupants.reserve(archives[static_cast<std::size_t>(ai)]->size());
        for (const auto& [fd, sol] : archives[static_cast<std::size_t>(ai)]->cells())
            occupants.push_back(&sol);
        for (int k = 0; k < share; ++k)
            picked.push_back(occupants[rng.index(occupants.size())]);
    }
    return picked;
}

double qd_score_cm(const Archive& archive, const TaskSpec& task) {
    double score = 0.0;
    for (const auto& [fd, sol] : archive.cells())
        score += transform_fitness_cm(sol.fitness, task);
    return score;
}

Archive slice_morphology(const Archive& archive4d) {
    if (archive4d.dims().size() != 4)
        throw StructuralError("slice_morphology expects a 4-D archive");
    Archive out({archive4d.dims()[0], archive4d.dims()[1]});
    for (const auto& [fd, sol] : archive4d.cells())
        out.add({fd[0], fd[1]}, sol);
    return out;
}

} // namespace tsmr
