#include "tsmr/evolvers.hpp"

#include <algorithm>
#include <cmath>

#include "tsmr/errors.hpp"
#include "tsmr/parallel.hpp"

namespace tsmr {

std::vector<VieIndividual> vie_generation(std::vector<VieIndividual> population,
                                          ViabilityBoundary& boundary, Rng& rng,
                                          int mutant_count, int target_size) {
    if (population.empty()) throw StructuralError("vie_generation: empty population");
    for (const auto& ind : population)
        if (!std::isfinite(ind.fitness))
            throw StructuralError("vie_generation: unevaluated individual");

    if (!boundary.initialized()) {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& ind : population) worst = std::max(worst, ind.fitness);
        boundary.threshold = worst;
    }

    // Eliminate outside the current boundary.
    std::vector<VieIndividual> survivors;
    for (auto& ind : population)
        if (ind.fitness <= boundary.threshold) survivors.push_back(std::move(ind));

    // Shrink towards the best: the new limit is the target_size-th best
    // fitness (ties kept), never above the old limit, never below the best.
    std::stable_sort(survivors.begin(), survivors.end(),
                     [](const VieIndividual& a, const VieIndividual& b) {
                         return a.fitness < b.fitness;
                     });
    if (static_cast<int>(survivors.size()) > target_size) {
        const double limit = survivors[static_cast<std::size_t>(target_size - 1)].fitness;
        boundary.threshold = std::min(boundary.threshold, limit);
        std::erase_if(survivors,
                      [&](const VieIndividual& ind) { return ind.fitness > boundary.threshold; });
    }

    // Fresh mutants; the caller evaluates them at the next pairing.
    std::vector<VieIndividual> next = survivors;
    for (int m = 0; m < mutant_count; ++m) {
        const std::size_t parent = rng.index(survivors.size());
        VieIndividual child;
        child.genome = mutate_morphology(survivors[parent].genome, rng);
        next.push_back(std::move(child));
    }
    return next;
}

Solution mutate_pair(const Solution& solution, InnovationRegistry& registry, Rng& rng,
                     const NeatMutationParams& params) {
    Solution out;
    out.morph = solution.morph;
    out.ctrl = solution.ctrl;
    out.ctrl.fitness = std::numeric_limits<double>::quiet_NaN();
    const std::size_t kind = rng.index(3); // morphology only / controller only / both
    if (kind == 0 || kind == 2) out.morph = mutate_morphology(solution.morph, rng);
    if (kind == 1 || kind == 2) out.ctrl = mutate_controller(solution.ctrl, registry, rng, params);
    return out;
}

namespace {

struct BestTracker {
    std::optional<Solution> best;
    void offer(const Solution& s) {
        if (!best || s.fitness < best->fitness) best = s;
    }
};

std::vector<Solution> evaluate_pairs(const std::vector<MorphologyGenome>& morphs,
                                     const std::vector<ControllerGenome>& ctrls,
                                     const TaskSpec& task, const SimConfig& sim, int threads) {
    std::vector<Solution> out(morphs.size());
    parallel_for(morphs.size(), threads, [&](std::size_t i) {
        const EvaluationResult r = evaluate(morphs[i], ctrls[i], task, sim);
        out[i] = make_solution(morphs[i], ctrls[i], r);
    });
    return out;
}

// Alg. 2 addToNNMap: scheduled refit, transform, out-of-bounds handling
// (recompute bounds over archive + batch, reinsert, retransform), insert.
// fd_of maps a solution to the archive's full descriptor using the current
// projector state; for DM-ME that is the controller FD itself, for the
// single-map variant it is the concatenated morphology+controller FD.
void add_to_projected_map(Archive& archive, FeatureProjector& projector,
                          const std::vector<Solution>& batch, int generation,
                          const std::function<FeatureDescriptor(const Solution&)>& fd_of,
                          GenerationLog& log, const QdObserver& observer, const QdState& state) {
    auto emit = [&](TraceEvent::Kind kind, int count) {
        if (observer) observer({kind, generation, count}, state);
    };

    if (!projector.fitted()) {
        std::vector<std::vector<double>> rows;
        rows.reserve(batch.size());
        for (const auto& s : batch) rows.push_back(s.sensory);
        projector.fit(rows);
        log.refit = true;
        emit(TraceEvent::Kind::Refit, static_cast<int>(rows.size()));
    } else if (projector.is_fit_time(generation)) {
        std::vector<std::vector<double>> rows;
        rows.reserve(archive.size());
        for (const auto& [fd, sol] : archive.cells()) rows.push_back(sol.sensory);
        if (rows.size() >= 3) {
            projector.fit(rows);
            log.refit = true;
            emit(TraceEvent::Kind::Refit, static_cast<int>(rows.size()));
            archive = reinsert(archive, fd_of);
            emit(TraceEvent::Kind::Reinsert, static_cast<int>(archive.size()));
        }
    }

    auto transform = [&]() {
        std::vector<std::optional<FeatureDescriptor>> fds;
        fds.reserve(batch.size());
        for (const auto& s : batch) {
            const auto p = projector.project_values(s.sensory);
            const int b1 = projector.bounds()[0].bin_of(p[0]);
            const int b2 = projector.bounds()[1].bin_of(p[1]);
            if (b1 < 0 || b2 < 0)
                fds.push_back(std::nullopt);
            else
                fds.push_back(fd_of(s));
        }
        return fds;
    };

    auto fds = transform();
    emit(TraceEvent::Kind::Transform, static_cast<int>(fds.size()));
    const bool any_oob = std::any_of(fds.begin(), fds.end(),
                                     [](const auto& fd) { return !fd.has_value(); });
    if (any_oob) {
        emit(TraceEvent::Kind::OutOfBounds, 0);
        projector.recompute_bounds(archive, batch);
        emit(TraceEvent::Kind::RecomputeBounds, 0);
        archive = reinsert(archive, fd_of);
        emit(TraceEvent::Kind::Reinsert, static_cast<int>(archive.size()));
        fds = transform();
        emit(TraceEvent::Kind::Retransform, static_cast<int>(fds.size()));
        log.oob_recompute = true;
    }

    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!fds[i])
            throw StructuralError("projection still out of bounds after recompute");
        archive.add(*fds[i], batch[i]);
    }
    emit(TraceEvent::Kind::Insert, static_cast<int>(batch.size()));
}

std::vector<Solution> make_initial_solutions(int count, int input_count, Rng& rng) {
    std::vector<Solution> out(static_cast<std::size_t>(count));
    for (auto& s : out) {
        s.morph = random_morphology(rng);
        s.ctrl = minimal_genome(input_count, 2 * kMaxModules, rng);
    }
    return out;
}

void evaluate_solutions(std::vector<Solution>& batch, const TaskSpec& task, const SimConfig& sim,
                        int threads) {
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        const EvaluationResult r = evaluate(batch[i].morph, batch[i].ctrl, task, sim);
        batch[i] = make_solution(std::move(batch[i].morph), std::move(batch[i].ctrl), r);
    });
}

} // namespace

DmMeResult dm_me_run(const EvolverConfig& config, const TaskSpec& task, const SimConfig& sim,
                     std::uint64_t seed, const QdObserver& observer) {
    DmMeResult result;
    result.projector = FeatureProjector({kStiffnessLevels, kMaxModules}, config.pca_schedule);
    Rng rng(mix_seed(seed, 0xD11));
    InnovationRegistry registry = make_registry(task.input_count(), 2 * kMaxModules);
    BestTracker best;
    const QdState state{&result.morph_archive, &result.nn_archive, nullptr, &result.projector};
    auto emit = [&](TraceEvent::Kind kind, int generation, int count) {
        if (observer) observer({kind, generation, count}, state);
    };

    auto record = [&](int generation, GenerationLog log) {
        log.generation = generation;
        log.evaluations = result.log.evaluations;
        log.best_fitness = best.best ? best.best->fitness : std::numeric_limits<double>::infinity();
        log.qd_morph_cm = qd_score_cm(result.morph_archive, task);
        log.qd_nn_cm = qd_score_cm(result.nn_archive, task);
        log.coverage_morph = result.morph_archive.coverage();
        log.coverage_nn = result.nn_archive.coverage();
        result.log.generations.push_back(log);
    };

    // Initialization batch (generation 0).
    emit(TraceEvent::Kind::GenerationStart, 0, config.budget.initial_solutions);
    std::vector<Solution> batch =
        make_initial_solutions(config.budget.initial_solutions, task.input_count(), rng);
    evaluate_solutions(batch, task, sim, config.threads);
    result.log.evaluations += static_cast<long>(batch.size());
    GenerationLog init_log;
    for (const auto& s : batch) {
        best.offer(s);
        init_log.gen_best_fitness = std::min(init_log.gen_best_fitness, s.fitness);
        result.morph_archive.add(morphology_fd(s.morph), s);
    }
    const auto nn_fd = [&](const Solution& s) { return result.projector.project_or_throw(s); };
    add_to_projected_map(result.nn_archive, result.projector, batch, 0, nn_fd, init_log,
                         observer, state);
    record(0, init_log);

    const long generations = config.budget.generations();
    const int leftover = config.budget.final_partial_batch();
    for (long t = 1; t <= generations + (leftover > 0 ? 1 : 0); ++t) {
        const bool partial = t > generations;
        const int batch_size = partial ? leftover : config.budget.batch_size;
        emit(TraceEvent::Kind::GenerationStart, static_cast<int>(t), batch_size);
        registry.begin_generation();

        const auto parents = random_selection({&result.morph_archive, &result.nn_archive},
                                              batch_size, rng);
        batch.clear();
        for (const Solution* p : parents)
            batch.push_back(mutate_pair(*p, registry, rng, config.neat.mutation));
        evaluate_solutions(batch, task, sim, config.threads);
        result.log.evaluations += batch_size;

        GenerationLog log;
        log.partial = partial;
        for (const auto& s : batch) {
            best.offer(s);
            log.gen_best_fitness = std::min(log.gen_best_fitness, s.fitness);
            result.morph_archive.add(morphology_fd(s.morph), s);
        }
        add_to_projected_map(result.nn_archive, result.projector, batch, static_cast<int>(t),
                             nn_fd, log, observer, state);
        record(static_cast<int>(t), log);
        if (partial) result.log.partial_final_generation = true;
    }

    result.best = best.best;
    result.log.best_fitness =
        best.best ? best.best->fitness : std::numeric_limits<double>::infinity();
    return result;
}

MapElitesResult map_elites_run(const EvolverConfig& config, const TaskSpec& task,
                               const SimConfig& sim, std::uint64_t seed,
                               const QdObserver& observer) {
    MapElitesResult result;
    result.projector = FeatureProjector({kStiffnessLevels, kMaxModules}, config.pca_schedule);
    Rng rng(mix_seed(seed, 0x3E));
    InnovationRegistry registry = make_registry(task.input_count(), 2 * kMaxModules);
    BestTracker best;
    const QdState state{nullptr, nullptr, &result.archive, &result.projector};
    auto emit = [&](TraceEvent::Kind kind, int generation, int count) {
        if (observer) observer({kind, generation, count}, state);
    };

    // Concatenated descriptor: morphology FD then controller FD.
    const auto combined_fd = [&](const Solution& s) {
        FeatureDescriptor fd = morphology_fd(s.morph);
        const FeatureDescriptor nn = result.projector.project_or_throw(s);
        fd.insert(fd.end(), nn.begin(), nn.end());
        return fd;
    };

    auto record = [&](int generation, GenerationLog log) {
        log.generation = generation;
        log.evaluations = result.log.evaluations;
        log.best_fitness = best.best ? best.best->fitness : std::numeric_limits<double>::infinity();
        log.qd_single_cm = qd_score_cm(result.archive, task);
        log.coverage_single = result.archive.coverage();
        const Archive morph_slice = slice_morphology(result.archive);
        log.qd_morph_cm = qd_score_cm(morph_slice, task);
        log.coverage_morph = morph_slice.coverage();
        result.log.generations.push_back(log);
    };

    emit(TraceEvent::Kind::GenerationStart, 0, config.budget.initial_solutions);
    std::vector<Solution> batch =
        make_initial_solutions(config.budget.initial_solutions, task.input_count(), rng);
    evaluate_solutions(batch, task, sim, config.threads);
    result.log.evaluations += static_cast<long>(batch.size());
    GenerationLog init_log;
    for (const auto& s : batch) {
        best.offer(s);
        init_log.gen_best_fitness = std::min(init_log.gen_best_fitness, s.fitness);
    }
    add_to_projected_map(result.archive, result.projector, batch, 0, combined_fd, init_log,
                         observer, state);
    record(0, init_log);

    const long generations = config.budget.generations();
    const int leftover = config.budget.final_partial_batch();
    for (long t = 1; t <= generations + (leftover > 0 ? 1 : 0); ++t) {
        const bool partial = t > generations;
        const int batch_size = partial ? leftover : config.budget.batch_size;
        emit(TraceEvent::Kind::GenerationStart, static_cast<int>(t), batch_size);
        registry.begin_generation();

        const auto parents = random_selection({&result.archive}, batch_size, rng);
        batch.clear();
        for (const Solution* p : parents)
            batch.push_back(mutate_pair(*p, registry, rng, config.neat.mutation));
        evaluate_solutions(batch, task, sim, config.threads);
        result.log.evaluations += batch_size;

        GenerationLog log;
        log.partial = partial;
        for (const auto& s : batch) {
            best.offer(s);
            log.gen_best_fitness = std::min(log.gen_best_fitness, s.fitness);
        }
        add_to_projected_map(result.archive, result.projector, batch, static_cast<int>(t),
                             combined_fd, log, observer, state);
        record(static_cast<int>(t), log);
        if (partial) result.log.partial_final_generation = true;
    }

    result.best = best.best;
    result.log.best_fitness =
        best.best ? best.best->fitness : std::numeric_limits<double>::infinity();
    return result;
}

VieNeatResult vie_neat_run(const EvolverConfig& config, const TaskSpec& task,
                           const SimConfig& sim, std::uint64_t seed, const QdObserver& observer) {
    VieNeatResult result;
    Rng rng(mix_seed(seed, 0x71E));
    InnovationRegistry registry = make_registry(task.input_count(), 2 * kMaxModules);
    std::vector<Species> species;
    BestTracker best;
    const QdState state{&result.morph_projection, nullptr, nullptr, nullptr};
    auto emit = [&](TraceEvent::Kind kind, int generation, int count) {
        if (observer) observer({kind, generation, count}, state);
    };

    result.morph_population.resize(static_cast<std::size_t>(config.vie_population));
    for (auto& ind : result.morph_population) ind.genome = random_morphology(rng);
    for (int i = 0; i < config.neat.population_size; ++i)
        result.neat_population.push_back(minimal_genome(task.input_count(), 2 * kMaxModules, rng));

    int generation = 0;
    while (result.log.evaluations < config.budget.total) {
        emit(TraceEvent::Kind::GenerationStart, generation, 0);

        // Random pairing: shuffle both sides, pair positionally, wrap the
        // smaller population.
        const std::size_t nm = result.morph_population.size();
        const std::size_t nc = result.neat_population.size();
        const std::size_t pair_count = std::max(nm, nc);
        std::vector<std::size_t> morph_order(nm), ctrl_order(nc);
        for (std::size_t i = 0; i < nm; ++i) morph_order[i] = i;
        for (std::size_t i = 0; i < nc; ++i) ctrl_order[i] = i;
        rng.shuffle(morph_order);
        rng.shuffle(ctrl_order);

        const long remaining = config.budget.total - result.log.evaluations;
        const std::size_t to_eval = std::min<std::size_t>(pair_count,
                                                          static_cast<std::size_t>(remaining));
        const bool partial = to_eval < pair_count;

        std::vector<MorphologyGenome> pm(to_eval);
        std::vector<ControllerGenome> pc(to_eval);
        for (std::size_t i = 0; i < to_eval; ++i) {
            pm[i] = result.morph_population[morph_order[i % nm]].genome;
            pc[i] = result.neat_population[ctrl_order[i % nc]];
        }
        const std::vector<Solution> evaluated =
            evaluate_pairs(pm, pc, task, sim, config.threads);
        result.log.evaluations += static_cast<long>(to_eval);

        // Aggregate pair fitnesses per individual (Eq. 2 when paired twice).
        std::vector<std::vector<double>> morph_scores(nm), ctrl_scores(nc);
        GenerationLog log;
        for (std::size_t i = 0; i < to_eval; ++i) {
            morph_scores[morph_order[i % nm]].push_back(evaluated[i].fitness);
            ctrl_scores[ctrl_order[i % nc]].push_back(evaluated[i].fitness);
            best.offer(evaluated[i]);
            log.gen_best_fitness = std::min(log.gen_best_fitness, evaluated[i].fitness);
            result.morph_projection.add(morphology_fd(evaluated[i].morph), evaluated[i]);
        }
        for (std::size_t i = 0; i < nm; ++i)
            if (!morph_scores[i].empty())
                result.morph_population[i].fitness = aggregate_distance_fitness(morph_scores[i]);
        for (std::size_t i = 0; i < nc; ++i)
            if (!ctrl_scores[i].empty())
                result.neat_population[i].fitness = aggregate_distance_fitness(ctrl_scores[i]);

        log.generation = generation;
        log.evaluations = result.log.evaluations;
        log.best_fitness = best.best ? best.best->fitness : std::numeric_limits<double>::infinity();
        log.boundary = result.boundary.threshold;
        log.vie_population = static_cast<int>(nm);
        log.neat_population = static_cast<int>(nc);
        log.qd_morph_cm = qd_score_cm(result.morph_projection, task);
        log.coverage_morph = result.morph_projection.coverage();
        log.partial = partial;

        if (partial || result.log.evaluations >= config.budget.total) {
            result.log.partial_final_generation = partial;
            result.log.generations.push_back(log);
            break;
        }

        result.morph_population = vie_generation(std::move(result.morph_population),
                                                 result.boundary, rng, config.vie_mutants,
                                                 config.vie_population);
        emit(TraceEvent::Kind::BoundaryShrink, generation, 0);
        log.boundary = result.boundary.threshold;

        GenerationResult neat = neat_generation(result.neat_population, species, registry, rng,
                                                config.neat);
        result.neat_population = std::move(neat.population);
        log.species_count = neat.species_count;
        log.restart = neat.restarted;
        if (neat.restarted) emit(TraceEvent::Kind::Restart, generation, 0);

        result.log.generations.push_back(log);
        ++generation;
    }

    result.best = best.best;
    result.log.best_fitness =
        best.best ? best.best->fitness : std::numeric_limits<double>::infinity();
    return result;
}

} // namespace tsmr
