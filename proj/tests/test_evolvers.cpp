#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tsmr/evolvers.hpp"

using namespace tsmr;

namespace {

// Tiny but real physics: 4 s episodes keep the loop tests fast while
// exercising the full evaluate/insert machinery.
SimConfig tiny_sim() {
    SimConfig cfg;
    cfg.sim_duration = 4.0;
    cfg.trajectory_sample_period = 1.0;
    cfg.settle_max_duration = 10.0;
    return cfg;
}

EvolverConfig tiny_config(long budget, int initial, int batch) {
    EvolverConfig c;
    c.budget.total = budget;
    c.budget.initial_solutions = initial;
    c.budget.batch_size = batch;
    c.pca_schedule = {0, 2, 5};
    c.threads = 2;
    return c;
}

std::vector<VieIndividual> make_population(const std::vector<double>& fitness) {
    std::vector<VieIndividual> pop;
    for (double f : fitness) {
        VieIndividual ind;
        ind.genome = random_morphology(static_cast<std::uint64_t>(pop.size() + 1));
        ind.fitness = f;
        pop.push_back(ind);
    }
    return pop;
}

} // namespace

TEST_CASE("vie boundary: equal fitness eliminates nobody") {
    Rng rng(1);
    ViabilityBoundary boundary;
    auto pop = make_population(std::vector<double>(10, 0.4));
    const auto next = vie_generation(pop, boundary, rng, 5, 4);
    CHECK(boundary.threshold == 0.4);
    // All 10 survive (all at the boundary) plus 5 mutants.
    CHECK(next.size() == 15);
    int evaluated = 0;
    for (const auto& ind : next) evaluated += std::isfinite(ind.fitness) ? 1 : 0;
    CHECK(evaluated == 10);
}

TEST_CASE("vie boundary shrinks monotonically and survivors respect it") {
    Rng rng(2);
    ViabilityBoundary boundary;
    auto pop = make_population({0.10, 0.20, 0.30, 0.40, 0.50, 0.60});
    auto next = vie_generation(pop, boundary, rng, 0, 3);
    CHECK(boundary.threshold == doctest::Approx(0.30)); // 3rd best
    for (const auto& ind : next) CHECK(ind.fitness <= boundary.threshold);
    CHECK(next.size() == 3);

    // Feed better fitness; the boundary can only move down.
    const double before = boundary.threshold;
    for (auto& ind : next) ind.fitness = 0.05;
    next = vie_generation(next, boundary, rng, 2, 3);
    CHECK(boundary.threshold <= before);

    // Worse-than-boundary individuals are eliminated even when few remain.
    ViabilityBoundary b2;
    b2.threshold = 0.25;
    auto pop2 = make_population({0.10, 0.20, 0.90});
    const auto out2 = vie_generation(pop2, b2, rng, 0, 48);
    CHECK(out2.size() == 2);
    CHECK(b2.threshold == 0.25); // fewer than target: no shrink
}

TEST_CASE("vie boundary initializes at the worst initial fitness") {
    Rng rng(3);
    ViabilityBoundary boundary;
    CHECK(!boundary.initialized());
    auto pop = make_population({0.3, 0.7, 0.5});
    (void)vie_generation(pop, boundary, rng, 1, 48);
    CHECK(boundary.initialized());
    CHECK(boundary.threshold == 0.7);
}

TEST_CASE("mutate_pair: kind frequencies and untouched partners") {
    Rng rng(4);
    InnovationRegistry reg = make_registry(2, 20);
    Solution base;
    base.morph = random_morphology(5);
    base.ctrl = minimal_genome(2, 20, rng);
    NeatMutationParams params;

    int morph_only = 0, ctrl_only = 0, both = 0;
    const int trials = 30000;
    for (int i = 0; i < trials; ++i) {
        if (i % 500 == 0) reg.begin_generation();
        const Solution m = mutate_pair(base, reg, rng, params);
        const bool morph_changed = !(m.morph == base.morph);
        bool ctrl_changed = !m.ctrl.structurally_equal(base.ctrl);
        if (!ctrl_changed)
            for (std::size_t c = 0; c < m.ctrl.connections.size(); ++c)
                ctrl_changed |= m.ctrl.connections[c].weight != base.ctrl.connections[c].weight;
        if (!ctrl_changed)
            for (std::size_t c = 0; c < m.ctrl.nodes.size(); ++c)
                ctrl_changed |= m.ctrl.nodes[c].bias != base.ctrl.nodes[c].bias;
        if (morph_changed && ctrl_changed)
            ++both;
        else if (morph_changed)
            ++morph_only;
        else if (ctrl_changed)
            ++ctrl_only;
    }
    // Controller mutation leaves the genome untouched with tiny probability
    // (no weight drawn), so ctrl-only/both may undercount by a hair.
    CHECK(std::fabs(morph_only / static_cast<double>(trials) - 1.0 / 3.0) < 0.01);
    CHECK(std::fabs(ctrl_only / static_cast<double>(trials) - 1.0 / 3.0) < 0.015);
    CHECK(std::fabs(both / static_cast<double>(trials) - 1.0 / 3.0) < 0.015);
}

TEST_CASE("run budget arithmetic") {
    RunBudget paper{45000, 1080, 24};
    CHECK(paper.generations() == 1830);
    CHECK(paper.final_partial_batch() == 0);
    RunBudget desk{2400, 240, 24};
    CHECK(desk.generations() == 90);
    CHECK(desk.final_partial_batch() == 0);
    RunBudget ragged{1005, 240, 24};
    CHECK(ragged.generations() == 31);
    CHECK(ragged.final_partial_batch() == 21);
}

TEST_CASE("dm-me tiny run: budget exact, archives filled, protocol ordering") {
    const EvolverConfig cfg = tiny_config(240, 48, 24);
    const TaskSpec task = TaskSpec::goal_reaching();

    std::vector<TraceEvent> events;
    const QdObserver observer = [&](const TraceEvent& e, const QdState& state) {
        events.push_back(e);
        // Post-reinsert invariant: every occupant re-projects onto its cell.
        if (e.kind == TraceEvent::Kind::Reinsert) {
            for (const auto& [fd, sol] : state.nn_archive->cells()) {
                const auto now = state.projector->project(sol);
                REQUIRE(now.has_value());
                CHECK(*now == fd);
            }
        }
    };

    const DmMeResult r = dm_me_run(cfg, task, tiny_sim(), 99, observer);
    CHECK(r.log.evaluations == 240);
    CHECK(!r.log.partial_final_generation);
    CHECK(r.morph_archive.size() >= 1);
    CHECK(r.nn_archive.size() >= 1);
    CHECK(r.best.has_value());
    CHECK(r.log.generations.size() == 9); // init + 8 batches

    // Refits at scheduled generations only (0 is the initial fit).
    std::set<int> refit_gens;
    for (std::size_t i = 0; i < r.log.generations.size(); ++i)
        if (r.log.generations[i].refit) refit_gens.insert(r.log.generations[i].generation);
    CHECK(refit_gens.count(0) == 1);
    CHECK(refit_gens.count(2) == 1);
    CHECK(refit_gens.count(5) == 1);
    for (int g : refit_gens) CHECK((g == 0 || g == 2 || g == 5));

    // Trace ordering per generation: any OutOfBounds is followed by
    // RecomputeBounds, Reinsert, Retransform before the Insert.
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].kind != TraceEvent::Kind::OutOfBounds) continue;
        REQUIRE(i + 3 < events.size());
        CHECK(events[i + 1].kind == TraceEvent::Kind::RecomputeBounds);
        CHECK(events[i + 2].kind == TraceEvent::Kind::Reinsert);
        CHECK(events[i + 3].kind == TraceEvent::Kind::Retransform);
    }
    // Every batch ends with an insert.
    int inserts = 0;
    for (const auto& e : events) inserts += e.kind == TraceEvent::Kind::Insert ? 1 : 0;
    CHECK(inserts == 9);
}

TEST_CASE("dm-me accepts into one map and rejects from the other") {
    // Two solutions, same morphology cell, same controller cell: the second
    // is better in fitness => replaces in both; a third with worse fitness
    // but a previously empty morphology cell lands in exactly one map. This
    // exercises the semantics through the public Archive/projector path.
    Rng rng(5);
    FeatureProjector projector({9, 10}, {0});
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> row(8);
        for (auto& v : row) v = rng.normal();
        rows.push_back(row);
    }
    projector.fit(rows);

    Archive a_e(kMorphologyDims), a_nn({9, 10});
    auto insert_both = [&](Solution s) {
        const InsertOutcome me = a_e.add(morphology_fd(s.morph), s);
        const InsertOutcome nn = a_nn.add(projector.project_or_throw(s), s);
        return std::pair{me, nn};
    };

    Solution s1;
    s1.morph = MorphologyGenome{3, 2, {0, 0}};
    s1.fitness = 0.30;
    s1.sensory = rows[0];
    Solution s2 = s1;
    s2.fitness = 0.20; // better everywhere
    Solution s3;
    s3.morph = MorphologyGenome{5, 7, {1, 1, 1, 1}};
    s3.fitness = 0.40; // worse, but fresh morphology cell
    s3.sensory = rows[0]; // same controller cell as s1/s2

    CHECK(insert_both(s1) == std::pair{InsertOutcome::Inserted, InsertOutcome::Inserted});
    CHECK(insert_both(s2) == std::pair{InsertOutcome::Replaced, InsertOutcome::Replaced});
    const auto [me3, nn3] = insert_both(s3);
    CHECK(me3 == InsertOutcome::Inserted); // added to the morphology map
    CHECK(nn3 == InsertOutcome::Rejected); // rejected by the controller map
}

TEST_CASE("map-elites tiny run: 4-D archive, exact budget, per-cell monotonicity") {
    const EvolverConfig cfg = tiny_config(192, 48, 24);
    const TaskSpec task = TaskSpec::goal_reaching();

    // Within a fixed descriptor mapping (between reinserts) stored per-cell
    // fitness never increases and occupancy only grows, so the QD score over
    // any fixed occupied set cannot decrease.
    std::map<FeatureDescriptor, double> epoch_cells;
    const QdObserver observer = [&](const TraceEvent& e, const QdState& state) {
        if (e.kind == TraceEvent::Kind::Reinsert) {
            epoch_cells.clear(); // new mapping epoch
            return;
        }
        if (e.kind != TraceEvent::Kind::Insert) return;
        const Archive& a = *state.single_archive;
        for (const auto& [fd, prev] : epoch_cells) {
            REQUIRE(a.at(fd) != nullptr); // occupancy only grows
            CHECK(a.at(fd)->fitness <= prev);
        }
        epoch_cells.clear();
        for (const auto& [fd, sol] : a.cells()) epoch_cells[fd] = sol.fitness;
    };

    const MapElitesResult r = map_elites_run(cfg, task, tiny_sim(), 7, observer);
    CHECK(r.log.evaluations == 192);
    CHECK(r.archive.dims() == std::vector<int>{9, 10, 9, 10});
    CHECK(r.archive.size() >= 1);
}

TEST_CASE("map-elites partial final batch consumes the exact budget") {
    const EvolverConfig cfg = tiny_config(130, 48, 24); // 48 + 3*24 + 10
    const MapElitesResult r = map_elites_run(cfg, TaskSpec::goal_reaching(), tiny_sim(), 11);
    CHECK(r.log.evaluations == 130);
    CHECK(r.log.partial_final_generation);
    CHECK(r.log.generations.back().partial);
}

TEST_CASE("vie-neat tiny run: pairing, budget stop, projection archive") {
    EvolverConfig cfg = tiny_config(300, 0, 0);
    cfg.vie_population = 8;
    cfg.vie_mutants = 8;
    cfg.neat.population_size = 10;
    const TaskSpec task = TaskSpec::goal_reaching();
    const VieNeatResult r = vie_neat_run(cfg, task, tiny_sim(), 21);
    CHECK(r.log.evaluations <= 300);
    CHECK(r.log.evaluations >= 290); // stops within one pairing of the budget
    CHECK(r.morph_projection.size() >= 1);
    CHECK(r.best.has_value());
    CHECK(std::isfinite(r.boundary.threshold));
    // Boundary non-increasing across the log.
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& g : r.log.generations) {
        if (std::isfinite(g.boundary)) {
            CHECK(g.boundary <= prev + 1e-12);
            prev = g.boundary;
        }
    }
}

TEST_CASE("same seed reproduces a dm-me run exactly") {
    const EvolverConfig cfg = tiny_config(120, 48, 24);
    const TaskSpec task = TaskSpec::goal_reaching();
    const DmMeResult a = dm_me_run(cfg, task, tiny_sim(), 31337);
    const DmMeResult b = dm_me_run(cfg, task, tiny_sim(), 31337);
    REQUIRE(a.morph_archive.size() == b.morph_archive.size());
    for (const auto& [fd, sol] : a.morph_archive.cells()) {
        REQUIRE(b.morph_archive.at(fd) != nullptr);
        CHECK(b.morph_archive.at(fd)->fitness == sol.fitness);
        CHECK(b.morph_archive.at(fd)->morph == sol.morph);
    }
    REQUIRE(a.nn_archive.size() == b.nn_archive.size());
    CHECK(a.log.best_fitness == b.log.best_fitness);

    const DmMeResult c = dm_me_run(cfg, task, tiny_sim(), 31338);
    CHECK(a.log.best_fitness != c.log.best_fitness);
}

TEST_CASE("thread count does not change results") {
    EvolverConfig one = tiny_config(96, 48, 24);
    one.threads = 1;
    EvolverConfig two = tiny_config(96, 48, 24);
    two.threads = 2;
    const TaskSpec task = TaskSpec::goal_reaching();
    const DmMeResult a = dm_me_run(one, task, tiny_sim(), 5);
    const DmMeResult b = dm_me_run(two, task, tiny_sim(), 5);
    CHECK(a.log.best_fitness == b.log.best_fitness);
    REQUIRE(a.nn_archive.size() == b.nn_archive.size());
    for (const auto& [fd, sol] : a.nn_archive.cells())
        CHECK(b.nn_archive.at(fd)->fitness == sol.fitness);
}
