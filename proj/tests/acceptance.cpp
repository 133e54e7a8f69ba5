// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run a single criterion with `acceptance <number>`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifdef TSMR_HAVE_EIGEN
#include <Eigen/Dense>
#endif

#include "tsmr/bench.hpp"
#include "tsmr/config.hpp"
#include "tsmr/errors.hpp"
#include "tsmr/evolvers.hpp"
#include "tsmr/parallel.hpp"
#include "tsmr/stats.hpp"

#include <numeric>

using namespace tsmr;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "tsmr_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- criterion 1
Check fitness_formula_suite() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(0xF1);
    for (int trial = 0; trial < 100000; ++trial) {
        const std::size_t n = 1 + rng.index(6); // targets or partners
        std::vector<double> d(n);
        for (auto& v : d) v = rng.uniform(0.0, 1.2);

        // Direct formula route: (1/N) sum + 0.5 (max - (1/N) sum).
        double sum = 0.0;
        double max = d[0];
        for (double v : d) {
            sum += v;
            max = std::max(max, v);
        }
        const double mean = sum / static_cast<double>(n);
        const double direct = mean + 0.5 * (max - mean);

        const double got = aggregate_distance_fitness(d);
        c.require(std::fabs(got - direct) <= 1e-12, "formula mismatch beyond 1e-12");
        c.require(got >= mean - 1e-12 && got <= max + 1e-12, "mean <= f <= max violated");
        if (!c.ok) break;
    }
    const double secs = elapsed_s(t0);
    c.require(secs < 5.0, "runtime over 5 s: " + std::to_string(secs));
    c.detail += " (" + std::to_string(secs).substr(0, 4) + " s)";
    return c;
}

// ---------------------------------------------------------------- criterion 2
Check fitness_transform_consistency() {
    Check c;
    const TaskSpec goal = TaskSpec::goal_reaching();
    const TaskSpec squeeze = TaskSpec::squeezing();
    Rng rng(0xF2);
    for (int trial = 0; trial < 100000; ++trial) {
        const double f = rng.uniform(-0.2, 1.0);
        c.require(std::fabs(transform_fitness(f, goal) + f - 0.45) <= 1e-12,
                  "goal: f_s + f != d_init");
        c.require(std::fabs(transform_fitness(f, squeeze) + f - 0.60) <= 1e-12,
                  "squeeze: f_s + f != d_init");
        if (!c.ok) break;
    }
    // Published example: f = 18.79 cm at d_init = 45 cm gives f_s = 26.21 cm.
    const double fs_cm = transform_fitness_cm(0.1879, goal);
    c.require(std::fabs(fs_cm - 26.21) <= 1e-12, "26.21 cm example failed");
    const double back = 0.45 - transform_fitness(0.1879, goal);
    c.require(std::fabs(back - 0.1879) <= 1e-12, "example round-trip failed");
    return c;
}

// ---------------------------------------------------------------- criterion 3
Check archive_oracle() {
    Check c;
    Rng rng(0xF3);
    for (int trial = 0; trial < 10000 && c.ok; ++trial) {
        const std::vector<int> dims =
            trial % 2 ? std::vector<int>{9, 10} : std::vector<int>{9, 10, 9, 10};
        Archive archive(dims);
        std::map<FeatureDescriptor, double> oracle;
        const int inserts = 1 + static_cast<int>(rng.index(30));
        for (int i = 0; i < inserts; ++i) {
            FeatureDescriptor fd;
            for (int d : dims) fd.push_back(static_cast<int>(rng.index(d)));
            const double f = rng.uniform(0.0, 0.6);
            const double before =
                archive.at(fd) ? archive.at(fd)->fitness : std::numeric_limits<double>::infinity();
            Solution s;
            s.fitness = f;
            archive.add(fd, std::move(s));
            // Per-cell monotonicity at every step.
            c.require(archive.at(fd)->fitness <= before, "stored fitness increased");
            auto it = oracle.find(fd);
            if (it == oracle.end() || f < it->second) oracle[fd] = f;
        }
        c.require(archive.size() == oracle.size(), "occupancy mismatch vs oracle");
        for (const auto& [fd, f] : oracle)
            c.require(archive.at(fd) && archive.at(fd)->fitness == f,
                      "cell contents differ from the replay oracle");
    }
    return c;
}

// ---------------------------------------------------------------- criterion 4
Check pca_oracle() {
    Check c;
#ifndef TSMR_HAVE_EIGEN
    c.require(false, "Eigen oracle unavailable in this build");
    return c;
#else
    Rng rng(0xF4);
    for (int trial = 0; trial < 50 && c.ok; ++trial) {
        const std::size_t n = 100, d = 320;
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        for (auto& row : rows)
            for (auto& v : row) v = rng.normal(0.0, 1.0 + rng.uniform());

        FeatureProjector p({9, 10}, {0});
        p.fit(rows);

        Eigen::MatrixXd x(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
        Eigen::RowVectorXd mean = x.colwise().mean();
        Eigen::MatrixXd centered = x.rowwise() - mean;
        Eigen::RowVectorXd std_col =
            (centered.array().square().colwise().sum() / (n - 1)).sqrt();
        for (std::size_t j = 0; j < d; ++j)
            if (std_col(j) > 0) centered.col(j) /= std_col(j);
        Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const Eigen::VectorXd v1 = eig.eigenvectors().col(d - 1);
        const Eigen::VectorXd v2 = eig.eigenvectors().col(d - 2);

        double dot1 = 0.0, dot2 = 0.0, n1 = 0.0, n2 = 0.0, cross = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dot1 += p.pca().axis1[j] * v1(j);
            dot2 += p.pca().axis2[j] * v2(j);
            n1 += p.pca().axis1[j] * p.pca().axis1[j];
            n2 += p.pca().axis2[j] * p.pca().axis2[j];
            cross += p.pca().axis1[j] * p.pca().axis2[j];
        }
        c.require(std::fabs(std::fabs(dot1) - 1.0) < 1e-8, "axis 1 differs from the oracle");
        c.require(std::fabs(std::fabs(dot2) - 1.0) < 1e-8, "axis 2 differs from the oracle");
        c.require(std::fabs(n1 - 1.0) < 1e-8 && std::fabs(n2 - 1.0) < 1e-8 &&
                      std::fabs(cross) < 1e-8,
                  "axes not orthonormal");
        c.require(p.pca().variance1 >= p.pca().variance2, "variances out of order");

        for (const auto& row : rows) {
            Solution s;
            s.sensory = row;
            c.require(p.project(s).has_value(), "fitting data projects out of bounds");
            if (!c.ok) break;
        }
    }
    return c;
#endif
}

// ---------------------------------------------------------------- criterion 5
Check dm_me_protocol_replay() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();

    ExperimentConfig cfg = ExperimentConfig::preset_desk();
    cfg.set("task", "goal");
    cfg.set("algorithm", "dm-me");
    cfg.set("threads", "0");
    const EvolverConfig evolver = cfg.make_evolver_config();
    const TaskSpec task = cfg.make_task();

    std::vector<TraceEvent> events;
    std::set<int> refit_gens;
    int reinserts_checked = 0;
    const QdObserver observer = [&](const TraceEvent& e, const QdState& state) {
        events.push_back(e);
        if (e.kind == TraceEvent::Kind::Refit) refit_gens.insert(e.generation);
        if (e.kind == TraceEvent::Kind::Reinsert) {
            ++reinserts_checked;
            for (const auto& [fd, sol] : state.nn_archive->cells()) {
                const auto now = state.projector->project(sol);
                c.require(now.has_value(), "occupant out of bounds after reinsert");
                c.require(now.has_value() && *now == fd,
                          "occupant does not re-project to its stored cell");
            }
        }
    };

    const DmMeResult r = dm_me_run(evolver, task, cfg.physics, 20240, observer);
    c.require(r.log.evaluations == 2400, "desk budget not consumed exactly");

    // Refits exactly at the scheduled generations (0 is the initial fit).
    c.require(refit_gens == std::set<int>{0, 10, 30, 70},
              "refit generations differ from the schedule");

    // Every out-of-bounds is followed by recompute + reinsert + retransform
    // before the batch insert.
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].kind != TraceEvent::Kind::OutOfBounds) continue;
        const bool ordered = i + 3 < events.size() &&
                             events[i + 1].kind == TraceEvent::Kind::RecomputeBounds &&
                             events[i + 2].kind == TraceEvent::Kind::Reinsert &&
                             events[i + 3].kind == TraceEvent::Kind::Retransform;
        c.require(ordered, "out-of-bounds not followed by recompute/reinsert/retransform");
        bool insert_after = false;
        for (std::size_t j = i + 4; j < events.size(); ++j) {
            if (events[j].kind == TraceEvent::Kind::Insert) {
                insert_after = true;
                break;
            }
            if (events[j].kind == TraceEvent::Kind::GenerationStart) break;
        }
        c.require(insert_after, "batch insert missing after recompute");
    }

    const double secs = elapsed_s(t0);
    c.require(secs < 1200.0, "desk run exceeded 20 min");
    std::ostringstream extra;
    extra << " (" << static_cast<int>(secs) << " s, " << reinserts_checked << " reinserts, "
          << r.nn_archive.size() << "/" << r.morph_archive.size() << " occupants)";
    c.detail += extra.str();
    return c;
}

// ---------------------------------------------------------------- criterion 6
Check neat_suite() {
    Check c;
    Rng rng(0xF6);
    InnovationRegistry reg = make_registry(2, 20);
    NeatMutationParams grow;
    grow.add_connection_prob = 0.3;
    grow.add_node_prob = 0.25;
    grow.toggle_enable_prob = 0.1;

    // Relaxation oracle on 1000 random genomes.
    for (int trial = 0; trial < 1000 && c.ok; ++trial) {
        if (trial % 50 == 0) reg.begin_generation();
        ControllerGenome g = minimal_genome(2, 20, rng);
        for (int i = 0; i < 6; ++i) g = mutate_controller(g, reg, rng, grow);
        const std::vector<double> in{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const std::vector<double> fast = decode_and_eval(g, in);

        std::map<int, double> value;
        for (const auto& node : g.nodes) value[node.id] = 0.0;
        for (std::size_t sweep = 0; sweep < g.nodes.size() + 2; ++sweep)
            for (const auto& node : g.nodes) {
                if (node.kind == NodeKind::Input) {
                    value[node.id] = in[static_cast<std::size_t>(node.id)];
                    continue;
                }
                double sum = node.bias;
                for (const auto& conn : g.connections)
                    if (conn.enabled && conn.to == node.id) sum += conn.weight * value[conn.from];
                value[node.id] = sigmoid(sum);
            }
        for (int j = 0; j < 20; ++j)
            c.require(std::fabs(fast[static_cast<std::size_t>(j)] - value[2 + j]) < 1e-9,
                      "decode differs from the relaxation oracle");
    }

    // Acyclicity across 100k mutation/crossover operations.
    auto acyclic = [](const ControllerGenome& g) {
        try {
            (void)FeedForwardNetwork::compile(g);
            return true;
        } catch (const StructuralError&) {
            return false;
        }
    };
    ControllerGenome a = minimal_genome(2, 8, rng);
    ControllerGenome b = minimal_genome(2, 8, rng);
    for (int op = 0; op < 100000 && c.ok; ++op) {
        if (op % 250 == 0) {
            reg.begin_generation();
            if (a.connections.size() > 300) a = minimal_genome(2, 8, rng);
            if (b.connections.size() > 300) b = minimal_genome(2, 8, rng);
        }
        if (op % 5 == 2) {
            a.fitness = rng.uniform();
            b.fitness = rng.uniform();
            const ControllerGenome child = crossover(a, b, rng);
            c.require(acyclic(child), "crossover produced a cycle");
            b = child;
            b.fitness = rng.uniform();
        } else {
            a = mutate_controller(a, reg, rng, grow);
            if (op % 997 == 0) c.require(acyclic(a), "mutation produced a cycle");
        }
    }
    c.require(acyclic(a) && acyclic(b), "final genomes not acyclic");

    // Innovation-number consistency within a generation.
    reg.begin_generation();
    const int i1 = reg.connection_innovation(3, 7);
    const int i2 = reg.connection_innovation(3, 7);
    const auto s1 = reg.node_split(i1);
    const auto s2 = reg.node_split(i1);
    c.require(i1 == i2 && s1.node_id == s2.node_id && s1.innovation_in == s2.innovation_in,
              "same structural event produced different numbers");
    const int before = reg.next_innovation();
    reg.begin_generation();
    c.require(reg.next_innovation() == before, "innovation counter decreased");

    // Elitism under deterministic evaluation: the population minimum never
    // increases across generations.
    auto synthetic_fitness = [](const ControllerGenome& g) {
        double s = 0.0;
        for (const auto& conn : g.connections)
            if (conn.enabled) s += std::fabs(conn.weight);
        return 0.1 + std::fmod(s, 1.7);
    };
    NeatParams params;
    params.population_size = 30;
    std::vector<ControllerGenome> pop;
    for (int i = 0; i < 30; ++i) pop.push_back(minimal_genome(2, 8, rng));
    for (auto& g : pop) g.fitness = synthetic_fitness(g);
    std::vector<Species> species;
    InnovationRegistry reg2 = make_registry(2, 8);
    double best = std::numeric_limits<double>::infinity();
    for (auto& g : pop) best = std::min(best, g.fitness);
    for (int gen = 0; gen < 25; ++gen) {
        const GenerationResult next = neat_generation(pop, species, reg2, rng, params);
        pop = next.population;
        double now = std::numeric_limits<double>::infinity();
        for (auto& g : pop) {
            g.fitness = synthetic_fitness(g);
            now = std::min(now, g.fitness);
        }
        c.require(now <= best + 1e-12, "elite lost: min fitness increased");
        best = std::min(best, now);
    }
    return c;
}

// ---------------------------------------------------------------- criterion 7
Check simulator_sanity() {
    Check c;
    const TaskSpec task = TaskSpec::goal_reaching();

    // Zero actuation: displacement under 1 cm for a grid of morphologies.
    SimConfig still;
    still.contraction_amplitude = 0.0;
    still.actuation_noise_sigma = 0.0;
    for (int stiffness : {0, 4, 8}) {
        for (int modules : {1, 3, 5, 10}) {
            MorphologyGenome g;
            g.num_modules = modules;
            g.stiffness_level = stiffness;
            for (int i = 0; i + 1 < modules; ++i) g.connection_faces.push_back((i * 5) % 8);
            const SimResult r = simulate_with_policy(
                g, constant_policy(std::vector<double>(20, 0.5)), task, 0, 0, still);
            c.require(!r.aborted, "zero-actuation run aborted");
            c.require(std::fabs(r.final_distance - task.initial_distance()) < 0.01,
                      "zero-actuation displacement >= 1 cm (s=" + std::to_string(stiffness) +
                          " m=" + std::to_string(modules) + ")");
        }
    }

    // Cable tension never negative on instrumented actuated runs.
    SimConfig cfg;
    for (int stiffness : {0, 8}) {
        MorphologyGenome g;
        g.num_modules = 3;
        g.stiffness_level = stiffness;
        g.connection_faces = {1, 6};
        const ChainGeometry chain = build_chain(g);
        Simulation sim(chain, cfg, task, 0, 99);
        sim.set_policy(constant_policy(std::vector<double>(20, 0.7)));
        while (sim.step()) {
        }
        c.require(sim.min_cable_force_seen() >= 0.0, "compressive cable force recorded");
    }

    // Bit-identical repeats.
    Rng det_rng(0x71);
    const MorphologyGenome g2 = random_morphology(det_rng);
    const ControllerGenome n2 = minimal_genome(2, 20, det_rng);
    const SimResult r1 = simulate(g2, n2, task, 2, 1, cfg);
    const SimResult r2 = simulate(g2, n2, task, 2, 1, cfg);
    c.require(r1.final_distance == r2.final_distance, "same-seed distances differ");
    c.require(r1.trajectory_xy == r2.trajectory_xy, "same-seed trajectories differ");

    // 1000 random evaluations: all states finite (no aborts), fitness finite.
    Rng rng(0xF7);
    InnovationRegistry reg = make_registry(2, 20);
    std::vector<MorphologyGenome> morphs(1000);
    std::vector<ControllerGenome> ctrls(1000);
    NeatMutationParams grow;
    grow.add_connection_prob = 0.3;
    grow.add_node_prob = 0.2;
    for (int i = 0; i < 1000; ++i) {
        morphs[static_cast<std::size_t>(i)] = random_morphology(rng);
        ControllerGenome n = minimal_genome(2, 20, rng);
        for (int k = 0; k < 4; ++k) n = mutate_controller(n, reg, rng, grow);
        ctrls[static_cast<std::size_t>(i)] = std::move(n);
    }
    std::vector<int> bad(1000, 0);
    parallel_for(1000, 2, [&](std::size_t i) {
        const EvaluationResult r = evaluate(morphs[i], ctrls[i], task, cfg);
        bool finite = std::isfinite(r.fitness);
        for (double v : r.sensory) finite = finite && std::isfinite(v);
        bad[i] = (!finite || r.any_abort) ? 1 : 0;
    });
    const int failures = std::accumulate(bad.begin(), bad.end(), 0);
    c.require(failures == 0,
              std::to_string(failures) + " of 1000 random evaluations hit non-finite states");
    return c;
}

// ---------------------------------------------------------------- criterion 8
Check squeezing_mechanics() {
    Check c;
    SimConfig cfg;
    cfg.contraction_amplitude = 0.0;
    cfg.actuation_noise_sigma = 0.0;
    MorphologyGenome g;
    g.num_modules = 1;
    g.stiffness_level = 8;

    TaskSpec crossing = TaskSpec::squeezing();
    crossing.start_advance = crossing.squeeze.entrance_offset + 0.045;
    const SimResult crossed = simulate_with_policy(
        g, constant_policy(std::vector<double>(20, 0.5)), crossing, 0, 0, cfg);
    c.require(crossed.bonus_applied, "crossing individual received no bonus");
    c.require(std::fabs((crossed.raw_final_distance - crossed.final_distance) - 0.04) <= 1e-12,
              "bonus deduction is not exactly 4 cm");

    TaskSpec short_of = TaskSpec::squeezing();
    short_of.start_advance = short_of.squeeze.entrance_offset - 0.01;
    const SimResult stopped = simulate_with_policy(
        g, constant_policy(std::vector<double>(20, 0.5)), short_of, 0, 0, cfg);
    c.require(!stopped.bonus_applied, "non-crossing individual received the bonus");
    c.require(stopped.final_distance == stopped.raw_final_distance,
              "deduction applied without a crossing");
    return c;
}

// ---------------------------------------------------------------- criterion 9
Check scaled_trend() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = ExperimentConfig::preset_desk();
    cfg.set("task", "goal");
    cfg.set("threads", "0");
    const TaskSpec task = cfg.make_task();
    const EvolverConfig evolver = cfg.make_evolver_config();

    int wins = 0;
    std::ostringstream detail;
    for (int seed = 0; seed < 5; ++seed) {
        const std::uint64_t s = 5000 + static_cast<std::uint64_t>(seed);
        const DmMeResult dm = dm_me_run(evolver, task, cfg.physics, s);
        const MapElitesResult me = map_elites_run(evolver, task, cfg.physics, s);
        const double qd_dm = qd_score_cm(dm.morph_archive, task);
        const double qd_me = qd_score_cm(slice_morphology(me.archive), task);
        if (qd_dm > qd_me) ++wins;
        detail << " seed" << seed << ": dm=" << static_cast<long>(qd_dm)
               << " me=" << static_cast<long>(qd_me);
    }
    const double p = sign_test_p(wins, 5);
    detail << " | wins=" << wins << "/5 sign-test p=" << p;
    c.require(wins >= 4, "DM-ME won only " + std::to_string(wins) + "/5 paired seeds");
    const double secs = elapsed_s(t0);
    c.require(secs < 4.0 * 3600.0, "trend check exceeded 4 h");
    c.detail += detail.str() + " (" + std::to_string(static_cast<int>(secs)) + " s)";
    return c;
}

// --------------------------------------------------------------- criterion 10
Check statistics_oracle() {
    Check c;
    // Reference case.
    const std::vector<double> x{1, 2, 3}, y{101, 102, 103};
    c.require(std::fabs(wilcoxon_ranksum_p(x, y, RanksumMode::Exact) - 0.1) < 1e-12,
              "{1,2,3} vs {101,102,103} != 0.1");

    // Exhaustive oracle for all n, m <= 7 (fresh enumeration over subsets).
    Rng rng(0xFA);
    for (std::size_t n = 1; n <= 7 && c.ok; ++n) {
        for (std::size_t m = 1; m <= 7 && c.ok; ++m) {
            for (int rep = 0; rep < 3; ++rep) {
                std::vector<double> a(n), b(m);
                for (auto& v : a) v = static_cast<double>(rng.index(5));
                for (auto& v : b) v = static_cast<double>(rng.index(5));

                // Oracle: iterate every subset of the combined ranks.
                std::vector<std::pair<double, int>> all;
                for (double v : a) all.push_back({v, 0});
                for (double v : b) all.push_back({v, 1});
                std::sort(all.begin(), all.end());
                std::vector<double> ranks(all.size());
                std::size_t i = 0;
                while (i < all.size()) {
                    std::size_t j = i;
                    while (j + 1 < all.size() && all[j + 1].first == all[i].first) ++j;
                    for (std::size_t k = i; k <= j; ++k) ranks[k] = 0.5 * (i + j) + 1.0;
                    i = j + 1;
                }
                double w_obs = 0.0;
                for (std::size_t k = 0; k < all.size(); ++k)
                    if (all[k].second == 0) w_obs += ranks[k];
                long le = 0, ge = 0, total = 0;
                const std::size_t count = all.size();
                for (std::size_t mask = 0; mask < (1u << count); ++mask) {
                    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
                    double w = 0.0;
                    for (std::size_t k = 0; k < count; ++k)
                        if (mask & (1u << k)) w += ranks[k];
                    ++total;
                    if (w <= w_obs + 1e-9) ++le;
                    if (w >= w_obs - 1e-9) ++ge;
                }
                const double oracle =
                    std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(total));
                const double got = wilcoxon_ranksum_p(a, b, RanksumMode::Exact);
                c.require(std::fabs(got - oracle) < 1e-12, "exact mode differs from enumeration");
            }
        }
    }

    // Normal approximation within 0.02 of exact for n=m=10 without ties.
    Rng rng2(0xFB);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(10), b(10);
        for (auto& v : a) v = rng2.normal();
        for (auto& v : b) v = rng2.normal(0.2 + 0.1 * (rep % 5));
        const double exact = wilcoxon_ranksum_p(a, b, RanksumMode::Exact);
        const double normal = wilcoxon_ranksum_p(a, b, RanksumMode::Normal);
        worst = std::max(worst, std::fabs(exact - normal));
    }
    c.require(worst < 0.02,
              "normal approximation off by " + std::to_string(worst) + " (limit 0.02)");
    c.detail += " (worst |exact-normal| = " + std::to_string(worst).substr(0, 6) + ")";
    return c;
}

// --------------------------------------------------------------- criterion 11
Check end_to_end_determinism() {
    Check c;
    const fs::path dir_a = fresh_dir("determinism_a");
    const fs::path dir_b = fresh_dir("determinism_b");
    const std::string common =
        std::string(TSMR_CLI_PATH) +
        " run --preset desk --algo dm-me --task goal --runs 1 --seed 424242"
        " --set budget=240 initial_solutions=48 pca_schedule=0,2,5"
        " physics.sim_duration=8 physics.settle_max_duration=10 --threads 2 --out ";
    c.require(std::system((common + dir_a.string() + " > /dev/null").c_str()) == 0,
              "first CLI run failed");
    c.require(std::system((common + dir_b.string() + " > /dev/null").c_str()) == 0,
              "second CLI run failed");

    for (const std::string f :
         {"archive_morph.csv", "archive_nn.csv", "projector.json", "runlog.jsonl"}) {
        c.require(read_file(dir_a / "run_0" / f) == read_file(dir_b / "run_0" / f),
                  f + " differs between identical runs");
    }
    // Manifests match once wall-clock timestamps are excluded.
    auto strip = [](const fs::path& p) {
        std::istringstream in(read_file(p));
        std::string line, out;
        while (std::getline(in, line))
            if (line.find("started_at") == std::string::npos &&
                line.find("finished_at") == std::string::npos)
                out += line + "\n";
        return out;
    };
    c.require(strip(dir_a / "run_0" / "manifest.json") ==
                  strip(dir_b / "run_0" / "manifest.json"),
              "manifests differ beyond timestamps");

    // Genome records byte-for-byte.
    if (fs::exists(dir_a / "run_0" / "genomes")) {
        for (const auto& e : fs::directory_iterator(dir_a / "run_0" / "genomes")) {
            const fs::path twin = dir_b / "run_0" / "genomes" / e.path().filename();
            c.require(fs::exists(twin) && read_file(e.path()) == read_file(twin),
                      "genome file differs: " + e.path().filename().string());
        }
    }
    return c;
}

} // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        Check (*run)();
    };
    const std::vector<Criterion> criteria{
        {1, "fitness formula suite (aggregate vs direct, bounds)", fitness_formula_suite},
        {2, "fitness transform consistency (f_s + f = d_init)", fitness_transform_consistency},
        {3, "archive insertion vs replay oracle", archive_oracle},
        {4, "PCA vs dense eigendecomposition oracle", pca_oracle},
        {5, "DM-ME protocol replay at desk scale", dm_me_protocol_replay},
        {6, "NEAT suite (oracle, acyclicity, innovations, elitism)", neat_suite},
        {7, "simulator sanity (stillness, tension, determinism, finiteness)", simulator_sanity},
        {8, "squeezing crossing bonus mechanics", squeezing_mechanics},
        {9, "scaled QD trend: DM-ME vs MAP-Elites projection", scaled_trend},
        {10, "Wilcoxon rank-sum oracle and approximation agreement", statistics_oracle},
        {11, "end-to-end run determinism", end_to_end_determinism},
    };

    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (only != 0 && criterion.id != only) continue;
        const Check result = criterion.run();
        std::printf("[%s] criterion %2d: %s%s%s\n", result.ok ? "PASS" : "FAIL", criterion.id,
                    criterion.name, result.detail.empty() ? "" : " --", result.detail.c_str());
        std::fflush(stdout);
        if (!result.ok) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
