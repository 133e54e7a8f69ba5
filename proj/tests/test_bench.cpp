#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsmr/bench.hpp"
#include "tsmr/errors.hpp"

using namespace tsmr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "tsmr_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Desk-style config shrunk to seconds of runtime.
ExperimentConfig smoke_config(const std::string& algo, long budget = 96) {
    ExperimentConfig c = ExperimentConfig::preset_desk();
    c.set("algorithm", algo);
    c.set("runs", "1");
    c.set("budget", std::to_string(budget));
    c.set("initial_solutions", "24");
    c.set("batch_size", "24");
    c.set("pca_schedule", "0,2");
    c.set("vie.population", "6");
    c.set("vie.mutants", "6");
    c.set("neat.population_size", "8");
    c.set("physics.sim_duration", "4");
    c.set("physics.settle_max_duration", "10");
    c.set("threads", "2");
    return c;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Manifest lines minus the wall-clock timestamps.
std::string manifest_without_timestamps(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::string line, out;
    while (std::getline(in, line))
        if (line.find("started_at") == std::string::npos &&
            line.find("finished_at") == std::string::npos)
            out += line + "\n";
    return out;
}

} // namespace

TEST_CASE("config round-trips through its text form") {
    ExperimentConfig c = ExperimentConfig::preset_desk();
    c.set("task", "squeeze");
    c.set("neat.compatibility_threshold", "3.1");
    c.set("physics.node_mass", "0.07");
    const std::string text = c.to_text();

    ExperimentConfig back;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        REQUIRE(eq != std::string::npos);
        std::string key = line.substr(0, eq - 1);
        std::string value = line.substr(eq + 2);
        back.set(key, value);
    }
    CHECK(back.to_text() == text);
    CHECK(back.task == "squeeze");
    CHECK(back.neat.compatibility_threshold == 3.1);
    CHECK(back.physics.node_mass == 0.07);
    CHECK(back.budget == 2400);
    CHECK(back.pca_schedule == std::vector<int>{0, 10, 30, 70});

    CHECK_THROWS_AS(back.set("nonsense.key", "1"), StructuralError);
    CHECK_THROWS_AS(back.set("budget", "not_a_number"), StructuralError);
}

TEST_CASE("paper preset matches the published tables") {
    const ExperimentConfig c = ExperimentConfig::preset_paper();
    CHECK(c.runs == 10);
    CHECK(c.budget == 45000);
    CHECK(c.initial_solutions == 1080);
    CHECK(c.batch_size == 24);
    CHECK(c.pca_schedule == std::vector<int>{0, 50, 150, 350, 750, 1550});
    CHECK(c.vie_population == 48);
    CHECK(c.vie_mutants == 48);
    CHECK(c.neat.population_size == 54);
    CHECK(c.neat.individual_elitism == 3);
    CHECK(c.neat.species_elitism == 2);
    CHECK(c.neat.compatibility_threshold == 2.85);
    CHECK(c.physics.sim_duration == 40.0);
    CHECK(c.physics.trajectory_sample_period == 1.0);
    const TaskSpec goal = c.make_task();
    CHECK(goal.targets.size() == 4);
    const RunBudget b = c.make_evolver_config().budget;
    CHECK(b.generations() == 1830);
}

TEST_CASE("archive export/import round-trip") {
    const fs::path dir = fresh_dir("archive_roundtrip");
    Rng rng(1);
    const TaskSpec task = TaskSpec::goal_reaching();
    Archive a(kMorphologyDims);
    InnovationRegistry reg = make_registry(2, 20);
    for (int i = 0; i < 25; ++i) {
        Solution s;
        s.morph = random_morphology(rng);
        s.ctrl = mutate_controller(minimal_genome(2, 20, rng), reg, rng);
        s.fitness = rng.uniform(0.1, 0.6);
        a.add(morphology_fd(s.morph), s);
    }
    export_archive(a, dir / "archive_morph.csv", task);
    const Archive back = import_archive(dir / "archive_morph.csv");
    REQUIRE(back.size() == a.size());
    CHECK(back.dims() == a.dims());
    for (const auto& [fd, sol] : a.cells()) {
        const Solution* b = back.at(fd);
        REQUIRE(b != nullptr);
        CHECK(b->fitness == sol.fitness); // %.17g round-trips doubles exactly
        CHECK(b->morph == sol.morph);
        CHECK(b->ctrl.structurally_equal(sol.ctrl));
    }
}

TEST_CASE("projector snapshot round-trip") {
    const fs::path dir = fresh_dir("projector_roundtrip");
    Rng rng(2);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> row(16);
        for (auto& v : row) v = rng.normal();
        rows.push_back(row);
    }
    FeatureProjector p({9, 10}, {0, 10, 30, 70});
    p.fit(rows);
    save_projector(p, dir / "projector.json");
    const FeatureProjector q =
        load_projector(dir / "projector.json", {9, 10}, {0, 10, 30, 70});
    for (const auto& row : rows) {
        const auto a = p.project_values(row);
        const auto b = q.project_values(row);
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
    }
    CHECK(q.bounds()[0].lo == p.bounds()[0].lo);
    CHECK(q.bounds()[1].hi == p.bounds()[1].hi);
}

TEST_CASE("run_experiment writes manifests and archives for each algorithm") {
    for (const std::string algo : {"dm-me", "me", "vie-neat"}) {
        const fs::path out = fresh_dir("smoke_" + algo);
        const auto manifests = run_experiment(smoke_config(algo), out);
        REQUIRE(manifests.size() == 1);
        CHECK(manifests[0].status == "completed");
        CHECK(manifests[0].evaluation_count > 0);
        CHECK(fs::exists(out / "run_0" / "manifest.json"));
        CHECK(fs::exists(out / "run_0" / "runlog.jsonl"));
        for (const auto& artifact : manifests[0].artifacts)
            CHECK(fs::exists(out / "run_0" / artifact));
        const RunManifest back = read_manifest(out / "run_0" / "manifest.json");
        CHECK(back.config.algorithm == algo);
        CHECK(back.evaluation_count == manifests[0].evaluation_count);
    }
}

TEST_CASE("same seed twice: byte-identical exports modulo timestamps") {
    const ExperimentConfig cfg = smoke_config("dm-me");
    const fs::path out_a = fresh_dir("det_a");
    const fs::path out_b = fresh_dir("det_b");
    run_experiment(cfg, out_a);
    run_experiment(cfg, out_b);

    for (const std::string f :
         {"archive_morph.csv", "archive_nn.csv", "projector.json", "runlog.jsonl"}) {
        CHECK(read_file(out_a / "run_0" / f) == read_file(out_b / "run_0" / f));
    }
    CHECK(manifest_without_timestamps(out_a / "run_0" / "manifest.json") ==
          manifest_without_timestamps(out_b / "run_0" / "manifest.json"));

    // Genome files too.
    std::vector<fs::path> genomes_a;
    for (const auto& e : fs::directory_iterator(out_a / "run_0" / "genomes"))
        genomes_a.push_back(e.path());
    for (const auto& path : genomes_a) {
        const fs::path twin = out_b / "run_0" / "genomes" / path.filename();
        REQUIRE(fs::exists(twin));
        CHECK(read_file(path) == read_file(twin));
    }
}

TEST_CASE("distinct run seeds derive deterministically from the master seed") {
    ExperimentConfig cfg = smoke_config("dm-me");
    cfg.set("runs", "3");
    cfg.set("budget", "48");
    cfg.set("initial_solutions", "24");
    const fs::path out = fresh_dir("seeds");
    const auto manifests = run_experiment(cfg, out);
    REQUIRE(manifests.size() == 3);
    std::set<std::uint64_t> seeds;
    for (const auto& m : manifests) seeds.insert(m.seed);
    CHECK(seeds.size() == 3);
    // Re-running yields the same derived seeds.
    const fs::path out2 = fresh_dir("seeds2");
    const auto again = run_experiment(cfg, out2);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].seed == manifests[i].seed);
}

TEST_CASE("double-to-single projection: occupancy and re-simulated fitness") {
    const fs::path out = fresh_dir("projection");
    run_experiment(smoke_config("dm-me"), out);
    const ProjectionResult r = project_double_to_single(out / "run_0");
    const Archive morph = import_archive(out / "run_0" / "archive_morph.csv");
    CHECK(r.resimulated == static_cast<int>(morph.size()));
    CHECK(r.single.size() <= morph.size());
    CHECK(r.single.size() >= 1);
    // Deterministic simulator: re-simulated fitness equals the stored one,
    // so each 4-D occupant's fitness appears among the stored values.
    for (const auto& [fd, sol] : r.single.cells()) {
        const Solution* stored = morph.at({fd[0], fd[1]});
        REQUIRE(stored != nullptr);
        CHECK(sol.fitness == doctest::Approx(stored->fitness).epsilon(1e-12));
    }
}

TEST_CASE("heatmaps: masked empties and slice reduction") {
    const fs::path dir = fresh_dir("heatmaps");
    const TaskSpec task = TaskSpec::goal_reaching();

    Archive a(kMorphologyDims);
    CHECK_NOTHROW(export_archive(a, dir / "empty.csv", task));
    emit_heatmaps(dir / "empty.csv", dir / "hm", task.initial_distance());
    std::istringstream empty_matrix(read_file(dir / "hm" / "empty_heatmap.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(empty_matrix, line)) {
        ++rows;
        CHECK(line == ",,,,,,,,,"); // 10 empty columns
    }
    CHECK(rows == 9);

    Solution s;
    s.morph = MorphologyGenome{4, 2, {0, 0, 0}};
    s.fitness = 0.275; // fs = 17.5 cm
    a.add({2, 3}, s);
    export_archive(a, dir / "one.csv", task);
    emit_heatmaps(dir / "one.csv", dir / "hm", task.initial_distance());
    std::istringstream one(read_file(dir / "hm" / "one_heatmap.csv"));
    int filled = 0;
    int row = 0;
    while (std::getline(one, row == 0 ? line : line)) {
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (!cell.empty()) {
                ++filled;
                CHECK(row == 2);
                CHECK(col == 3);
                CHECK(std::stod(cell) == doctest::Approx(17.5));
            }
            ++col;
        }
        ++row;
    }
    CHECK(filled == 1);
}

TEST_CASE("report aggregates runs and rejects mixed tasks") {
    ExperimentConfig cfg = smoke_config("dm-me");
    cfg.set("runs", "2");
    const fs::path out = fresh_dir("report_runs");
    run_experiment(cfg, out);
    ExperimentConfig me_cfg = smoke_config("me");
    const fs::path out_me = fresh_dir("report_me");
    run_experiment(me_cfg, out_me);

    const fs::path report_dir = fresh_dir("report_out");
    report({out / "run_0", out / "run_1", out_me / "run_0"}, report_dir);
    CHECK(fs::exists(report_dir / "stats.csv"));
    CHECK(fs::exists(report_dir / "wilcoxon.csv"));
    CHECK(fs::exists(report_dir / "curve_dm-me.csv"));
    CHECK(fs::exists(report_dir / "curve_me.csv"));
    const std::string stats = read_file(report_dir / "stats.csv");
    CHECK(stats.find("dm-me,best_fs_cm") != std::string::npos);
    CHECK(stats.find("me,qd_morph_cm") != std::string::npos);

    // Mixed tasks must be refused.
    ExperimentConfig squeeze_cfg = smoke_config("dm-me");
    squeeze_cfg.set("task", "squeeze");
    const fs::path out_sq = fresh_dir("report_sq");
    run_experiment(squeeze_cfg, out_sq);
    CHECK_THROWS_AS(report({out / "run_0", out_sq / "run_0"}, fresh_dir("report_mixed")),
                    StructuralError);
}

TEST_CASE("replay dumps per-episode trajectories") {
    const fs::path out = fresh_dir("replay");
    run_experiment(smoke_config("dm-me"), out);
    const Archive morph = import_archive(out / "run_0" / "archive_morph.csv");
    REQUIRE(morph.size() >= 1);
    const FeatureDescriptor cell = morph.cells().begin()->first;
    const fs::path csv = out / "trajectory.csv";
    replay(out / "run_0", "archive_morph.csv", cell, csv);
    std::istringstream in(read_file(csv));
    std::string line;
    std::getline(in, line);
    CHECK(line == "target,seed,t,x,y");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4 * 2 * 4); // 4 targets x 2 seeds x 4 samples (4 s episodes)
}
