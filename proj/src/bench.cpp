#include "tsmr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tsmr/errors.hpp"
#include "tsmr/parallel.hpp"
#include "tsmr/stats.hpp"

namespace tsmr {

const char* kCodeVersion = "0.1.0";

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string iso_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string cell_stem(const FeatureDescriptor& fd) {
    std::string s = "c";
    for (int v : fd) s += "_" + std::to_string(v);
    return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StructuralError("cannot write " + path.string());
    out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StructuralError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

void export_archive(const Archive& archive, const std::filesystem::path& csv_path,
                    const TaskSpec& task) {
    const std::filesystem::path dir = csv_path.parent_path();
    const std::string stem = csv_path.stem().string();
    std::filesystem::create_directories(dir / "genomes");

    std::ostringstream out;
    out << "# dims=";
    for (std::size_t i = 0; i < archive.dims().size(); ++i)
        out << (i ? "," : "") << archive.dims()[i];
    out << "\n";
    for (std::size_t i = 0; i < archive.dims().size(); ++i) out << "cell" << i << ",";
    out << "fitness_m,fs_cm,morphology,controller\n";

    for (const auto& [fd, sol] : archive.cells()) {
        const std::string genome_rel =
            "genomes/" + stem + "_" + cell_stem(fd) + ".nn";
        write_text_file(dir / genome_rel, to_record(sol.ctrl));
        for (int v : fd) out << v << ",";
        out << format_double(sol.fitness) << ","
            << format_double(transform_fitness_cm(sol.fitness, task)) << ","
            << csv_quote(to_record(sol.morph)) << "," << genome_rel << "\n";
    }
    write_text_file(csv_path, out.str());
}

Archive import_archive(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw StructuralError("cannot read archive: " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# dims=", 0) != 0)
        throw StructuralError("archive csv missing dims header");
    std::vector<int> dims;
    {
        std::stringstream ss(line.substr(7));
        std::string tok;
        while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
    }
    Archive archive(dims);
    std::getline(in, line); // column header
    const std::filesystem::path dir = csv_path.parent_path();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = csv_split(line);
        if (fields.size() != dims.size() + 4)
            throw StructuralError("bad archive row: " + line);
        FeatureDescriptor fd;
        for (std::size_t i = 0; i < dims.size(); ++i) fd.push_back(std::stoi(fields[i]));
        Solution sol;
        sol.fitness = std::stod(fields[dims.size()]);
        sol.morph = morphology_from_record(fields[dims.size() + 2]);
        sol.ctrl = controller_from_record(read_text_file(dir / fields[dims.size() + 3]));
        archive.add(fd, std::move(sol));
    }
    return archive;
}

void save_projector(const FeatureProjector& projector, const std::filesystem::path& path) {
    json j;
    j["fd_dims"] = projector.fd_dims();
    j["schedule"] = projector.schedule();
    j["mean"] = projector.standardizer().mean;
    j["stddev"] = projector.standardizer().stddev;
    j["axis1"] = projector.pca().axis1;
    j["axis2"] = projector.pca().axis2;
    j["variance1"] = projector.pca().variance1;
    j["variance2"] = projector.pca().variance2;
    json bounds = json::array();
    for (const auto& b : projector.bounds())
        bounds.push_back({{"lo", b.lo}, {"hi", b.hi}, {"bins", b.bins}});
    j["bounds"] = bounds;
    write_text_file(path, j.dump(2) + "\n");
}

FeatureProjector load_projector(const std::filesystem::path& path,
                                const std::vector<int>& fd_dims,
                                const std::vector<int>& schedule) {
    const json j = json::parse(read_text_file(path));
    FeatureProjector p(j.value("fd_dims", fd_dims), j.value("schedule", schedule));
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    PcaModel m;
    m.axis1 = j.at("axis1").get<std::vector<double>>();
    m.axis2 = j.at("axis2").get<std::vector<double>>();
    m.variance1 = j.at("variance1").get<double>();
    m.variance2 = j.at("variance2").get<double>();
    std::array<ComponentBounds, 2> b{};
    for (int c = 0; c < 2; ++c) {
        const json& jb = j.at("bounds").at(c);
        b[static_cast<std::size_t>(c)] = {jb.at("lo").get<double>(), jb.at("hi").get<double>(),
                                          jb.at("bins").get<int>()};
    }
    p.restore(std::move(s), std::move(m), b);
    return p;
}

void write_run_log(const RunLog& log, const std::string& algorithm,
                   const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& g : log.generations) {
        json j;
        j["generation"] = g.generation;
        j["evaluations"] = g.evaluations;
        j["best_f"] = g.best_fitness;
        j["gen_best_f"] = g.gen_best_fitness;
        if (algorithm == "dm-me") {
            j["qd_morph_cm"] = g.qd_morph_cm;
            j["qd_nn_cm"] = g.qd_nn_cm;
            j["coverage_morph"] = g.coverage_morph;
            j["coverage_nn"] = g.coverage_nn;
            j["refit"] = g.refit;
            j["oob_recompute"] = g.oob_recompute;
        } else if (algorithm == "me") {
            j["qd_single_cm"] = g.qd_single_cm;
            j["qd_morph_cm"] = g.qd_morph_cm;
            j["coverage_single"] = g.coverage_single;
            j["coverage_morph"] = g.coverage_morph;
            j["refit"] = g.refit;
            j["oob_recompute"] = g.oob_recompute;
        } else {
            j["qd_morph_cm"] = g.qd_morph_cm;
            j["coverage_morph"] = g.coverage_morph;
            j["boundary"] = std::isfinite(g.boundary) ? g.boundary : -1.0;
            j["species"] = g.species_count;
            j["vie_population"] = g.vie_population;
            j["neat_population"] = g.neat_population;
            j["restart"] = g.restart;
        }
        if (g.partial) j["partial"] = true;
        out << j.dump() << "\n";
    }
    write_text_file(path, out.str());
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    json j;
    j["code_version"] = manifest.code_version;
    j["seed"] = manifest.seed;
    j["algorithm"] = manifest.config.algorithm;
    j["task"] = manifest.config.task;
    j["status"] = manifest.status;
    j["error"] = manifest.error;
    j["evaluation_count"] = manifest.evaluation_count;
    j["best_fitness_m"] = manifest.best_fitness_m;
    j["artifacts"] = manifest.artifacts;
    j["overrides"] = manifest.config.overrides;
    j["config_text"] = manifest.config.to_text();
    j["started_at"] = manifest.started_at;
    j["finished_at"] = manifest.finished_at;
    write_text_file(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
    const json j = json::parse(read_text_file(path));
    RunManifest m;
    m.code_version = j.value("code_version", "");
    m.seed = j.value("seed", 0ULL);
    m.status = j.value("status", "");
    m.error = j.value("error", "");
    m.evaluation_count = j.value("evaluation_count", 0L);
    m.best_fitness_m = j.value("best_fitness_m", 0.0);
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    // Rebuild the resolved config from its text form.
    std::istringstream text(j.at("config_text").get<std::string>());
    std::string line;
    while (std::getline(text, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        m.config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    m.config.overrides = j.value("overrides", std::vector<std::string>{});
    m.run_dir = path.parent_path();
    return m;
}

namespace {

void export_vie_populations(const VieNeatResult& result, const std::filesystem::path& dir,
                            std::vector<std::string>& artifacts) {
    std::ostringstream morph;
    morph << "morphology,fitness_m\n";
    for (const auto& ind : result.morph_population)
        morph << csv_quote(to_record(ind.genome)) << ","
              << (std::isfinite(ind.fitness) ? format_double(ind.fitness) : "") << "\n";
    write_text_file(dir / "population_morph.csv", morph.str());
    artifacts.push_back("population_morph.csv");

    std::ostringstream neat;
    for (const auto& g : result.neat_population) {
        neat << to_record(g);
        neat << "---\n";
    }
    write_text_file(dir / "population_neat.txt", neat.str());
    artifacts.push_back("population_neat.txt");
}

RunManifest execute_single_run(const ExperimentConfig& config, std::uint64_t seed,
                               const std::filesystem::path& run_dir) {
    RunManifest manifest;
    manifest.config = config;
    manifest.seed = seed;
    manifest.code_version = kCodeVersion;
    manifest.started_at = iso_now();
    manifest.run_dir = run_dir;
    std::filesystem::create_directories(run_dir);
    write_manifest(manifest, run_dir / "manifest.json");

    const TaskSpec task = config.make_task();
    const EvolverConfig evolver = config.make_evolver_config();

    try {
        if (config.algorithm == "dm-me") {
            DmMeResult r = dm_me_run(evolver, task, config.physics, seed);
            export_archive(r.morph_archive, run_dir / "archive_morph.csv", task);
            export_archive(r.nn_archive, run_dir / "archive_nn.csv", task);
            save_projector(r.projector, run_dir / "projector.json");
            write_run_log(r.log, config.algorithm, run_dir / "runlog.jsonl");
            manifest.artifacts = {"archive_morph.csv", "archive_nn.csv", "projector.json",
                                  "runlog.jsonl"};
            manifest.evaluation_count = r.log.evaluations;
            manifest.best_fitness_m = r.log.best_fitness;
        } else if (config.algorithm == "me") {
            MapElitesResult r = map_elites_run(evolver, task, config.physics, seed);
            export_archive(r.archive, run_dir / "archive_single.csv", task);
            export_archive(slice_morphology(r.archive), run_dir / "archive_morph_slice.csv",
                           task);
            save_projector(r.projector, run_dir / "projector.json");
            write_run_log(r.log, config.algorithm, run_dir / "runlog.jsonl");
            manifest.artifacts = {"archive_single.csv", "archive_morph_slice.csv",
                                  "projector.json", "runlog.jsonl"};
            manifest.evaluation_count = r.log.evaluations;
            manifest.best_fitness_m = r.log.best_fitness;
        } else {
            VieNeatResult r = vie_neat_run(evolver, task, config.physics, seed);
            export_archive(r.morph_projection, run_dir / "archive_morph.csv", task);
            write_run_log(r.log, config.algorithm, run_dir / "runlog.jsonl");
            manifest.artifacts = {"archive_morph.csv", "runlog.jsonl"};
            export_vie_populations(r, run_dir, manifest.artifacts);
            manifest.evaluation_count = r.log.evaluations;
            manifest.best_fitness_m = r.log.best_fitness;
        }
        manifest.status = "completed";
    } catch (const std::exception& e) {
        manifest.status = "failed";
        manifest.error = e.what();
    }
    manifest.finished_at = iso_now();
    write_manifest(manifest, run_dir / "manifest.json");
    return manifest;
}

} // namespace

std::vector<RunManifest> run_experiment(const ExperimentConfig& config,
                                        const std::filesystem::path& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "config.txt", config.to_text());

    std::vector<RunManifest> manifests;
    for (int i = 0; i < config.runs; ++i) {
        const std::uint64_t seed = mix_seed(config.master_seed, static_cast<std::uint64_t>(i));
        manifests.push_back(
            execute_single_run(config, seed, out_dir / ("run_" + std::to_string(i))));
    }
    return manifests;
}

ProjectionResult project_double_to_single(const std::filesystem::path& run_dir) {
    const RunManifest manifest = read_manifest(run_dir / "manifest.json");
    if (manifest.config.algorithm != "dm-me")
        throw StructuralError("double-to-single projection expects a dm-me run");
    const TaskSpec task = manifest.config.make_task();
    const Archive morph = import_archive(run_dir / "archive_morph.csv");
    const FeatureProjector projector =
        load_projector(run_dir / "projector.json", {kStiffnessLevels, kMaxModules},
                       manifest.config.pca_schedule);

    std::vector<const Solution*> occupants;
    for (const auto& [fd, sol] : morph.cells()) occupants.push_back(&sol);

    std::vector<Solution> fresh(occupants.size());
    parallel_for(occupants.size(), manifest.config.resolved_threads(), [&](std::size_t i) {
        const EvaluationResult r =
            evaluate(occupants[i]->morph, occupants[i]->ctrl, task, manifest.config.physics);
        fresh[i] = make_solution(occupants[i]->morph, occupants[i]->ctrl, r);
    });

    ProjectionResult result;
    result.resimulated = static_cast<int>(fresh.size());
    for (const auto& sol : fresh) {
        bool oob = false;
        FeatureDescriptor fd = morphology_fd(sol.morph);
        const FeatureDescriptor nn = projector.project_clamped(sol, &oob);
        fd.insert(fd.end(), nn.begin(), nn.end());
        if (oob) ++result.clamped;
        result.single.add(fd, sol);
    }
    return result;
}

void emit_heatmaps(const std::filesystem::path& archive_csv, const std::filesystem::path& out_dir,
                   double initial_distance_m) {
    const Archive archive = import_archive(archive_csv);
    std::filesystem::create_directories(out_dir);
    const std::string stem = archive_csv.stem().string();

    const Archive* grid = &archive;
    Archive slice({1});
    if (archive.dims().size() == 4) {
        slice = slice_morphology(archive);
        grid = &slice;

        std::ostringstream cells;
        cells << "# dims=9,10,9,10\n";
        for (std::size_t i = 0; i < archive.dims().size(); ++i) cells << "cell" << i << ",";
        cells << "fs_cm\n";
        for (const auto& [fd, sol] : archive.cells()) {
            for (int v : fd) cells << v << ",";
            cells << format_double((initial_distance_m - sol.fitness) * 100.0) << "\n";
        }
        write_text_file(out_dir / (stem + "_cells.csv"), cells.str());
    } else if (archive.dims().size() != 2) {
        throw StructuralError("heatmaps support 2-D and 4-D archives");
    }

    std::ostringstream matrix;
    const int rows = grid->dims()[0], cols = grid->dims()[1];
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c) matrix << ",";
            const Solution* sol = grid->at({r, c});
            if (sol) matrix << format_double((initial_distance_m - sol->fitness) * 100.0);
        }
        matrix << "\n";
    }
    write_text_file(out_dir / (stem + "_heatmap.csv"), matrix.str());
}

namespace {

struct RunSummary {
    RunManifest manifest;
    double best_fs_cm = 0.0;
    double qd_morph_cm = 0.0;
    std::vector<std::pair<long, double>> curve; // (evaluations, best fs so far)
};

double archive_qd_cm(const Archive& a, double d_init) {
    double s = 0.0;
    for (const auto& [fd, sol] : a.cells()) s += (d_init - sol.fitness) * 100.0;
    return s;
}

} // namespace

void report(const std::vector<std::filesystem::path>& run_dirs,
            const std::filesystem::path& out_dir) {
    if (run_dirs.empty()) throw StructuralError("report: no run directories");
    std::filesystem::create_directories(out_dir);

    std::map<std::string, std::vector<RunSummary>> by_algo;
    std::string common_task;
    for (const auto& dir : run_dirs) {
        RunSummary run;
        run.manifest = read_manifest(dir / "manifest.json");
        if (run.manifest.status != "completed") continue;
        if (common_task.empty())
            common_task = run.manifest.config.task;
        else if (common_task != run.manifest.config.task)
            throw StructuralError("report: run directories mix tasks");

        const TaskSpec task = run.manifest.config.make_task();
        const double d_init = task.initial_distance();
        run.best_fs_cm = (d_init - run.manifest.best_fitness_m) * 100.0;

        const std::string& algo = run.manifest.config.algorithm;
        const std::filesystem::path morph_csv =
            algo == "me" ? dir / "archive_morph_slice.csv" : dir / "archive_morph.csv";
        run.qd_morph_cm = archive_qd_cm(import_archive(morph_csv), d_init);

        // Fitness curve from the per-generation log.
        std::ifstream log(dir / "runlog.jsonl");
        std::string line;
        while (std::getline(log, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            run.curve.push_back({j.at("evaluations").get<long>(),
                                 (d_init - j.at("best_f").get<double>()) * 100.0});
        }
        by_algo[algo].push_back(std::move(run));
    }
    if (by_algo.empty()) throw StructuralError("report: no completed runs");

    // Descriptive statistics.
    std::ostringstream stats;
    stats << "algorithm,metric,count,mean,std,min,max,median\n";
    std::map<std::string, std::vector<double>> fs_samples, qd_samples;
    for (const auto& [algo, runs] : by_algo) {
        for (const auto& r : runs) {
            fs_samples[algo].push_back(r.best_fs_cm);
            qd_samples[algo].push_back(r.qd_morph_cm);
        }
        for (const auto& [metric, samples] :
             {std::pair{std::string("best_fs_cm"), fs_samples[algo]},
              std::pair{std::string("qd_morph_cm"), qd_samples[algo]}}) {
            const DescriptiveStats d = describe(samples);
            stats << algo << "," << metric << "," << d.count << "," << format_double(d.mean)
                  << "," << format_double(d.stddev) << "," << format_double(d.min) << ","
                  << format_double(d.max) << "," << format_double(d.median) << "\n";
        }
    }
    write_text_file(out_dir / "stats.csv", stats.str());

    // Pairwise Wilcoxon rank-sum tests.
    std::ostringstream wx;
    wx << "metric,algorithm_a,algorithm_b,p_value\n";
    std::vector<std::string> algos;
    for (const auto& [algo, runs] : by_algo) algos.push_back(algo);
    for (std::size_t a = 0; a < algos.size(); ++a)
        for (std::size_t b = a + 1; b < algos.size(); ++b) {
            wx << "best_fs_cm," << algos[a] << "," << algos[b] << ","
               << format_double(wilcoxon_ranksum_p(fs_samples[algos[a]], fs_samples[algos[b]]))
               << "\n";
            wx << "qd_morph_cm," << algos[a] << "," << algos[b] << ","
               << format_double(wilcoxon_ranksum_p(qd_samples[algos[a]], qd_samples[algos[b]]))
               << "\n";
        }
    write_text_file(out_dir / "wilcoxon.csv", wx.str());

    // Best-fitness curves, mean +- std across runs per generation index.
    for (const auto& [algo, runs] : by_algo) {
        std::size_t min_len = runs[0].curve.size();
        for (const auto& r : runs) min_len = std::min(min_len, r.curve.size());
        std::ostringstream curve;
        curve << "generation,evaluations,mean_best_fs_cm,std_best_fs_cm\n";
        for (std::size_t g = 0; g < min_len; ++g) {
            std::vector<double> fs;
            for (const auto& r : runs) fs.push_back(r.curve[g].second);
            const DescriptiveStats d = describe(fs);
            curve << g << "," << runs[0].curve[g].first << "," << format_double(d.mean) << ","
                  << format_double(d.stddev) << "\n";
        }
        write_text_file(out_dir / ("curve_" + algo + ".csv"), curve.str());
    }

    // Per-run heatmaps.
    for (const auto& [algo, runs] : by_algo) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& dir = runs[i].manifest.run_dir;
            const TaskSpec task = runs[i].manifest.config.make_task();
            const std::filesystem::path hm =
                out_dir / "heatmaps" / (algo + "_run" + std::to_string(i));
            for (const auto& artifact : runs[i].manifest.artifacts)
                if (artifact.rfind("archive_", 0) == 0 && artifact.ends_with(".csv"))
                    emit_heatmaps(dir / artifact, hm, task.initial_distance());
        }
    }
}

void replay(const std::filesystem::path& run_dir, const std::string& archive_name,
            const FeatureDescriptor& cell, const std::filesystem::path& out_csv) {
    const RunManifest manifest = read_manifest(run_dir / "manifest.json");
    const Archive archive = import_archive(run_dir / archive_name);
    const Solution* sol = archive.at(cell);
    if (!sol) throw StructuralError("replay: cell is empty");
    const TaskSpec task = manifest.config.make_task();
    const EvaluationResult r = evaluate(sol->morph, sol->ctrl, task, manifest.config.physics);

    std::ostringstream out;
    out << "target,seed,t,x,y\n";
    const std::size_t n_seeds = task.noise_seeds.size();
    const int samples = manifest.config.physics.samples_total();
    const double period = manifest.config.physics.trajectory_sample_period;
    for (std::size_t i = 0; i < r.per_sim.size(); ++i) {
        const std::size_t target = i / n_seeds, seed = i % n_seeds;
        for (int k = 0; k < samples; ++k)
            out << target << "," << seed << "," << format_double((k + 1) * period) << ","
                << format_double(r.per_sim[i].trajectory_xy[static_cast<std::size_t>(2 * k)])
                << ","
                << format_double(r.per_sim[i].trajectory_xy[static_cast<std::size_t>(2 * k + 1)])
                << "\n";
    }
    write_text_file(out_csv, out.str());
}

} // namespace tsmr
