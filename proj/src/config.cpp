#include "tsmr/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "tsmr/errors.hpp"

namespace tsmr {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_schedule(const std::vector<int>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(s[i]);
    }
    return out;
}

std::vector<int> parse_schedule(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoi(tok));
    return out;
}

// Key table as accessor pairs so reading and writing stay in sync.
struct KeyEntry {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::map<std::string, KeyEntry> key_table() {
    std::map<std::string, KeyEntry> t;
    auto str_key = [&](const std::string& k, std::string ExperimentConfig::* f) {
        t[k] = {[f](const ExperimentConfig& c) { return c.*f; },
                [f](ExperimentConfig& c, const std::string& v) { c.*f = v; }};
    };
    auto int_key = [&](const std::string& k, auto getter, auto setter) {
        t[k] = {[getter](const ExperimentConfig& c) { return std::to_string(getter(c)); },
                [setter](ExperimentConfig& c, const std::string& v) { setter(c, std::stol(v)); }};
    };
    auto dbl_key = [&](const std::string& k, auto getter, auto setter) {
        t[k] = {[getter](const ExperimentConfig& c) { return format_double(getter(c)); },
                [setter](ExperimentConfig& c, const std::string& v) { setter(c, std::stod(v)); }};
    };
#define TSMR_INT(key, field) \
    int_key(key, [](const ExperimentConfig& c) { return c.field; }, \
            [](ExperimentConfig& c, long v) { c.field = static_cast<decltype(c.field)>(v); })
#define TSMR_DBL(key, field) \
    dbl_key(key, [](const ExperimentConfig& c) { return c.field; }, \
            [](ExperimentConfig& c, double v) { c.field = v; })

    str_key("task", &ExperimentConfig::task);
    str_key("algorithm", &ExperimentConfig::algorithm);
    TSMR_INT("runs", runs);
    t["master_seed"] = {
        [](const ExperimentConfig& c) { return std::to_string(c.master_seed); },
        [](ExperimentConfig& c, const std::string& v) { c.master_seed = std::stoull(v); }};
    TSMR_INT("threads", threads);
    TSMR_INT("budget", budget);
    TSMR_INT("initial_solutions", initial_solutions);
    TSMR_INT("batch_size", batch_size);
    t["pca_schedule"] = {
        [](const ExperimentConfig& c) { return format_schedule(c.pca_schedule); },
        [](ExperimentConfig& c, const std::string& v) { c.pca_schedule = parse_schedule(v); }};
    TSMR_INT("vie.population", vie_population);
    TSMR_INT("vie.mutants", vie_mutants);
    TSMR_INT("neat.population_size", neat.population_size);
    TSMR_INT("neat.individual_elitism", neat.individual_elitism);
    TSMR_INT("neat.species_elitism", neat.species_elitism);
    TSMR_DBL("neat.compatibility_threshold", neat.compatibility_threshold);
    TSMR_INT("neat.stagnation_window", neat.stagnation_window);
    TSMR_DBL("neat.crossover_prob", neat.crossover_prob);
    TSMR_DBL("neat.survival_fraction", neat.survival_fraction);
    TSMR_DBL("neat.weight_perturb_prob", neat.mutation.weight_perturb_prob);
    TSMR_DBL("neat.weight_sigma", neat.mutation.weight_sigma);
    TSMR_DBL("neat.weight_redraw_prob", neat.mutation.weight_redraw_prob);
    TSMR_DBL("neat.bias_perturb_prob", neat.mutation.bias_perturb_prob);
    TSMR_DBL("neat.bias_sigma", neat.mutation.bias_sigma);
    TSMR_DBL("neat.bias_redraw_prob", neat.mutation.bias_redraw_prob);
    TSMR_DBL("neat.add_connection_prob", neat.mutation.add_connection_prob);
    TSMR_DBL("neat.add_node_prob", neat.mutation.add_node_prob);
    TSMR_DBL("neat.toggle_enable_prob", neat.mutation.toggle_enable_prob);
    TSMR_DBL("physics.timestep", physics.timestep);
    TSMR_DBL("physics.sim_duration", physics.sim_duration);
    TSMR_DBL("physics.trajectory_sample_period", physics.trajectory_sample_period);
    TSMR_DBL("physics.control_period", physics.control_period);
    TSMR_DBL("physics.gravity", physics.gravity);
    TSMR_DBL("physics.node_mass", physics.node_mass);
    TSMR_DBL("physics.rod_stiffness_factor", physics.rod_stiffness_factor);
    TSMR_DBL("physics.cable_damping", physics.cable_damping);
    TSMR_DBL("physics.structure_damping", physics.structure_damping);
    TSMR_DBL("physics.node_drag", physics.node_drag);
    TSMR_DBL("physics.ground_stiffness", physics.ground_stiffness);
    TSMR_DBL("physics.ground_damping", physics.ground_damping);
    TSMR_DBL("physics.ground_friction", physics.ground_friction);
    TSMR_DBL("physics.friction_reg_velocity", physics.friction_reg_velocity);
    TSMR_DBL("physics.stick_velocity", physics.stick_velocity);
    TSMR_DBL("physics.settle_min_duration", physics.settle_min_duration);
    TSMR_DBL("physics.settle_max_duration", physics.settle_max_duration);
    TSMR_DBL("physics.settle_velocity_eps", physics.settle_velocity_eps);
    TSMR_DBL("physics.settle_drag", physics.settle_drag);
    TSMR_DBL("physics.wall_stiffness", physics.wall_stiffness);
    TSMR_DBL("physics.wall_damping", physics.wall_damping);
    TSMR_DBL("physics.contraction_amplitude", physics.contraction_amplitude);
    TSMR_DBL("physics.actuation_noise_sigma", physics.actuation_noise_sigma);
    TSMR_DBL("physics.frequency_min", physics.frequency_min);
    TSMR_DBL("physics.frequency_max", physics.frequency_max);
    TSMR_DBL("squeeze.wall_thickness", squeeze.wall_thickness);
    TSMR_DBL("squeeze.wall_height", squeeze.wall_height);
    TSMR_DBL("squeeze.aperture_width", squeeze.aperture_width);
    TSMR_DBL("squeeze.obstacle_range", squeeze.obstacle_range);
    TSMR_DBL("squeeze.crossing_bonus", squeeze.crossing_bonus);
    TSMR_DBL("squeeze.crossing_threshold", squeeze.crossing_threshold);
    TSMR_DBL("squeeze.entrance_offset", squeeze.entrance_offset);
    TSMR_DBL("squeeze.room_half_width", squeeze.room_half_width);
    TSMR_DBL("squeeze.room_back", squeeze.room_back);
#undef TSMR_INT
#undef TSMR_DBL
    return t;
}

const std::map<std::string, KeyEntry>& keys() {
    static const std::map<std::string, KeyEntry> t = key_table();
    return t;
}

} // namespace

ExperimentConfig ExperimentConfig::preset_paper() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::preset_desk() {
    ExperimentConfig c;
    c.runs = 3;
    c.budget = 2400;
    c.initial_solutions = 240;
    c.batch_size = 24;
    c.pca_schedule = {0, 10, 30, 70};
    return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    auto it = keys().find(key);
    if (it == keys().end()) throw StructuralError("unknown config key: " + key);
    try {
        it->second.set(*this, value);
    } catch (const StructuralError&) {
        throw;
    } catch (const std::exception&) {
        throw StructuralError("bad value for " + key + ": " + value);
    }
    overrides.push_back(key + "=" + value);
}

void ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw StructuralError(path + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& [key, entry] : keys())
        out += key + " = " + entry.get(*this) + "\n";
    return out;
}

TaskSpec ExperimentConfig::make_task() const {
    TaskSpec t = task == "squeeze" ? TaskSpec::squeezing() : TaskSpec::goal_reaching();
    t.squeeze = squeeze;
    return t;
}

EvolverConfig ExperimentConfig::make_evolver_config() const {
    EvolverConfig e;
    e.budget.total = budget;
    e.budget.initial_solutions = initial_solutions;
    e.budget.batch_size = batch_size;
    e.pca_schedule = pca_schedule;
    e.vie_population = vie_population;
    e.vie_mutants = vie_mutants;
    e.neat = neat;
    e.threads = resolved_threads();
    return e;
}

int ExperimentConfig::resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void ExperimentConfig::validate() const {
    if (task != "goal" && task != "squeeze")
        throw StructuralError("task must be goal or squeeze");
    if (algorithm != "vie-neat" && algorithm != "me" && algorithm != "dm-me")
        throw StructuralError("algorithm must be vie-neat, me or dm-me");
    if (runs < 1) throw StructuralError("runs must be >= 1");
    if (budget < 1) throw StructuralError("budget must be >= 1");
    if (algorithm != "vie-neat") {
        if (initial_solutions < 3)
            throw StructuralError("initial_solutions must be >= 3 (projector fit)");
        if (batch_size < 1) throw StructuralError("batch_size must be >= 1");
        if (budget < initial_solutions)
            throw StructuralError("budget smaller than the initial batch");
    }
    physics.validate();
}

} // namespace tsmr
