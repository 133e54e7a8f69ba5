#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tsmr/morphology.hpp"
#include "tsmr/neuro.hpp"
#include "tsmr/vec3.hpp"

namespace tsmr {

// Reduced-order mass-spring model parameters. Rods and inter-module links
// are stiff bidirectional springs, cables are tension-only. Ground and wall
// contact use penalty springs with regularized Coulomb friction.
struct SimConfig {
    double timestep = 1e-3;                // s
    double sim_duration = 40.0;            // s
    double trajectory_sample_period = 1.0; // s
    double control_period = 0.05;          // s (20 Hz controller)
    double gravity = 9.81;                 // m/s^2
    double node_mass = 0.05;               // kg
    double rod_stiffness_factor = 50.0;    // rods/links = factor * cable k
    double cable_damping = 2.0;            // N s/m, axial
    double structure_damping = 2.0;        // N s/m, axial on rods/links
    double node_drag = 0.3;                // N s/m, linear
    double ground_stiffness = 5000.0;      // N/m penalty
    double ground_damping = 20.0;          // N s/m
    double ground_friction = 0.6;          // Coulomb mu
    double friction_reg_velocity = 0.01;   // m/s, sliding regularization
    double stick_velocity = 0.01;          // m/s, below this nodes may anchor
    double wall_stiffness = 3000.0;        // N/m penalty
    double wall_damping = 20.0;            // N s/m
    double contraction_amplitude = 0.25;   // actuated cable rest-length swing
    double actuation_noise_sigma = 0.05;   // multiplicative on the amplitude
    double frequency_min = 0.2;            // Hz
    double frequency_max = 2.0;            // Hz
    // Pre-settling: damped relaxation until the structure is quiescent.
    double settle_drag = 2.0;            // N s/m node drag while settling
    double settle_min_duration = 1.0;    // s
    double settle_max_duration = 30.0;   // s, hard cap
    double settle_velocity_eps = 2e-5;   // m/s, max node speed = quiescent

    void validate() const; // duration/timestep and sampling divisibility
    int steps_total() const;
    int steps_per_control() const;
    int steps_per_sample() const;
    int samples_total() const;
};

enum class TaskKind { GoalReaching, Squeezing };

struct TargetSpec {
    double distance = 0.0;    // m
    double bearing_rad = 0.0; // signed, positive = left of the head's front
};

struct SqueezeGeometry {
    double wall_thickness = 0.1667; // m, corridor length
    double wall_height = 0.12;      // m
    double aperture_width = 0.08;   // m (72% of the module width)
    double obstacle_range = 0.10;   // m, head obstacle sensor
    double crossing_bonus = 0.04;   // m deducted once the head crosses
    double crossing_threshold = 0.04;
    double entrance_offset = 0.20;  // m from head start to the entrance plane
    double room_half_width = 0.60;  // m
    double room_back = 1.40;        // m behind the head start
};

struct TaskSpec {
    TaskKind kind = TaskKind::GoalReaching;
    std::vector<TargetSpec> targets;
    std::vector<std::uint64_t> noise_seeds; // one stream base per seed index
    SqueezeGeometry squeeze;
    double start_advance = 0.0; // shifts the whole robot forward at t=0

    int input_count() const { return kind == TaskKind::GoalReaching ? 2 : 5; }
    double initial_distance() const { return targets.empty() ? 0.0 : targets[0].distance; }

    static TaskSpec goal_reaching(); // 0.45 m at 90L, 45L, 45R, 90R
    static TaskSpec squeezing();     // 0.60 m at 5L, 5R
};

struct SensorReading {
    double distance_to_target = 0.0;  // m, planar
    double bearing_to_target = 0.0;   // rad in (-pi, pi]
    double distance_to_aperture = 0.0;
    double bearing_to_aperture = 0.0;
    double obstacle_flag = 0.0; // 1 if a wall lies within range ahead of the head
};

struct SimResult {
    double final_distance = 0.0;     // m, bonus already deducted
    double raw_final_distance = 0.0; // m, before any bonus
    bool bonus_applied = false;
    bool aborted = false;                 // numerical blow-up, worst-cased
    std::vector<double> trajectory_xy;    // samples_total * 2, head planar path
    double max_entrance_penetration = 0.0;
};

// Per-module actuation command; outputs of the controller are mapped onto
// these each control step.
struct ModuleCommand {
    double frequency = 0.0; // Hz
    double phase = 0.0;     // rad
};

// Controller policy: sensors -> raw outputs in (0,1), at least
// 2*num_modules values. Lets tests drive scripted open-loop gaits.
using ControlPolicy = std::function<std::vector<double>(const SensorReading&)>;

// Instrumentable stepper for a single (chain, target, noise stream) episode.
class Simulation {
public:
    Simulation(const ChainGeometry& chain, const SimConfig& config, const TaskSpec& task,
               int target_index, std::uint64_t noise_stream_seed);

    void set_policy(ControlPolicy policy) { policy_ = std::move(policy); }

    bool step();    // one physics step; false once the episode is over
    SimResult run(); // steps to completion, collecting the trajectory

    double time() const { return time_; }
    double kinetic_energy() const;
    double min_cable_force_seen() const { return min_cable_force_; }
    bool aborted() const { return aborted_; }
    Vec3 head_centroid() const;
    Vec3 head_front_direction() const;
    SensorReading sensors() const;
    double planar_target_distance() const;
    const std::vector<Vec3>& positions() const { return pos_; }
    const std::vector<Vec3>& velocities() const { return vel_; }
    double entrance_plane_x() const { return entrance_x_; }
    double max_entrance_penetration() const { return max_penetration_; }

private:
    struct Spring {
        int a, b;
        double rest;
        double stiffness;
        double damping;
        bool tension_only;
        bool actuated;
        int module; // for actuated cables
    };
    struct WallBox {
        double x0, x1, y0, y1, z0, z1;
    };

    void apply_controller();
    void accumulate_forces();
    void contact_forces(int node);
    void settle(double start_advance);

    const SimConfig cfg_;
    TaskKind kind_;
    Vec3 target_;
    Vec3 aperture_center_;
    SqueezeGeometry squeeze_;
    double entrance_x_ = 0.0;
    std::vector<WallBox> walls_;

    int num_modules_;
    int head_front_face_;
    std::array<int, 3> head_front_face_nodes_{};
    std::vector<Vec3> pos_, vel_, force_;
    std::vector<Spring> springs_;
    std::vector<ModuleCommand> commands_;
    ControlPolicy policy_;
    Rng noise_;
    double noise_eta_ = 0.0;

    double time_ = 0.0;
    int step_index_ = 0;
    int steps_total_ = 0;
    int steps_per_control_ = 0;
    double initial_distance_ = 0.0;
    double min_cable_force_ = 0.0;
    double max_penetration_ = 0.0;
    double drag_ = 0.0;
    bool aborted_ = false;
};

struct EvaluationResult {
    double fitness = 0.0;                     // m, minimized
    std::vector<double> mean_final_distances; // per target, averaged over seeds
    std::vector<double> sensory;              // concatenated mean trajectories
    std::vector<SimResult> per_sim;           // target-major, then seed
    bool any_abort = false;
    bool any_bonus = false;
};

// Mean + half the (max - mean) spread. Shared aggregation for the fitness
// over targets and for the multi-partner pairing fitness.
double aggregate_distance_fitness(std::span<const double> values);

double transform_fitness(double fitness_m, const TaskSpec& task);    // d_init - f, m
double transform_fitness_cm(double fitness_m, const TaskSpec& task); // paper convention

ControlPolicy policy_from_network(const FeedForwardNetwork& net);
// Constant-output open-loop policy (values already in (0,1)).
ControlPolicy constant_policy(std::vector<double> outputs);

SimResult simulate(const MorphologyGenome& morph, const ControllerGenome& ctrl,
                   const TaskSpec& task, int target_index, int seed_index,
                   const SimConfig& config);

SimResult simulate_with_policy(const MorphologyGenome& morph, const ControlPolicy& policy,
                               const TaskSpec& task, int target_index, int seed_index,
                               const SimConfig& config);

// Runs every (target, seed) episode, averages distances per target over the
// seeds and aggregates the fitness. The sensory vector is the concatenation
// of the per-target seed-averaged head trajectories.
EvaluationResult evaluate(const MorphologyGenome& morph, const ControllerGenome& ctrl,
                          const TaskSpec& task, const SimConfig& config);

} // namespace tsmr
