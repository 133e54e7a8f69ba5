#include "tsmr/physics.hpp"

#include <algorithm>
#include <cmath>

#include "tsmr/errors.hpp"

namespace tsmr {

namespace {

long checked_ratio(double whole, double part, const char* what) {
    const double r = whole / part;
    const long n = std::lround(r);
    if (n <= 0 || std::fabs(r - static_cast<double>(n)) > 1e-9)
        throw StructuralError(std::string("SimConfig: ") + what + " must divide evenly");
    return n;
}

} // namespace

void SimConfig::validate() const {
    checked_ratio(sim_duration, timestep, "sim_duration / timestep");
    checked_ratio(trajectory_sample_period, timestep, "trajectory_sample_period / timestep");
    checked_ratio(control_period, timestep, "control_period / timestep");
    checked_ratio(sim_duration, trajectory_sample_period, "sim_duration / sample period");
}

int SimConfig::steps_total() const {
    return static_cast<int>(checked_ratio(sim_duration, timestep, "duration"));
}
int SimConfig::steps_per_control() const {
    return static_cast<int>(checked_ratio(control_period, timestep, "control"));
}
int SimConfig::steps_per_sample() const {
    return static_cast<int>(checked_ratio(trajectory_sample_period, timestep, "sample"));
}
int SimConfig::samples_total() const {
    return static_cast<int>(checked_ratio(sim_duration, trajectory_sample_period, "samples"));
}

TaskSpec TaskSpec::goal_reaching() {
    TaskSpec t;
    t.kind = TaskKind::GoalReaching;
    const double d = 0.45;
    const double deg = M_PI / 180.0;
    t.targets = {{d, 90.0 * deg}, {d, 45.0 * deg}, {d, -45.0 * deg}, {d, -90.0 * deg}};
    t.noise_seeds = {1, 2};
    return t;
}

TaskSpec TaskSpec::squeezing() {
    TaskSpec t;
    t.kind = TaskKind::Squeezing;
    const double d = 0.60;
    const double deg = M_PI / 180.0;
    t.targets = {{d, 5.0 * deg}, {d, -5.0 * deg}};
    t.noise_seeds = {1, 2};
    return t;
}

double aggregate_distance_fitness(std::span<const double> values) {
    if (values.empty()) throw StructuralError("aggregate over empty value set");
    double sum = 0.0, max = values[0];
    for (double v : values) {
        sum += v;
        max = std::max(max, v);
    }
    const double mean = sum / static_cast<double>(values.size());
    return mean + 0.5 * (max - mean);
}

double transform_fitness(double fitness_m, const TaskSpec& task) {
    return task.initial_distance() - fitness_m;
}

double transform_fitness_cm(double fitness_m, const TaskSpec& task) {
    return transform_fitness(fitness_m, task) * 100.0;
}

ControlPolicy policy_from_network(const FeedForwardNetwork& net) {
    const int in_count = net.input_count();
    if (in_count != 2 && in_count != 5)
        throw StructuralError("controller must take 2 or 5 inputs");
    return [net, in_count](const SensorReading& s) {
        if (in_count == 5) {
            const double in[5] = {s.distance_to_target, s.bearing_to_target,
                                  s.distance_to_aperture, s.bearing_to_aperture,
                                  s.obstacle_flag};
            return net.eval(in);
        }
        const double in[2] = {s.distance_to_target, s.bearing_to_target};
        return net.eval(in);
    };
}

ControlPolicy constant_policy(std::vector<double> outputs) {
    return [outputs](const SensorReading&) { return outputs; };
}

Simulation::Simulation(const ChainGeometry& chain, const SimConfig& config, const TaskSpec& task,
                       int target_index, std::uint64_t noise_stream_seed)
    : cfg_(config), kind_(task.kind), noise_(noise_stream_seed) {
    cfg_.validate();
    if (target_index < 0 || target_index >= static_cast<int>(task.targets.size()))
        throw StructuralError("target index out of range");

    num_modules_ = static_cast<int>(chain.modules.size());
    head_front_face_ = chain.head_front_face;
    head_front_face_nodes_ = {chain.modules[0].faces[static_cast<std::size_t>(head_front_face_)][0],
                              chain.modules[0].faces[static_cast<std::size_t>(head_front_face_)][1],
                              chain.modules[0].faces[static_cast<std::size_t>(head_front_face_)][2]};

    const TargetSpec& target = task.targets[static_cast<std::size_t>(target_index)];
    target_ = {target.distance * std::cos(target.bearing_rad),
               target.distance * std::sin(target.bearing_rad), 0.0};

    pos_.reserve(static_cast<std::size_t>(num_modules_) * 12);
    for (const auto& m : chain.modules)
        for (const auto& p : m.node_positions)
            pos_.push_back({p.x + task.start_advance, p.y, p.z});
    vel_.assign(pos_.size(), Vec3{});
    force_.assign(pos_.size(), Vec3{});

    const double cable_k = chain.cable_stiffness;
    const double rigid_k = cable_k * cfg_.rod_stiffness_factor;
    for (int mi = 0; mi < num_modules_; ++mi) {
        const auto& m = chain.modules[static_cast<std::size_t>(mi)];
        const int base = mi * 12;
        for (const auto& rod : m.rods) {
            const Vec3 d = m.node_positions[static_cast<std::size_t>(rod[0])] -
                           m.node_positions[static_cast<std::size_t>(rod[1])];
            springs_.push_back({base + rod[0], base + rod[1], d.norm(), rigid_k,
                                cfg_.structure_damping, false, false, mi});
        }
        for (const auto& cab : m.cables)
            springs_.push_back({base + cab.a, base + cab.b, cab.rest_length, cable_k,
                                cfg_.cable_damping, true, cab.actuated, mi});
    }
    for (const auto& link : chain.links)
        springs_.push_back({link.node_a, link.node_b, link.rest_length, rigid_k,
                            cfg_.structure_damping, false, false, -1});

    commands_.assign(static_cast<std::size_t>(num_modules_), ModuleCommand{});

    if (kind_ == TaskKind::Squeezing) {
        squeeze_ = task.squeeze;
        const SqueezeGeometry& sq = squeeze_;
        entrance_x_ = sq.entrance_offset;
        aperture_center_ = {entrance_x_, 0.0, 0.0};
        const double x1 = entrance_x_ + sq.wall_thickness;
        const double hw = sq.room_half_width;
        const double side = 0.05; // side/back wall thickness
        walls_ = {
            {entrance_x_, x1, sq.aperture_width / 2.0, hw, 0.0, sq.wall_height},
            {entrance_x_, x1, -hw, -sq.aperture_width / 2.0, 0.0, sq.wall_height},
            {-sq.room_back, x1, hw, hw + side, 0.0, sq.wall_height},
            {-sq.room_back, x1, -hw - side, -hw, 0.0, sq.wall_height},
            {-sq.room_back - side, -sq.room_back, -hw - side, hw + side, 0.0, sq.wall_height},
        };
    }

    drag_ = cfg_.node_drag;
    steps_total_ = cfg_.steps_total();
    steps_per_control_ = cfg_.steps_per_control();
    settle(task.start_advance);
    // The settled head is re-centered exactly on (start_advance, 0), so the
    // nominal distance is exact and stays finite even if settling blew up.
    const double idx = target_.x - task.start_advance;
    initial_distance_ = std::sqrt(idx * idx + target_.y * target_.y);
    min_cable_force_ = 0.0;
    max_penetration_ = 0.0;
}

// The built geometry is not in static equilibrium (pre-stretched cables,
// gravity); released as-is the chain slumps and the head wanders a couple of
// centimeters. Episodes therefore start from a settled pose: damped
// relaxation until every node is quiescent (the stick friction lets the
// structure truly park), then velocities cleared and the head re-centered on
// its nominal start position.
void Simulation::settle(double start_advance) {
    const int min_steps = static_cast<int>(std::lround(cfg_.settle_min_duration / cfg_.timestep));
    const int max_steps = static_cast<int>(std::lround(cfg_.settle_max_duration / cfg_.timestep));
    const double eps2 = cfg_.settle_velocity_eps * cfg_.settle_velocity_eps;
    drag_ = cfg_.settle_drag;
    for (int i = 0; i < max_steps; ++i) {
        accumulate_forces();
        const double dt = cfg_.timestep;
        const double inv_m = 1.0 / cfg_.node_mass;
        for (std::size_t k = 0; k < pos_.size(); ++k) {
            vel_[k] += force_[k] * (dt * inv_m);
            pos_[k] += vel_[k] * dt;
        }
        if (i >= min_steps && i % 100 == 0) {
            double top = 0.0;
            for (const auto& v : vel_) top = std::max(top, v.norm2());
            if (top < eps2) break;
        }
    }
    drag_ = cfg_.node_drag;
    for (auto& v : vel_) v = {};
    const Vec3 head = head_centroid();
    const Vec3 shift{start_advance - head.x, -head.y, 0.0};
    for (auto& p : pos_) p += shift;
    for (const auto& p : pos_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            aborted_ = true;
            break;
        }
}

Vec3 Simulation::head_centroid() const {
    Vec3 c{};
    for (int i = 0; i < 12; ++i) c += pos_[static_cast<std::size_t>(i)];
    return c / 12.0;
}

Vec3 Simulation::head_front_direction() const {
    Vec3 f{};
    for (int i : head_front_face_nodes_) f += pos_[static_cast<std::size_t>(i)];
    f = f / 3.0 - head_centroid();
    return f.normalized();
}

double Simulation::planar_target_distance() const {
    const Vec3 h = head_centroid();
    const double dx = target_.x - h.x, dy = target_.y - h.y;
    return std::sqrt(dx * dx + dy * dy);
}

namespace {

double planar_bearing(const Vec3& front, const Vec3& to) {
    const double cross = front.x * to.y - front.y * to.x;
    const double dot = front.x * to.x + front.y * to.y;
    return std::atan2(cross, dot); // positive = left
}

// Distance along a planar ray to an axis-aligned rectangle, or +inf.
double ray_rect_distance(double ox, double oy, double dx, double dy, double x0, double x1,
                         double y0, double y1) {
    double tmin = 0.0, tmax = 1e30;
    for (int axis = 0; axis < 2; ++axis) {
        const double o = axis == 0 ? ox : oy;
        const double d = axis == 0 ? dx : dy;
        const double lo = axis == 0 ? x0 : y0;
        const double hi = axis == 0 ? x1 : y1;
        if (std::fabs(d) < 1e-12) {
            if (o < lo || o > hi) return 1e30;
            continue;
        }
        double t0 = (lo - o) / d, t1 = (hi - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return 1e30;
    }
    return tmin;
}

} // namespace

SensorReading Simulation::sensors() const {
    SensorReading s;
    const Vec3 head = head_centroid();
    const Vec3 front = head_front_direction();
    const Vec3 to_target = target_ - head;
    s.distance_to_target = std::sqrt(to_target.x * to_target.x + to_target.y * to_target.y);
    s.bearing_to_target = planar_bearing(front, to_target);
    if (kind_ == TaskKind::Squeezing) {
        const Vec3 to_ap = aperture_center_ - head;
        s.distance_to_aperture = std::sqrt(to_ap.x * to_ap.x + to_ap.y * to_ap.y);
        s.bearing_to_aperture = planar_bearing(front, to_ap);
        // Obstacle probe: planar ray from the front-face centroid.
        Vec3 origin{};
        for (int i : head_front_face_nodes_) origin += pos_[static_cast<std::size_t>(i)];
        origin = origin / 3.0;
        const double fn = std::sqrt(front.x * front.x + front.y * front.y);
        if (fn > 1e-9) {
            const double dx = front.x / fn, dy = front.y / fn;
            double nearest = 1e30;
            for (const auto& w : walls_)
                nearest = std::min(nearest,
                                   ray_rect_distance(origin.x, origin.y, dx, dy, w.x0, w.x1,
                                                     w.y0, w.y1));
            s.obstacle_flag = nearest <= squeeze_.obstacle_range ? 1.0 : 0.0;
        }
    }
    return s;
}

void Simulation::apply_controller() {
    noise_eta_ = noise_.normal(0.0, cfg_.actuation_noise_sigma);
    if (!policy_) return;
    const std::vector<double> out = policy_(sensors());
    if (static_cast<int>(out.size()) < 2 * num_modules_)
        throw StructuralError("controller produced too few outputs");
    for (int k = 0; k < num_modules_; ++k) {
        const double fo = std::clamp(out[static_cast<std::size_t>(2 * k)], 0.0, 1.0);
        const double po = std::clamp(out[static_cast<std::size_t>(2 * k + 1)], 0.0, 1.0);
        commands_[static_cast<std::size_t>(k)].frequency =
            cfg_.frequency_min + fo * (cfg_.frequency_max - cfg_.frequency_min);
        commands_[static_cast<std::size_t>(k)].phase = po * 2.0 * M_PI;
    }
}

void Simulation::contact_forces(int node) {
    const Vec3& p = pos_[static_cast<std::size_t>(node)];
    const Vec3& v = vel_[static_cast<std::size_t>(node)];
    Vec3& f = force_[static_cast<std::size_t>(node)];

    // Ground plane z = 0. Stick/slip friction: a slow node whose tangential
    // load fits inside the Coulomb cone is anchored (applied force cancelled,
    // velocity killed within the step); otherwise it slides against kinetic
    // friction. The m/dt bound keeps the explicit step from reversing the
    // slip direction, which would pump a jitter limit cycle.
    if (p.z < 0.0) {
        const double fn = std::max(0.0, -cfg_.ground_stiffness * p.z - cfg_.ground_damping * v.z);
        f.z += fn;
        const double vt = std::sqrt(v.x * v.x + v.y * v.y);
        const double ft = std::sqrt(f.x * f.x + f.y * f.y); // applied, pre-friction
        const double limit = cfg_.ground_friction * fn;
        if (vt < cfg_.stick_velocity && ft <= limit) {
            const double brake = cfg_.node_mass / cfg_.timestep;
            f.x -= f.x + v.x * brake;
            f.y -= f.y + v.y * brake;
        } else if (vt > 1e-12) {
            const double scale = std::min(limit / (vt + cfg_.friction_reg_velocity),
                                          cfg_.node_mass / cfg_.timestep);
            f.x -= v.x * scale;
            f.y -= v.y * scale;
        }
    }

    // Wall boxes: push the node out along the face of least penetration.
    for (const auto& w : walls_) {
        if (p.x <= w.x0 || p.x >= w.x1 || p.y <= w.y0 || p.y >= w.y1 || p.z <= w.z0 ||
            p.z >= w.z1)
            continue;
        const double dxs[6] = {p.x - w.x0, w.x1 - p.x, p.y - w.y0, w.y1 - p.y,
                               p.z - w.z0, w.z1 - p.z};
        int best = 0;
        for (int i = 1; i < 6; ++i)
            if (dxs[i] < dxs[best]) best = i;
        static const Vec3 normals[6] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                        {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
        const Vec3 n = normals[best];
        const double depth = dxs[best];
        const double fn =
            std::max(0.0, cfg_.wall_stiffness * depth - cfg_.wall_damping * v.dot(n));
        f += n * fn;
        const Vec3 f_t = f - n * f.dot(n);
        const Vec3 v_t = v - n * v.dot(n);
        const double vt = v_t.norm();
        const double limit = cfg_.ground_friction * fn;
        if (vt < cfg_.stick_velocity && f_t.norm() <= limit) {
            f -= f_t + v_t * (cfg_.node_mass / cfg_.timestep);
        } else if (vt > 1e-12) {
            f -= v_t * std::min(limit / (vt + cfg_.friction_reg_velocity),
                                cfg_.node_mass / cfg_.timestep);
        }
    }
}

void Simulation::accumulate_forces() {
    const std::size_t n = pos_.size();
    for (std::size_t i = 0; i < n; ++i)
        force_[i] = {0.0, 0.0, -cfg_.node_mass * cfg_.gravity};

    // Per-module actuation factor for this step.
    double factors[kMaxModules];
    const double amp = cfg_.contraction_amplitude * (1.0 + noise_eta_);
    for (int k = 0; k < num_modules_; ++k) {
        const ModuleCommand& c = commands_[static_cast<std::size_t>(k)];
        const double s = std::max(0.0, std::sin(2.0 * M_PI * c.frequency * time_ + c.phase));
        factors[k] = 1.0 - amp * s;
    }

    for (const auto& sp : springs_) {
        const Vec3 d = pos_[static_cast<std::size_t>(sp.b)] - pos_[static_cast<std::size_t>(sp.a)];
        const double len = d.norm();
        if (len < 1e-12) continue;
        const Vec3 dir = d / len;
        const double rest = sp.actuated ? sp.rest * factors[sp.module] : sp.rest;
        const double rel_v =
            (vel_[static_cast<std::size_t>(sp.b)] - vel_[static_cast<std::size_t>(sp.a)]).dot(dir);
        double force_scalar; // positive pulls the endpoints together
        if (sp.tension_only) {
            force_scalar =
                len > rest ? std::max(0.0, sp.stiffness * (len - rest) + sp.damping * rel_v) : 0.0;
            min_cable_force_ = std::min(min_cable_force_, force_scalar);
        } else {
            force_scalar = sp.stiffness * (len - rest) + sp.damping * rel_v;
        }
        const Vec3 f = dir * force_scalar;
        force_[static_cast<std::size_t>(sp.a)] += f;
        force_[static_cast<std::size_t>(sp.b)] -= f;
    }

    for (std::size_t i = 0; i < n; ++i) {
        force_[i] -= vel_[i] * drag_;
        contact_forces(static_cast<int>(i));
    }
}

bool Simulation::step() {
    if (aborted_ || step_index_ >= steps_total_) return false;

    if (step_index_ % steps_per_control_ == 0) {
        // Blow-up guard, checked at the control rate.
        for (const auto& p : pos_)
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
                aborted_ = true;
                return false;
            }
        apply_controller();
    }

    accumulate_forces();
    const double dt = cfg_.timestep;
    const double inv_m = 1.0 / cfg_.node_mass;
    for (std::size_t i = 0; i < pos_.size(); ++i) {
        vel_[i] += force_[i] * (dt * inv_m);
        pos_[i] += vel_[i] * dt;
    }
    time_ += dt;
    ++step_index_;

    if (kind_ == TaskKind::Squeezing)
        max_penetration_ = std::max(max_penetration_, head_centroid().x - entrance_x_);
    return true;
}

double Simulation::kinetic_energy() const {
    double ke = 0.0;
    for (const auto& v : vel_) ke += 0.5 * cfg_.node_mass * v.norm2();
    return ke;
}

SimResult Simulation::run() {
    SimResult result;
    const int per_sample = cfg_.steps_per_sample();
    const int samples = cfg_.samples_total();
    result.trajectory_xy.reserve(static_cast<std::size_t>(samples) * 2);

    while (step()) {
        if (step_index_ % per_sample == 0) {
            const Vec3 h = head_centroid();
            result.trajectory_xy.push_back(h.x);
            result.trajectory_xy.push_back(h.y);
        }
    }

    if (aborted_) {
        // Worst-case the episode: the robot is scored at its start distance
        // and the remaining samples repeat the last finite position.
        double lx = 0.0, ly = 0.0;
        if (result.trajectory_xy.size() >= 2) {
            lx = result.trajectory_xy[result.trajectory_xy.size() - 2];
            ly = result.trajectory_xy.back();
        }
        while (result.trajectory_xy.size() < static_cast<std::size_t>(samples) * 2) {
            result.trajectory_xy.push_back(lx);
            result.trajectory_xy.push_back(ly);
        }
        result.aborted = true;
        result.raw_final_distance = initial_distance_;
        result.final_distance = initial_distance_;
        return result;
    }

    result.raw_final_distance = planar_target_distance();
    result.final_distance = result.raw_final_distance;
    result.max_entrance_penetration = max_penetration_;
    if (kind_ == TaskKind::Squeezing &&
        max_penetration_ >= squeeze_.crossing_threshold - 1e-12) {
        result.bonus_applied = true;
        result.final_distance -= squeeze_.crossing_bonus;
    }
    return result;
}

SimResult simulate_with_policy(const MorphologyGenome& morph, const ControlPolicy& policy,
                               const TaskSpec& task, int target_index, int seed_index,
                               const SimConfig& config) {
    if (seed_index < 0 || seed_index >= static_cast<int>(task.noise_seeds.size()))
        throw StructuralError("seed index out of range");
    const ChainGeometry chain = build_chain(morph);
    const std::uint64_t stream =
        mix_seed(task.noise_seeds[static_cast<std::size_t>(seed_index)],
                 static_cast<std::uint64_t>(target_index));
    Simulation sim(chain, config, task, target_index, stream);
    sim.set_policy(policy);
    return sim.run();
}

SimResult simulate(const MorphologyGenome& morph, const ControllerGenome& ctrl,
                   const TaskSpec& task, int target_index, int seed_index,
                   const SimConfig& config) {
    const FeedForwardNetwork net = FeedForwardNetwork::compile(ctrl);
    return simulate_with_policy(morph, policy_from_network(net), task, target_index, seed_index,
                                config);
}

EvaluationResult evaluate(const MorphologyGenome& morph, const ControllerGenome& ctrl,
                          const TaskSpec& task, const SimConfig& config) {
    const FeedForwardNetwork net = FeedForwardNetwork::compile(ctrl);
    const ControlPolicy policy = policy_from_network(net);
    const ChainGeometry chain = build_chain(morph);

    EvaluationResult result;
    const std::size_t n_targets = task.targets.size();
    const std::size_t n_seeds = task.noise_seeds.size();
    const int samples = config.samples_total();

    for (std::size_t t = 0; t < n_targets; ++t) {
        double distance_sum = 0.0;
        std::vector<double> mean_traj(static_cast<std::size_t>(samples) * 2, 0.0);
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const std::uint64_t stream = mix_seed(task.noise_seeds[s], t);
            Simulation sim(chain, config, task, static_cast<int>(t), stream);
            sim.set_policy(policy);
            SimResult r = sim.run();
            distance_sum += r.final_distance;
            for (std::size_t i = 0; i < mean_traj.size(); ++i)
                mean_traj[i] += r.trajectory_xy[i] / static_cast<double>(n_seeds);
            result.any_abort = result.any_abort || r.aborted;
            result.any_bonus = result.any_bonus || r.bonus_applied;
            result.per_sim.push_back(std::move(r));
        }
        result.mean_final_distances.push_back(distance_sum / static_cast<double>(n_seeds));
        result.sensory.insert(result.sensory.end(), mean_traj.begin(), mean_traj.end());
    }
    result.fitness = aggregate_distance_fitness(result.mean_final_distances);
    return result;
}

} // namespace tsmr
