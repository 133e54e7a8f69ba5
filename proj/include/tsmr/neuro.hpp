#pragma once

#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsmr/rng.hpp"

namespace tsmr {

enum class NodeKind { Input, Hidden, Output };

struct NodeGene {
    int id = 0;
    NodeKind kind = NodeKind::Hidden;
    double bias = 0.0;
    bool operator==(const NodeGene&) const = default;
};

struct ConnectionGene {
    int innovation = 0;
    int from = 0;
    int to = 0;
    double weight = 0.0;
    bool enabled = true;
    bool operator==(const ConnectionGene&) const = default;
};

// NEAT-style feed-forward genome. Inputs use the identity activation,
// hidden and output nodes the logistic sigmoid. Nodes are kept sorted by id,
// connections by innovation number.
struct ControllerGenome {
    int input_count = 0;
    int output_count = 0;
    std::vector<NodeGene> nodes;
    std::vector<ConnectionGene> connections;
    double fitness = std::numeric_limits<double>::quiet_NaN(); // minimized

    const NodeGene* find_node(int id) const;
    const ConnectionGene* find_connection(int from, int to) const;
    bool structurally_equal(const ControllerGenome& other) const;
};

// Assigns innovation numbers and hidden-node ids. The same structural event
// (adding connection a->b, or splitting a given connection) queried twice
// within one generation yields the same numbers; begin_generation() clears
// the event caches while the global counters keep growing.
class InnovationRegistry {
public:
    InnovationRegistry(int next_innovation, int next_node_id)
        : next_innovation_(next_innovation), next_node_id_(next_node_id) {}

    int connection_innovation(int from, int to);

    struct NodeSplit {
        int node_id;
        int innovation_in;
        int innovation_out;
    };
    NodeSplit node_split(int split_connection_innovation);

    void begin_generation();
    int next_innovation() const { return next_innovation_; }
    int next_node_id() const { return next_node_id_; }

private:
    int next_innovation_;
    int next_node_id_;
    std::map<std::pair<int, int>, int> connection_events_;
    std::map<int, NodeSplit> split_events_;
};

// Fully-connected input->output net with N(0,1) weights, zero biases, no
// hidden nodes. Innovation numbers follow the canonical bipartite numbering
// (input i to output j gets i*output_count + j), so independently created
// minimal genomes align gene-for-gene.
ControllerGenome minimal_genome(int input_count, int output_count, Rng& rng);

// Registry whose counters start above everything a minimal genome uses.
InnovationRegistry make_registry(int input_count, int output_count);

double sigmoid(double x);

// Topologically ordered evaluator compiled once per genome. Throws
// StructuralError if the enabled subgraph has a cycle.
class FeedForwardNetwork {
public:
    static FeedForwardNetwork compile(const ControllerGenome& g);
    std::vector<double> eval(std::span<const double> inputs) const;
    int input_count() const { return input_count_; }

private:
    struct NodeProgram {
        int value_slot;
        double bias;
        bool is_input;
        int input_index;
        std::vector<std::pair<int, double>> incoming; // (value slot, weight)
    };
    int input_count_ = 0;
    std::vector<NodeProgram> order_;
    std::vector<int> output_slots_;
    int slot_count_ = 0;
};

std::vector<double> decode_and_eval(const ControllerGenome& g, std::span<const double> inputs);

// Would enabling/adding edge from->to close a cycle through the currently
// enabled connections?
bool creates_cycle(const ControllerGenome& g, int from, int to);

struct NeatMutationParams {
    double weight_perturb_prob = 0.8; // per connection
    double weight_sigma = 0.5;
    double weight_redraw_prob = 0.1; // fraction of perturbations redrawn from N(0,1)
    double bias_perturb_prob = 0.7;  // per non-input node
    double bias_sigma = 0.5;
    double bias_redraw_prob = 0.1;
    double add_connection_prob = 0.1;
    double add_node_prob = 0.05;
    double toggle_enable_prob = 0.02;
};

// NEAT mutation: weight/bias perturbation plus the structural operators.
// Structural changes draw their numbers from the registry; inapplicable
// operators are skipped. Never introduces a cycle.
ControllerGenome mutate_controller(const ControllerGenome& g, InnovationRegistry& registry,
                                   Rng& rng, const NeatMutationParams& params = {});

// Historical-marking crossover (fitness minimized). Matching genes come from
// either parent at random, disjoint and excess genes from the fitter parent
// (ties favor parent1). A gene disabled in either parent stays disabled with
// probability 0.75; re-enabling is suppressed where it would close a cycle.
ControllerGenome crossover(const ControllerGenome& parent1, const ControllerGenome& parent2,
                           Rng& rng);

// c1*E/N + c2*D/N + c3*meanWeightDiff with c1=c2=1, c3=0.5 and
// N = max(connection counts, 1).
double compatibility(const ControllerGenome& g1, const ControllerGenome& g2);

struct Species {
    int id = 0;
    ControllerGenome representative;
    std::vector<std::size_t> members; // indices into the population
    double best_fitness_ever = std::numeric_limits<double>::infinity();
    int stagnation = 0;
};

struct NeatParams {
    int population_size = 54;
    int individual_elitism = 3;
    int species_elitism = 2;
    double compatibility_threshold = 2.85;
    int stagnation_window = 15;
    double crossover_prob = 0.75;
    double survival_fraction = 0.5;
    NeatMutationParams mutation;
};

struct GenerationResult {
    std::vector<ControllerGenome> population;
    bool restarted = false;
    int species_count = 0;
};

// One NEAT generation over an evaluated population: re-cluster into species
// (threshold 2.85), retire species stagnant beyond the window except the two
// best, hand out offspring quotas by mean rank-scaled fitness, copy the top
// individuals unchanged and fill the rest with crossover+mutation offspring.
GenerationResult neat_generation(const std::vector<ControllerGenome>& population,
                                 std::vector<Species>& species, InnovationRegistry& registry,
                                 Rng& rng, const NeatParams& params);

// Structured-text genome record (one node or connection per line).
std::string to_record(const ControllerGenome& g);
ControllerGenome controller_from_record(const std::string& record);

} // namespace tsmr
