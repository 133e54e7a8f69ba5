#include "tsmr/neuro.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "tsmr/errors.hpp"

namespace tsmr {

const NodeGene* ControllerGenome::find_node(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const NodeGene& n, int v) { return n.id < v; });
    return (it != nodes.end() && it->id == id) ? &*it : nullptr;
}

const ConnectionGene* ControllerGenome::find_connection(int from, int to) const {
    for (const auto& c : connections)
        if (c.from == from && c.to == to) return &c;
    return nullptr;
}

bool ControllerGenome::structurally_equal(const ControllerGenome& other) const {
    return input_count == other.input_count && output_count == other.output_count &&
           nodes == other.nodes && connections == other.connections;
}

int InnovationRegistry::connection_innovation(int from, int to) {
    auto [it, inserted] = connection_events_.try_emplace({from, to}, next_innovation_);
    if (inserted) ++next_innovation_;
    return it->second;
}

InnovationRegistry::NodeSplit InnovationRegistry::node_split(int split_connection_innovation) {
    auto it = split_events_.find(split_connection_innovation);
    if (it != split_events_.end()) return it->second;
    NodeSplit s{next_node_id_++, next_innovation_, next_innovation_ + 1};
    next_innovation_ += 2;
    split_events_.emplace(split_connection_innovation, s);
    return s;
}

void InnovationRegistry::begin_generation() {
    connection_events_.clear();
    split_events_.clear();
}

ControllerGenome minimal_genome(int input_count, int output_count, Rng& rng) {
    ControllerGenome g;
    g.input_count = input_count;
    g.output_count = output_count;
    for (int i = 0; i < input_count; ++i)
        g.nodes.push_back({i, NodeKind::Input, 0.0});
    for (int j = 0; j < output_count; ++j)
        g.nodes.push_back({input_count + j, NodeKind::Output, 0.0});
    for (int i = 0; i < input_count; ++i)
        for (int j = 0; j < output_count; ++j)
            g.connections.push_back(
                {i * output_count + j, i, input_count + j, rng.normal(), true});
    return g;
}

InnovationRegistry make_registry(int input_count, int output_count) {
    return InnovationRegistry(input_count * output_count, input_count + output_count);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FeedForwardNetwork FeedForwardNetwork::compile(const ControllerGenome& g) {
    FeedForwardNetwork net;
    net.input_count_ = g.input_count;

    std::map<int, int> slot_of; // node id -> value slot
    for (const auto& n : g.nodes)
        slot_of.emplace(n.id, static_cast<int>(slot_of.size()));
    net.slot_count_ = static_cast<int>(slot_of.size());

    // Kahn's algorithm over enabled connections; nodes processed in id order
    // for a deterministic topological order.
    std::map<int, std::vector<std::pair<int, double>>> incoming;
    std::map<int, int> indegree;
    for (const auto& n : g.nodes) indegree[n.id] = 0;
    for (const auto& c : g.connections) {
        if (!c.enabled) continue;
        incoming[c.to].push_back({c.from, c.weight});
        ++indegree[c.to];
    }
    std::set<int> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.insert(id);

    std::map<int, std::vector<int>> outgoing;
    for (const auto& c : g.connections)
        if (c.enabled) outgoing[c.from].push_back(c.to);

    std::size_t processed = 0;
    while (!ready.empty()) {
        const int id = *ready.begin();
        ready.erase(ready.begin());
        ++processed;
        const NodeGene* node = g.find_node(id);
        NodeProgram prog;
        prog.value_slot = slot_of.at(id);
        prog.bias = node->bias;
        prog.is_input = node->kind == NodeKind::Input;
        prog.input_index = prog.is_input ? id : -1;
        for (const auto& [src, w] : incoming[id])
            prog.incoming.push_back({slot_of.at(src), w});
        net.order_.push_back(std::move(prog));
        for (int next : outgoing[id])
            if (--indegree[next] == 0) ready.insert(next);
    }
    if (processed != g.nodes.size())
        throw StructuralError("controller genome has a cycle in its enabled connections");

    for (int j = 0; j < g.output_count; ++j)
        net.output_slots_.push_back(slot_of.at(g.input_count + j));
    return net;
}

std::vector<double> FeedForwardNetwork::eval(std::span<const double> inputs) const {
    if (static_cast<int>(inputs.size()) != input_count_)
        throw StructuralError("input size mismatch");
    std::vector<double> values(static_cast<std::size_t>(slot_count_), 0.0);
    for (const auto& prog : order_) {
        if (prog.is_input) {
            values[static_cast<std::size_t>(prog.value_slot)] =
                inputs[static_cast<std::size_t>(prog.input_index)];
            continue;
        }
        double sum = prog.bias;
        for (const auto& [slot, w] : prog.incoming)
            sum += w * values[static_cast<std::size_t>(slot)];
        values[static_cast<std::size_t>(prog.value_slot)] = sigmoid(sum);
    }
    std::vector<double> out;
    out.reserve(output_slots_.size());
    for (int slot : output_slots_)
        out.push_back(values[static_cast<std::size_t>(slot)]);
    return out;
}

std::vector<double> decode_and_eval(const ControllerGenome& g, std::span<const double> inputs) {
    return FeedForwardNetwork::compile(g).eval(inputs);
}

bool creates_cycle(const ControllerGenome& g, int from, int to) {
    if (from == to) return true;
    // DFS from `to` along enabled connections looking for `from`.
    std::map<int, std::vector<int>> outgoing;
    for (const auto& c : g.connections)
        if (c.enabled) outgoing[c.from].push_back(c.to);
    std::vector<int> stack{to};
    std::set<int> seen{to};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        if (id == from) return true;
        for (int next : outgoing[id])
            if (seen.insert(next).second) stack.push_back(next);
    }
    return false;
}

namespace {

void insert_node_sorted(ControllerGenome& g, NodeGene n) {
    auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), n.id,
                               [](const NodeGene& a, int v) { return a.id < v; });
    g.nodes.insert(it, n);
}

void insert_connection_sorted(ControllerGenome& g, ConnectionGene c) {
    auto it = std::lower_bound(g.connections.begin(), g.connections.end(), c.innovation,
                               [](const ConnectionGene& a, int v) { return a.innovation < v; });
    g.connections.insert(it, c);
}

} // namespace

ControllerGenome mutate_controller(const ControllerGenome& g, InnovationRegistry& registry,
                                   Rng& rng, const NeatMutationParams& p) {
    ControllerGenome out = g;
    out.fitness = std::numeric_limits<double>::quiet_NaN();

    for (auto& c : out.connections) {
        if (!rng.chance(p.weight_perturb_prob)) continue;
        if (rng.chance(p.weight_redraw_prob))
            c.weight = rng.normal();
        else
            c.weight += rng.normal(0.0, p.weight_sigma);
    }
    for (auto& n : out.nodes) {
        if (n.kind == NodeKind::Input) continue;
        if (!rng.chance(p.bias_perturb_prob)) continue;
        if (rng.chance(p.bias_redraw_prob))
            n.bias = rng.normal();
        else
            n.bias += rng.normal(0.0, p.bias_sigma);
    }

    if (rng.chance(p.add_connection_prob)) {
        // Candidate edges: out of inputs/hidden, into hidden/outputs, not
        // already present, acyclicity preserving. Reachability over the
        // enabled subgraph is computed once for the whole candidate scan.
        std::map<int, std::vector<int>> adjacency;
        for (const auto& c : out.connections)
            if (c.enabled) adjacency[c.from].push_back(c.to);
        std::map<int, std::set<int>> reach; // node -> everything reachable from it
        for (const auto& n : out.nodes) {
            std::set<int>& r = reach[n.id];
            std::vector<int> stack{n.id};
            while (!stack.empty()) {
                const int id = stack.back();
                stack.pop_back();
                for (int next : adjacency[id])
                    if (r.insert(next).second) stack.push_back(next);
            }
        }
        std::set<std::pair<int, int>> present;
        for (const auto& c : out.connections) present.insert({c.from, c.to});

        std::vector<std::pair<int, int>> candidates;
        for (const auto& a : out.nodes) {
            if (a.kind == NodeKind::Output) continue;
            for (const auto& b : out.nodes) {
                if (b.kind == NodeKind::Input || a.id == b.id) continue;
                if (present.count({a.id, b.id})) continue;
                if (reach[b.id].count(a.id)) continue; // b reaches a: would cycle
                candidates.push_back({a.id, b.id});
            }
        }
        if (!candidates.empty()) {
            const auto [from, to] = candidates[rng.index(candidates.size())];
            insert_connection_sorted(
                out, {registry.connection_innovation(from, to), from, to, rng.normal(), true});
        }
    }

    if (rng.chance(p.add_node_prob)) {
        std::vector<std::size_t> enabled;
        for (std::size_t i = 0; i < out.connections.size(); ++i)
            if (out.connections[i].enabled) enabled.push_back(i);
        if (!enabled.empty()) {
            const std::size_t pick = enabled[rng.index(enabled.size())];
            const auto split = registry.node_split(out.connections[pick].innovation);
            if (!out.find_node(split.node_id)) {
                const int from = out.connections[pick].from;
                const int to = out.connections[pick].to;
                const double w = out.connections[pick].weight;
                out.connections[pick].enabled = false;
                insert_node_sorted(out, {split.node_id, NodeKind::Hidden, 0.0});
                insert_connection_sorted(out, {split.innovation_in, from, split.node_id, 1.0, true});
                insert_connection_sorted(out, {split.innovation_out, split.node_id, to, w, true});
            }
        }
    }

    if (rng.chance(p.toggle_enable_prob) && !out.connections.empty()) {
        auto& c = out.connections[rng.index(out.connections.size())];
        if (c.enabled)
            c.enabled = false;
        else if (!creates_cycle(out, c.from, c.to))
            c.enabled = true;
    }

    return out;
}

ControllerGenome crossover(const ControllerGenome& parent1, const ControllerGenome& parent2,
                           Rng& rng) {
    const bool p1_fitter = !(parent2.fitness < parent1.fitness); // minimized; tie -> parent1
    const ControllerGenome& fitter = p1_fitter ? parent1 : parent2;
    const ControllerGenome& other = p1_fitter ? parent2 : parent1;

    ControllerGenome child;
    child.input_count = fitter.input_count;
    child.output_count = fitter.output_count;

    // Walk the innovation-sorted connection lists in parallel.
    std::size_t i = 0, j = 0;
    std::vector<ConnectionGene> genes;
    while (i < fitter.connections.size()) {
        const ConnectionGene& a = fitter.connections[i];
        while (j < other.connections.size() && other.connections[j].innovation < a.innovation)
            ++j; // disjoint in the less fit parent: skipped
        ConnectionGene gene = a;
        bool either_disabled = !a.enabled;
        if (j < other.connections.size() && other.connections[j].innovation == a.innovation) {
            const ConnectionGene& b = other.connections[j];
            if (rng.chance(0.5)) gene = b;
            either_disabled = !a.enabled || !b.enabled;
        }
        gene.enabled = either_disabled ? !rng.chance(0.75) : true;
        genes.push_back(gene);
        ++i;
    }

    // Repair pass: the disable/re-enable rule above may try to enable an
    // edge that closes a cycle; those stay disabled. Genes are accepted in
    // innovation order and each enable is checked against the edges
    // accepted so far.
    std::sort(genes.begin(), genes.end(),
              [](const ConnectionGene& a, const ConnectionGene& b) {
                  return a.innovation < b.innovation;
              });
    std::map<int, std::vector<int>> accepted;
    auto reaches = [&](int src, int dst) {
        std::vector<int> stack{src};
        std::set<int> seen{src};
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            if (id == dst) return true;
            for (int next : accepted[id])
                if (seen.insert(next).second) stack.push_back(next);
        }
        return false;
    };
    for (auto gene : genes) {
        if (gene.enabled && reaches(gene.to, gene.from)) gene.enabled = false;
        if (gene.enabled) accepted[gene.from].push_back(gene.to);
        child.connections.push_back(gene);
    }

    // Nodes: all inputs/outputs plus every node referenced by a connection;
    // biases come from the fitter parent where present.
    std::set<int> node_ids;
    for (const auto& n : fitter.nodes)
        if (n.kind != NodeKind::Hidden) node_ids.insert(n.id);
    for (const auto& c : child.connections) {
        node_ids.insert(c.from);
        node_ids.insert(c.to);
    }
    for (int id : node_ids) {
        const NodeGene* n = fitter.find_node(id);
        if (!n) n = other.find_node(id);
        child.nodes.push_back(*n);
    }
    return child;
}

double compatibility(const ControllerGenome& g1, const ControllerGenome& g2) {
    constexpr double c1 = 1.0, c2 = 1.0, c3 = 0.5;
    const auto& a = g1.connections;
    const auto& b = g2.connections;
    const int max_a = a.empty() ? -1 : a.back().innovation;
    const int max_b = b.empty() ? -1 : b.back().innovation;
    const int shared_range = std::min(max_a, max_b);

    std::size_t i = 0, j = 0;
    int matching = 0, disjoint = 0, excess = 0;
    double weight_diff = 0.0;
    while (i < a.size() || j < b.size()) {
        if (i < a.size() && j < b.size() && a[i].innovation == b[j].innovation) {
            weight_diff += std::fabs(a[i].weight - b[j].weight);
            ++matching;
            ++i;
            ++j;
        } else if (j >= b.size() || (i < a.size() && a[i].innovation < b[j].innovation)) {
            (a[i].innovation <= shared_range ? disjoint : excess)++;
            ++i;
        } else {
            (b[j].innovation <= shared_range ? disjoint : excess)++;
            ++j;
        }
    }
    const double n = static_cast<double>(std::max({a.size(), b.size(), std::size_t{1}}));
    const double mean_diff = matching > 0 ? weight_diff / matching : 0.0;
    return c1 * excess / n + c2 * disjoint / n + c3 * mean_diff;
}

namespace {

std::vector<std::size_t> sorted_by_fitness(const std::vector<ControllerGenome>& pop) {
    std::vector<std::size_t> idx(pop.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        return pop[x].fitness < pop[y].fitness;
    });
    return idx;
}

} // namespace

GenerationResult neat_generation(const std::vector<ControllerGenome>& population,
                                 std::vector<Species>& species, InnovationRegistry& registry,
                                 Rng& rng, const NeatParams& params) {
    GenerationResult result;
    registry.begin_generation();

    if (population.empty())
        throw StructuralError("neat_generation: empty population");

    // Re-cluster against the previous representatives.
    int next_species_id = 1;
    for (auto& s : species) {
        s.members.clear();
        next_species_id = std::max(next_species_id, s.id + 1);
    }
    for (std::size_t i = 0; i < population.size(); ++i) {
        bool placed = false;
        for (auto& s : species) {
            if (compatibility(population[i], s.representative) <= params.compatibility_threshold) {
                s.members.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            Species s;
            s.id = next_species_id++;
            s.representative = population[i];
            s.members.push_back(i);
            species.push_back(std::move(s));
        }
    }
    std::erase_if(species, [](const Species& s) { return s.members.empty(); });

    // Representatives follow the member closest to the old representative.
    for (auto& s : species) {
        std::size_t best = s.members[0];
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t m : s.members) {
            const double d = compatibility(population[m], s.representative);
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        s.representative = population[best];
    }

    // Stagnation bookkeeping on the species' best member fitness.
    for (auto& s : species) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : s.members) best = std::min(best, population[m].fitness);
        if (best < s.best_fitness_ever) {
            s.best_fitness_ever = best;
            s.stagnation = 0;
        } else {
            ++s.stagnation;
        }
    }

    // Retire stagnant species, shielding the best `species_elitism` ones.
    std::vector<std::size_t> by_best(species.size());
    for (std::size_t i = 0; i < species.size(); ++i) by_best[i] = i;
    auto species_best = [&](std::size_t si) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : species[si].members) best = std::min(best, population[m].fitness);
        return best;
    };
    std::stable_sort(by_best.begin(), by_best.end(), [&](std::size_t x, std::size_t y) {
        return species_best(x) < species_best(y);
    });
    std::set<std::size_t> shielded;
    for (std::size_t i = 0; i < by_best.size() && i < static_cast<std::size_t>(params.species_elitism); ++i)
        shielded.insert(by_best[i]);
    std::vector<Species> survivors;
    for (std::size_t i = 0; i < species.size(); ++i)
        if (shielded.count(i) || species[i].stagnation <= params.stagnation_window)
            survivors.push_back(std::move(species[i]));
    species = std::move(survivors);

    if (species.empty()) {
        for (int i = 0; i < params.population_size; ++i)
            result.population.push_back(
                minimal_genome(population[0].input_count, population[0].output_count, rng));
        result.restarted = true;
        return result;
    }

    // Rank-scaled adjusted fitness: worst gets 1/P, best gets 1.
    const auto ranked = sorted_by_fitness(population);
    std::vector<double> adjusted(population.size(), 0.0);
    for (std::size_t r = 0; r < ranked.size(); ++r)
        adjusted[ranked[r]] =
            static_cast<double>(ranked.size() - r) / static_cast<double>(ranked.size());

    std::vector<double> species_score;
    double score_total = 0.0;
    for (const auto& s : species) {
        double sum = 0.0;
        for (std::size_t m : s.members) sum += adjusted[m];
        species_score.push_back(sum / static_cast<double>(s.members.size()));
        score_total += species_score.back();
    }

    // Elites: the best individuals of the whole population, copied verbatim.
    const int elite_count =
        std::min<int>(params.individual_elitism, static_cast<int>(population.size()));
    for (int e = 0; e < elite_count; ++e)
        result.population.push_back(population[ranked[static_cast<std::size_t>(e)]]);

    // Offspring quotas by largest remainder.
    const int offspring_total = params.population_size - elite_count;
    std::vector<int> quota(species.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t si = 0; si < species.size(); ++si) {
        const double share = score_total > 0.0
                                 ? species_score[si] / score_total * offspring_total
                                 : static_cast<double>(offspring_total) / species.size();
        quota[si] = static_cast<int>(share);
        assigned += quota[si];
        remainders.push_back({share - quota[si], si});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t k = 0; assigned < offspring_total; ++k, ++assigned)
        quota[remainders[k % remainders.size()].second] += 1;

    for (std::size_t si = 0; si < species.size(); ++si) {
        auto& s = species[si];
        std::stable_sort(s.members.begin(), s.members.end(), [&](std::size_t x, std::size_t y) {
            return population[x].fitness < population[y].fitness;
        });
        const std::size_t survivors_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::ceil(s.members.size() * params.survival_fraction)));
        for (int q = 0; q < quota[si]; ++q) {
            ControllerGenome child;
            if (survivors_n >= 2 && rng.chance(params.crossover_prob)) {
                const std::size_t a = s.members[rng.index(survivors_n)];
                const std::size_t b = s.members[rng.index(survivors_n)];
                child = crossover(population[a], population[b], rng);
            } else {
                child = population[s.members[rng.index(survivors_n)]];
            }
            result.population.push_back(mutate_controller(child, registry, rng, params.mutation));
        }
    }

    result.species_count = static_cast<int>(species.size());
    return result;
}

std::string to_record(const ControllerGenome& g) {
    std::ostringstream os;
    os << "NN in=" << g.input_count << " out=" << g.output_count << "\n";
    char buf[64];
    for (const auto& n : g.nodes) {
        const char kind = n.kind == NodeKind::Input ? 'i' : (n.kind == NodeKind::Output ? 'o' : 'h');
        std::snprintf(buf, sizeof buf, "%.17g", n.bias);
        os << "N " << n.id << ' ' << kind << ' ' << buf << "\n";
    }
    for (const auto& c : g.connections) {
        std::snprintf(buf, sizeof buf, "%.17g", c.weight);
        os << "C " << c.innovation << ' ' << c.from << ' ' << c.to << ' ' << buf << ' '
           << (c.enabled ? 1 : 0) << "\n";
    }
    return os.str();
}

ControllerGenome controller_from_record(const std::string& record) {
    ControllerGenome g;
    std::istringstream is(record);
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.rfind("NN ", 0) == 0) {
            if (std::sscanf(line.c_str(), "NN in=%d out=%d", &g.input_count, &g.output_count) != 2)
                throw StructuralError("bad controller record header");
            header = true;
        } else if (line[0] == 'N') {
            int id;
            char kind;
            double bias;
            if (std::sscanf(line.c_str(), "N %d %c %lg", &id, &kind, &bias) != 3)
                throw StructuralError("bad node gene line: " + line);
            const NodeKind k = kind == 'i' ? NodeKind::Input
                                           : (kind == 'o' ? NodeKind::Output : NodeKind::Hidden);
            g.nodes.push_back({id, k, bias});
        } else if (line[0] == 'C') {
            int innov, from, to, enabled;
            double w;
            if (std::sscanf(line.c_str(), "C %d %d %d %lg %d", &innov, &from, &to, &w, &enabled) != 5)
                throw StructuralError("bad connection gene line: " + line);
            g.connections.push_back({innov, from, to, w, enabled != 0});
        } else {
            throw StructuralError("unrecognized controller record line: " + line);
        }
    }
    if (!header) throw StructuralError("controller record missing header");
    return g;
}

} // namespace tsmr
