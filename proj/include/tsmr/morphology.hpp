#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tsmr/rng.hpp"
#include "tsmr/vec3.hpp"

namespace tsmr {

inline constexpr int kMaxModules = 10;
inline constexpr int kStiffnessLevels = 9;
inline constexpr int kFaceCount = 8;

// Module geometry constants. Width equals length (the module bounding box is
// a cube) and matches the physical prototype scale of roughly 11 cm.
inline constexpr double kModuleWidth = 0.11;
inline constexpr double kCablePrestretch = 0.05;
inline constexpr double kLinkGap = 0.01;

// Cable spring constants for the 9 stiffness levels, linear in [25, 800] N/m.
double cable_stiffness_for_level(int level);

// Chain of icosahedron tensegrity modules: global genes (module count,
// stiffness level) plus one connection-face gene per inter-module joint.
struct MorphologyGenome {
    int num_modules = 1;
    int stiffness_level = 0;
    std::vector<int> connection_faces; // size num_modules-1, values in [0, 8)

    bool is_valid() const;
    bool operator==(const MorphologyGenome&) const = default;
};

// One-line textual record: M:<n>;S:<level>;F:<f1,...,f_{n-1}>
std::string to_record(const MorphologyGenome& g);
MorphologyGenome morphology_from_record(const std::string& record);

MorphologyGenome random_morphology(std::uint64_t rng_seed);
MorphologyGenome random_morphology(Rng& rng);

// Applies exactly one mutation kind, drawn uniformly among the kinds
// applicable to g: add module, delete module, change stiffness, change one
// connection face. The input genome is left untouched.
MorphologyGenome mutate_morphology(const MorphologyGenome& g, Rng& rng);

// Six-strut tensegrity icosahedron: 12 nodes, 6 rods, 24 pre-stretched
// cables, 8 triangular faces (one per octant). The two opposite faces 7
// (+,+,+) and 0 (-,-,-) carry the actuated cables.
struct ModuleGeometry {
    struct Cable {
        int a = 0;
        int b = 0;
        double rest_length = 0.0; // slack length, pre-stretch already removed
        double prestretch = 0.0;
        int face = -1;       // owning face (each cable borders exactly one)
        bool actuated = false;
    };

    std::array<Vec3, 12> node_positions; // world frame
    std::array<std::array<int, 2>, 6> rods;
    std::vector<Cable> cables; // exactly 24
    std::array<std::array<int, 3>, 8> faces;
    std::array<int, 2> actuated_face_pair{0, 7};
};

// Stiff link joining a vertex of one module's connection face to the
// matching vertex of the next module's facing triangle. Indices are global
// (module_index * 12 + local).
struct InterModuleLink {
    int node_a = 0;
    int node_b = 0;
    double rest_length = 0.0;
};

struct ChainGeometry {
    std::vector<ModuleGeometry> modules;
    std::vector<InterModuleLink> links; // 3 per consecutive module pair
    int head_front_face = 0;            // local face index on module 0
    double cable_stiffness = 0.0;       // N/m, from the stiffness level
};

// Builds the chain along the -x axis with the head module (index 0) at the
// front. Each module is rotated so its connection face points towards the
// next module; the whole chain is translated so the head centroid sits at
// the origin in the ground plane and the lowest node touches z = 0.
// Pure function: identical genomes produce bit-identical geometry.
ChainGeometry build_chain(const MorphologyGenome& g);

// Canonical module in its local frame (head-frame orientation, centroid at
// the origin). Exposed for geometry tests.
ModuleGeometry canonical_module();

} // namespace tsmr
