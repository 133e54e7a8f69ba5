#include "tsmr/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tsmr/errors.hpp"

namespace tsmr {

double cable_stiffness_for_level(int level) {
    if (level < 0 || level >= kStiffnessLevels)
        throw StructuralError("stiffness level out of range");
    return 25.0 + (800.0 - 25.0) * static_cast<double>(level) / (kStiffnessLevels - 1);
}

bool MorphologyGenome::is_valid() const {
    if (num_modules < 1 || num_modules > kMaxModules) return false;
    if (stiffness_level < 0 || stiffness_level >= kStiffnessLevels) return false;
    if (static_cast<int>(connection_faces.size()) != num_modules - 1) return false;
    for (int f : connection_faces)
        if (f < 0 || f >= kFaceCount) return false;
    return true;
}

std::string to_record(const MorphologyGenome& g) {
    std::string s = "M:" + std::to_string(g.num_modules) + ";S:" +
                    std::to_string(g.stiffness_level) + ";F:";
    for (std::size_t i = 0; i < g.connection_faces.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(g.connection_faces[i]);
    }
    return s;
}

MorphologyGenome morphology_from_record(const std::string& record) {
    MorphologyGenome g;
    int n = 0, s = 0, consumed = 0;
    if (std::sscanf(record.c_str(), "M:%d;S:%d;F:%n", &n, &s, &consumed) != 2 || consumed == 0)
        throw StructuralError("malformed morphology record: " + record);
    g.num_modules = n;
    g.stiffness_level = s;
    std::stringstream faces(record.substr(static_cast<std::size_t>(consumed)));
    std::string tok;
    while (std::getline(faces, tok, ','))
        if (!tok.empty()) g.connection_faces.push_back(std::stoi(tok));
    if (!g.is_valid())
        throw StructuralError("invalid morphology record: " + record);
    return g;
}

MorphologyGenome random_morphology(std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return random_morphology(rng);
}

MorphologyGenome random_morphology(Rng& rng) {
    MorphologyGenome g;
    g.num_modules = static_cast<int>(rng.uniform_int(1, kMaxModules));
    g.stiffness_level = static_cast<int>(rng.uniform_int(0, kStiffnessLevels - 1));
    g.connection_faces.resize(static_cast<std::size_t>(g.num_modules - 1));
    for (int& f : g.connection_faces)
        f = static_cast<int>(rng.uniform_int(0, kFaceCount - 1));
    return g;
}

namespace {

enum class MutationKind { AddModule, DeleteModule, ChangeStiffness, ChangeFace };

} // namespace

MorphologyGenome mutate_morphology(const MorphologyGenome& g, Rng& rng) {
    std::vector<MutationKind> kinds;
    if (g.num_modules < kMaxModules) kinds.push_back(MutationKind::AddModule);
    if (g.num_modules > 1) kinds.push_back(MutationKind::DeleteModule);
    kinds.push_back(MutationKind::ChangeStiffness);
    if (g.num_modules > 1) kinds.push_back(MutationKind::ChangeFace);

    MorphologyGenome out = g;
    switch (kinds[rng.index(kinds.size())]) {
    case MutationKind::AddModule: {
        // Insert at position p in [0, n]. The new module takes a fresh face
        // gene unless it becomes the tail, in which case the previous tail
        // (which had no gene) gets one.
        const int p = static_cast<int>(rng.uniform_int(0, g.num_modules));
        const int gene = static_cast<int>(rng.uniform_int(0, kFaceCount - 1));
        if (p == g.num_modules)
            out.connection_faces.push_back(gene);
        else
            out.connection_faces.insert(out.connection_faces.begin() + p, gene);
        out.num_modules += 1;
        break;
    }
    case MutationKind::DeleteModule: {
        const int d = static_cast<int>(rng.uniform_int(0, g.num_modules - 1));
        if (d == g.num_modules - 1)
            out.connection_faces.pop_back();
        else
            out.connection_faces.erase(out.connection_faces.begin() + d);
        out.num_modules -= 1;
        break;
    }
    case MutationKind::ChangeStiffness: {
        // +-1, reflected at the range ends so the level always changes.
        int delta = rng.chance(0.5) ? 1 : -1;
        if (out.stiffness_level + delta < 0 || out.stiffness_level + delta >= kStiffnessLevels)
            delta = -delta;
        out.stiffness_level += delta;
        break;
    }
    case MutationKind::ChangeFace: {
        const std::size_t i = rng.index(out.connection_faces.size());
        // Redraw uniformly among the other 7 values.
        int v = static_cast<int>(rng.uniform_int(0, kFaceCount - 2));
        if (v >= out.connection_faces[i]) ++v;
        out.connection_faces[i] = v;
        break;
    }
    }
    return out;
}

namespace {

// Local-frame construction of the expanded-octahedron tensegrity: three
// orthogonal pairs of parallel struts at the self-stress separation ratio
// (strut offset = strut half-length / 2). Node order: 4 z-strut vertices,
// 4 y-strut vertices, 4 x-strut vertices.
struct CanonicalModule {
    std::array<Vec3, 12> nodes;
    std::array<std::array<int, 2>, 6> rods;
    std::vector<std::array<int, 2>> cable_pairs; // 24
    std::array<std::array<int, 3>, 8> faces;     // face index = octant code
    double cable_built_length = 0.0;

    CanonicalModule() {
        const double h = kModuleWidth / 2.0;
        const double o = h / 2.0;
        int k = 0;
        // z-struts (class A): (0, +-o, +-z h)
        for (int sy : {+1, -1})
            for (int sz : {+1, -1})
                nodes[k++] = {0.0, sy * o, sz * h};
        // y-struts (class B): (+-o, +-h, 0)
        for (int sx : {+1, -1})
            for (int sy : {+1, -1})
                nodes[k++] = {sx * o, sy * h, 0.0};
        // x-struts (class C): (+-h, 0, +-o)
        for (int sz : {+1, -1})
            for (int sx : {+1, -1})
                nodes[k++] = {sx * h, 0.0, sz * o};

        rods = {{{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}}};
        // Check the rod table: each rod must join two nodes differing only
        // in one +-h coordinate (strut axis) and each node appears once.
        for (const auto& r : rods) {
            const Vec3 d = nodes[r[0]] - nodes[r[1]];
            if (std::fabs(d.norm() - 2.0 * h) > 1e-12)
                throw StructuralError("bad rod table");
        }

        // Cables: inter-class vertex pairs at the short distance.
        const double adjacent = std::sqrt(o * o + (h - o) * (h - o) + h * h);
        cable_built_length = adjacent;
        for (int a = 0; a < 12; ++a)
            for (int b = a + 1; b < 12; ++b) {
                if (a / 4 == b / 4) continue; // same strut class
                if (std::fabs((nodes[a] - nodes[b]).norm() - adjacent) < 1e-9 * h)
                    cable_pairs.push_back({a, b});
            }
        if (cable_pairs.size() != 24)
            throw StructuralError("cable generation produced != 24 cables");

        // Faces: one triangle per octant, vertices are the class A, B, C
        // nodes whose nonzero coordinates match the octant signs.
        for (int oct = 0; oct < 8; ++oct) {
            const int sx = (oct & 1) ? +1 : -1;
            const int sy = (oct & 2) ? +1 : -1;
            const int sz = (oct & 4) ? +1 : -1;
            int a = -1, b = -1, c = -1;
            for (int i = 0; i < 4; ++i) {
                const Vec3& p = nodes[i];
                if (p.y * sy > 0 && p.z * sz > 0) a = i;
            }
            for (int i = 4; i < 8; ++i) {
                const Vec3& p = nodes[i];
                if (p.x * sx > 0 && p.y * sy > 0) b = i;
            }
            for (int i = 8; i < 12; ++i) {
                const Vec3& p = nodes[i];
                if (p.x * sx > 0 && p.z * sz > 0) c = i;
            }
            if (a < 0 || b < 0 || c < 0)
                throw StructuralError("face construction failed");
            faces[static_cast<std::size_t>(oct)] = {a, b, c};
        }
    }

    // Octant whose face triangle contains both endpoints, or -1.
    int owning_face(int a, int b) const {
        for (int f = 0; f < 8; ++f) {
            const auto& t = faces[static_cast<std::size_t>(f)];
            const bool ha = t[0] == a || t[1] == a || t[2] == a;
            const bool hb = t[0] == b || t[1] == b || t[2] == b;
            if (ha && hb) return f;
        }
        return -1;
    }
};

const CanonicalModule& canonical() {
    static const CanonicalModule m;
    return m;
}

constexpr int kHeadVirtualFace = 7;

Vec3 octant_direction(int face) {
    const double s = 1.0 / std::sqrt(3.0);
    return {(face & 1) ? s : -s, (face & 2) ? s : -s, (face & 4) ? s : -s};
}

int opposite_face(int face) { return 7 - face; }

ModuleGeometry instantiate_module(const Mat3& rot, const Vec3& center) {
    const CanonicalModule& c = canonical();
    ModuleGeometry m;
    for (int i = 0; i < 12; ++i)
        m.node_positions[static_cast<std::size_t>(i)] =
            rot.apply(c.nodes[static_cast<std::size_t>(i)]) + center;
    m.rods = c.rods;
    m.faces = c.faces;
    m.actuated_face_pair = {0, 7};
    m.cables.reserve(24);
    for (const auto& pr : c.cable_pairs) {
        ModuleGeometry::Cable cab;
        cab.a = pr[0];
        cab.b = pr[1];
        cab.prestretch = kCablePrestretch;
        cab.rest_length = c.cable_built_length / (1.0 + kCablePrestretch);
        cab.face = c.owning_face(pr[0], pr[1]);
        cab.actuated = cab.face == 0 || cab.face == 7;
        m.cables.push_back(cab);
    }
    return m;
}

} // namespace

ModuleGeometry canonical_module() {
    return instantiate_module(Mat3{}, Vec3{});
}

ChainGeometry build_chain(const MorphologyGenome& g) {
    if (!g.is_valid())
        throw StructuralError("build_chain: invalid morphology genome");

    const CanonicalModule& canon = canonical();
    const double h = kModuleWidth / 2.0;
    // Face centroid sits at (o+h)/sqrt(3) = 1.5h/sqrt(3) from the center
    // along the octant diagonal; after rotation that is along the chain axis.
    const double centroid_dist = 1.5 * h / std::sqrt(3.0);
    const double spacing = 2.0 * centroid_dist + kLinkGap;

    ChainGeometry chain;
    chain.cable_stiffness = cable_stiffness_for_level(g.stiffness_level);

    const Vec3 minus_x{-1.0, 0.0, 0.0};
    std::vector<int> out_face(static_cast<std::size_t>(g.num_modules), kHeadVirtualFace);
    for (int i = 0; i + 1 < g.num_modules; ++i)
        out_face[static_cast<std::size_t>(i)] = g.connection_faces[static_cast<std::size_t>(i)];

    for (int i = 0; i < g.num_modules; ++i) {
        const Mat3 rot = rotation_between(octant_direction(out_face[static_cast<std::size_t>(i)]), minus_x);
        const Vec3 center{-spacing * i, 0.0, 0.0};
        chain.modules.push_back(instantiate_module(rot, center));
    }
    chain.head_front_face = opposite_face(out_face[0]);

    // Inter-module links: face out_face[i] of module i meets the face of
    // module i+1 opposite its own outgoing face. Vertices are paired by the
    // bijection minimizing total link length (deterministic tie-break).
    for (int i = 0; i + 1 < g.num_modules; ++i) {
        const auto& fa = canon.faces[static_cast<std::size_t>(out_face[static_cast<std::size_t>(i)])];
        const auto& fb = canon.faces[static_cast<std::size_t>(
            opposite_face(out_face[static_cast<std::size_t>(i + 1)]))];
        const ModuleGeometry& ma = chain.modules[static_cast<std::size_t>(i)];
        const ModuleGeometry& mb = chain.modules[static_cast<std::size_t>(i + 1)];

        std::array<int, 3> perm = {0, 1, 2};
        std::array<int, 3> best = perm;
        double best_total = 1e300;
        do {
            double total = 0.0;
            for (int k = 0; k < 3; ++k)
                total += (ma.node_positions[static_cast<std::size_t>(fa[static_cast<std::size_t>(k)])] -
                          mb.node_positions[static_cast<std::size_t>(
                              fb[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])])])
                             .norm();
            if (total < best_total - 1e-15) {
                best_total = total;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        for (int k = 0; k < 3; ++k) {
            InterModuleLink link;
            link.node_a = i * 12 + fa[static_cast<std::size_t>(k)];
            link.node_b = (i + 1) * 12 + fb[static_cast<std::size_t>(best[static_cast<std::size_t>(k)])];
            const Vec3 pa = ma.node_positions[static_cast<std::size_t>(fa[static_cast<std::size_t>(k)])];
            const Vec3 pb = mb.node_positions[static_cast<std::size_t>(
                fb[static_cast<std::size_t>(best[static_cast<std::size_t>(k)])])];
            link.rest_length = (pa - pb).norm();
            chain.links.push_back(link);
        }
    }

    // Ground the chain (lowest node on z = 0) and put the head centroid on
    // the origin in the plane.
    double min_z = 1e300;
    for (const auto& m : chain.modules)
        for (const auto& p : m.node_positions) min_z = std::min(min_z, p.z);
    Vec3 head_centroid{};
    for (const auto& p : chain.modules[0].node_positions) head_centroid += p;
    head_centroid = head_centroid / 12.0;
    const Vec3 shift{-head_centroid.x, -head_centroid.y, -min_z};
    for (auto& m : chain.modules)
        for (auto& p : m.node_positions) p += shift;

    return chain;
}

} // namespace tsmr
