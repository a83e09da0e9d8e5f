#pragma once

// Origami crease-pattern descriptor for facial landmarks.
//
// A metric "shadow tree" links eyebrow, eye, nose and mouth landmarks. Its
// leaves are laid out on a rectangular Lang polygon whose boundary distances
// dominate tree distances. The polygon is then shrunk at unit speed: all
// edges move inward, consecutive vertices that collide are contracted, and
// non-consecutive vertices whose distance reaches their tree distance
// split the polygon with a new crease. The traced crease pattern is
// encoded as complex node and edge features.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "affect/error.hpp"
#include "affect/face_model.hpp"
#include "affect/preprocess.hpp"
#include "affect/types.hpp"

namespace affect {

// ---------------------------------------------------------------------------
// Shadow tree

struct TreeNode {
    int id = 0;
    Point2 pos;
};

class ShadowTree {
public:
    struct Edge {
        std::size_t a = 0;  // node indices
        std::size_t b = 0;
        double length = 0.0;
    };

    ShadowTree() = default;

    /// Builds a tree from nodes and id-pairs. Edge order defines the planar
    /// embedding: a node's children are visited in the order their edges
    /// were listed. Coincident endpoints get a small positive length.
    ShadowTree(std::vector<TreeNode> nodes, const std::vector<std::pair<int, int>>& edges, int root_id,
               int anchor_gap = -1)
        : nodes_(std::move(nodes)), anchor_gap_(anchor_gap) {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (!index_.emplace(nodes_[i].id, i).second)
                throw ParameterError("shadow tree: duplicate node id " + std::to_string(nodes_[i].id));
        if (edges.size() + 1 != nodes_.size()) throw ParameterError("shadow tree: a tree needs exactly nodes - 1 edges");
        adjacency_.resize(nodes_.size());
        double total = 0.0;
        for (const auto& [ia, ib] : edges) {
            const std::size_t a = index_of(ia), b = index_of(ib);
            if (a == b) throw ParameterError("shadow tree: self edge");
            const double len = distance(nodes_[a].pos, nodes_[b].pos);
            edges_.push_back({a, b, len});
            total += len;
        }
        const double floor_len = 1e-6 * std::max(total / std::max<std::size_t>(edges_.size(), 1), 1e-12);
        for (auto& e : edges_) {
            if (!(e.length > floor_len)) e.length = floor_len;
            adjacency_[e.a].push_back({e.b, e.length});
            adjacency_[e.b].push_back({e.a, e.length});
        }
        root_ = index_of(root_id);
        compute_distances();
        for (const auto& d : dist_)
            for (double v : d)
                if (!std::isfinite(v)) throw ParameterError("shadow tree is not connected");
        compute_leaf_cycle();
    }

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const TreeNode& node(std::size_t idx) const { return nodes_.at(idx); }
    std::size_t index_of(int id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ParameterError("shadow tree: unknown node id " + std::to_string(id));
        return it->second;
    }
    bool is_leaf(std::size_t idx) const { return adjacency_[idx].size() == 1; }
    std::size_t root() const { return root_; }
    int anchor_gap() const { return anchor_gap_; }

    /// Path length between two nodes (by index).
    double tree_distance(std::size_t a, std::size_t b) const { return dist_[a][b]; }

    /// Node indices on the path from a to b, endpoints included.
    std::vector<std::size_t> path(std::size_t a, std::size_t b) const {
        std::vector<std::size_t> p{b};
        while (p.back() != a) p.push_back(parent_[a][p.back()]);
        std::reverse(p.begin(), p.end());
        return p;
    }

    /// Leaves in doubling-cycle order: the order a depth-first walk around the
    /// planar tree meets them.
    const std::vector<std::size_t>& leaf_cycle() const { return leaf_cycle_; }

private:
    void compute_distances() {
        const std::size_t n = nodes_.size();
        dist_.assign(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
        parent_.assign(n, std::vector<std::size_t>(n, n));
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<std::size_t> stack{s};
            dist_[s][s] = 0.0;
            parent_[s][s] = s;
            while (!stack.empty()) {
                const auto u = stack.back();
                stack.pop_back();
                for (const auto& [v, len] : adjacency_[u]) {
                    if (parent_[s][v] != n) continue;
                    parent_[s][v] = u;
                    dist_[s][v] = dist_[s][u] + len;
                    stack.push_back(v);
                }
            }
        }
    }

    void compute_leaf_cycle() {
        leaf_cycle_.clear();
        std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t u, std::size_t from) {
            if (u != root_ && adjacency_[u].size() == 1) {
                leaf_cycle_.push_back(u);
                return;
            }
            for (const auto& [v, len] : adjacency_[u])
                if (v != from) walk(v, u);
        };
        if (adjacency_[root_].size() == 1) leaf_cycle_.push_back(root_);
        walk(root_, nodes_.size());
    }

    std::vector<TreeNode> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
    std::map<int, std::size_t> index_;
    std::vector<std::vector<double>> dist_;
    std::vector<std::vector<std::size_t>> parent_;
    std::vector<std::size_t> leaf_cycle_;
    std::size_t root_ = 0;
    int anchor_gap_ = -1;
};

namespace face_tree {

inline constexpr int kRightEyeCentre = 68;
inline constexpr int kLeftEyeCentre = 69;
inline constexpr int kMouthCentre = 70;

}  // namespace face_tree

/// Symmetric spine/branch tree over the nose-normalised landmarks. The spine
/// runs down the nose bridge (27-28-29-30-33); eyebrows hang off 27 through
/// their inner end, eyes off 28 through their centroid, nostrils off 33, and
/// the outer lip contour off 33 through 51 and the mouth centroid.
/// 35 leaves: 8 eyebrow, 12 eye, 4 nostril, 11 lip points.
inline ShadowTree build_shadow_tree(const Frame& frame) {
    const auto f = normalize_to_nose(frame).points;
    auto centroid = [&f](std::size_t a, std::size_t b) {
        Point2 c{};
        for (std::size_t i = a; i <= b; ++i) c = c + f[i];
        return (1.0 / static_cast<double>(b - a + 1)) * c;
    };
    std::vector<TreeNode> nodes;
    for (int id : {17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40,
                   41, 42, 43, 44, 45, 46, 47, 48, 49, 50, 51, 52, 53, 54, 55, 56, 57, 58, 59})
        nodes.push_back({id, f[static_cast<std::size_t>(id)]});
    nodes.push_back({face_tree::kRightEyeCentre, centroid(36, 41)});
    nodes.push_back({face_tree::kLeftEyeCentre, centroid(42, 47)});
    nodes.push_back({face_tree::kMouthCentre, centroid(48, 59)});

    // Listed in walk order; the leaf cycle goes brows, left eye, left
    // nostril, lips, right nostril, right eye (clockwise in the image).
    const std::vector<std::pair<int, int>> edges{
        {27, 21}, {21, 17}, {21, 18}, {21, 19}, {21, 20},
        {27, 22}, {22, 23}, {22, 24}, {22, 25}, {22, 26},
        {27, 28},
        {28, face_tree::kLeftEyeCentre},
        {face_tree::kLeftEyeCentre, 43}, {face_tree::kLeftEyeCentre, 44}, {face_tree::kLeftEyeCentre, 45},
        {face_tree::kLeftEyeCentre, 46}, {face_tree::kLeftEyeCentre, 47}, {face_tree::kLeftEyeCentre, 42},
        {28, 29}, {29, 30}, {30, 33},
        {33, 35}, {33, 34},
        {33, 51}, {51, face_tree::kMouthCentre},
        {face_tree::kMouthCentre, 52}, {face_tree::kMouthCentre, 53}, {face_tree::kMouthCentre, 54},
        {face_tree::kMouthCentre, 55}, {face_tree::kMouthCentre, 56}, {face_tree::kMouthCentre, 57},
        {face_tree::kMouthCentre, 58}, {face_tree::kMouthCentre, 59}, {face_tree::kMouthCentre, 48},
        {face_tree::kMouthCentre, 49}, {face_tree::kMouthCentre, 50},
        {33, 32}, {33, 31},
        {28, face_tree::kRightEyeCentre},
        {face_tree::kRightEyeCentre, 39}, {face_tree::kRightEyeCentre, 40}, {face_tree::kRightEyeCentre, 41},
        {face_tree::kRightEyeCentre, 36}, {face_tree::kRightEyeCentre, 37}, {face_tree::kRightEyeCentre, 38},
    };
    // The midline of the cycle falls between leaf 3 (landmark 20) and leaf 4 (23).
    return ShadowTree(std::move(nodes), edges, 27, 3);
}

// ---------------------------------------------------------------------------
// Lang polygon

struct LangPolygon {
    ShadowTree tree;
    std::vector<std::size_t> leaves;  // tree node indices, cycle order
    std::vector<Point2> positions;    // clockwise, y up, centred at the origin
    Eigen::MatrixXd tree_dist;        // d_T between polygon leaves
    double width = 0.0;
    double height = 0.0;

    std::size_t size() const { return leaves.size(); }
    double diagonal() const { return std::hypot(width, height); }

    /// min over leaf pairs of d_P - d_T
    double min_slack() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = a + 1; b < size(); ++b)
                m = std::min(m, distance(positions[a], positions[b]) - tree_dist(static_cast<Eigen::Index>(a),
                                                                                   static_cast<Eigen::Index>(b)));
        return m;
    }

    /// Polygon with explicit leaf positions; checks d_P >= d_T.
    static LangPolygon from_positions(ShadowTree tree, std::vector<std::size_t> leaves, std::vector<Point2> positions,
                                      double width, double height) {
        if (leaves.size() != positions.size() || leaves.size() < 3)
            throw ParameterError("Lang polygon needs at least 3 leaves with positions");
        LangPolygon p{std::move(tree), std::move(leaves), std::move(positions), {}, width, height};
        const auto n = static_cast<Eigen::Index>(p.size());
        p.tree_dist.resize(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b)
                p.tree_dist(a, b) = p.tree.tree_distance(p.leaves[static_cast<std::size_t>(a)], p.leaves[static_cast<std::size_t>(b)]);
        const double tol = 1e-9 * std::max(1.0, p.diagonal());
        if (p.min_slack() < -tol) throw ParameterError("Lang polygon violates d_P >= d_T");
        return p;
    }
};

namespace detail {

/// Point at arc length s along the clockwise boundary of a w x h rectangle
/// centred at the origin, starting from the top-left corner.
inline Point2 rectangle_point(double s, double w, double h) {
    const double per = 2.0 * (w + h);
    s = std::fmod(s, per);
    if (s < 0) s += per;
    if (s <= w) return {-w / 2 + s, h / 2};
    s -= w;
    if (s <= h) return {w / 2, h / 2 - s};
    s -= h;
    if (s <= w) return {w / 2 - s, -h / 2};
    s -= w;
    return {-w / 2, -h / 2 + s};
}

}  // namespace detail

/// Lays the tree leaves around a 4:3 rectangle in doubling-cycle order with
/// arc spacing proportional to consecutive tree distances, then scales the
/// rectangle by the smallest factor giving d_P >= d_T for every leaf pair.
inline LangPolygon build_lang_polygon(const ShadowTree& tree) {
    const auto& cycle = tree.leaf_cycle();
    const std::size_t n = cycle.size();
    if (n < 3) throw ParameterError("Lang polygon needs a tree with at least 3 leaves");
    std::vector<double> arc(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) arc[i] = arc[i - 1] + tree.tree_distance(cycle[i - 1], cycle[i]);
    const double perimeter = arc[n - 1] + tree.tree_distance(cycle[n - 1], cycle[0]);
    const double unit = perimeter / 14.0;
    double w = 4.0 * unit, h = 3.0 * unit;

    double shift = 0.0;
    if (tree.anchor_gap() >= 0 && static_cast<std::size_t>(tree.anchor_gap()) + 1 < n) {
        const auto a = static_cast<std::size_t>(tree.anchor_gap());
        shift = w / 2 - 0.5 * (arc[a] + arc[a + 1]);
    }
    std::vector<Point2> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = detail::rectangle_point(arc[i] + shift, w, h);

    double scale = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double dp = distance(pos[a], pos[b]);
            const double dt = tree.tree_distance(cycle[a], cycle[b]);
            scale = std::max(scale, dp > 0 ? dt / dp : std::numeric_limits<double>::infinity());
        }
    if (!std::isfinite(scale) || !(scale > 0)) throw DegenerateInput("Lang polygon: coincident leaves on the boundary");
    scale *= 1.0 + 1e-12;
    for (auto& p : pos) p = scale * p;
    return LangPolygon::from_positions(tree, cycle, std::move(pos), scale * w, scale * h);
}

// ---------------------------------------------------------------------------
// Crease pattern

enum class CreaseNodeKind { leaf, contraction, split, tree_internal, bend, final };
enum class CreaseEventKind { contraction, split, collapse };

inline std::string_view to_string(CreaseNodeKind k) {
    switch (k) {
        case CreaseNodeKind::leaf: return "leaf";
        case CreaseNodeKind::contraction: return "contraction";
        case CreaseNodeKind::split: return "split";
        case CreaseNodeKind::tree_internal: return "tree_internal";
        case CreaseNodeKind::bend: return "bend";
        case CreaseNodeKind::final: return "final";
    }
    return "?";
}

inline std::string_view to_string(CreaseEventKind k) {
    switch (k) {
        case CreaseEventKind::contraction: return "contraction";
        case CreaseEventKind::split: return "split";
        case CreaseEventKind::collapse: return "collapse";
    }
    return "?";
}

struct CreaseNode {
    int id = 0;
    Point2 pos;
    CreaseNodeKind kind = CreaseNodeKind::leaf;
    int tree_id = -1;  // shadow-tree node id for leaf and interpolated nodes
};

struct CreaseEvent {
    int tick = 0;
    double offset = 0.0;  // inward distance travelled by the edges
    CreaseEventKind kind = CreaseEventKind::contraction;
    int polygon = 0;
    std::vector<int> nodes;     // crease nodes created or joined
    std::vector<int> tree_ids;  // shadow-tree leaves involved
};

struct CreasePattern {
    std::vector<CreaseNode> nodes;
    std::vector<std::pair<int, int>> edges;  // (a, b) with a < b
    std::vector<CreaseEvent> events;

    std::size_t count(CreaseEventKind k) const {
        return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [k](const auto& e) { return e.kind == k; }));
    }

    bool connected() const {
        if (nodes.empty()) return true;
        std::map<int, std::size_t> idx;
        for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i].id] = i;
        std::vector<std::vector<std::size_t>> adj(nodes.size());
        for (auto [a, b] : edges) {
            adj[idx.at(a)].push_back(idx.at(b));
            adj[idx.at(b)].push_back(idx.at(a));
        }
        std::vector<bool> seen(nodes.size(), false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t reached = 1;
        while (!stack.empty()) {
            auto u = stack.back();
            stack.pop_back();
            for (auto v : adj[u])
                if (!seen[v]) {
                    seen[v] = true;
                    ++reached;
                    stack.push_back(v);
                }
        }
        return reached == nodes.size();
    }

    std::size_t degree(int id) const {
        return static_cast<std::size_t>(
            std::count_if(edges.begin(), edges.end(), [id](auto e) { return e.first == id || e.second == id; }));
    }
};

struct ShrinkParams {
    double step = 0.0;  // offset advanced per tick
    double th = 0.0;    // event tolerance
    int max_ticks = 100000;

    /// step = 1e-3 x diagonal, th = 1e-6 x diagonal
    static ShrinkParams for_polygon(const LangPolygon& poly, int max_ticks = 100000) {
        return {1e-3 * poly.diagonal(), 1e-6 * poly.diagonal(), max_ticks};
    }

    void validate() const {
        if (!(step > 0.0) || !(th > 0.0) || max_ticks <= 0)
            throw ParameterError("shrink parameters need step > 0, th > 0 and max_ticks > 0");
    }
};

/// Per-run measurements used by the geometric test suites.
struct ShrinkDiagnostics {
    int ticks = 0;
    double final_offset = 0.0;
    /// min over ticks and non-consecutive vertex pairs of d_P - d_T
    double min_split_margin = std::numeric_limits<double>::infinity();
    /// largest relative growth of the total active perimeter during a motion step
    double max_perimeter_growth = 0.0;
    std::size_t initial_vertices = 0;
};

class ShrinkNonTermination : public Error {
public:
    ShrinkNonTermination(const std::string& what, CreasePattern partial) : Error(what), partial_(std::move(partial)) {}
    const CreasePattern& partial() const { return partial_; }

private:
    CreasePattern partial_;
};

namespace detail {

class ShrinkSimulation {
public:
    ShrinkSimulation(const LangPolygon& poly, const ShrinkParams& params) : poly_(poly), params_(params) {
        Polygon root{next_polygon_id_++, {}};
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            Vertex v;
            v.members = {i};
            v.pos = poly.positions[i];
            v.out_dir = unit(poly.positions[(i + 1) % n] - poly.positions[i]);
            v.origin = add_node(v.pos, CreaseNodeKind::leaf, poly.tree.node(poly.leaves[i]).id);
            root.verts.push_back(std::move(v));
        }
        update_velocities(root, false);
        active_.push_back(std::move(root));
        diag_.initial_vertices = n;
    }

    CreasePattern run(ShrinkDiagnostics* diag) {
        process_events();
        record_margin();
        while (!active_.empty()) {
            if (tick_ >= params_.max_ticks) {
                if (diag) *diag = diag_;
                throw ShrinkNonTermination("crease-pattern shrinking exceeded " + std::to_string(params_.max_ticks) +
                                               " ticks",
                                           pattern_);
            }
            ++tick_;
            double dt = params_.step;
            for (const auto& p : active_) dt = std::min(dt, first_event_time(p, dt));
            const double per_before = total_perimeter();
            for (auto& p : active_)
                for (auto& v : p.verts) v.pos = v.pos + dt * v.vel;
            offset_ += dt;
            const double per_after = total_perimeter();
            if (per_before > 0)
                diag_.max_perimeter_growth = std::max(diag_.max_perimeter_growth, (per_after - per_before) / per_before);
            process_events();
            record_margin();
        }
        diag_.ticks = tick_;
        diag_.final_offset = offset_;
        if (diag) *diag = diag_;
        return std::move(pattern_);
    }

private:
    struct Vertex {
        std::vector<std::size_t> members;  // polygon leaf indices collapsed into this vertex
        Point2 pos;
        Point2 vel;
        Point2 out_dir;  // direction of the boundary edge to the next vertex
        int origin = -1;  // crease node where the current straight trajectory began
    };

    struct Polygon {
        int id = 0;
        std::vector<Vertex> verts;
    };

    static Point2 unit(Point2 d) {
        const double n = norm(d);
        return n > 0 ? (1.0 / n) * d : Point2{0, 0};
    }

    // Inward normal of a clockwise (y-up) boundary edge: its right-hand side.
    static Point2 inward(Point2 dir) { return {dir.y, -dir.x}; }

    int add_node(Point2 p, CreaseNodeKind kind, int tree_id = -1) {
        const int id = static_cast<int>(pattern_.nodes.size());
        pattern_.nodes.push_back({id, p, kind, tree_id});
        return id;
    }

    void connect(int a, int b) {
        if (a == b) return;
        if (a > b) std::swap(a, b);
        if (edge_set_.insert({a, b}).second) pattern_.edges.push_back({a, b});
    }

    Point2 node_pos(int id) const { return pattern_.nodes[static_cast<std::size_t>(id)].pos; }

    /// Ends the vertex's current trajectory at a crease node located at its
    /// position, reusing the origin when the vertex has not moved.
    int end_trajectory(Vertex& v, CreaseNodeKind kind) {
        if (distance(node_pos(v.origin), v.pos) <= params_.th) return v.origin;
        const int node = add_node(v.pos, kind);
        connect(v.origin, node);
        v.origin = node;
        return node;
    }

    // Returns false if some vertex has antiparallel edges (degenerate polygon).
    bool update_velocities(Polygon& p, bool bend_nodes) {
        const std::size_t n = p.verts.size();
        bool ok = true;
        for (std::size_t i = 0; i < n; ++i) {
            auto& v = p.verts[i];
            const Point2 n_in = inward(p.verts[(i + n - 1) % n].out_dir);
            const Point2 n_out = inward(v.out_dir);
            // 1 + n_in . n_out, written as |n_in + n_out|^2 / 2 to keep sharp corners accurate
            const Point2 sum = n_in + n_out;
            const double denom = 0.5 * dot(sum, sum);
            Point2 vel{0, 0};
            if (denom > 1e-12)
                vel = (1.0 / denom) * sum;
            else
                ok = false;
            if (bend_nodes && norm(vel - v.vel) > 1e-12 * (1.0 + norm(v.vel))) end_trajectory(v, CreaseNodeKind::bend);
            v.vel = vel;
        }
        return ok;
    }

    double member_tree_distance(const Vertex& a, const Vertex& b, std::size_t* la = nullptr,
                                 std::size_t* lb = nullptr) const {
        double best = -std::numeric_limits<double>::infinity();
        for (auto x : a.members)
            for (auto y : b.members) {
                const double d = poly_.tree_dist(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                if (d > best) {
                    best = d;
                    if (la) *la = x;
                    if (lb) *lb = y;
                }
            }
        return best;
    }

    static bool consecutive(std::size_t i, std::size_t k, std::size_t n) {
        return (i + 1) % n == k || (k + 1) % n == i;
    }

    static double signed_area(const std::vector<Vertex>& vs) {
        double a = 0.0;
        for (std::size_t i = 0; i < vs.size(); ++i) a += cross(vs[i].pos, vs[(i + 1) % vs.size()].pos);
        return -0.5 * a;  // clockwise polygons have positive area
    }

    static double perimeter(const std::vector<Vertex>& vs) {
        double s = 0.0;
        for (std::size_t i = 0; i < vs.size(); ++i) s += distance(vs[i].pos, vs[(i + 1) % vs.size()].pos);
        return s;
    }

    double total_perimeter() const {
        double s = 0.0;
        for (const auto& p : active_) s += perimeter(p.verts);
        return s;
    }

    /// Smallest t in [0, limit] with a t^2 + b t + c <= 0, given c > 0.
    static std::optional<double> first_entry(double a, double b, double c, double limit) {
        if (c <= 0) return 0.0;
        constexpr double eps = 1e-300;
        if (std::abs(a) < eps) {
            if (b >= 0) return std::nullopt;
            const double t = -c / b;
            return t <= limit ? std::optional<double>(t) : std::nullopt;
        }
        const double disc = b * b - 4 * a * c;
        if (disc < 0) return std::nullopt;
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (b + std::copysign(sq, b));
        double r1 = q / a, r2 = (q != 0) ? c / q : r1;
        if (r1 > r2) std::swap(r1, r2);
        // The polynomial is <= 0 between the roots when a > 0, outside otherwise.
        double t = std::numeric_limits<double>::infinity();
        if (a > 0) {
            if (r2 >= 0) t = std::max(r1, 0.0);
        } else {
            if (r1 >= 0) t = r1;
            else if (r2 >= 0) t = r2;  // c > 0 and a < 0 imply r1 < 0 < r2
        }
        if (t <= limit) return t;
        return std::nullopt;
    }

    double first_event_time(const Polygon& p, double limit) const {
        const auto& vs = p.verts;
        const std::size_t n = vs.size();
        const double half_th = 0.5 * params_.th;
        double best = limit;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = vs[i];
            for (std::size_t k = i + 1; k < n; ++k) {
                const auto& b = vs[k];
                const Point2 dp = b.pos - a.pos, dv = b.vel - a.vel;
                if (consecutive(i, k, n)) {
                    // |dp + dv t| <= th / 2
                    auto t = first_entry(dot(dv, dv), 2 * dot(dp, dv), dot(dp, dp) - half_th * half_th, best);
                    if (t) best = std::min(best, *t);
                } else if (!a.members.empty() && !b.members.empty()) {
                    // |dp + dv t| <= d_T + th / 2
                    const double c = member_tree_distance(a, b) + half_th;
                    auto t = first_entry(dot(dv, dv), 2 * dot(dp, dv), dot(dp, dp) - c * c, best);
                    if (t) best = std::min(best, *t);
                }
            }
        }
        // Collapse: area(t) <= th * perimeter / 2.
        double a0 = 0, a1 = 0, a2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& u = vs[i];
            const auto& w = vs[(i + 1) % n];
            a0 += cross(u.pos, w.pos);
            a1 += cross(u.pos, w.vel) + cross(u.vel, w.pos);
            a2 += cross(u.vel, w.vel);
        }
        const double eps_area = 0.5 * half_th * perimeter(vs);
        auto t = first_entry(-0.5 * a2, -0.5 * a1, -0.5 * a0 - eps_area, best);
        if (t) best = std::min(best, *t);
        return best;
    }

    void record_margin() {
        for (const auto& p : active_) {
            const std::size_t n = p.verts.size();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = i + 1; k < n; ++k) {
                    if (consecutive(i, k, n)) continue;
                    const double m =
                        distance(p.verts[i].pos, p.verts[k].pos) - member_tree_distance(p.verts[i], p.verts[k]);
                    diag_.min_split_margin = std::min(diag_.min_split_margin, m);
                }
        }
    }

    void log_event(CreaseEventKind kind, int polygon, std::vector<int> nodes, std::vector<int> tree_ids) {
        pattern_.events.push_back({tick_, offset_, kind, polygon, std::move(nodes), std::move(tree_ids)});
    }

    std::vector<int> member_ids(const Vertex& v) const {
        std::vector<int> ids;
        for (auto m : v.members) ids.push_back(poly_.tree.node(poly_.leaves[m]).id);
        return ids;
    }

    void finalize(Polygon& p) {
        std::vector<int> ends;
        std::vector<int> tree_ids;
        for (auto& v : p.verts) {
            int node = -1;
            for (int e : ends)
                if (distance(node_pos(e), v.pos) <= params_.th) node = e;
            if (node < 0) {
                if (distance(node_pos(v.origin), v.pos) <= params_.th) {
                    node = v.origin;
                } else {
                    node = add_node(v.pos, CreaseNodeKind::final);
                }
                if (std::find(ends.begin(), ends.end(), node) == ends.end()) ends.push_back(node);
            }
            connect(v.origin, node);
            v.origin = node;
            for (int id : member_ids(v)) tree_ids.push_back(id);
        }
        // A collapsed polygon is a point or a segment: chain its end nodes
        // along the direction of largest spread.
        if (ends.size() > 1) {
            std::size_t fa = 0, fb = 0;
            double far = -1;
            for (std::size_t a = 0; a < ends.size(); ++a)
                for (std::size_t b = a + 1; b < ends.size(); ++b) {
                    const double d = distance(node_pos(ends[a]), node_pos(ends[b]));
                    if (d > far) {
                        far = d;
                        fa = a;
                        fb = b;
                    }
                }
            const Point2 o = node_pos(ends[fa]);
            const Point2 axis = unit(node_pos(ends[fb]) - o);
            std::stable_sort(ends.begin(), ends.end(),
                             [&](int x, int y) { return dot(node_pos(x) - o, axis) < dot(node_pos(y) - o, axis); });
            for (std::size_t i = 0; i + 1 < ends.size(); ++i) connect(ends[i], ends[i + 1]);
        }
        log_event(CreaseEventKind::collapse, p.id, ends, tree_ids);
    }

    // Merges vertices i and i+1 into one; the merged vertex keeps both leaf sets.
    void contract(Polygon& p, std::size_t i) {
        const std::size_t n = p.verts.size();
        const std::size_t k = (i + 1) % n;
        auto& a = p.verts[i];
        auto& b = p.verts[k];
        const Point2 mid = 0.5 * (a.pos + b.pos);
        int node;
        if (distance(node_pos(a.origin), mid) <= params_.th)
            node = a.origin;
        else if (distance(node_pos(b.origin), mid) <= params_.th)
            node = b.origin;
        else
            node = add_node(mid, CreaseNodeKind::contraction);
        connect(a.origin, node);
        connect(b.origin, node);
        auto ids = member_ids(a);
        for (int id : member_ids(b)) ids.push_back(id);

        Vertex merged;
        merged.members = a.members;
        merged.members.insert(merged.members.end(), b.members.begin(), b.members.end());
        std::sort(merged.members.begin(), merged.members.end());
        merged.pos = mid;
        merged.out_dir = b.out_dir;
        merged.origin = node;
        merged.vel = a.vel;
        if (k == 0) {
            p.verts[i] = std::move(merged);
            p.verts.erase(p.verts.begin());
        } else {
            p.verts[i] = std::move(merged);
            p.verts.erase(p.verts.begin() + static_cast<std::ptrdiff_t>(k));
        }
        log_event(CreaseEventKind::contraction, p.id, {node}, ids);
    }

    // Ends both trajectories and lays the crease between them. Internal tree
    // nodes on the leaf path are placed in proportion to their tree distance
    // from the first leaf; `via`, a node on the segment, is threaded in.
    std::vector<int> lay_crease(Vertex& a, Vertex& b, int via = -1) {
        const int na = end_trajectory(a, CreaseNodeKind::split);
        const int nb = end_trajectory(b, CreaseNodeKind::split);
        std::size_t la = 0, lb = 0;
        member_tree_distance(a, b, &la, &lb);
        const auto path = poly_.tree.path(poly_.leaves[la], poly_.leaves[lb]);
        const double total = poly_.tree.tree_distance(path.front(), path.back());
        const Point2 ab = b.pos - a.pos;
        const double via_frac = via < 0 ? 2.0 : dot(ab, ab) > 0 ? dot(node_pos(via) - a.pos, ab) / dot(ab, ab) : 0.5;
        int prev = na;
        std::vector<int> created{na, nb};
        for (std::size_t s = 1; s + 1 < path.size(); ++s) {
            const double frac = total > 0 ? poly_.tree.tree_distance(path.front(), path[s]) / total : 0.5;
            if (via >= 0 && frac > via_frac) {
                connect(prev, via);
                prev = via;
                via = -1;
            }
            const int node = add_node(a.pos + frac * ab, CreaseNodeKind::tree_internal, poly_.tree.node(path[s]).id);
            connect(prev, node);
            created.push_back(node);
            prev = node;
        }
        if (via >= 0) {
            connect(prev, via);
            prev = via;
        }
        connect(prev, nb);
        return created;
    }

    // Splits polygon p along vertices i < k; returns the two sub-polygons.
    std::pair<Polygon, Polygon> split(Polygon& p, std::size_t i, std::size_t k) {
        auto& a = p.verts[i];
        auto& b = p.verts[k];
        const auto created = lay_crease(a, b);

        Polygon first{next_polygon_id_++, {}};
        Polygon second{next_polygon_id_++, {}};
        const std::size_t n = p.verts.size();
        for (std::size_t s = i; s <= k; ++s) first.verts.push_back(p.verts[s]);
        first.verts.back().out_dir = unit(a.pos - b.pos);
        for (std::size_t s = k; s != i; s = (s + 1) % n) second.verts.push_back(p.verts[s]);
        second.verts.push_back(p.verts[i]);
        second.verts.back().out_dir = unit(b.pos - a.pos);

        auto ids = member_ids(a);
        for (int id : member_ids(b)) ids.push_back(id);
        log_event(CreaseEventKind::split, p.id, created, ids);
        return {std::move(first), std::move(second)};
    }

    // Two crossing chords (i, k) and (j, l), i < j < k < l, that are tight at
    // the same offset. Both creases are laid; they meet at a new node, which
    // becomes a leafless vertex of the four sub-polygons around it.
    std::vector<Polygon> split_crossing(Polygon& p, std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        const Point2 a = p.verts[i].pos, ac = p.verts[k].pos - a;
        const Point2 b = p.verts[j].pos, be = p.verts[l].pos - b;
        const double den = cross(ac, be);
        const double s = den != 0 ? std::clamp(cross(b - a, be) / den, 0.0, 1.0) : 0.5;
        const int hub_node = add_node(a + s * ac, CreaseNodeKind::split);
        for (auto [u, w] : {std::pair{i, k}, std::pair{j, l}}) {
            auto created = lay_crease(p.verts[u], p.verts[w], hub_node);
            created.push_back(hub_node);
            auto ids = member_ids(p.verts[u]);
            for (int id : member_ids(p.verts[w])) ids.push_back(id);
            log_event(CreaseEventKind::split, p.id, created, ids);
        }
        Vertex hub;
        hub.pos = node_pos(hub_node);
        hub.origin = hub_node;
        const std::size_t n = p.verts.size();
        std::vector<Polygon> parts;
        for (auto [from, to] : {std::pair{i, j}, std::pair{j, k}, std::pair{k, l}, std::pair{l, i}}) {
            Polygon q{next_polygon_id_++, {}};
            for (std::size_t v = from;; v = (v + 1) % n) {
                q.verts.push_back(p.verts[v]);
                if (v == to) break;
            }
            q.verts.back().out_dir = unit(hub.pos - q.verts.back().pos);
            hub.out_dir = unit(q.verts.front().pos - hub.pos);
            q.verts.push_back(hub);
            parts.push_back(std::move(q));
        }
        return parts;
    }

    // A tight chord crossing `pick` within the tolerance, if any.
    std::optional<std::pair<std::size_t, std::size_t>> crossing_chord(const Polygon& p, std::pair<std::size_t, std::size_t> pick,
                                                                      double th) const {
        const std::size_t n = p.verts.size();
        const auto [i, k] = pick;
        auto inside = [&](std::size_t v) { return v > i && v < k; };
        std::optional<std::pair<std::size_t, std::size_t>> out;
        double best = th;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = j + 1; l < n; ++l) {
                if (consecutive(j, l, n) || j == i || j == k || l == i || l == k || inside(j) == inside(l)) continue;
                const double m = distance(p.verts[j].pos, p.verts[l].pos) - member_tree_distance(p.verts[j], p.verts[l]);
                if (m <= best) {
                    if (!out || m < best) out = {j, l};
                    best = std::min(best, m);
                }
            }
        return out;
    }

    /// Handles every event whose condition holds at the current offset.
    void process_events() {
        const double th = params_.th;
        std::vector<Polygon> queue = std::move(active_);
        active_.clear();
        std::reverse(queue.begin(), queue.end());
        while (!queue.empty()) {
            Polygon p = std::move(queue.back());
            queue.pop_back();
            bool changed = true;
            bool done = false;
            while (changed && !done) {
                changed = false;
                const std::size_t n = p.verts.size();
                if (n <= 2 || signed_area(p.verts) <= 0.5 * th * perimeter(p.verts)) {
                    finalize(p);
                    done = true;
                    break;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    if (distance(p.verts[i].pos, p.verts[(i + 1) % n].pos) <= th) {
                        contract(p, i);
                        changed = true;
                        break;
                    }
                }
                if (changed) {
                    if (!update_velocities(p, true)) {
                        finalize(p);
                        done = true;
                    }
                    continue;
                }
                double best = th;
                std::optional<std::pair<std::size_t, std::size_t>> pick;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = i + 1; k < n; ++k) {
                        if (consecutive(i, k, n)) continue;
                        const double m = distance(p.verts[i].pos, p.verts[k].pos) -
                                         member_tree_distance(p.verts[i], p.verts[k]);
                        if (m <= best) {
                            if (!pick || m < best) pick = {i, k};
                            best = std::min(best, m);
                        }
                    }
                if (pick) {
                    if (auto other = crossing_chord(p, *pick, th)) {
                        std::array<std::size_t, 4> v{pick->first, pick->second, other->first, other->second};
                        std::sort(v.begin(), v.end());
                        auto parts = split_crossing(p, v[0], v[1], v[2], v[3]);
                        for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
                            if (update_velocities(*it, true))
                                queue.push_back(std::move(*it));
                            else
                                finalize(*it);
                        }
                        done = true;
                        break;
                    }
                    auto [first, second] = split(p, pick->first, pick->second);
                    bool ok1 = update_velocities(first, true);
                    bool ok2 = update_velocities(second, true);
                    if (!ok1) finalize(first);
                    if (!ok2) finalize(second);
                    // Re-examine both halves at this offset, in id order.
                    if (ok2) queue.push_back(std::move(second));
                    if (ok1) queue.push_back(std::move(first));
                    done = true;
                }
            }
            if (!done) active_.push_back(std::move(p));
        }
        std::sort(active_.begin(), active_.end(), [](const Polygon& x, const Polygon& y) { return x.id < y.id; });
    }

    const LangPolygon& poly_;
    ShrinkParams params_;
    CreasePattern pattern_;
    std::set<std::pair<int, int>> edge_set_;
    std::vector<Polygon> active_;
    ShrinkDiagnostics diag_;
    int next_polygon_id_ = 0;
    int tick_ = 0;
    double offset_ = 0.0;
};

}  // namespace detail

/// Shrinks the Lang polygon into a crease pattern.
inline CreasePattern shrink(const LangPolygon& poly, const ShrinkParams& params, ShrinkDiagnostics* diag = nullptr) {
    params.validate();
    if (poly.size() < 3) throw ParameterError("shrink needs a polygon with at least 3 vertices");
    detail::ShrinkSimulation sim(poly, params);
    return sim.run(diag);
}

inline CreasePattern shrink(const LangPolygon& poly) { return shrink(poly, ShrinkParams::for_polygon(poly)); }

// ---------------------------------------------------------------------------
// Encoding

struct CreaseFeatures {
    std::vector<std::complex<double>> nodes;
    std::vector<std::complex<double>> edges;
};

inline constexpr std::size_t kDefaultOrigamiNodes = 48;
inline constexpr std::size_t kDefaultOrigamiEdges = 64;

/// Nodes are renumbered by their (y, x) rank and encoded as x + i y; edges
/// become id_lo + i id_hi over those ranks. Both lists are truncated or
/// zero-padded to the target lengths.
inline CreaseFeatures encode_crease_features(const CreasePattern& cp, std::size_t target_nodes,
                                             std::size_t target_edges) {
    if (target_nodes < 1 || target_edges < 1) throw ParameterError("crease encoding targets must be >= 1");
    // rows closer than a billionth of the pattern size count as level
    Point2 lo{0, 0}, hi{0, 0};
    if (!cp.nodes.empty()) lo = hi = cp.nodes.front().pos;
    for (const auto& n : cp.nodes) {
        lo = {std::min(lo.x, n.pos.x), std::min(lo.y, n.pos.y)};
        hi = {std::max(hi.x, n.pos.x), std::max(hi.y, n.pos.y)};
    }
    const double grid = std::max(1e-9 * norm(hi - lo), 1e-300);
    std::vector<long long> row(cp.nodes.size());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = std::llround((cp.nodes[i].pos.y - lo.y) / grid);
    std::vector<std::size_t> order(cp.nodes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (row[a] != row[b]) return row[a] < row[b];
        return cp.nodes[a].pos.x < cp.nodes[b].pos.x;
    });
    std::map<int, int> rank;
    for (std::size_t r = 0; r < order.size(); ++r) rank[cp.nodes[order[r]].id] = static_cast<int>(r);

    CreaseFeatures out;
    out.nodes.assign(target_nodes, {0.0, 0.0});
    for (std::size_t r = 0; r < order.size() && r < target_nodes; ++r)
        out.nodes[r] = {cp.nodes[order[r]].pos.x, cp.nodes[order[r]].pos.y};

    std::vector<std::pair<int, int>> edges;
    for (auto [a, b] : cp.edges) {
        int ra = rank.at(a), rb = rank.at(b);
        if (ra > rb) std::swap(ra, rb);
        edges.push_back({ra, rb});
    }
    std::sort(edges.begin(), edges.end());
    out.edges.assign(target_edges, {0.0, 0.0});
    for (std::size_t e = 0; e < edges.size() && e < target_edges; ++e)
        out.edges[e] = {static_cast<double>(edges[e].first), static_cast<double>(edges[e].second)};
    return out;
}

inline CreasePattern face_crease_pattern(const Frame& frame, ShrinkDiagnostics* diag = nullptr) {
    const auto tree = build_shadow_tree(frame);
    const auto poly = build_lang_polygon(tree);
    return shrink(poly, ShrinkParams::for_polygon(poly), diag);
}

/// Full origami descriptor of one frame: real and imaginary parts of the
/// node and edge encodings, interleaved.
inline FeatureVector origami_descriptor(const Frame& frame, std::size_t target_nodes = kDefaultOrigamiNodes,
                                        std::size_t target_edges = kDefaultOrigamiEdges) {
    const auto enc = encode_crease_features(face_crease_pattern(frame), target_nodes, target_edges);
    FeatureVector fv{{}, FeatureTag::origami};
    fv.values.reserve(2 * (target_nodes + target_edges));
    for (auto z : enc.nodes) fv.values.insert(fv.values.end(), {z.real(), z.imag()});
    for (auto z : enc.edges) fv.values.insert(fv.values.end(), {z.real(), z.imag()});
    return fv;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const CreasePattern& cp) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : cp.nodes) {
        nlohmann::json jn{{"id", n.id}, {"x", n.pos.x}, {"y", n.pos.y}, {"kind", std::string(to_string(n.kind))}};
        if (n.tree_id >= 0) jn["tree_id"] = n.tree_id;
        j["nodes"].push_back(std::move(jn));
    }
    j["edges"] = nlohmann::json::array();
    for (auto [a, b] : cp.edges) j["edges"].push_back({a, b});
    j["events"] = nlohmann::json::array();
    for (const auto& e : cp.events)
        j["events"].push_back({{"tick", e.tick},
                               {"offset", e.offset},
                               {"kind", std::string(to_string(e.kind))},
                               {"polygon", e.polygon},
                               {"nodes", e.nodes},
                               {"tree_ids", e.tree_ids}});
    return j;
}

inline CreasePattern crease_pattern_from_json(const nlohmann::json& j) {
    CreasePattern cp;
    try {
        for (const auto& jn : j.at("nodes")) {
            CreaseNode n;
            n.id = jn.at("id").get<int>();
            n.pos = {jn.at("x").get<double>(), jn.at("y").get<double>()};
            const auto kind = jn.value("kind", std::string("leaf"));
            for (auto k : {CreaseNodeKind::leaf, CreaseNodeKind::contraction, CreaseNodeKind::split,
                           CreaseNodeKind::tree_internal, CreaseNodeKind::bend, CreaseNodeKind::final})
                if (to_string(k) == kind) n.kind = k;
            n.tree_id = jn.value("tree_id", -1);
            cp.nodes.push_back(n);
        }
        for (const auto& je : j.at("edges")) cp.edges.push_back({je.at(0).get<int>(), je.at(1).get<int>()});
        if (j.contains("events"))
            for (const auto& je : j["events"]) {
                CreaseEvent e;
                e.tick = je.at("tick").get<int>();
                e.offset = je.at("offset").get<double>();
                const auto kind = je.at("kind").get<std::string>();
                e.kind = kind == "split" ? CreaseEventKind::split
                                         : kind == "collapse" ? CreaseEventKind::collapse : CreaseEventKind::contraction;
                e.polygon = je.value("polygon", 0);
                e.nodes = je.value("nodes", std::vector<int>{});
                e.tree_ids = je.value("tree_ids", std::vector<int>{});
                cp.events.push_back(std::move(e));
            }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("crease pattern JSON: ") + e.what());
    }
    return cp;
}

inline std::string render_svg(const CreasePattern& cp, double size_px = 600.0) {
    double minx = 0, maxx = 0, miny = 0, maxy = 0;
    bool first = true;
    for (const auto& n : cp.nodes) {
        if (first) {
            minx = maxx = n.pos.x;
            miny = maxy = n.pos.y;
            first = false;
        }
        minx = std::min(minx, n.pos.x);
        maxx = std::max(maxx, n.pos.x);
        miny = std::min(miny, n.pos.y);
        maxy = std::max(maxy, n.pos.y);
    }
    const double span = std::max({maxx - minx, maxy - miny, 1e-12});
    const double margin = 0.05 * size_px;
    const double s = (size_px - 2 * margin) / span;
    std::map<int, Point2> screen;
    for (const auto& n : cp.nodes) screen[n.id] = {margin + (n.pos.x - minx) * s, margin + (maxy - n.pos.y) * s};

    std::ostringstream out;
    out.precision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px << "\" height=\"" << size_px
        << "\" viewBox=\"0 0 " << size_px << ' ' << size_px << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (auto [a, b] : cp.edges) {
        const auto pa = screen.at(a), pb = screen.at(b);
        out << "<line x1=\"" << pa.x << "\" y1=\"" << pa.y << "\" x2=\"" << pb.x << "\" y2=\"" << pb.y
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    }
    for (const auto& n : cp.nodes) {
        const auto p = screen.at(n.id);
        const char* colour = n.kind == CreaseNodeKind::leaf      ? "red"
                             : n.kind == CreaseNodeKind::split   ? "blue"
                             : n.kind == CreaseNodeKind::tree_internal ? "green"
                                                                  : "gray";
        out << "<circle cx=\"" << p.x << "\" cy=\"" << p.y << "\" r=\"2.5\" fill=\"" << colour << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace affect
