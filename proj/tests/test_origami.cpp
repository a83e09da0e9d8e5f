#include <gtest/gtest.h>

#include "support.hpp"

using namespace affect;
using testing_support::Rng;

namespace {

// Star tree: centre 0, leaves 1..n with legs of the given length.
ShadowTree star_tree(int leaves, double leg) {
    std::vector<TreeNode> nodes{{0, {0, 0}}};
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i <= leaves; ++i) {
        const double a = 2 * std::numbers::pi * i / leaves;
        nodes.push_back({i, {leg * std::cos(a), leg * std::sin(a)}});
        edges.push_back({0, i});
    }
    return ShadowTree(nodes, edges, 0);
}

LangPolygon rectangle(double w, double h, double leg) {
    auto tree = star_tree(4, leg);
    std::vector<std::size_t> leaves;
    for (int i = 1; i <= 4; ++i) leaves.push_back(tree.index_of(i));
    return LangPolygon::from_positions(tree, leaves, {{-w / 2, h / 2}, {w / 2, h / 2}, {w / 2, -h / 2}, {-w / 2, -h / 2}},
                                       w, h);
}

std::vector<Point2> interior_nodes(const CreasePattern& cp) {
    std::vector<Point2> out;
    for (const auto& n : cp.nodes)
        if (n.kind != CreaseNodeKind::leaf) out.push_back(n.pos);
    return out;
}

double nearest(const std::vector<Point2>& pts, Point2 q) {
    double d = 1e300;
    for (auto p : pts) d = std::min(d, distance(p, q));
    return d;
}

// Largest distance in a greedy nearest-point matching of two equal-size sets.
double multiset_gap(std::vector<Point2> a, std::vector<Point2> b) {
    if (a.size() != b.size()) return 1e300;
    double worst = 0;
    for (auto p : a) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < b.size(); ++k)
            if (distance(b[k], p) < distance(b[best], p)) best = k;
        worst = std::max(worst, distance(b[best], p));
        b.erase(b.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return worst;
}

}  // namespace

TEST(ShadowTree, DistancesAndPaths) {
    ShadowTree t({{1, {0, 0}}, {2, {1, 0}}, {3, {1, 2}}, {4, {0, -3}}}, {{1, 2}, {2, 3}, {1, 4}}, 1);
    const auto a = t.index_of(1), b = t.index_of(2), c = t.index_of(3), d = t.index_of(4);
    EXPECT_DOUBLE_EQ(t.tree_distance(a, c), 3.0);
    EXPECT_DOUBLE_EQ(t.tree_distance(c, d), 6.0);
    EXPECT_EQ(t.tree_distance(c, d), t.tree_distance(d, c));
    EXPECT_EQ(t.path(c, d), (std::vector<std::size_t>{c, b, a, d}));
    EXPECT_EQ(t.edges().size(), t.node_count() - 1);
    EXPECT_TRUE(t.is_leaf(c));
    EXPECT_FALSE(t.is_leaf(b));
    EXPECT_THROW(ShadowTree({{1, {0, 0}}, {2, {1, 0}}}, {}, 1), ParameterError);
    EXPECT_THROW(ShadowTree({{1, {0, 0}}, {1, {1, 0}}}, {{1, 1}}, 1), ParameterError);
}

TEST(ShadowTree, FaceTreeShape) {
    const auto t = build_shadow_tree(canonical_face());
    EXPECT_EQ(t.node_count(), 46u);
    EXPECT_EQ(t.edges().size(), 45u);
    EXPECT_EQ(t.leaf_cycle().size(), 35u);
    for (auto l : t.leaf_cycle()) EXPECT_TRUE(t.is_leaf(l));
    // the leaf cycle is the order a depth-first walk meets leaves: every
    // edge is crossed exactly twice by the closed tour through consecutive leaves
    std::map<std::pair<std::size_t, std::size_t>, int> crossings;
    const auto& cyc = t.leaf_cycle();
    for (std::size_t i = 0; i < cyc.size(); ++i) {
        const auto p = t.path(cyc[i], cyc[(i + 1) % cyc.size()]);
        for (std::size_t k = 0; k + 1 < p.size(); ++k) ++crossings[std::minmax(p[k], p[k + 1])];
    }
    EXPECT_EQ(crossings.size(), t.edges().size());
    for (const auto& [e, n] : crossings) EXPECT_EQ(n, 2);
}

TEST(LangPolygon, SlackBruteForce) {
    Rng rng(61);
    for (int t = 0; t < 20; ++t) {
        const auto poly = build_lang_polygon(build_shadow_tree(testing_support::random_face(rng)));
        ASSERT_EQ(poly.size(), 35u);
        double slack = 1e300;
        for (std::size_t a = 0; a < poly.size(); ++a)
            for (std::size_t b = 0; b < poly.size(); ++b) {
                if (a == b) continue;
                const double dp = distance(poly.positions[a], poly.positions[b]);
                slack = std::min(slack, dp - poly.tree.tree_distance(poly.leaves[a], poly.leaves[b]));
            }
        EXPECT_GE(slack, -1e-9 * poly.diagonal());
        // scaled to be tight
        EXPECT_LT(slack, 1e-6 * poly.diagonal());
        EXPECT_NEAR(poly.width / poly.height, 4.0 / 3.0, 1e-12);
        for (auto p : poly.positions) {
            const bool on_x = std::abs(std::abs(p.x) - poly.width / 2) < 1e-9 * poly.diagonal();
            const bool on_y = std::abs(std::abs(p.y) - poly.height / 2) < 1e-9 * poly.diagonal();
            EXPECT_TRUE(on_x || on_y);
        }
    }
}

TEST(LangPolygon, ThreeLeafStar) {
    const auto poly = build_lang_polygon(star_tree(3, 1.0));
    EXPECT_EQ(poly.size(), 3u);
    EXPECT_GE(poly.min_slack(), -1e-9);
    EXPECT_DOUBLE_EQ(poly.tree_dist(0, 1), 2.0);
    auto tree = star_tree(3, 1.0);
    std::vector<std::size_t> leaves{tree.index_of(1), tree.index_of(2), tree.index_of(3)};
    EXPECT_THROW(LangPolygon::from_positions(tree, leaves, {{0, 0}, {1, 0}, {0, 1}}, 1, 1), ParameterError);
}

TEST(Shrink, SplitMarginNeverBelowTolerance) {
    Rng rng(62);
    for (int t = 0; t < 100; ++t) {
        const auto poly = build_lang_polygon(build_shadow_tree(testing_support::random_face(rng)));
        const auto params = ShrinkParams::for_polygon(poly);
        ShrinkDiagnostics diag;
        const auto cp = shrink(poly, params, &diag);
        EXPECT_GE(diag.min_split_margin, -params.th) << "face " << t;
        EXPECT_LE(diag.ticks, params.max_ticks);
        EXPECT_LE(diag.max_perimeter_growth, 1e-9);
        EXPECT_TRUE(cp.connected());
    }
}

TEST(Shrink, RectangleStraightSkeleton) {
    for (auto [w, h] : {std::pair{4.0, 3.0}, std::pair{10.0, 1.0}, std::pair{2.0, 2.0}}) {
        // legs far below th, so diagonal corners never reach d_T before contracting
        const auto poly = rectangle(w, h, 1e-10);
        const auto params = ShrinkParams::for_polygon(poly);
        ShrinkDiagnostics diag;
        const auto cp = shrink(poly, params, &diag);
        EXPECT_EQ(cp.count(CreaseEventKind::split), 0u) << w << "x" << h;
        const auto inner = interior_nodes(cp);
        ASSERT_FALSE(inner.empty());
        const std::vector<Point2> want{{-(w - h) / 2, 0}, {(w - h) / 2, 0}};
        for (auto q : want) EXPECT_LE(nearest(inner, q), 2 * params.step) << w << "x" << h;
        for (auto p : inner) EXPECT_LE(nearest(want, p), 2 * params.step) << w << "x" << h;
        EXPECT_NEAR(diag.final_offset, h / 2, 2 * params.step);
        // each corner creases along its bisector
        for (const auto& n : cp.nodes) {
            if (n.kind == CreaseNodeKind::leaf) {
                EXPECT_EQ(cp.degree(n.id), 1u);
            }
        }
    }
}

TEST(Shrink, FirstSplitOffset) {
    // corners plus the two long-edge midpoints, all on a star with legs a
    const double w = 4, h = 3, a = 0.5;
    auto tree = star_tree(6, a);
    std::vector<std::size_t> leaves;
    for (int i = 1; i <= 6; ++i) leaves.push_back(tree.index_of(i));
    const auto poly = LangPolygon::from_positions(
        tree, leaves, {{-w / 2, h / 2}, {0, h / 2}, {w / 2, h / 2}, {w / 2, -h / 2}, {0, -h / 2}, {-w / 2, -h / 2}}, w, h);
    const auto params = ShrinkParams::for_polygon(poly);
    const auto cp = shrink(poly, params);
    const CreaseEvent* first = nullptr;
    for (const auto& e : cp.events)
        if (e.kind == CreaseEventKind::split) {
            first = &e;
            break;
        }
    ASSERT_NE(first, nullptr);
    EXPECT_NEAR(first->offset, (h - 2 * a - params.th / 2) / 2, 2 * params.th);
    EXPECT_EQ(std::set<int>(first->tree_ids.begin(), first->tree_ids.end()), (std::set<int>{2, 5}));
}

TEST(Shrink, TerminatesOrReportsNonTermination) {
    const auto poly = build_lang_polygon(build_shadow_tree(canonical_face()));
    auto params = ShrinkParams::for_polygon(poly);
    ShrinkDiagnostics diag;
    const auto cp = shrink(poly, params, &diag);
    EXPECT_LT(diag.ticks, params.max_ticks);
    EXPECT_EQ(diag.initial_vertices, 35u);
    EXPECT_GT(cp.count(CreaseEventKind::split), 0u);
    params.max_ticks = 3;
    try {
        shrink(poly, params);
        FAIL() << "expected non-termination";
    } catch (const ShrinkNonTermination& e) {
        EXPECT_GE(e.partial().nodes.size(), 35u);
    }
    params = ShrinkParams::for_polygon(poly);
    params.step = 0;
    EXPECT_THROW(shrink(poly, params), ParameterError);
}

TEST(Shrink, SymmetricFaceGivesSymmetricCreases) {
    // seed 1 face 230 has simultaneous crossing splits and a sliver collapse
    Rng rng(1);
    for (int t = 0; t < 240; ++t) {
        const auto cp = face_crease_pattern(testing_support::random_symmetric_face(rng));
        std::vector<Point2> pts, mirrored;
        for (const auto& n : cp.nodes) {
            pts.push_back(n.pos);
            mirrored.push_back({-n.pos.x, n.pos.y});
        }
        EXPECT_LE(multiset_gap(pts, mirrored), 1e-6) << "face " << t;
    }
}

TEST(Encoding, HandExample) {
    CreasePattern cp;
    cp.nodes = {{10, {3, 4}, CreaseNodeKind::leaf, 1}, {11, {0, 0}, CreaseNodeKind::final, -1}, {12, {5, 4}, CreaseNodeKind::split, -1}};
    cp.edges = {{10, 12}, {10, 11}};
    const auto enc = encode_crease_features(cp, 5, 3);
    ASSERT_EQ(enc.nodes.size(), 5u);
    // ranks by (y, x): 11 -> 0, 10 -> 1, 12 -> 2
    EXPECT_EQ(enc.nodes[0], std::complex<double>(0, 0));
    EXPECT_EQ(enc.nodes[1], std::complex<double>(3, 4));
    EXPECT_EQ(enc.nodes[2], std::complex<double>(5, 4));
    EXPECT_EQ(enc.nodes[4], std::complex<double>(0, 0));
    EXPECT_EQ(enc.edges[0], std::complex<double>(0, 1));
    EXPECT_EQ(enc.edges[1], std::complex<double>(1, 2));
    EXPECT_EQ(enc.edges[2], std::complex<double>(0, 0));
    EXPECT_EQ(encode_crease_features(cp, 1, 1).nodes.size(), 1u);
    EXPECT_THROW(encode_crease_features(cp, 0, 1), ParameterError);
}

TEST(Encoding, NearlyLevelNodesOrderByX) {
    CreasePattern cp;
    cp.nodes = {{0, {0, 0}, CreaseNodeKind::leaf, 0}, {1, {100, 100}, CreaseNodeKind::leaf, 1},
                {2, {7, 50 - 1e-12}, CreaseNodeKind::final, -1}, {3, {2, 50}, CreaseNodeKind::final, -1}};
    cp.edges = {{2, 3}};
    for (double dy : {0.0, 2e-12, -2e-12}) {
        cp.nodes[3].pos.y = 50 + dy;
        const auto enc = encode_crease_features(cp, 4, 1);
        EXPECT_EQ(enc.nodes[1], std::complex<double>(2, 50 + dy));
        EXPECT_EQ(enc.nodes[2].real(), 7.0);
    }
}

TEST(Descriptor, DeterministicAndTranslationInvariant) {
    Rng rng(64);
    for (int t = 0; t < 5; ++t) {
        const Frame f = testing_support::random_face(rng);
        const auto a = origami_descriptor(f);
        EXPECT_EQ(a.size(), 2 * (kDefaultOrigamiNodes + kDefaultOrigamiEdges));
        EXPECT_EQ(a.tag, FeatureTag::origami);
        EXPECT_EQ(origami_descriptor(f).values, a.values);
        Frame moved = f;
        for (auto& p : moved) p = p + Point2{25.5, -8};
        const auto b = origami_descriptor(moved);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
    }
}

TEST(Export, JsonRoundTripAndSvg) {
    const auto cp = face_crease_pattern(canonical_face());
    const auto back = crease_pattern_from_json(nlohmann::json::parse(to_json(cp).dump()));
    ASSERT_EQ(back.nodes.size(), cp.nodes.size());
    for (std::size_t i = 0; i < cp.nodes.size(); ++i) {
        EXPECT_EQ(back.nodes[i].id, cp.nodes[i].id);
        EXPECT_EQ(back.nodes[i].pos, cp.nodes[i].pos);
        EXPECT_EQ(back.nodes[i].kind, cp.nodes[i].kind);
        EXPECT_EQ(back.nodes[i].tree_id, cp.nodes[i].tree_id);
    }
    EXPECT_EQ(back.edges, cp.edges);
    EXPECT_EQ(back.events.size(), cp.events.size());
    EXPECT_EQ(to_json(back), to_json(cp));
    EXPECT_THROW(crease_pattern_from_json(nlohmann::json{{"nodes", 3}}), FormatError);
    const auto svg = render_svg(cp);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
