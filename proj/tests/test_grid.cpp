#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "support.hpp"
#include "topolearn/instance.hpp"

using namespace topolearn;

namespace {

// root 0 - e(1); e - b(2), e - f(5); b - a(3), b - d(4). Leaves a, d, f.
RadialTree branching_tree() {
    return support::tree_of(6, {{0, 1, 0.05, 0.04}, {1, 2, 0.02, 0.03}, {2, 3, 0.07, 0.01}, {2, 4, 0.03, 0.06}, {1, 5, 0.04, 0.02}},
                            {3, 4, 5});
}

bool has_violation(const std::vector<TreeViolation>& vs, ErrorCategory rule) {
    return std::any_of(vs.begin(), vs.end(), [&](const TreeViolation& v) { return v.rule == rule; });
}

}  // namespace

TEST_CASE("candidate graph rejects malformed edges") {
    CandidateGraph g(4);
    g.add_edge(0, 1, {0.1, 0.2});
    CHECK(g.has_edge(1, 0));
    CHECK(g.impedance(1, 0) == LineImpedance{0.1, 0.2});
    CHECK_THROWS_AS(g.add_edge(1, 0, {0.1, 0.1}), Error);
    CHECK_THROWS_AS(g.add_edge(2, 2, {0.1, 0.1}), Error);
    CHECK_THROWS_AS(g.add_edge(2, 3, {0.0, 0.1}), Error);
    CHECK_THROWS_AS(g.add_edge(2, 3, {0.1, -0.1}), Error);
    CHECK_THROWS_AS(g.add_edge(2, 9, {0.1, 0.1}), Error);
    try {
        g.impedance(2, 3);
        FAIL("expected EdgeNotInGraph");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::EdgeNotInGraph);
    }
}

TEST_CASE("line impedance exposes the linearized flow coefficients") {
    const LineImpedance z{0.03, 0.04};
    CHECK(z.conductance() == doctest::Approx(12.0));
    CHECK(z.susceptance() == doctest::Approx(16.0));
}

TEST_CASE("validate_tree accepts the smallest star") {
    const RadialTree t = support::tree_of(4, {{0, 1, 1, 1}, {1, 2, 1, 1}, {1, 3, 1, 1}}, {2, 3});
    CHECK(t.parent(2) == 1);
    CHECK(t.parent(1) == 0);
    CHECK(t.missing() == std::vector<NodeId>{1});
    CHECK(t.degree(1) == 3);
    CHECK(t.children(1) == std::vector<NodeId>{2, 3});
}

TEST_CASE("validate_tree rejects a degree-two chain and names both nodes") {
    // Terminal a(3) reaches d(0) through missing b(2) and c(1).
    auto [g, edges] = support::graph_of(4, {{0, 1, 0.1, 0.1}, {1, 2, 0.1, 0.1}, {2, 3, 0.1, 0.1}});
    try {
        validate_tree(g, edges, kRootNode, {3});
        FAIL("expected a rejection");
    } catch (const TreeValidationError& err) {
        CHECK(err.category() == ErrorCategory::DegreeTwoMissingNode);
        REQUIRE(err.violations().size() == 1);
        CHECK(err.violations()[0].nodes == std::vector<NodeId>{1, 2});
    }
    CHECK(validate_tree(g, edges, kRootNode, {3}, TreeRules{false}).node_count() == 4);
}

TEST_CASE("validate_tree reports every violated rule") {
    CandidateGraph g(6);
    for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {3, 4}})
        g.add_edge(a, b, {0.1, 0.1});

    SUBCASE("root degree") {
        const auto vs = check_tree(g, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}}, kRootNode, {3, 4, 5});
        CHECK(has_violation(vs, ErrorCategory::RootDegreeViolation));
        CHECK(has_violation(vs, ErrorCategory::DegreeTwoMissingNode));
    }
    SUBCASE("cycle and unreached node") {
        const auto vs = check_tree(g, {{0, 1}, {1, 3}, {1, 4}, {3, 4}, {2, 5}}, kRootNode, {3, 4, 5});
        CHECK(has_violation(vs, ErrorCategory::NotSpanningTree));
    }
    SUBCASE("unobserved terminal and observed internal node") {
        const auto vs = check_tree(g, {{0, 1}, {1, 3}, {1, 4}, {0, 2}, {2, 5}}, kRootNode, {1, 3});
        CHECK(has_violation(vs, ErrorCategory::UnobservedLeaf));
        CHECK(has_violation(vs, ErrorCategory::ObservedInternalNode));
    }
    SUBCASE("edge outside the candidate set") {
        const auto vs = check_tree(g, {{0, 1}, {1, 3}, {1, 4}, {1, 2}, {2, 5}}, kRootNode, {3, 4, 5});
        CHECK(has_violation(vs, ErrorCategory::EdgeNotInGraph));
    }
    SUBCASE("a valid tree has no violations and try_build_tree agrees") {
        CandidateGraph h(6);
        for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {1, 3}, {2, 4}, {2, 5}})
            h.add_edge(a, b, {0.1, 0.1});
        const std::vector<Edge> edges{{0, 1}, {1, 2}, {1, 3}, {2, 4}, {2, 5}};
        CHECK(check_tree(h, edges, kRootNode, {3, 4, 5}).empty());
        CHECK(try_build_tree(h, edges, kRootNode, {3, 4, 5}).has_value());
        CHECK_FALSE(try_build_tree(h, edges, kRootNode, {3, 4}).has_value());
    }
}

TEST_CASE("binary tree of depth three is valid with 7 of 15 nodes missing") {
    const GridFile grid = binary_tree_instance(3, 0, 11);
    const RadialTree t = grid.truth();
    CHECK(t.missing().size() == 7);
    CHECK(t.node_count() - 1 == 15);
    for (NodeId m : t.missing()) CHECK(t.degree(m) >= 3);
}

TEST_CASE("path_to_root") {
    const RadialTree t = branching_tree();
    CHECK(path_to_root(t, 0).empty());
    CHECK(path_to_root(t, 3) == std::vector<Edge>{{2, 3}, {1, 2}, {0, 1}});
    CHECK_THROWS_AS(path_to_root(t, 17), Error);

    SUBCASE("length equals breadth-first depth on random trees") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const RadialTree r = generate_instance(8, 4, 0, seed).truth();
            std::vector<int> bfs(static_cast<std::size_t>(r.node_count()), -1);
            std::queue<NodeId> todo;
            bfs[0] = 0;
            todo.push(0);
            while (!todo.empty()) {
                const NodeId v = todo.front();
                todo.pop();
                for (NodeId c : r.children(v)) {
                    bfs[c] = bfs[v] + 1;
                    todo.push(c);
                }
            }
            for (NodeId v = 0; v < r.node_count(); ++v)
                CHECK(path_to_root(r, v).size() == static_cast<std::size_t>(bfs[v]));
        }
    }
}

TEST_CASE("path_impedance") {
    const RadialTree t = branching_tree();
    const PathSummary self = path_impedance(t, 3, 3);
    CHECK(self.rSum == 0.0);
    CHECK(self.xSum == 0.0);

    const PathSummary up = path_impedance(t, 3, 1);
    CHECK(up.rSum == doctest::Approx(0.07 + 0.02));
    CHECK(up.xSum == doctest::Approx(0.01 + 0.03));
    CHECK(path_impedance(t, 3, 0).rSum == doctest::Approx(t.resistance_to_root(3)));

    try {
        path_impedance(t, 3, 4);
        FAIL("expected NotAnAncestor");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::NotAnAncestor);
    }

    SUBCASE("equals the set difference of root paths") {
        const RadialTree r = generate_instance(6, 3, 0, 5).truth();
        for (NodeId v = 1; v < r.node_count(); ++v) {
            for (NodeId anc = r.parent(v);; anc = r.parent(anc)) {
                const auto pv = path_to_root(r, v);
                const auto pa = path_to_root(r, anc);
                const std::set<Edge> skip(pa.begin(), pa.end());
                double rs = 0.0, xs = 0.0;
                for (const Edge& e : pv) {
                    if (skip.count(e)) continue;
                    rs += r.impedance(e).r;
                    xs += r.impedance(e).x;
                }
                const PathSummary s = path_impedance(r, v, anc);
                CHECK(s.rSum == doctest::Approx(rs).epsilon(1e-12));
                CHECK(s.xSum == doctest::Approx(xs).epsilon(1e-12));
                if (anc == kRootNode) break;
            }
        }
    }
}

TEST_CASE("common ancestors and ancestry") {
    const RadialTree t = branching_tree();
    CHECK(t.common_ancestor(3, 4) == 2);
    CHECK(t.common_ancestor(3, 5) == 1);
    CHECK(t.common_ancestor(3, 2) == 2);
    CHECK(t.is_ancestor(1, 4));
    CHECK_FALSE(t.is_ancestor(4, 1));
}

TEST_CASE("post_order") {
    CHECK(post_order({7}, {}) == std::vector<NodeId>{7});
    CHECK(post_order({3, 5, 9}, {{3, 5}, {5, 9}}) == std::vector<NodeId>{3, 5, 9});
    CHECK_THROWS_AS(post_order({1, 2}, {{1, 2}, {2, 1}}), Error);

    SUBCASE("siblings ascend and parents follow their subtrees") {
        // 10 <- {4, 2}, 4 <- {8, 6}, 12 separate.
        const std::map<NodeId, NodeId> par{{4, 10}, {2, 10}, {8, 4}, {6, 4}};
        const auto order = post_order({2, 4, 6, 8, 10, 12}, par);
        CHECK(order == std::vector<NodeId>{2, 6, 8, 4, 10, 12});
    }
    SUBCASE("random forests give a topological order") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<NodeId> nodes(20);
            std::iota(nodes.begin(), nodes.end(), 1);
            std::map<NodeId, NodeId> par;
            for (NodeId v = 2; v <= 20; ++v)
                if (rng() % 4 != 0) par[v] = std::uniform_int_distribution<NodeId>(1, v - 1)(rng);
            std::shuffle(nodes.begin(), nodes.end(), rng);
            const auto order = post_order(nodes, par);
            REQUIRE(order.size() == nodes.size());
            std::map<NodeId, std::size_t> at;
            for (std::size_t i = 0; i < order.size(); ++i) at[order[i]] = i;
            for (const auto& [child, parent] : par) CHECK(at[child] < at[parent]);
        }
    }
}

TEST_CASE("accepted trees span their node set") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const GridFile grid = generate_instance(7, 4, 10, seed);
        const RadialTree t = grid.truth();
        CHECK(t.edges().size() == static_cast<std::size_t>(t.node_count() - 1));
        std::vector<bool> seen(static_cast<std::size_t>(t.node_count()), false);
        std::vector<NodeId> stack{0};
        while (!stack.empty()) {
            const NodeId v = stack.back();
            stack.pop_back();
            seen[v] = true;
            for (NodeId c : t.children(v)) stack.push_back(c);
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
        for (NodeId m : t.missing()) CHECK(t.degree(m) >= 3);
        CHECK(t.children(0).size() == 1);
    }
}
