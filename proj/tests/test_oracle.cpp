#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "topolearn/instance.hpp"
#include "topolearn/learner.hpp"
#include "topolearn/oracle.hpp"

using namespace topolearn;

namespace {

// Terminal a(5) hangs below k(1) through two missing degree-two nodes b(3)
// and c(4), in either order; e(2) gives k a terminal sibling branch.
struct ChainDemo {
    CandidateGraph graph{6};
    InjectionStats stats;
    std::vector<NodeId> leaves{2, 5};
};

ChainDemo chain_demo() {
    ChainDemo d;
    d.graph.add_edge(0, 1, {0.05, 0.03});
    d.graph.add_edge(1, 2, {0.04, 0.02});
    d.graph.add_edge(1, 3, {0.02, 0.06});
    d.graph.add_edge(1, 4, {0.02, 0.06});
    d.graph.add_edge(3, 4, {0.03, 0.01});
    d.graph.add_edge(3, 5, {0.07, 0.05});
    d.graph.add_edge(4, 5, {0.07, 0.05});
    d.stats.set(1, {0.1, 0.1, 0.0, -0.1, -0.1});
    d.stats.set(2, {1.0, 0.5, 0.1, -0.5, -0.2});
    d.stats.set(3, {0.2, 0.3, 0.05, -0.2, -0.1});
    d.stats.set(4, {0.2, 0.3, 0.05, -0.2, -0.1});
    d.stats.set(5, {0.9, 0.8, -0.2, -0.4, -0.2});
    return d;
}

}  // namespace

TEST_CASE("theorem sweep") {
    SUBCASE("identities hold on random instances") {
        const TheoremSweepReport report = theorem_sweep({100, 5, 40, 1, 1e-9, 0.0});
        CHECK(report.instances == 100);
        CHECK(report.combined.passed());
        CHECK(report.combined.maxAbsResidual < 1e-9);
        CHECK(report.identities.size() == 5);
        for (const auto& r : report.identities) {
            CHECK(r.passed());
            CHECK(r.instances == 100);
        }
        CHECK(report.instancesWithAdditivityGap == 100);
    }
    SUBCASE("the smallest star has rounding-level residuals") {
        const TheoremSweepReport report = theorem_sweep({10, 4, 4, 3, 1e-9, 0.0});
        CHECK(report.combined.maxAbsResidual < 1e-15);
    }
    SUBCASE("perturbed impedances are detected") {
        const TheoremSweepReport report = theorem_sweep({10, 8, 20, 5, 1e-9, 0.01});
        CHECK_FALSE(report.combined.passed());
        CHECK(report.combined.maxAbsResidual > 1e-6);
    }
    SUBCASE("bad size range") {
        CHECK_THROWS_AS(theorem_sweep({10, 3, 10, 1, 1e-9, 0.0}), Error);
    }
}

TEST_CASE("residual report bookkeeping") {
    ResidualReport r;
    r.tolerance = 0.5;
    r.record(0, 0.1);
    r.record(1, -0.7);
    CHECK(r.maxAbsResidual == doctest::Approx(0.7));
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].instance == 1);
    CHECK_FALSE(r.passed());
}

TEST_CASE("exhaustive search") {
    SUBCASE("exact terminal moments single out the true tree") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const GridFile g = generate_instance(5, 2, 8, seed);
            const RadialTree truth = g.truth();
            const PhiMatrix phi = analytic_phi_matrix(truth, g.stats, g.leaves());
            const auto result = exhaustive_tree_search(g.graph, phi, g.stats, g.leaves(), kRootNode);
            CHECK(result.unique());
            CHECK(result.best.score < 1e-20);
            CHECK(result.best.edges == truth.edges());
            CHECK(result.feasible.size() >= 1);
            for (std::size_t i = 1; i < result.feasible.size(); ++i)
                CHECK(result.feasible[i - 1].score <= result.feasible[i].score);
        }
    }
    SUBCASE("degree-two chains cannot be ordered") {
        const ChainDemo d = chain_demo();
        // Exact moments of the ordering k - b - c - a.
        const std::vector<Edge> first{{0, 1}, {1, 2}, {1, 3}, {3, 4}, {4, 5}};
        const std::vector<Edge> second{{0, 1}, {1, 2}, {1, 4}, {3, 4}, {3, 5}};
        const RadialTree tree = validate_tree(d.graph, first, kRootNode, d.leaves, TreeRules{false});
        const PhiMatrix phi = analytic_phi_matrix(tree, d.stats, d.leaves);
        ExhaustiveSearchOptions opts;
        opts.requireDegreeThreeMissing = false;
        const auto result = exhaustive_tree_search(d.graph, phi, d.stats, d.leaves, kRootNode, opts);
        REQUIRE(result.feasible.size() == 2);
        CHECK(result.minimizers == 2);
        CHECK_FALSE(result.unique());
        CHECK(result.feasible[0].score == doctest::Approx(result.feasible[1].score));
        std::vector<std::vector<Edge>> found{result.feasible[0].edges, result.feasible[1].edges};
        std::sort(found.begin(), found.end());
        CHECK(found == std::vector<std::vector<Edge>>{first, second});

        // With the default rules both orderings are rejected outright.
        try {
            exhaustive_tree_search(d.graph, phi, d.stats, d.leaves, kRootNode);
            FAIL("expected NoFeasibleTree");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::NoFeasibleTree);
        }
    }
    SUBCASE("a single feasible tree is returned whatever phi says") {
        const GridFile g = generate_instance(4, 1, 0, 3);
        PhiMatrix nonsense = analytic_phi_matrix(g.truth(), g.stats, g.leaves());
        nonsense.values.setConstant(42.0);
        nonsense.values.diagonal().setZero();
        const auto result = exhaustive_tree_search(g.graph, nonsense, g.stats, g.leaves(), kRootNode);
        CHECK(result.feasible.size() == 1);
        CHECK(result.best.edges == g.truth().edges());
        CHECK(result.best.score > 1.0);
    }
    SUBCASE("size limit") {
        const GridFile g = generate_instance(8, 4, 0, 1);
        try {
            exhaustive_tree_search(g.graph, analytic_phi_matrix(g.truth(), g.stats, g.leaves()), g.stats, g.leaves(),
                                   kRootNode);
            FAIL("expected TooLarge");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::TooLarge);
        }
    }
    SUBCASE("agrees with the learner on exact moments") {
        for (std::uint64_t seed = 0; seed < 15; ++seed) {
            const int inter = 1 + static_cast<int>(seed % 3);
            const GridFile g = generate_instance(8 - inter, inter, 10, 100 + seed);
            const PhiMatrix phi = analytic_phi_matrix(g.truth(), g.stats, g.leaves());
            const auto oracle = exhaustive_tree_search(g.graph, phi, g.stats, g.leaves(), kRootNode);
            const auto learned = learn_topology(phi, g.stats, g.graph, g.leaves(), g.missing(), {});
            CHECK(oracle.unique());
            CHECK(learned.edge_list() == oracle.best.edges);
        }
    }
}

TEST_CASE("Monte Carlo moment check") {
    const GridFile g = generate_instance(6, 3, 0, 10);
    const RadialTree t = g.truth();
    REQUIRE(t.node_count() == 10);

    SUBCASE("a million samples agree within five standard errors") {
        const auto report = montecarlo_moment_check(t, g.stats, 1000000, 2);
        CHECK(report.passed());
        CHECK(report.covariance.maxAbsResidual < 5.0);
    }
    SUBCASE("zero variances match exactly") {
        InjectionStats quiet;
        for (const auto& [n, s] : g.stats.all()) quiet.set(n, {0, 0, 0, s.meanP, s.meanQ});
        const auto report = montecarlo_moment_check(t, quiet, 2000, 2);
        CHECK(report.passed());
        CHECK(report.covariance.maxAbsResidual == 0.0);
        CHECK(report.typicalStandardError == 0.0);
    }
    SUBCASE("standard errors shrink like one over root m") {
        const double small = montecarlo_moment_check(t, g.stats, 10000, 3).typicalStandardError;
        const double large = montecarlo_moment_check(t, g.stats, 1000000, 3).typicalStandardError;
        CHECK(small / large == doctest::Approx(10.0).epsilon(0.1));
    }
    SUBCASE("too few samples") {
        CHECK_THROWS_AS(montecarlo_moment_check(t, g.stats, 10, 1), Error);
    }
}
