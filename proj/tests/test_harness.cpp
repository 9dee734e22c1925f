#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "topolearn/experiment.hpp"
#include "topolearn/gridfile.hpp"
#include "topolearn/instance.hpp"

using namespace topolearn;

namespace {

const char* const kSmallGrid =
    "# topolearn grid\n"
    "nodes 4\n"
    "0 root\n"
    "1 intermediate\n"
    "2 leaf\n"
    "3 leaf\n"
    "edges 4\n"
    "0 1 0.05 0.0125 1\n"
    "0 3 0.03 0.05 0\n"
    "1 2 0.055 0.035 1\n"
    "1 3 0.044 0.048 1\n"
    "stats 3\n"
    "1 0.13 0.07 0.04 -0.26 -0.22\n"
    "2 1.4 0.7 -0.01 -0.5 -0.1\n"
    "3 1.5 0.9 0.3 -0.7 -0.3\n"
    "end\n";

GridFile parse(const std::string& text) {
    std::istringstream in(text);
    return parse_grid(in);
}

ErrorCategory parse_error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        return e.category();
    }
    FAIL("expected a parse failure");
    return ErrorCategory::InvalidInput;
}

LearnedTopology topology_of(const std::vector<Edge>& edges) {
    LearnedTopology t;
    for (const Edge& e : edges) t.edges[e] = {Stage::LeafPair, 0.0};
    return t;
}

}  // namespace

TEST_CASE("grid file round trip is byte-identical") {
    const GridFile g = parse(kSmallGrid);
    CHECK(g.node_count() == 4);
    CHECK(g.leaves() == std::vector<NodeId>{2, 3});
    CHECK(g.missing() == std::vector<NodeId>{1});
    CHECK(g.graph.edge_count() == 4);
    CHECK(g.operational.size() == 3);
    CHECK(g.stats.at(3).covPQ == 0.3);
    CHECK(format_grid(g) == kSmallGrid);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::string once = format_grid(generate_instance(12, 8, 30, seed));
        CHECK(format_grid(parse(once)) == once);
    }
}

TEST_CASE("grid file errors") {
    std::string text = kSmallGrid;
    CHECK(parse_error_of("nodes 2\n") == ErrorCategory::ParseError);
    CHECK(parse_error_of(std::string(kSmallGrid).replace(text.find("0.05 0.0125"), 4, "abcd")) ==
          ErrorCategory::ParseError);
    CHECK(parse_error_of(std::string(kSmallGrid).replace(text.find("end"), 3, "")) == ErrorCategory::ParseError);
    try {
        parse(std::string(kSmallGrid).replace(text.find("0 1 0.05"), 1, "9"));
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 8") != std::string::npos);
    }
    CHECK_THROWS_AS(read_grid_file("/nonexistent/grid.txt"), Error);
}

TEST_CASE("format_double is shortest round-trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(0) == "0");
    CHECK(format_double(1e-8) == "1e-08");
    CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("sample and topology files round trip") {
    SampleMatrix s{{2, 5, 9}, Eigen::MatrixXd(2, 3)};
    s.values << 0.1, -0.25, 1e-9, 3, 4.5, -6;
    std::stringstream buf;
    write_samples(buf, s);
    CHECK(buf.str() == "2,5,9\n0.1,-0.25,1e-09\n3,4.5,-6\n");
    const SampleMatrix back = parse_samples(buf);
    CHECK(back.observed == s.observed);
    CHECK(back.values == s.values);

    std::istringstream ragged("1,2\n0.5\n");
    CHECK_THROWS_AS(parse_samples(ragged), Error);

    LearnedTopology t;
    t.edges[{0, 1}] = {Stage::RootJoin, 0.0};
    t.edges[{1, 2}] = {Stage::LeafPair, 1.5e-12};
    t.edges[{1, 3}] = {Stage::LeafPlacement, -2e-10};
    t.status = TopologyStatus::Partial;
    t.diagnostics = {"UnplacedLeaf: 4"};
    std::stringstream tb;
    write_topology(tb, t);
    const std::string text = tb.str();
    const LearnedTopology tt = parse_topology(tb);
    CHECK(tt.edges == t.edges);
    CHECK(tt.status == t.status);
    CHECK(tt.diagnostics == t.diagnostics);
    std::stringstream again;
    write_topology(again, tt);
    CHECK(again.str() == text);
}

TEST_CASE("instance generation") {
    SUBCASE("default shape") {
        const GridFile g = generate_instance(12, 8, 30, 1);
        CHECK(g.node_count() == 21);
        CHECK(g.leaves().size() == 12);
        CHECK(g.missing().size() == 8);
        CHECK(g.graph.edge_count() == 50);
        CHECK(g.truth().edges().size() == 20);
    }
    SUBCASE("no extra edges means the candidate set is the tree") {
        const GridFile g = generate_instance(7, 3, 0, 2);
        CHECK(g.graph.edge_count() == g.truth().edges().size());
    }
    SUBCASE("every generated tree validates and respects the impedance range") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const GridFile g = generate_instance(4 + static_cast<int>(seed % 10), 1 + static_cast<int>(seed % 3), 5, seed);
            CHECK_NOTHROW(g.truth());
            for (const auto& [e, z] : g.graph.edges()) {
                CHECK(z.r >= 0.01);
                CHECK(z.r <= 0.1);
                CHECK(z.x >= 0.01);
                CHECK(z.x <= 0.1);
            }
            CHECK_NOTHROW(g.stats.check_psd());
        }
    }
    SUBCASE("same seed, same instance") {
        CHECK(format_grid(generate_instance(6, 3, 4, 77)) == format_grid(generate_instance(6, 3, 4, 77)));
        CHECK(format_grid(generate_instance(6, 3, 4, 77)) != format_grid(generate_instance(6, 3, 4, 78)));
    }
    SUBCASE("shapes that break the degree rule are refused") {
        try {
            generate_instance(3, 3, 0, 1);
            FAIL("expected InfeasibleShape");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::InfeasibleShape);
        }
        CHECK_THROWS_AS(generate_instance(4, 0, 0, 1), Error);
    }
    SUBCASE("limiting shapes approach half missing") {
        const GridFile b = binary_tree_instance(4, 0, 1);
        CHECK(b.missing().size() == 15);
        CHECK(b.leaves().size() == 16);
        const GridFile l = line_with_leaves_instance(10, 0, 1);
        CHECK(l.missing().size() == 10);
        CHECK(l.leaves().size() == 11);
    }
}

TEST_CASE("fractional error") {
    const GridFile g = generate_instance(12, 8, 0, 4);
    const RadialTree truth = g.truth();
    const auto edges = truth.edges();
    CHECK(fractional_error(topology_of(edges), truth) == 0.0);
    CHECK(fractional_error(topology_of({}), truth) == 1.0);

    // Move one terminal under a different parent.
    auto swapped = edges;
    const NodeId leaf = truth.leaves().front();
    const NodeId wrong = truth.parent(leaf) == truth.missing().front() ? truth.missing().back() : truth.missing().front();
    std::replace(swapped.begin(), swapped.end(), Edge::between(leaf, truth.parent(leaf)), Edge::between(leaf, wrong));
    CHECK(fractional_error(topology_of(swapped), truth) == doctest::Approx(0.1));

    CHECK(fractional_error(topology_of({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8}, {8, 9},
                                        {9, 10}, {10, 11}, {11, 12}, {12, 13}, {13, 14}, {14, 15}, {15, 16},
                                        {16, 17}, {17, 18}, {18, 19}, {19, 20}, {0, 20}, {1, 20}}),
                           truth) <= 1.0);
    try {
        fractional_error(topology_of({{0, 40}}), truth);
        FAIL("expected NodeUniverseMismatch");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::NodeUniverseMismatch);
    }
}

TEST_CASE("experiment configuration") {
    std::istringstream json(R"({"grid": "g.txt", "m": [100, "inf"], "trials": 4, "tau1": [0.001, 0.01],
                                "tau2": [0.002], "seed": 9, "distribution": "uniform", "match_rule": "first-pass",
                                "out": "o.csv"})");
    const ExperimentConfig cfg = parse_experiment_config(json);
    CHECK(cfg.gridFile == "g.txt");
    CHECK(cfg.sampleCounts == std::vector<long>{100, kAnalyticSamples});
    CHECK(cfg.trials == 4);
    CHECK(cfg.tau1s == std::vector<double>{0.001, 0.01});
    CHECK(cfg.seed == 9);
    CHECK(cfg.distribution == InjectionDistribution::Uniform);
    CHECK(cfg.matchRule == MatchRule::FirstPass);
    CHECK_FALSE(cfg.recordRuntime);

    std::istringstream broken("{\"m\": [");
    CHECK_THROWS_AS(parse_experiment_config(broken), Error);
    std::istringstream badTau(R"({"m": [10], "tau1": [0]})");
    CHECK_THROWS_AS(parse_experiment_config(badTau).check(), Error);
    ExperimentConfig tooFew;
    tooFew.sampleCounts = {1};
    CHECK_THROWS_AS(tooFew.check(), Error);
}

TEST_CASE("experiments") {
    const GridFile g = generate_instance(12, 8, 30, 6);

    SUBCASE("exact moments give zero error") {
        ExperimentConfig cfg;
        cfg.sampleCounts = {kAnalyticSamples};
        cfg.tau1s = {1e-8};
        cfg.tau2s = {1e-8};
        const ErrorCurve curve = run_experiment(cfg, g);
        REQUIRE(curve.rows.size() == 1);
        CHECK(curve.rows[0].fractionalError == 0.0);
        std::ostringstream out;
        write_error_curve(out, curve);
        CHECK(out.str() == "m,tau1,tau2,trial,frac_error,runtime_ms\ninf,1e-08,1e-08,0,0,0\n");
    }
    SUBCASE("fixed seed gives a byte-identical CSV and sorted rows") {
        ExperimentConfig cfg;
        cfg.sampleCounts = {1000, 100};
        cfg.trials = 3;
        cfg.tau1s = {1e-2, 1e-3};
        cfg.tau2s = {1e-3};
        std::ostringstream a, b;
        write_error_curve(a, run_experiment(cfg, g));
        write_error_curve(b, run_experiment(cfg, g));
        CHECK(a.str() == b.str());
        const ErrorCurve curve = run_experiment(cfg, g);
        CHECK(curve.rows.size() == 12);
        CHECK(curve.rows.front().m == 100);
        for (const auto& r : curve.rows) {
            CHECK(r.fractionalError >= 0.0);
            CHECK(r.fractionalError <= 1.0);
            CHECK(r.runtimeMs == 0.0);
        }
        cfg.seed = 2;
        std::ostringstream c;
        write_error_curve(c, run_experiment(cfg, g));
        CHECK(c.str() != a.str());
    }
    SUBCASE("summaries pick the best tolerance per sample count") {
        ErrorCurve curve;
        curve.rows = {{100, 0.1, 0.1, 0, 0.5, 0}, {100, 0.1, 0.1, 1, 0.3, 0}, {100, 0.01, 0.1, 0, 0.2, 0},
                      {100, 0.01, 0.1, 1, 0.2, 0}, {1000, 0.1, 0.1, 0, 0.0, 0}};
        const auto all = summarize(curve);
        REQUIRE(all.size() == 3);
        CHECK(all[1].meanError == doctest::Approx(0.4));
        CHECK(all[1].standardError == doctest::Approx(0.1));
        const auto best = best_tau_per_m(curve);
        REQUIRE(best.size() == 2);
        CHECK(best[0].tau1 == 0.01);
        CHECK(best[0].meanError == doctest::Approx(0.2));
        CHECK(best[1].m == 1000);
    }
    SUBCASE("more samples help") {
        ExperimentConfig cfg;
        cfg.sampleCounts = {100, 100000};
        cfg.trials = 20;
        cfg.tau1s = {1e-4, 1e-3, 1e-2};
        cfg.tau2s = cfg.tau1s;
        const auto best = best_tau_per_m(run_experiment(cfg, g));
        REQUIRE(best.size() == 2);
        CHECK(best[1].meanError <= best[0].meanError);
    }
}
