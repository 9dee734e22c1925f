#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topolearn/experiment.hpp"
#include "topolearn/gridfile.hpp"
#include "topolearn/instance.hpp"
#include "topolearn/learner.hpp"
#include "topolearn/moments.hpp"
#include "topolearn/oracle.hpp"

using namespace topolearn;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitCheckFailed = 3;

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCategory::IoError, "cannot write '" + path + "'");
    return out;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::IoError, "cannot read '" + path + "'");
    return in;
}

/// Writes to `path`, or stdout when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    auto out = open_output(path);
    write(out);
    if (!out) throw Error(ErrorCategory::IoError, "write failed for '" + path + "'");
}

MatchRule parse_match_rule(const std::string& name) {
    if (name == "min-residual") return MatchRule::MinResidual;
    if (name == "first-pass") return MatchRule::FirstPass;
    throw Error(ErrorCategory::InvalidInput, "unknown match rule '" + name + "'");
}

InjectionDistribution parse_distribution(const std::string& name) {
    if (name == "gaussian") return InjectionDistribution::Gaussian;
    if (name == "uniform") return InjectionDistribution::Uniform;
    if (name == "two-point") return InjectionDistribution::TwoPoint;
    throw Error(ErrorCategory::InvalidInput, "unknown distribution '" + name + "'");
}

std::vector<long> parse_m_list(const std::string& text) {
    std::vector<long> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "inf") {
            out.push_back(kAnalyticSamples);
            continue;
        }
        try {
            std::size_t used = 0;
            const double value = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<long>(value));
        } catch (const std::exception&) {
            throw Error(ErrorCategory::InvalidInput, "bad sample count '" + item + "' in --m-list");
        }
    }
    return out;
}

int report_violations(const TreeValidationError& err) {
    std::cerr << "error_category=" << to_string(err.category()) << "\n";
    for (const auto& v : err.violations()) {
        std::cerr << "violation=" << to_string(v.rule) << " nodes=";
        for (std::size_t i = 0; i < v.nodes.size(); ++i) std::cerr << (i ? "," : "") << v.nodes[i];
        std::cerr << " message=" << v.message << "\n";
    }
    return kExitFailure;
}

void print_report(const ResidualReport& r) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.checkName << " instances=" << r.instances
              << " max_abs_residual=" << format_double(r.maxAbsResidual)
              << " tolerance=" << format_double(r.tolerance) << " failures=" << r.failures.size() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn the operational radial topology of a distribution grid from terminal-node voltages"};
    app.require_subcommand(1);

    std::string gridPath, samplesPath, outPath, matchRule = "min-residual", distribution = "gaussian";
    std::uint64_t seed = 1;
    double tau1 = 1e-8, tau2 = 1e-8;
    bool analytic = false;

    auto* validate = app.add_subcommand("validate", "Check the operational tree of a grid file");
    validate->add_option("--grid", gridPath, "Grid file")->required();

    long m = 1000;
    auto* simulate = app.add_subcommand("simulate", "Sample terminal-node voltages into a CSV");
    simulate->add_option("--grid", gridPath, "Grid file")->required();
    simulate->add_option("--m", m, "Number of samples")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "Random seed");
    simulate->add_option("--distribution", distribution, "gaussian | uniform | two-point");
    simulate->add_option("--out", outPath, "Output CSV (default stdout)");

    auto* learn = app.add_subcommand("learn", "Run the topology learner");
    learn->add_option("--grid", gridPath, "Grid file with candidate edges and terminal statistics")->required();
    auto* samplesOpt = learn->add_option("--samples", samplesPath, "Voltage sample CSV");
    auto* analyticOpt = learn->add_flag("--analytic", analytic, "Use exact moments of the grid's operational tree");
    samplesOpt->excludes(analyticOpt);
    learn->add_option("--tau1", tau1, "Tolerance of the sibling check");
    learn->add_option("--tau2", tau2, "Tolerance of the triple check");
    learn->add_option("--match-rule", matchRule, "min-residual | first-pass");
    learn->add_option("--out", outPath, "Topology output (default stdout)");

    std::string configPath, mList;
    std::vector<double> tau1List, tau2List;
    int trials = 0;
    auto* experiment = app.add_subcommand("experiment", "Run a sample-count / tolerance sweep and write a CSV");
    experiment->add_option("--config", configPath, "JSON experiment config");
    experiment->add_option("--grid", gridPath, "Grid file (overrides config)");
    experiment->add_option("--m-list", mList, "Comma-separated sample counts, 'inf' for exact moments");
    experiment->add_flag("--analytic", analytic, "Exact moments only");
    experiment->add_option("--trials", trials, "Trials per point");
    experiment->add_option("--tau1", tau1List, "Sibling tolerances")->delimiter(',');
    experiment->add_option("--tau2", tau2List, "Triple tolerances")->delimiter(',');
    auto* expSeed = experiment->add_option("--seed", seed, "Random seed");
    auto* expRule = experiment->add_option("--match-rule", matchRule, "min-residual | first-pass");
    experiment->add_option("--out", outPath, "CSV output (default stdout)");

    TheoremSweepOptions sweep;
    long mcSamples = 0;
    auto* oracle = app.add_subcommand("oracle", "Brute-force consistency checks");
    oracle->add_option("--trials", sweep.trials, "Random instances in the identity sweep");
    oracle->add_option("--seed", sweep.seed, "Random seed");
    oracle->add_option("--min-nodes", sweep.minNodes, "Smallest instance");
    oracle->add_option("--max-nodes", sweep.maxNodes, "Largest instance");
    oracle->add_option("--grid", gridPath, "Also run exhaustive search on this grid's exact terminal moments");
    oracle->add_option("--montecarlo", mcSamples, "Also compare sampled moments of --grid with exact ones");

    int leaves = 12, intermediates = 8, extra = 30, depth = 0, spine = 0;
    auto* generate = app.add_subcommand("generate", "Write a random grid instance");
    generate->add_option("--leaves", leaves, "Terminal nodes");
    generate->add_option("--intermediates", intermediates, "Missing intermediate nodes");
    generate->add_option("--extra", extra, "Extra non-operational candidate edges (-1 for all)");
    generate->add_option("--binary-depth", depth, "Complete binary tree of this depth instead");
    generate->add_option("--line-spine", spine, "Line with one terminal per spine node instead");
    generate->add_option("--seed", seed, "Random seed");
    generate->add_option("--out", outPath, "Grid output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        if (code != 0) std::cerr << "error_category=UsageError\n";
        return code;
    }

    try {
        if (*validate) {
            const GridFile grid = read_grid_file(gridPath);
            if (!grid.has_truth()) throw Error(ErrorCategory::InvalidInput, "grid has no operational edges");
            const RadialTree tree = grid.truth();
            std::cout << "valid nodes=" << tree.node_count() << " edges=" << tree.edges().size()
                      << " leaves=" << tree.leaves().size() << " missing=" << tree.missing().size() << "\n";
        } else if (*simulate) {
            const GridFile grid = read_grid_file(gridPath);
            const SampleMatrix samples =
                sample_voltages(grid.truth(), grid.stats, m, seed, grid.leaves(), parse_distribution(distribution));
            emit(outPath, [&](std::ostream& out) { write_samples(out, samples); });
        } else if (*learn) {
            const GridFile grid = read_grid_file(gridPath);
            const auto leafIds = grid.leaves();
            PhiMatrix phi;
            if (analytic) {
                phi = analytic_phi_matrix(grid.truth(), grid.stats, leafIds);
            } else if (!samplesPath.empty()) {
                auto in = open_input(samplesPath);
                phi = empirical_phi(parse_samples(in));
            } else {
                throw Error(ErrorCategory::InvalidInput, "learn needs --samples or --analytic");
            }
            const LearnerConfig cfg{tau1, tau2, parse_match_rule(matchRule)};
            const LearnedTopology result = learn_topology(phi, grid.stats, grid.graph, leafIds, grid.missing(), cfg);
            emit(outPath, [&](std::ostream& out) { write_topology(out, result); });
            std::cerr << "status=" << (result.status == TopologyStatus::Complete ? "complete" : "partial")
                      << " edges=" << result.edges.size();
            if (grid.has_truth()) {
                std::cerr << " fractional_error=" << format_double(fractional_error(result, grid.truth()))
                          << " matches_truth=" << (result.edge_list() == grid.truth().edges() ? "yes" : "no");
            }
            std::cerr << "\n";
        } else if (*experiment) {
            ExperimentConfig cfg;
            if (!configPath.empty()) {
                auto in = open_input(configPath);
                cfg = parse_experiment_config(in);
            }
            if (!gridPath.empty()) cfg.gridFile = gridPath;
            if (!mList.empty()) cfg.sampleCounts = parse_m_list(mList);
            if (analytic) cfg.sampleCounts = {kAnalyticSamples};
            if (trials > 0) cfg.trials = trials;
            if (!tau1List.empty()) cfg.tau1s = tau1List;
            if (!tau2List.empty()) cfg.tau2s = tau2List;
            if (expSeed->count() > 0) cfg.seed = seed;
            if (expRule->count() > 0) cfg.matchRule = parse_match_rule(matchRule);
            if (cfg.gridFile.empty()) throw Error(ErrorCategory::InvalidInput, "experiment needs a grid file");
            const std::string target = outPath.empty() ? cfg.outputPath : outPath;
            cfg.outputPath.clear();
            const ErrorCurve curve = run_experiment(cfg);
            emit(target, [&](std::ostream& out) { write_error_curve(out, curve); });
            for (const auto& s : best_tau_per_m(curve)) {
                std::cerr << "best m=" << (s.m == kAnalyticSamples ? std::string("inf") : std::to_string(s.m))
                          << " tau1=" << format_double(s.tau1) << " tau2=" << format_double(s.tau2)
                          << " mean_error=" << format_double(s.meanError)
                          << " standard_error=" << format_double(s.standardError) << "\n";
            }
        } else if (*oracle) {
            const TheoremSweepReport report = theorem_sweep(sweep);
            bool ok = report.combined.passed();
            for (const auto& r : report.identities) print_report(r);
            std::cout << "additivity_gap_instances=" << report.instancesWithAdditivityGap << "/" << report.instances
                      << "\n";
            if (!gridPath.empty()) {
                const GridFile grid = read_grid_file(gridPath);
                const RadialTree tree = grid.truth();
                const auto leafIds = grid.leaves();
                const auto result = exhaustive_tree_search(grid.graph, analytic_phi_matrix(tree, grid.stats, leafIds),
                                                           grid.stats, leafIds, kRootNode);
                const bool matches = result.unique() && result.best.edges == tree.edges();
                std::cout << (matches ? "PASS " : "FAIL ") << "exhaustive feasible=" << result.feasible.size()
                          << " minimizers=" << result.minimizers << " best_score=" << format_double(result.best.score)
                          << "\n";
                ok = ok && matches;
                if (mcSamples > 0) {
                    const auto mc = montecarlo_moment_check(tree, grid.stats, mcSamples, sweep.seed);
                    print_report(mc.mean);
                    print_report(mc.covariance);
                    print_report(mc.phi);
                    ok = ok && mc.passed();
                }
            }
            if (!ok) return kExitCheckFailed;
        } else if (*generate) {
            GridFile grid;
            if (depth > 0) grid = binary_tree_instance(depth, extra, seed);
            else if (spine > 0) grid = line_with_leaves_instance(spine, extra, seed);
            else grid = generate_instance(leaves, intermediates, extra, seed);
            emit(outPath, [&](std::ostream& out) { write_grid(out, grid); });
        }
    } catch (const TreeValidationError& err) {
        return report_violations(err);
    } catch (const Error& err) {
        std::cerr << "error_category=" << to_string(err.category()) << "\nmessage=" << err.what() << "\n";
        return kExitFailure;
    }
    return EXIT_SUCCESS;
}
