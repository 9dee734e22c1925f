#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topolearn/grid.hpp"
#include "topolearn/moments.hpp"
#include "topolearn/powerflow.hpp"

namespace topolearn {

struct ResidualFailure {
    int instance = 0;
    double residual = 0.0;
};

struct ResidualReport {
    std::string checkName;
    int instances = 0;
    double maxAbsResidual = 0.0;
    double tolerance = 0.0;
    std::vector<ResidualFailure> failures;

    bool passed() const { return failures.empty(); }
    /// Folds one residual into the report.
    void record(int instance, double residual);
};

struct TheoremSweepOptions {
    int trials = 100;
    int minNodes = 5;  // total node count including the substation
    int maxNodes = 40;
    std::uint64_t seed = 1;
    double tolerance = 1e-9;
    // Relative perturbation of every line resistance, applied to the
    // right-hand sides only; any nonzero value must show up as a residual.
    double impedancePerturbation = 0.0;
};

struct TheoremSweepReport {
    ResidualReport combined;
    std::vector<ResidualReport> identities;
    int instances = 0;
    // Instances where some triple whose middle node is not the branching point
    // of the outer two violates additivity by more than 1e-6 of the largest phi.
    int instancesWithAdditivityGap = 0;
};

/// Random valid trees and statistics; checks the sibling identity (general and
/// terminal form), additivity on branching triples, and the triple identity
/// with its independence of the third terminal, all against phi taken from the
/// factorized voltage covariance.
TheoremSweepReport theorem_sweep(const TheoremSweepOptions& options);

struct ScoredTree {
    std::vector<Edge> edges;
    double score = 0.0;
};

struct ExhaustiveSearchOptions {
    int maxNodes = 12;
    bool requireDegreeThreeMissing = true;
    // Trees scoring within this of the best count as tied minimizers.
    double tieTolerance = 1e-12;
};

struct ExhaustiveSearchResult {
    ScoredTree best;
    int minimizers = 0;
    std::vector<ScoredTree> feasible;  // all feasible spanning trees, best first

    bool unique() const { return minimizers == 1; }
};

/// Enumerates every spanning tree of `graph` that feeds the substation through
/// one line, has exactly `leaves` as terminals and (optionally) only degree >= 3
/// missing nodes; scores each by the squared deviation between `leafPhi` and
/// the tree's analytic phi. Throws TooLarge / NoFeasibleTree.
ExhaustiveSearchResult exhaustive_tree_search(const CandidateGraph& graph, const PhiMatrix& leafPhi,
                                              const InjectionStats& stats, const std::vector<NodeId>& leaves,
                                              NodeId root, const ExhaustiveSearchOptions& options = {});

struct MonteCarloReport {
    ResidualReport mean;
    ResidualReport covariance;
    ResidualReport phi;
    double typicalStandardError = 0.0;  // median covariance standard error

    bool passed() const { return mean.passed() && covariance.passed() && phi.passed(); }
};

/// Samples every non-root node and compares empirical mean, covariance and phi
/// with the analytic values. Residuals are in standard errors estimated from
/// the sample's own fourth moments; `sigmas` is the tolerance.
MonteCarloReport montecarlo_moment_check(const RadialTree& tree, const InjectionStats& stats, long m,
                                         std::uint64_t seed, double sigmas = 5.0,
                                         InjectionDistribution dist = InjectionDistribution::Gaussian);

}  // namespace topolearn
