#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topolearn/gridfile.hpp"
#include "topolearn/learner.hpp"

namespace topolearn {

/// |learned xor truth| / |truth|, capped at 1. Throws NodeUniverseMismatch if
/// the learned edges mention nodes outside the true tree.
double fractional_error(const LearnedTopology& learned, const RadialTree& truth);

/// Sample count used to mark the exact-moment (m = infinity) mode.
inline constexpr long kAnalyticSamples = -1;

struct ExperimentConfig {
    std::string gridFile;
    std::vector<long> sampleCounts;  // kAnalyticSamples for exact moments
    int trials = 20;
    std::vector<double> tau1s{1e-3};
    std::vector<double> tau2s{1e-3};  // every (tau1, tau2) combination is run
    std::uint64_t seed = 1;
    InjectionDistribution distribution = InjectionDistribution::Gaussian;
    MatchRule matchRule = MatchRule::MinResidual;
    ResidualMode residualMode = ResidualMode::Absolute;
    std::string outputPath;
    // Wall-clock time is the only nondeterministic column; it is written as 0
    // unless requested.
    bool recordRuntime = false;

    /// Throws InvalidInput on empty lists, non-positive counts or tolerances.
    void check() const;
};

/// Reads the JSON form of ExperimentConfig (keys: grid, m, trials, tau1, tau2,
/// seed, distribution, match_rule, residual_mode, out, record_runtime).
ExperimentConfig parse_experiment_config(std::istream& in);

struct ErrorRow {
    long m = 0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    int trial = 0;
    double fractionalError = 0.0;
    double runtimeMs = 0.0;
};

struct ErrorCurve {
    std::vector<ErrorRow> rows;  // sorted by (m, tau1, tau2, trial); analytic rows last
};

/// Trial t at sample count m draws its voltages with seed
/// derive_seed(derive_seed(cfg.seed, m), t); every tolerance pair is scored on
/// the same draws.
ErrorCurve run_experiment(const ExperimentConfig& cfg, const GridFile& grid);

/// Loads cfg.gridFile, runs, and writes the CSV to cfg.outputPath if set.
ErrorCurve run_experiment(const ExperimentConfig& cfg);

/// Columns: m,tau1,tau2,trial,frac_error,runtime_ms (m written as "inf" for
/// the exact-moment mode).
void write_error_curve(std::ostream& out, const ErrorCurve& curve);

struct PointSummary {
    long m = 0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    int trials = 0;
    double meanError = 0.0;
    double standardError = 0.0;
};

/// Mean and standard error of the fractional error per (m, tau1, tau2).
std::vector<PointSummary> summarize(const ErrorCurve& curve);

/// For each m, the tolerance pair with the lowest mean error (ties: first in
/// sorted order).
std::vector<PointSummary> best_tau_per_m(const ErrorCurve& curve);

}  // namespace topolearn
