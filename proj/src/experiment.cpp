#include "topolearn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "topolearn/moments.hpp"

namespace topolearn {

double fractional_error(const LearnedTopology& learned, const RadialTree& truth) {
    const auto trueEdges = truth.edges();
    for (const auto& [e, prov] : learned.edges) {
        if (!truth.contains(e.u) || !truth.contains(e.v)) {
            throw Error(ErrorCategory::NodeUniverseMismatch,
                        "learned edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                            ") is outside the true node set");
        }
    }
    std::size_t common = 0;
    for (const Edge& e : trueEdges) common += learned.edges.count(e);
    const std::size_t symmetricDifference = (trueEdges.size() - common) + (learned.edges.size() - common);
    return std::min(1.0, static_cast<double>(symmetricDifference) / static_cast<double>(trueEdges.size()));
}

void ExperimentConfig::check() const {
    if (sampleCounts.empty()) throw Error(ErrorCategory::InvalidInput, "no sample counts given");
    for (long m : sampleCounts) {
        if (m != kAnalyticSamples && m < 2) {
            throw Error(ErrorCategory::InvalidInput, "sample counts must be at least 2 (got " + std::to_string(m) + ")");
        }
    }
    if (trials < 1) throw Error(ErrorCategory::InvalidInput, "trials must be at least 1");
    if (tau1s.empty() || tau2s.empty()) throw Error(ErrorCategory::InvalidInput, "no tolerances given");
    for (double t : tau1s) LearnerConfig{t, 1.0}.check();
    for (double t : tau2s) LearnerConfig{1.0, t}.check();
}

ExperimentConfig parse_experiment_config(std::istream& in) {
    using nlohmann::json;
    ExperimentConfig cfg;
    try {
        const json j = json::parse(in);
        cfg.gridFile = j.value("grid", std::string{});
        for (const auto& m : j.at("m")) {
            if (m.is_string() && (m == "inf" || m == "analytic")) cfg.sampleCounts.push_back(kAnalyticSamples);
            else cfg.sampleCounts.push_back(m.get<long>());
        }
        cfg.trials = j.value("trials", cfg.trials);
        if (j.contains("tau1")) cfg.tau1s = j.at("tau1").get<std::vector<double>>();
        if (j.contains("tau2")) cfg.tau2s = j.at("tau2").get<std::vector<double>>();
        cfg.seed = j.value("seed", cfg.seed);
        const auto dist = j.value("distribution", std::string("gaussian"));
        if (dist == "gaussian") cfg.distribution = InjectionDistribution::Gaussian;
        else if (dist == "uniform") cfg.distribution = InjectionDistribution::Uniform;
        else if (dist == "two-point") cfg.distribution = InjectionDistribution::TwoPoint;
        else throw Error(ErrorCategory::InvalidInput, "unknown distribution '" + dist + "'");
        const auto rule = j.value("match_rule", std::string("min-residual"));
        if (rule == "min-residual") cfg.matchRule = MatchRule::MinResidual;
        else if (rule == "first-pass") cfg.matchRule = MatchRule::FirstPass;
        else throw Error(ErrorCategory::InvalidInput, "unknown match rule '" + rule + "'");
        const auto mode = j.value("residual_mode", std::string("absolute"));
        if (mode == "absolute") cfg.residualMode = ResidualMode::Absolute;
        else if (mode == "relative") cfg.residualMode = ResidualMode::Relative;
        else throw Error(ErrorCategory::InvalidInput, "unknown residual mode '" + mode + "'");
        cfg.outputPath = j.value("out", std::string{});
        cfg.recordRuntime = j.value("record_runtime", false);
    } catch (const nlohmann::json::exception& err) {
        throw Error(ErrorCategory::ParseError, std::string("experiment config: ") + err.what());
    }
    return cfg;
}

ErrorCurve run_experiment(const ExperimentConfig& cfg, const GridFile& grid) {
    cfg.check();
    const RadialTree truth = grid.truth();
    const auto leaves = grid.leaves();
    const auto missing = grid.missing();

    // Trials are independent; rows are sorted afterwards so the output order
    // never depends on evaluation order.
    ErrorCurve curve;
    for (long m : cfg.sampleCounts) {
        const int trials = m == kAnalyticSamples ? 1 : cfg.trials;
        for (int trial = 0; trial < trials; ++trial) {
            PhiMatrix phi;
            if (m == kAnalyticSamples) {
                phi = analytic_phi_matrix(truth, grid.stats, leaves);
            } else {
                const auto seed = derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(m)),
                                              static_cast<std::uint64_t>(trial));
                phi = empirical_phi(sample_voltages(truth, grid.stats, m, seed, leaves, cfg.distribution));
            }
            for (double tau1 : cfg.tau1s) {
                for (double tau2 : cfg.tau2s) {
                    LearnerConfig lc{tau1, tau2, cfg.matchRule, cfg.residualMode};
                    const auto start = std::chrono::steady_clock::now();
                    const auto learned = learn_topology(phi, grid.stats, grid.graph, leaves, missing, lc);
                    const auto stop = std::chrono::steady_clock::now();
                    ErrorRow row{m, tau1, tau2, trial, fractional_error(learned, truth), 0.0};
                    if (cfg.recordRuntime) {
                        row.runtimeMs = std::chrono::duration<double, std::milli>(stop - start).count();
                    }
                    curve.rows.push_back(row);
                }
            }
        }
    }
    auto key = [](const ErrorRow& r) {
        return std::make_tuple(r.m == kAnalyticSamples, r.m, r.tau1, r.tau2, r.trial);
    };
    std::stable_sort(curve.rows.begin(), curve.rows.end(),
                     [&](const ErrorRow& a, const ErrorRow& b) { return key(a) < key(b); });
    return curve;
}

ErrorCurve run_experiment(const ExperimentConfig& cfg) {
    const GridFile grid = read_grid_file(cfg.gridFile);
    ErrorCurve curve = run_experiment(cfg, grid);
    if (!cfg.outputPath.empty()) {
        std::ofstream out(cfg.outputPath);
        if (!out) throw Error(ErrorCategory::IoError, "cannot write '" + cfg.outputPath + "'");
        write_error_curve(out, curve);
        if (!out) throw Error(ErrorCategory::IoError, "write failed for '" + cfg.outputPath + "'");
    }
    return curve;
}

void write_error_curve(std::ostream& out, const ErrorCurve& curve) {
    out << "m,tau1,tau2,trial,frac_error,runtime_ms\n";
    for (const auto& r : curve.rows) {
        out << (r.m == kAnalyticSamples ? std::string("inf") : std::to_string(r.m)) << ',' << format_double(r.tau1)
            << ',' << format_double(r.tau2) << ',' << r.trial << ',' << format_double(r.fractionalError) << ','
            << format_double(r.runtimeMs) << '\n';
    }
}

std::vector<PointSummary> summarize(const ErrorCurve& curve) {
    std::map<std::tuple<bool, long, double, double>, std::vector<double>> groups;
    for (const auto& r : curve.rows) {
        groups[{r.m == kAnalyticSamples, r.m, r.tau1, r.tau2}].push_back(r.fractionalError);
    }
    std::vector<PointSummary> out;
    for (const auto& [key, errors] : groups) {
        PointSummary s;
        s.m = std::get<1>(key);
        s.tau1 = std::get<2>(key);
        s.tau2 = std::get<3>(key);
        s.trials = static_cast<int>(errors.size());
        double sum = 0.0;
        for (double e : errors) sum += e;
        s.meanError = sum / s.trials;
        if (s.trials > 1) {
            double ss = 0.0;
            for (double e : errors) ss += (e - s.meanError) * (e - s.meanError);
            s.standardError = std::sqrt(ss / (s.trials - 1) / s.trials);
        }
        out.push_back(s);
    }
    return out;
}

std::vector<PointSummary> best_tau_per_m(const ErrorCurve& curve) {
    std::vector<PointSummary> out;
    for (const auto& s : summarize(curve)) {
        if (!out.empty() && out.back().m == s.m) {
            if (s.meanError < out.back().meanError) out.back() = s;
        } else {
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace topolearn
