#include "topolearn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "topolearn/instance.hpp"

namespace topolearn {

void ResidualReport::record(int instance, double residual) {
    maxAbsResidual = std::max(maxAbsResidual, std::abs(residual));
    if (!(std::abs(residual) <= tolerance)) failures.push_back({instance, residual});
}

namespace {

/// Subtree membership lists, children before the recursion returns.
std::vector<std::vector<NodeId>> subtrees(const RadialTree& tree) {
    std::vector<std::vector<NodeId>> below(static_cast<std::size_t>(tree.node_count()));
    // Deepest nodes first so each child's list is complete before its parent merges it.
    std::vector<NodeId> order(static_cast<std::size_t>(tree.node_count()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return tree.depth(a) > tree.depth(b); });
    for (NodeId v : order) {
        below[v].push_back(v);
        if (v == tree.root()) continue;
        auto& up = below[tree.parent(v)];
        up.insert(up.end(), below[v].begin(), below[v].end());
    }
    return below;
}

}  // namespace

TheoremSweepReport theorem_sweep(const TheoremSweepOptions& options) {
    if (options.minNodes < 4 || options.maxNodes < options.minNodes) {
        throw Error(ErrorCategory::InvalidInput, "node range must satisfy 4 <= min <= max");
    }
    TheoremSweepReport report;
    auto make = [&](const char* name) {
        ResidualReport r;
        r.checkName = name;
        r.tolerance = options.tolerance;
        return r;
    };
    ResidualReport siblingGeneral = make("sibling-subtree-sum");
    ResidualReport siblingLeaf = make("sibling-terminal");
    ResidualReport additivity = make("additivity-at-branch");
    ResidualReport triple = make("triple-terminal");
    ResidualReport tripleInvariance = make("triple-third-terminal-invariance");
    const double bump = 1.0 + options.impedancePerturbation;

    std::mt19937_64 rng(options.seed);
    for (int trial = 0; trial < options.trials; ++trial) {
        const int n = std::uniform_int_distribution<int>(options.minNodes, options.maxNodes)(rng);
        const int maxIntermediates = (n - 2) / 2;
        const int intermediates = std::uniform_int_distribution<int>(1, maxIntermediates)(rng);
        const GridFile grid = generate_instance(n - 1 - intermediates, intermediates, 0, derive_seed(options.seed, trial));
        const RadialTree tree = grid.truth();
        const InjectionStats& stats = grid.stats;
        const Eigen::MatrixXd cov = analytic_voltage_moments(tree, stats).cov;
        auto phi = [&](NodeId a, NodeId b) {
            return cov(a - 1, a - 1) - 2.0 * cov(a - 1, b - 1) + cov(b - 1, b - 1);
        };
        auto line = [&](NodeId child) {
            LineImpedance z = tree.parent_line(child);
            z.r *= bump;
            return z;
        };
        const auto below = subtrees(tree);

        double phiScale = 0.0;
        for (NodeId a = 1; a < n; ++a)
            for (NodeId b = a + 1; b < n; ++b) phiScale = std::max(phiScale, phi(a, b));

        // Children a, c of a common parent.
        for (NodeId b = 1; b < n; ++b) {
            const auto& kids = tree.children(b);
            for (std::size_t i = 0; i < kids.size(); ++i) {
                for (std::size_t j = i + 1; j < kids.size(); ++j) {
                    const NodeId a = kids[i], c = kids[j];
                    const auto za = line(a), zc = line(c);
                    double rhs = 0.0;
                    for (NodeId d : below[a]) rhs += weighted_variance(za.r, za.x, stats.at(d));
                    for (NodeId d : below[c]) rhs += weighted_variance(zc.r, zc.x, stats.at(d));
                    siblingGeneral.record(trial, phi(a, c) - rhs);
                    if (tree.is_leaf(a) && tree.is_leaf(c)) {
                        siblingLeaf.record(trial, phi(a, c) - theorem1_rhs(za, zc, stats.at(a), stats.at(c)));
                    }
                }
            }
        }

        // Additivity holds exactly when b is where the root paths of a and c
        // part; every other middle node should leave a gap.
        bool gap = false;
        for (NodeId a = 1; a < n; ++a) {
            for (NodeId c = a + 1; c < n; ++c) {
                const NodeId meet = tree.common_ancestor(a, c);
                for (NodeId b = 1; b < n; ++b) {
                    if (b == a || b == c) continue;
                    const double residual = phi(a, c) - phi(a, b) - phi(b, c);
                    if (b == meet) additivity.record(trial, residual);
                    else if (std::abs(residual) > 1e-6 * phiScale) gap = true;
                }
            }
        }
        if (gap) ++report.instancesWithAdditivityGap;

        // Terminal siblings a, b under k1 against every terminal c that
        // branches off at an ancestor k2 of k1.
        for (NodeId k1 = 1; k1 < n; ++k1) {
            std::vector<NodeId> leafKids;
            for (NodeId v : tree.children(k1))
                if (tree.is_leaf(v)) leafKids.push_back(v);
            for (std::size_t i = 0; i < leafKids.size(); ++i) {
                for (std::size_t j = i + 1; j < leafKids.size(); ++j) {
                    const NodeId a = leafKids[i], b = leafKids[j];
                    for (NodeId k2 = k1; k2 != tree.root(); k2 = tree.parent(k2)) {
                        auto pa = path_impedance(tree, a, k2);
                        auto pb = path_impedance(tree, b, k2);
                        auto pk = path_impedance(tree, k1, k2);
                        pa.rSum += (bump - 1.0) * pa.rSum;
                        pb.rSum += (bump - 1.0) * pb.rSum;
                        pk.rSum += (bump - 1.0) * pk.rSum;
                        const double rhs = theorem2_rhs(pa, pb, pk, stats.at(a), stats.at(b));
                        double lo = std::numeric_limits<double>::infinity();
                        double hi = -lo;
                        for (NodeId c : tree.leaves()) {
                            if (c == a || c == b || tree.common_ancestor(k1, c) != k2) continue;
                            const double lhs = phi(a, c) - phi(b, c);
                            triple.record(trial, lhs - rhs);
                            lo = std::min(lo, lhs);
                            hi = std::max(hi, lhs);
                        }
                        if (lo <= hi) tripleInvariance.record(trial, hi - lo);
                    }
                }
            }
        }
        ++report.instances;
    }

    report.identities = {siblingGeneral, siblingLeaf, additivity, triple, tripleInvariance};
    report.combined = make("theorem-identities");
    for (auto& r : report.identities) {
        r.instances = report.instances;
        report.combined.maxAbsResidual = std::max(report.combined.maxAbsResidual, r.maxAbsResidual);
        report.combined.failures.insert(report.combined.failures.end(), r.failures.begin(), r.failures.end());
    }
    report.combined.instances = report.instances;
    return report;
}

// ---------------------------------------------------------------------------
// Exhaustive spanning-tree search

namespace {

class DisjointSets {
public:
    explicit DisjointSets(int n) : parent_(static_cast<std::size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int v) {
        while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
        return v;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[a] = b;
        return true;
    }

private:
    std::vector<int> parent_;
};

class TreeEnumerator {
public:
    TreeEnumerator(const CandidateGraph& graph, const PhiMatrix& phi, const InjectionStats& stats,
                   const std::vector<NodeId>& leaves, TreeRules rules)
        : graph_(graph), phi_(phi), stats_(stats), leaves_(leaves), rules_(rules) {
        for (const auto& [e, z] : graph.edges()) edges_.push_back(e);
        isLeaf_.assign(static_cast<std::size_t>(graph.node_count()), false);
        for (NodeId l : leaves) isLeaf_[l] = true;
        degree_.assign(static_cast<std::size_t>(graph.node_count()), 0);
    }

    std::vector<ScoredTree> run() {
        recurse(0, DisjointSets(graph_.node_count()));
        return std::move(found_);
    }

private:
    int cap(NodeId v) const {
        if (v == kRootNode || isLeaf_[v]) return 1;
        return std::numeric_limits<int>::max();
    }

    bool still_connectable(std::size_t from, DisjointSets sets) const {
        for (std::size_t i = from; i < edges_.size(); ++i) sets.unite(edges_[i].u, edges_[i].v);
        const int r = sets.find(0);
        for (NodeId v = 1; v < graph_.node_count(); ++v)
            if (sets.find(v) != r) return false;
        return true;
    }

    void recurse(std::size_t i, DisjointSets sets) {
        const auto target = static_cast<std::size_t>(graph_.node_count() - 1);
        if (chosen_.size() == target) {
            score();
            return;
        }
        if (i == edges_.size() || chosen_.size() + (edges_.size() - i) < target) return;

        const Edge e = edges_[i];
        if (degree_[e.u] < cap(e.u) && degree_[e.v] < cap(e.v)) {
            DisjointSets with = sets;
            if (with.unite(e.u, e.v)) {
                chosen_.push_back(e);
                ++degree_[e.u];
                ++degree_[e.v];
                recurse(i + 1, with);
                --degree_[e.u];
                --degree_[e.v];
                chosen_.pop_back();
            }
        }
        DisjointSets without = sets;
        for (const Edge& c : chosen_) without.unite(c.u, c.v);
        if (still_connectable(i + 1, without)) recurse(i + 1, sets);
    }

    void score() {
        auto tree = try_build_tree(graph_, chosen_, kRootNode, leaves_, rules_);
        if (!tree) return;
        const PhiMatrix model = analytic_phi_matrix(*tree, stats_, phi_.nodes);
        double total = 0.0;
        for (Eigen::Index a = 0; a < model.values.rows(); ++a) {
            for (Eigen::Index b = a + 1; b < model.values.cols(); ++b) {
                const double d = phi_.values(a, b) - model.values(a, b);
                total += d * d;
            }
        }
        found_.push_back({chosen_, total});
    }

    const CandidateGraph& graph_;
    const PhiMatrix& phi_;
    const InjectionStats& stats_;
    const std::vector<NodeId>& leaves_;
    TreeRules rules_;
    std::vector<Edge> edges_;
    std::vector<bool> isLeaf_;
    std::vector<int> degree_;
    std::vector<Edge> chosen_;
    std::vector<ScoredTree> found_;
};

}  // namespace

ExhaustiveSearchResult exhaustive_tree_search(const CandidateGraph& graph, const PhiMatrix& leafPhi,
                                              const InjectionStats& stats, const std::vector<NodeId>& leaves,
                                              NodeId root, const ExhaustiveSearchOptions& options) {
    if (graph.node_count() > options.maxNodes) {
        throw Error(ErrorCategory::TooLarge, "exhaustive search is limited to " + std::to_string(options.maxNodes) +
                                                 " nodes, graph has " + std::to_string(graph.node_count()));
    }
    if (root != kRootNode) throw Error(ErrorCategory::InvalidInput, "the substation must be node 0");
    std::vector<NodeId> sortedLeaves = leaves;
    std::sort(sortedLeaves.begin(), sortedLeaves.end());
    std::vector<NodeId> phiNodes = leafPhi.nodes;
    std::sort(phiNodes.begin(), phiNodes.end());
    if (phiNodes != sortedLeaves) {
        throw Error(ErrorCategory::InvalidInput, "phi must cover exactly the terminal nodes");
    }

    TreeEnumerator enumerator(graph, leafPhi, stats, sortedLeaves, TreeRules{options.requireDegreeThreeMissing});
    ExhaustiveSearchResult result;
    result.feasible = enumerator.run();
    if (result.feasible.empty()) throw Error(ErrorCategory::NoFeasibleTree, "no spanning tree satisfies the rules");
    std::stable_sort(result.feasible.begin(), result.feasible.end(),
                     [](const ScoredTree& a, const ScoredTree& b) { return a.score < b.score; });
    result.best = result.feasible.front();
    for (const auto& t : result.feasible)
        if (t.score <= result.best.score + options.tieTolerance) ++result.minimizers;
    return result;
}

// ---------------------------------------------------------------------------
// Monte Carlo moments

MonteCarloReport montecarlo_moment_check(const RadialTree& tree, const InjectionStats& stats, long m,
                                         std::uint64_t seed, double sigmas, InjectionDistribution dist) {
    if (m < 1000) throw Error(ErrorCategory::TooFewSamples, "the moment check needs at least 1000 samples");
    std::vector<NodeId> nodes(static_cast<std::size_t>(tree.node_count() - 1));
    std::iota(nodes.begin(), nodes.end(), 1);
    const VoltageMoments exact = analytic_voltage_moments(tree, stats);
    const SampleMatrix samples = sample_voltages(tree, stats, m, seed, nodes, dist);

    MonteCarloReport report;
    report.mean.checkName = "mean";
    report.covariance.checkName = "covariance";
    report.phi.checkName = "phi";
    for (auto* r : {&report.mean, &report.covariance, &report.phi}) {
        r->tolerance = sigmas;
        r->instances = 1;
    }

    const double md = static_cast<double>(m);
    auto standardized = [](double delta, double se, double scale) {
        if (se > 0.0) return delta / se;
        return std::abs(delta) <= 1e-12 * (1.0 + std::abs(scale)) ? 0.0 : std::numeric_limits<double>::infinity();
    };
    // Standard error of a mean from the sample's own spread.
    auto meanError = [&](const Eigen::VectorXd& values) {
        const double mu = values.mean();
        return std::sqrt((values.array() - mu).square().sum() / (md - 1.0) / md);
    };

    const Eigen::RowVectorXd mean = samples.values.colwise().mean();
    const Eigen::MatrixXd centred = samples.values.rowwise() - mean;
    const auto k = centred.cols();
    std::vector<double> covErrors;
    for (Eigen::Index a = 0; a < k; ++a) {
        report.mean.record(0, standardized(mean(a) - exact.mean(a), meanError(centred.col(a)), exact.mean(a)));
        for (Eigen::Index b = a; b < k; ++b) {
            const Eigen::VectorXd prod = centred.col(a).cwiseProduct(centred.col(b));
            const double empirical = prod.sum() / (md - 1.0);
            const double se = meanError(prod);
            covErrors.push_back(se);
            report.covariance.record(0, standardized(empirical - exact.cov(a, b), se, exact.cov(a, b)));
            if (a == b) continue;
            const Eigen::VectorXd diff = centred.col(a) - centred.col(b);
            const Eigen::VectorXd sq = diff.cwiseProduct(diff);
            const double exactPhi = exact.cov(a, a) - 2.0 * exact.cov(a, b) + exact.cov(b, b);
            report.phi.record(0, standardized(sq.sum() / (md - 1.0) - exactPhi, meanError(sq), exactPhi));
        }
    }
    std::sort(covErrors.begin(), covErrors.end());
    report.typicalStandardError = covErrors[covErrors.size() / 2];
    return report;
}

}  // namespace topolearn
