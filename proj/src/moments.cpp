#include "topolearn/moments.hpp"

#include <algorithm>

namespace topolearn {

Eigen::Index PhiMatrix::index_of(NodeId n) const {
    auto it = std::find(nodes.begin(), nodes.end(), n);
    if (it == nodes.end()) throw Error(ErrorCategory::UnknownNode, "node " + std::to_string(n) + " has no phi entries");
    return static_cast<Eigen::Index>(it - nodes.begin());
}

double PhiMatrix::at(NodeId a, NodeId b) const { return values(index_of(a), index_of(b)); }

PhiMatrix empirical_phi(const SampleMatrix& samples) {
    const Eigen::Index m = samples.values.rows();
    const Eigen::Index k = samples.values.cols();
    if (m < 2) throw Error(ErrorCategory::TooFewSamples, "phi needs at least two observations");
    if (k != static_cast<Eigen::Index>(samples.observed.size())) {
        throw Error(ErrorCategory::DimensionMismatch, "sample columns do not match the observed node list");
    }

    // Centre each column first; the difference of centred columns is then
    // already zero-mean and the variance is a plain sum of squares.
    const Eigen::RowVectorXd mean = samples.values.colwise().mean();
    const Eigen::MatrixXd centred = samples.values.rowwise() - mean;
    PhiMatrix phi{samples.observed, Eigen::MatrixXd::Zero(k, k)};
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a + 1; b < k; ++b) {
            const double value = (centred.col(a) - centred.col(b)).squaredNorm() / static_cast<double>(m - 1);
            phi.values(a, b) = value;
            phi.values(b, a) = value;
        }
    }
    return phi;
}

double analytic_phi(const RadialTree& tree, const InjectionStats& stats, NodeId a, NodeId b) {
    if (a == b) return 0.0;
    for (NodeId n : {a, b}) {
        if (!tree.contains(n)) throw Error(ErrorCategory::UnknownNode, "unknown node " + std::to_string(n));
        if (n == tree.root()) throw Error(ErrorCategory::RootNotAllowed, "phi is defined on non-root nodes");
    }
    const auto moments = analytic_voltage_moments(tree, stats);
    const auto& cov = moments.cov;
    return cov(a - 1, a - 1) - 2.0 * cov(a - 1, b - 1) + cov(b - 1, b - 1);
}

double analytic_phi_pathsum(const RadialTree& tree, const InjectionStats& stats, NodeId a, NodeId b) {
    if (a == b) return 0.0;
    double total = 0.0;
    for (NodeId d = 1; d < tree.node_count(); ++d) {
        const double dr = hinv_entry_pathsum(tree, a, d, WeightKind::InverseResistance) -
                          hinv_entry_pathsum(tree, b, d, WeightKind::InverseResistance);
        const double dx = hinv_entry_pathsum(tree, a, d, WeightKind::InverseReactance) -
                          hinv_entry_pathsum(tree, b, d, WeightKind::InverseReactance);
        if (dr == 0.0 && dx == 0.0) continue;
        total += weighted_variance(dr, dx, stats.at(d));
    }
    return total;
}

PhiMatrix analytic_phi_matrix(const RadialTree& tree, const InjectionStats& stats,
                              const std::vector<NodeId>& nodes, PhiRoute route) {
    for (NodeId n : nodes) {
        if (!tree.contains(n)) throw Error(ErrorCategory::UnknownNode, "unknown node " + std::to_string(n));
        if (n == tree.root()) throw Error(ErrorCategory::RootNotAllowed, "phi is defined on non-root nodes");
    }
    const auto k = static_cast<Eigen::Index>(nodes.size());
    PhiMatrix phi{nodes, Eigen::MatrixXd::Zero(k, k)};
    Eigen::MatrixXd cov;
    if (route == PhiRoute::Covariance) cov = analytic_voltage_moments(tree, stats).cov;
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const NodeId a = nodes[static_cast<std::size_t>(i)];
            const NodeId b = nodes[static_cast<std::size_t>(j)];
            const double value =
                route == PhiRoute::PathSum
                    ? analytic_phi_pathsum(tree, stats, a, b)
                    : std::max(0.0, cov(a - 1, a - 1) - 2.0 * cov(a - 1, b - 1) + cov(b - 1, b - 1));
            phi.values(i, j) = value;
            phi.values(j, i) = value;
        }
    }
    return phi;
}

double weighted_variance(double r, double x, const NodeStats& s) {
    return r * r * s.varP + x * x * s.varQ + 2.0 * r * x * s.covPQ;
}

double theorem1_rhs(const LineImpedance& ab, const LineImpedance& bc, const NodeStats& statsA,
                    const NodeStats& statsC) {
    return weighted_variance(ab.r, ab.x, statsA) + weighted_variance(bc.r, bc.x, statsC);
}

double theorem2_rhs(const PathSummary& pathA, const PathSummary& pathB, const PathSummary& pathK1,
                    const NodeStats& statsA, const NodeStats& statsB) {
    if (pathA.ancestor != pathB.ancestor || pathA.ancestor != pathK1.ancestor) {
        throw Error(ErrorCategory::AncestorMismatch, "path summaries must end at the same ancestor");
    }
    // Only the injections at a and b survive in phi_ac - phi_bc. At a the
    // inverse-Laplacian differences are the a->k2 and k1->k2 path sums, at b
    // the roles swap.
    const double atA = weighted_variance(pathA.rSum, pathA.xSum, statsA) -
                       weighted_variance(pathK1.rSum, pathK1.xSum, statsA);
    const double atB = weighted_variance(pathK1.rSum, pathK1.xSum, statsB) -
                       weighted_variance(pathB.rSum, pathB.xSum, statsB);
    return atA + atB;
}

}  // namespace topolearn
