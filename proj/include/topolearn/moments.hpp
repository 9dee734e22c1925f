#pragma once

#include <vector>

#include <Eigen/Dense>

#include "topolearn/grid.hpp"
#include "topolearn/powerflow.hpp"

namespace topolearn {

/// Pairwise variance of voltage differences over a fixed node list.
struct PhiMatrix {
    std::vector<NodeId> nodes;
    Eigen::MatrixXd values;

    /// Throws UnknownNode if either node is not covered.
    double at(NodeId a, NodeId b) const;
    Eigen::Index index_of(NodeId n) const;
};

/// Unbiased (m - 1) sample variance of v_a - v_b for every column pair.
PhiMatrix empirical_phi(const SampleMatrix& samples);

/// phi_ab from the analytic voltage covariance: Ov(a,a) - 2 Ov(a,b) + Ov(b,b).
double analytic_phi(const RadialTree& tree, const InjectionStats& stats, NodeId a, NodeId b);

/// phi_ab as a sum over injection nodes d of squared inverse-Laplacian
/// differences, each entry taken from root-path sums. Independent of any
/// matrix factorization; must agree with analytic_phi.
double analytic_phi_pathsum(const RadialTree& tree, const InjectionStats& stats, NodeId a, NodeId b);

enum class PhiRoute {
    PathSum,     // per-pair sums over root-path impedances; no cancellation
    Covariance,  // from the factorized voltage covariance
};

/// Analytic phi for all pairs of `nodes`.
PhiMatrix analytic_phi_matrix(const RadialTree& tree, const InjectionStats& stats,
                              const std::vector<NodeId>& nodes, PhiRoute route = PhiRoute::PathSum);

/// Variance contributed by one node's injection through a path with
/// impedance sums (r, x): r^2 varP + x^2 varQ + 2 r x covPQ.
double weighted_variance(double r, double x, const NodeStats& s);

/// phi between two terminal siblings a, c with common parent b.
double theorem1_rhs(const LineImpedance& ab, const LineImpedance& bc, const NodeStats& statsA,
                    const NodeStats& statsC);

/// phi_ac - phi_bc for terminal siblings a, b under k1 and any terminal c that
/// branches off at ancestor k2. All three summaries must end at k2; pathK1 is
/// the k1 -> k2 part and pathA / pathB include the leaf lines. Throws
/// AncestorMismatch otherwise.
double theorem2_rhs(const PathSummary& pathA, const PathSummary& pathB, const PathSummary& pathK1,
                    const NodeStats& statsA, const NodeStats& statsB);

}  // namespace topolearn
