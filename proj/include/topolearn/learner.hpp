#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "topolearn/grid.hpp"
#include "topolearn/moments.hpp"
#include "topolearn/powerflow.hpp"

namespace topolearn {

enum class MatchRule {
    FirstPass,    // first candidate (ascending ids) within tolerance
    MinResidual,  // smallest residual within tolerance; ties go to the smaller ids
};

enum class ResidualMode {
    Absolute,  // |lhs - rhs|
    Relative,  // |lhs - rhs| / max(|lhs|, |rhs|)
};

struct LearnerConfig {
    double tau1 = 1e-8;  // sibling-leaf check
    double tau2 = 1e-8;  // triple check
    MatchRule matchRule = MatchRule::MinResidual;
    ResidualMode residualMode = ResidualMode::Absolute;

    /// Throws InvalidInput unless both tolerances are positive and finite.
    void check() const;
};

enum class Stage { LeafPair, Intermediate, LeafPlacement, RootJoin };

std::string_view to_string(Stage stage);
std::string_view to_string(MatchRule rule);

struct Provenance {
    Stage stage = Stage::LeafPair;
    double residual = 0.0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Learner state between stages. par/des are indexed by node id; des holds
/// two leaves (lower id first) below the node.
struct PartialForest {
    std::vector<std::optional<NodeId>> par;
    std::vector<std::optional<std::pair<NodeId, NodeId>>> des;
    std::map<Edge, Provenance> edges;
    std::vector<std::string> diagnostics;
    int stage2Iterations = 0;
    bool stalled = false;
};

enum class TopologyStatus { Complete, Partial };

struct LearnedTopology {
    std::map<Edge, Provenance> edges;
    TopologyStatus status = TopologyStatus::Partial;
    std::vector<std::string> diagnostics;

    std::vector<Edge> edge_list() const;
};

/// Reconstructs the operational tree from terminal-node phi statistics,
/// terminal injection statistics and the candidate line set. Works from leaf
/// pairs up to the substation, then places the remaining single leaves.
class TopologyLearner {
public:
    /// Throws InvalidInput when leaves, missing nodes and the root do not
    /// partition the graph's nodes, or when phi / stats do not cover a leaf.
    TopologyLearner(const PhiMatrix& phi, const InjectionStats& stats, const CandidateGraph& graph,
                    std::vector<NodeId> leaves, std::vector<NodeId> missing, LearnerConfig cfg);

    /// Matches terminal siblings to their common missing parent.
    PartialForest stage1_leaf_pairs() const;

    /// Links discovered intermediates upward until no new parent is found,
    /// then joins the single remaining top node to the substation.
    PartialForest stage2_intermediates(PartialForest state) const;

    /// Attaches each unmatched leaf to the first passing intermediate in
    /// post-order.
    LearnedTopology stage3_place_leaves(PartialForest state) const;

    LearnedTopology run() const;

private:
    struct Chain {
        NodeId k1 = kRootNode;
        double r = 0.0;  // k1 -> top of chain
        double x = 0.0;
        bool ok = false;
    };
    struct Candidate {
        NodeId node = -1;
        double residual = 0.0;
    };

    double phi(NodeId a, NodeId b) const;
    double residual(double lhs, double rhs) const;
    Chain chain_up(const PartialForest& state, NodeId top) const;
    double triple_residual(const PartialForest& state, NodeId top, const Chain& chain, double extraR,
                           double extraX, NodeId c) const;
    bool offer(std::optional<Candidate>& best, NodeId node, double res, double tau) const;

    const PhiMatrix& phi_;
    const InjectionStats& stats_;
    const CandidateGraph& graph_;
    std::vector<NodeId> leaves_;
    std::vector<NodeId> missing_;
    LearnerConfig cfg_;
    std::vector<bool> isLeaf_;
    std::vector<bool> isMissing_;
    std::vector<Eigen::Index> phiIndex_;
};

LearnedTopology learn_topology(const PhiMatrix& phi, const InjectionStats& stats, const CandidateGraph& graph,
                               const std::vector<NodeId>& leaves, const std::vector<NodeId>& missing,
                               const LearnerConfig& cfg);

}  // namespace topolearn
