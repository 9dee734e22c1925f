#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "topolearn/error.hpp"

namespace topolearn {

/// Dense node index. Node 0 is the substation and acts as the reference bus;
/// every other node maps to row/column (id - 1) of the reduced matrices.
using NodeId = int;
inline constexpr NodeId kRootNode = 0;

/// Undirected edge stored with u < v.
struct Edge {
    NodeId u = 0;
    NodeId v = 0;

    static Edge between(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
    NodeId other(NodeId end) const { return end == u ? v : u; }

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Per-unit series impedance r + jx of a line.
struct LineImpedance {
    double r = 0.0;
    double x = 0.0;

    // Linearized flow coefficients g = r/|z|^2 and beta = x/|z|^2. Exposed for
    // inspection; the learner never uses them.
    double conductance() const { return r / (r * r + x * x); }
    double susceptance() const { return x / (r * r + x * x); }

    friend bool operator==(const LineImpedance&, const LineImpedance&) = default;
};

/// The loopy set of all lines that could be switched on, with impedances.
class CandidateGraph {
public:
    explicit CandidateGraph(int nodeCount);

    /// Throws InvalidInput on self-loops, parallel edges, unknown endpoints or
    /// non-positive r/x.
    void add_edge(NodeId a, NodeId b, LineImpedance z);

    int node_count() const { return static_cast<int>(adjacency_.size()); }
    bool contains(NodeId n) const { return n >= 0 && n < node_count(); }
    bool has_edge(NodeId a, NodeId b) const { return find(a, b) != nullptr; }
    const LineImpedance* find(NodeId a, NodeId b) const;
    const LineImpedance& impedance(NodeId a, NodeId b) const;
    const std::vector<NodeId>& neighbors(NodeId n) const { return adjacency_.at(n); }
    const std::map<Edge, LineImpedance>& edges() const { return edges_; }
    std::size_t edge_count() const { return edges_.size(); }

private:
    std::uint64_t key(NodeId a, NodeId b) const;

    std::map<Edge, LineImpedance> edges_;
    std::unordered_map<std::uint64_t, LineImpedance> lookup_;
    std::vector<std::vector<NodeId>> adjacency_;
};

/// Rooted operational tree. Only constructed through validate_tree, so every
/// instance satisfies the structural invariants checked there.
class RadialTree {
public:
    NodeId root() const { return kRootNode; }
    int node_count() const { return static_cast<int>(parent_.size()); }
    bool contains(NodeId n) const { return n >= 0 && n < node_count(); }

    /// Parent of a non-root node; throws UnknownNode / RootNotAllowed.
    NodeId parent(NodeId n) const;
    const LineImpedance& parent_line(NodeId n) const;
    const std::vector<NodeId>& children(NodeId n) const { return children_.at(n); }
    int depth(NodeId n) const { return depth_.at(n); }
    int degree(NodeId n) const;

    const std::vector<NodeId>& leaves() const { return leaves_; }
    const std::vector<NodeId>& missing() const { return missing_; }
    bool is_leaf(NodeId n) const { return isLeaf_.at(n); }

    std::vector<Edge> edges() const;
    const LineImpedance& impedance(Edge e) const;

    /// Resistance / reactance summed over the path from n up to the root.
    double resistance_to_root(NodeId n) const { return rootR_.at(n); }
    double reactance_to_root(NodeId n) const { return rootX_.at(n); }

    NodeId common_ancestor(NodeId a, NodeId b) const;
    bool is_ancestor(NodeId ancestor, NodeId n) const;

private:
    friend class TreeBuilder;
    RadialTree() = default;

    std::vector<NodeId> parent_;
    std::vector<LineImpedance> line_;
    std::vector<std::vector<NodeId>> children_;
    std::vector<int> depth_;
    std::vector<double> rootR_;
    std::vector<double> rootX_;
    std::vector<NodeId> leaves_;
    std::vector<NodeId> missing_;
    std::vector<bool> isLeaf_;
};

struct TreeViolation {
    ErrorCategory rule;
    std::vector<NodeId> nodes;
    std::string message;
};

class TreeValidationError : public Error {
public:
    explicit TreeValidationError(std::vector<TreeViolation> violations);
    const std::vector<TreeViolation>& violations() const { return violations_; }

private:
    std::vector<TreeViolation> violations_;
};

struct TreeRules {
    // Missing nodes of degree two make the leaf statistics ambiguous. The only
    // caller that turns this off is the exhaustive oracle when it demonstrates
    // exactly that ambiguity.
    bool requireDegreeThreeMissing = true;
};

/// All rule violations of a claimed operational edge set; empty when valid.
std::vector<TreeViolation> check_tree(const CandidateGraph& graph, const std::vector<Edge>& edges,
                                      NodeId root, const std::vector<NodeId>& leaves,
                                      TreeRules rules = {});

/// Non-throwing variant: the tree, or nullopt if any rule is violated.
std::optional<RadialTree> try_build_tree(const CandidateGraph& graph, const std::vector<Edge>& edges, NodeId root,
                                         const std::vector<NodeId>& leaves, TreeRules rules = {});

/// Builds a RadialTree or throws TreeValidationError listing every violation.
RadialTree validate_tree(const CandidateGraph& graph, const std::vector<Edge>& edges, NodeId root,
                         const std::vector<NodeId>& leaves, TreeRules rules = {});

struct PathSummary {
    NodeId ancestor = kRootNode;
    NodeId node = kRootNode;
    double rSum = 0.0;
    double xSum = 0.0;
};

/// Edges from `n` upward to the root, nearest first.
std::vector<Edge> path_to_root(const RadialTree& tree, NodeId n);

/// Impedance sums over the tree path between `n` and its ancestor.
PathSummary path_impedance(const RadialTree& tree, NodeId n, NodeId ancestor);

/// Post-order of `nodes` under the child->parent relation `parent`. Nodes
/// whose parent is absent from `nodes` start a subtree; siblings and subtree
/// roots are visited in ascending id. Throws CycleDetected.
std::vector<NodeId> post_order(const std::vector<NodeId>& nodes,
                               const std::map<NodeId, NodeId>& parent);

}  // namespace topolearn
