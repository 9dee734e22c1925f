#include "topolearn/grid.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace topolearn {

std::string_view to_string(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::InvalidInput: return "InvalidInput";
        case ErrorCategory::NotSpanningTree: return "NotSpanningTree";
        case ErrorCategory::DegreeTwoMissingNode: return "DegreeTwoMissingNode";
        case ErrorCategory::RootDegreeViolation: return "RootDegreeViolation";
        case ErrorCategory::UnobservedLeaf: return "UnobservedLeaf";
        case ErrorCategory::ObservedInternalNode: return "ObservedInternalNode";
        case ErrorCategory::EdgeNotInGraph: return "EdgeNotInGraph";
        case ErrorCategory::UnknownNode: return "UnknownNode";
        case ErrorCategory::NotAnAncestor: return "NotAnAncestor";
        case ErrorCategory::CycleDetected: return "CycleDetected";
        case ErrorCategory::RootNotAllowed: return "RootNotAllowed";
        case ErrorCategory::SingularMatrix: return "SingularMatrix";
        case ErrorCategory::DimensionMismatch: return "DimensionMismatch";
        case ErrorCategory::NonPSDStats: return "NonPSDStats";
        case ErrorCategory::TooFewSamples: return "TooFewSamples";
        case ErrorCategory::AncestorMismatch: return "AncestorMismatch";
        case ErrorCategory::TooLarge: return "TooLarge";
        case ErrorCategory::NoFeasibleTree: return "NoFeasibleTree";
        case ErrorCategory::InfeasibleShape: return "InfeasibleShape";
        case ErrorCategory::NodeUniverseMismatch: return "NodeUniverseMismatch";
        case ErrorCategory::ParseError: return "ParseError";
        case ErrorCategory::IoError: return "IoError";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// CandidateGraph

CandidateGraph::CandidateGraph(int nodeCount) {
    if (nodeCount < 2) {
        throw Error(ErrorCategory::InvalidInput, "a grid needs the root and at least one other node");
    }
    adjacency_.resize(static_cast<std::size_t>(nodeCount));
}

std::uint64_t CandidateGraph::key(NodeId a, NodeId b) const {
    auto e = Edge::between(a, b);
    return (static_cast<std::uint64_t>(e.u) << 32) | static_cast<std::uint32_t>(e.v);
}

void CandidateGraph::add_edge(NodeId a, NodeId b, LineImpedance z) {
    if (!contains(a) || !contains(b)) {
        throw Error(ErrorCategory::InvalidInput,
                    "edge (" + std::to_string(a) + "," + std::to_string(b) + ") has an unknown endpoint");
    }
    if (a == b) {
        throw Error(ErrorCategory::InvalidInput, "self-loop at node " + std::to_string(a));
    }
    if (!(z.r > 0.0) || !(z.x > 0.0)) {
        throw Error(ErrorCategory::InvalidInput,
                    "edge (" + std::to_string(a) + "," + std::to_string(b) + ") needs r > 0 and x > 0");
    }
    auto e = Edge::between(a, b);
    if (!edges_.emplace(e, z).second) {
        throw Error(ErrorCategory::InvalidInput,
                    "parallel edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
    }
    lookup_.emplace(key(a, b), z);
    auto insertSorted = [](std::vector<NodeId>& list, NodeId n) {
        list.insert(std::upper_bound(list.begin(), list.end(), n), n);
    };
    insertSorted(adjacency_[a], b);
    insertSorted(adjacency_[b], a);
}

const LineImpedance* CandidateGraph::find(NodeId a, NodeId b) const {
    auto it = lookup_.find(key(a, b));
    return it == lookup_.end() ? nullptr : &it->second;
}

const LineImpedance& CandidateGraph::impedance(NodeId a, NodeId b) const {
    if (const auto* z = find(a, b)) return *z;
    throw Error(ErrorCategory::EdgeNotInGraph,
                "edge (" + std::to_string(a) + "," + std::to_string(b) + ") is not a candidate line");
}

// ---------------------------------------------------------------------------
// RadialTree

NodeId RadialTree::parent(NodeId n) const {
    if (!contains(n)) throw Error(ErrorCategory::UnknownNode, "unknown node " + std::to_string(n));
    if (n == root()) throw Error(ErrorCategory::RootNotAllowed, "the root has no parent");
    return parent_[n];
}

const LineImpedance& RadialTree::parent_line(NodeId n) const {
    parent(n);
    return line_[n];
}

int RadialTree::degree(NodeId n) const {
    return static_cast<int>(children_.at(n).size()) + (n == root() ? 0 : 1);
}

std::vector<Edge> RadialTree::edges() const {
    std::vector<Edge> out;
    out.reserve(parent_.size());
    for (NodeId n = 1; n < node_count(); ++n) out.push_back(Edge::between(n, parent_[n]));
    std::sort(out.begin(), out.end());
    return out;
}

const LineImpedance& RadialTree::impedance(Edge e) const {
    if (contains(e.u) && e.u != root() && parent_[e.u] == e.v) return line_[e.u];
    if (contains(e.v) && e.v != root() && parent_[e.v] == e.u) return line_[e.v];
    throw Error(ErrorCategory::EdgeNotInGraph,
                "(" + std::to_string(e.u) + "," + std::to_string(e.v) + ") is not a tree edge");
}

NodeId RadialTree::common_ancestor(NodeId a, NodeId b) const {
    if (!contains(a) || !contains(b)) throw Error(ErrorCategory::UnknownNode, "unknown node");
    while (depth_[a] > depth_[b]) a = parent_[a];
    while (depth_[b] > depth_[a]) b = parent_[b];
    while (a != b) {
        a = parent_[a];
        b = parent_[b];
    }
    return a;
}

bool RadialTree::is_ancestor(NodeId ancestor, NodeId n) const {
    if (!contains(ancestor) || !contains(n)) throw Error(ErrorCategory::UnknownNode, "unknown node");
    while (depth_[n] > depth_[ancestor]) n = parent_[n];
    return n == ancestor;
}

TreeValidationError::TreeValidationError(std::vector<TreeViolation> violations)
    : Error(violations.empty() ? ErrorCategory::InvalidInput : violations.front().rule,
            [&] {
                std::ostringstream os;
                os << "invalid operational tree:";
                for (const auto& v : violations) os << " [" << to_string(v.rule) << "] " << v.message << ";";
                return os.str();
            }()),
      violations_(std::move(violations)) {}

namespace {

std::string join_ids(const std::vector<NodeId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(ids[i]);
    }
    return s;
}

}  // namespace

class TreeBuilder {
public:
    static std::optional<RadialTree> build(const CandidateGraph& graph, const std::vector<Edge>& edges,
                                           NodeId root, const std::vector<NodeId>& leaves,
                                           TreeRules rules, std::vector<TreeViolation>& out) {
        const int n = graph.node_count();
        if (root != kRootNode) {
            out.push_back({ErrorCategory::InvalidInput, {root}, "the substation must be node 0"});
            return std::nullopt;
        }

        std::vector<bool> isLeaf(static_cast<std::size_t>(n), false);
        std::vector<NodeId> badLeafIds;
        for (NodeId l : leaves) {
            if (!graph.contains(l) || l == root) badLeafIds.push_back(l);
            else isLeaf[l] = true;
        }
        if (!badLeafIds.empty()) {
            out.push_back({ErrorCategory::InvalidInput, badLeafIds,
                           "leaf ids out of range or equal to the root: " + join_ids(badLeafIds)});
        }

        std::vector<NodeId> foreign;
        std::set<Edge> unique;
        std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
        bool duplicate = false;
        for (const Edge& raw : edges) {
            Edge e = Edge::between(raw.u, raw.v);
            if (!graph.contains(e.u) || !graph.contains(e.v) || !graph.has_edge(e.u, e.v)) {
                foreign.push_back(e.u);
                foreign.push_back(e.v);
                out.push_back({ErrorCategory::EdgeNotInGraph, {e.u, e.v},
                               "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                   ") is not a candidate line"});
                continue;
            }
            if (!unique.insert(e).second) {
                duplicate = true;
                continue;
            }
            adj[e.u].push_back(e.v);
            adj[e.v].push_back(e.u);
        }

        // Spanning-tree check: exactly n-1 distinct edges, all reachable from the root.
        std::vector<NodeId> parent(static_cast<std::size_t>(n), -1);
        std::vector<int> depth(static_cast<std::size_t>(n), -1);
        std::vector<NodeId> order{root};
        depth[root] = 0;
        bool cycle = false;
        for (std::size_t i = 0; i < order.size(); ++i) {
            NodeId u = order[i];
            for (NodeId v : adj[u]) {
                if (v == parent[u]) continue;
                if (depth[v] >= 0) {
                    cycle = true;
                    continue;
                }
                depth[v] = depth[u] + 1;
                parent[v] = u;
                order.push_back(v);
            }
        }
        std::vector<NodeId> unreached;
        for (NodeId v = 0; v < n; ++v)
            if (depth[v] < 0) unreached.push_back(v);
        bool spanning = !duplicate && !cycle && unreached.empty() &&
                        unique.size() == static_cast<std::size_t>(n - 1) && foreign.empty();
        if (!spanning) {
            std::string why = "expected " + std::to_string(n - 1) + " distinct edges forming a tree, got " +
                              std::to_string(unique.size());
            if (duplicate) why += "; duplicate edges";
            if (cycle) why += "; contains a cycle";
            if (!unreached.empty()) why += "; unreachable from root: " + join_ids(unreached);
            out.push_back({ErrorCategory::NotSpanningTree, unreached, why});
        }

        if (adj[root].size() != 1) {
            out.push_back({ErrorCategory::RootDegreeViolation, {root},
                           "the substation must feed exactly one node, it has degree " +
                               std::to_string(adj[root].size())});
        }

        std::vector<NodeId> degreeTwo, unobservedLeaf, internalObserved;
        for (NodeId v = 1; v < n; ++v) {
            auto deg = adj[v].size();
            if (isLeaf[v]) {
                if (deg > 1) internalObserved.push_back(v);
            } else if (deg == 1) {
                unobservedLeaf.push_back(v);
            } else if (deg == 2 && rules.requireDegreeThreeMissing) {
                degreeTwo.push_back(v);
            }
        }
        if (!degreeTwo.empty()) {
            out.push_back({ErrorCategory::DegreeTwoMissingNode, degreeTwo,
                           "missing nodes of degree 2 make the topology non-unique: " + join_ids(degreeTwo)});
        }
        if (!unobservedLeaf.empty()) {
            out.push_back({ErrorCategory::UnobservedLeaf, unobservedLeaf,
                           "terminal nodes without measurements: " + join_ids(unobservedLeaf)});
        }
        if (!internalObserved.empty()) {
            out.push_back({ErrorCategory::ObservedInternalNode, internalObserved,
                           "observed nodes that are not terminal: " + join_ids(internalObserved)});
        }
        if (!out.empty()) return std::nullopt;

        RadialTree tree;
        tree.parent_ = parent;
        tree.depth_ = depth;
        tree.children_.assign(static_cast<std::size_t>(n), {});
        tree.line_.assign(static_cast<std::size_t>(n), LineImpedance{});
        tree.rootR_.assign(static_cast<std::size_t>(n), 0.0);
        tree.rootX_.assign(static_cast<std::size_t>(n), 0.0);
        tree.isLeaf_ = isLeaf;
        for (NodeId v : order) {
            if (v == root) continue;
            const auto& z = graph.impedance(v, parent[v]);
            tree.line_[v] = z;
            tree.rootR_[v] = tree.rootR_[parent[v]] + z.r;
            tree.rootX_[v] = tree.rootX_[parent[v]] + z.x;
            tree.children_[parent[v]].push_back(v);
        }
        for (auto& c : tree.children_) std::sort(c.begin(), c.end());
        for (NodeId v = 1; v < n; ++v) (isLeaf[v] ? tree.leaves_ : tree.missing_).push_back(v);
        return tree;
    }
};

std::vector<TreeViolation> check_tree(const CandidateGraph& graph, const std::vector<Edge>& edges,
                                      NodeId root, const std::vector<NodeId>& leaves, TreeRules rules) {
    std::vector<TreeViolation> violations;
    TreeBuilder::build(graph, edges, root, leaves, rules, violations);
    return violations;
}

std::optional<RadialTree> try_build_tree(const CandidateGraph& graph, const std::vector<Edge>& edges, NodeId root,
                                         const std::vector<NodeId>& leaves, TreeRules rules) {
    std::vector<TreeViolation> violations;
    return TreeBuilder::build(graph, edges, root, leaves, rules, violations);
}

RadialTree validate_tree(const CandidateGraph& graph, const std::vector<Edge>& edges, NodeId root,
                         const std::vector<NodeId>& leaves, TreeRules rules) {
    std::vector<TreeViolation> violations;
    auto tree = TreeBuilder::build(graph, edges, root, leaves, rules, violations);
    if (!tree) throw TreeValidationError(std::move(violations));
    return std::move(*tree);
}

// ---------------------------------------------------------------------------
// Path queries

std::vector<Edge> path_to_root(const RadialTree& tree, NodeId n) {
    if (!tree.contains(n)) throw Error(ErrorCategory::UnknownNode, "unknown node " + std::to_string(n));
    std::vector<Edge> path;
    while (n != tree.root()) {
        NodeId p = tree.parent(n);
        path.push_back(Edge::between(n, p));
        n = p;
    }
    return path;
}

PathSummary path_impedance(const RadialTree& tree, NodeId n, NodeId ancestor) {
    if (!tree.contains(n) || !tree.contains(ancestor)) {
        throw Error(ErrorCategory::UnknownNode, "unknown node in path query");
    }
    if (!tree.is_ancestor(ancestor, n)) {
        throw Error(ErrorCategory::NotAnAncestor,
                    std::to_string(ancestor) + " is not on the root path of " + std::to_string(n));
    }
    PathSummary s{ancestor, n, 0.0, 0.0};
    for (NodeId v = n; v != ancestor; v = tree.parent(v)) {
        s.rSum += tree.parent_line(v).r;
        s.xSum += tree.parent_line(v).x;
    }
    return s;
}

std::vector<NodeId> post_order(const std::vector<NodeId>& nodes, const std::map<NodeId, NodeId>& parent) {
    std::set<NodeId> members(nodes.begin(), nodes.end());
    std::map<NodeId, std::vector<NodeId>> children;
    std::vector<NodeId> tops;
    for (NodeId v : members) {
        auto it = parent.find(v);
        if (it != parent.end() && members.count(it->second)) children[it->second].push_back(v);
        else tops.push_back(v);
    }

    std::vector<NodeId> out;
    out.reserve(members.size());
    // Iterative DFS; each frame is (node, index of next child to visit).
    std::vector<std::pair<NodeId, std::size_t>> stack;
    for (NodeId top : tops) {
        stack.emplace_back(top, 0);
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            auto it = children.find(v);
            if (it != children.end() && next < it->second.size()) {
                NodeId child = it->second[next++];
                stack.emplace_back(child, 0);
            } else {
                out.push_back(v);
                stack.pop_back();
            }
        }
    }
    if (out.size() != members.size()) {
        std::vector<NodeId> stuck;
        std::set<NodeId> seen(out.begin(), out.end());
        for (NodeId v : members)
            if (!seen.count(v)) stuck.push_back(v);
        throw Error(ErrorCategory::CycleDetected, "parent map has a cycle through " + join_ids(stuck));
    }
    return out;
}

}  // namespace topolearn
