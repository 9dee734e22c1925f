#pragma once

#include <utility>
#include <vector>

#include "topolearn/grid.hpp"

namespace support {

struct Line {
    topolearn::NodeId a;
    topolearn::NodeId b;
    double r;
    double x;
};

/// Graph whose edges are exactly `lines`, plus the tree over all of them.
inline std::pair<topolearn::CandidateGraph, std::vector<topolearn::Edge>> graph_of(int n, const std::vector<Line>& lines) {
    topolearn::CandidateGraph g(n);
    std::vector<topolearn::Edge> edges;
    for (const auto& l : lines) {
        g.add_edge(l.a, l.b, {l.r, l.x});
        edges.push_back(topolearn::Edge::between(l.a, l.b));
    }
    return {std::move(g), edges};
}

inline topolearn::RadialTree tree_of(int n, const std::vector<Line>& lines, const std::vector<topolearn::NodeId>& leaves) {
    auto [g, edges] = graph_of(n, lines);
    return topolearn::validate_tree(g, edges, topolearn::kRootNode, leaves);
}

}  // namespace support
