#pragma once

#include <cstdint>

#include "topolearn/gridfile.hpp"

namespace topolearn {

/// Ranges used when drawing synthetic instances. These are generation
/// policy, not properties of any real feeder.
struct GenerationPolicy {
    double impedanceMin = 0.01;  // p.u., both r and x
    double impedanceMax = 0.1;
    double leafVarianceMin = 0.5;
    double leafVarianceMax = 1.5;
    double intermediateVarianceScale = 0.1;  // relative to the leaf range
    double correlationBound = 0.5;           // |corr(p, q)| at a node
    double meanPMin = -1.0;                  // loads by default
    double meanPMax = -0.2;
    double meanQMin = -0.5;
    double meanQMax = -0.1;
};

/// Passing this as extraEdges requests every remaining node pair.
inline constexpr int kAllExtraEdges = -1;

/// Random operational tree with `nLeaves` observed terminals and
/// `nIntermediates` missing nodes (each of degree >= 3, the substation feeding
/// exactly one of them), plus `extraEdges` non-operational candidate lines.
/// Node ids are shuffled. Throws InfeasibleShape unless
/// nLeaves >= nIntermediates + 1 and enough node pairs exist.
GridFile generate_instance(int nLeaves, int nIntermediates, int extraEdges, std::uint64_t seed,
                           const GenerationPolicy& policy = {});

/// Full binary tree below one top node: levels 0..depth, every node above the
/// last level missing; the substation feeds the top node.
GridFile binary_tree_instance(int depth, int extraEdges, std::uint64_t seed, const GenerationPolicy& policy = {});

/// A line of `spineLength` missing nodes, each with one terminal child, the
/// deepest with two, fed from the substation at the top of the line.
GridFile line_with_leaves_instance(int spineLength, int extraEdges, std::uint64_t seed,
                                   const GenerationPolicy& policy = {});

/// Builds a GridFile from an explicit parent list (parent[v] for v >= 1) and
/// leaf set, drawing impedances, stats and extra edges from the policy.
GridFile instance_from_parents(const std::vector<NodeId>& parent, const std::vector<NodeId>& leaves,
                               int extraEdges, std::uint64_t seed, const GenerationPolicy& policy = {});

}  // namespace topolearn
