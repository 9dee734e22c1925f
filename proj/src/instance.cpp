#include "topolearn/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace topolearn {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

NodeStats draw_stats(std::mt19937_64& rng, const GenerationPolicy& policy, double scale) {
    NodeStats s;
    s.varP = scale * uniform(rng, policy.leafVarianceMin, policy.leafVarianceMax);
    s.varQ = scale * uniform(rng, policy.leafVarianceMin, policy.leafVarianceMax);
    s.covPQ = uniform(rng, -policy.correlationBound, policy.correlationBound) * std::sqrt(s.varP * s.varQ);
    s.meanP = uniform(rng, policy.meanPMin, policy.meanPMax);
    s.meanQ = uniform(rng, policy.meanQMin, policy.meanQMax);
    return s;
}

LineImpedance draw_impedance(std::mt19937_64& rng, const GenerationPolicy& policy) {
    return {uniform(rng, policy.impedanceMin, policy.impedanceMax),
            uniform(rng, policy.impedanceMin, policy.impedanceMax)};
}

}  // namespace

GridFile instance_from_parents(const std::vector<NodeId>& parent, const std::vector<NodeId>& leaves, int extraEdges,
                               std::uint64_t seed, const GenerationPolicy& policy) {
    const int n = static_cast<int>(parent.size());
    if (n < 2) throw Error(ErrorCategory::InfeasibleShape, "need at least one non-root node");
    std::mt19937_64 rng(seed);

    GridFile grid;
    grid.graph = CandidateGraph(n);
    grid.kinds.assign(static_cast<std::size_t>(n), NodeKind::Intermediate);
    grid.kinds[kRootNode] = NodeKind::Root;
    for (NodeId l : leaves) grid.kinds.at(l) = NodeKind::Leaf;

    std::set<Edge> tree;
    for (NodeId v = 1; v < n; ++v) {
        const Edge e = Edge::between(v, parent[v]);
        grid.graph.add_edge(e.u, e.v, draw_impedance(rng, policy));
        grid.operational.push_back(e);
        tree.insert(e);
    }
    std::sort(grid.operational.begin(), grid.operational.end());

    std::vector<Edge> spare;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (!tree.count({u, v})) spare.push_back({u, v});
    if (extraEdges == kAllExtraEdges) extraEdges = static_cast<int>(spare.size());
    if (extraEdges < 0 || extraEdges > static_cast<int>(spare.size())) {
        throw Error(ErrorCategory::InfeasibleShape, "cannot add " + std::to_string(extraEdges) +
                                                        " extra edges; only " + std::to_string(spare.size()) +
                                                        " node pairs are free");
    }
    std::shuffle(spare.begin(), spare.end(), rng);
    spare.resize(static_cast<std::size_t>(extraEdges));
    std::sort(spare.begin(), spare.end());
    for (const Edge& e : spare) grid.graph.add_edge(e.u, e.v, draw_impedance(rng, policy));

    for (NodeId v = 1; v < n; ++v) {
        const bool leaf = grid.kinds[v] == NodeKind::Leaf;
        grid.stats.set(v, draw_stats(rng, policy, leaf ? 1.0 : policy.intermediateVarianceScale));
    }
    return grid;
}

GridFile generate_instance(int nLeaves, int nIntermediates, int extraEdges, std::uint64_t seed,
                           const GenerationPolicy& policy) {
    if (nIntermediates < 1 || nLeaves < nIntermediates + 1) {
        throw Error(ErrorCategory::InfeasibleShape,
                    "every missing node needs degree >= 3, which requires at least one more leaf than "
                    "intermediates (got " + std::to_string(nLeaves) + " leaves, " +
                        std::to_string(nIntermediates) + " intermediates)");
    }
    std::mt19937_64 rng(derive_seed(seed, 0));

    // Shape over local indices: intermediates 0..I-1 (0 is the top), leaves
    // I..I+L-1. Giving an intermediate a third intermediate child costs one
    // leaf beyond the I + 1 the degree rule always needs.
    const int total = nLeaves + nIntermediates;
    std::vector<int> localParent(static_cast<std::size_t>(total), -1);
    std::vector<int> kids(static_cast<std::size_t>(nIntermediates), 0);
    int budget = nLeaves - (nIntermediates + 1);
    for (int i = 1; i < nIntermediates; ++i) {
        std::vector<int> allowed;
        for (int j = 0; j < i; ++j)
            if (kids[j] < 2 || budget > 0) allowed.push_back(j);
        const int p = allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)];
        if (kids[p] >= 2) --budget;
        ++kids[p];
        localParent[i] = p;
    }
    int nextLeaf = nIntermediates;
    for (int i = 0; i < nIntermediates; ++i) {
        for (int need = 2 - kids[i]; need > 0; --need) localParent[nextLeaf++] = i;
    }
    std::uniform_int_distribution<int> anyIntermediate(0, nIntermediates - 1);
    while (nextLeaf < total) localParent[nextLeaf++] = anyIntermediate(rng);

    std::vector<NodeId> ids(static_cast<std::size_t>(total));
    std::iota(ids.begin(), ids.end(), 1);
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<NodeId> parent(static_cast<std::size_t>(total + 1), kRootNode);
    for (int i = 0; i < total; ++i) parent[ids[i]] = localParent[i] < 0 ? kRootNode : ids[localParent[i]];
    std::vector<NodeId> leaves(ids.begin() + nIntermediates, ids.end());
    return instance_from_parents(parent, leaves, extraEdges, derive_seed(seed, 1), policy);
}

GridFile binary_tree_instance(int depth, int extraEdges, std::uint64_t seed, const GenerationPolicy& policy) {
    if (depth < 1) throw Error(ErrorCategory::InfeasibleShape, "binary tree depth must be at least 1");
    // Heap numbering shifted by one: top = 1, children of k are 2k and 2k+1.
    const int count = (1 << (depth + 1)) - 1;
    std::vector<NodeId> parent(static_cast<std::size_t>(count + 1), kRootNode);
    for (NodeId k = 2; k <= count; ++k) parent[k] = k / 2;
    std::vector<NodeId> leaves;
    for (NodeId k = 1 << depth; k <= count; ++k) leaves.push_back(k);
    return instance_from_parents(parent, leaves, extraEdges, seed, policy);
}

GridFile line_with_leaves_instance(int spineLength, int extraEdges, std::uint64_t seed,
                                   const GenerationPolicy& policy) {
    if (spineLength < 1) throw Error(ErrorCategory::InfeasibleShape, "spine needs at least one node");
    // Spine nodes 1..s (1 at the top), leaf s+i hangs off spine node i, and
    // the extra leaf 2s+1 gives the deepest spine node its second child.
    const int s = spineLength;
    std::vector<NodeId> parent(static_cast<std::size_t>(2 * s + 2), kRootNode);
    std::vector<NodeId> leaves;
    for (NodeId i = 2; i <= s; ++i) parent[i] = i - 1;
    for (NodeId i = 1; i <= s; ++i) {
        parent[s + i] = i;
        leaves.push_back(s + i);
    }
    parent[2 * s + 1] = s;
    leaves.push_back(2 * s + 1);
    return instance_from_parents(parent, leaves, extraEdges, seed, policy);
}

}  // namespace topolearn
