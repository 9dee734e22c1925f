#include "topolearn/learner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace topolearn {

void LearnerConfig::check() const {
    if (!(tau1 > 0.0) || !(tau2 > 0.0) || !std::isfinite(tau1) || !std::isfinite(tau2)) {
        throw Error(ErrorCategory::InvalidInput, "tolerances tau1 and tau2 must be positive");
    }
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::LeafPair: return "leaf-pair";
        case Stage::Intermediate: return "intermediate";
        case Stage::LeafPlacement: return "leaf-placement";
        case Stage::RootJoin: return "root-join";
    }
    return "unknown";
}

std::string_view to_string(MatchRule rule) {
    return rule == MatchRule::FirstPass ? "first-pass" : "min-residual";
}

std::vector<Edge> LearnedTopology::edge_list() const {
    std::vector<Edge> out;
    out.reserve(edges.size());
    for (const auto& [e, prov] : edges) out.push_back(e);
    return out;
}

TopologyLearner::TopologyLearner(const PhiMatrix& phi, const InjectionStats& stats, const CandidateGraph& graph,
                                 std::vector<NodeId> leaves, std::vector<NodeId> missing, LearnerConfig cfg)
    : phi_(phi),
      stats_(stats),
      graph_(graph),
      leaves_(std::move(leaves)),
      missing_(std::move(missing)),
      cfg_(cfg) {
    cfg_.check();
    const auto n = static_cast<std::size_t>(graph_.node_count());
    isLeaf_.assign(n, false);
    isMissing_.assign(n, false);
    std::vector<int> seen(n, 0);
    seen[kRootNode] = 1;
    for (NodeId l : leaves_) {
        if (!graph_.contains(l) || seen[l]++) {
            throw Error(ErrorCategory::InvalidInput, "leaf " + std::to_string(l) + " is unknown or listed twice");
        }
        isLeaf_[l] = true;
    }
    for (NodeId k : missing_) {
        if (!graph_.contains(k) || seen[k]++) {
            throw Error(ErrorCategory::InvalidInput, "missing node " + std::to_string(k) + " is unknown or listed twice");
        }
        isMissing_[k] = true;
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (!seen[v]) {
            throw Error(ErrorCategory::InvalidInput,
                        "node " + std::to_string(v) + " is neither a leaf, a missing node nor the root");
        }
    }
    std::sort(leaves_.begin(), leaves_.end());
    std::sort(missing_.begin(), missing_.end());

    phiIndex_.assign(n, -1);
    for (NodeId l : leaves_) {
        phiIndex_[l] = phi_.index_of(l);
        stats_.at(l);
    }
    if (phi_.values.rows() != static_cast<Eigen::Index>(phi_.nodes.size()) ||
        phi_.values.cols() != static_cast<Eigen::Index>(phi_.nodes.size())) {
        throw Error(ErrorCategory::DimensionMismatch, "phi matrix does not match its node list");
    }
}

double TopologyLearner::phi(NodeId a, NodeId b) const { return phi_.values(phiIndex_[a], phiIndex_[b]); }

double TopologyLearner::residual(double lhs, double rhs) const {
    const double diff = std::abs(lhs - rhs);
    if (cfg_.residualMode == ResidualMode::Absolute) return diff;
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    return scale > 0.0 ? diff / scale : 0.0;
}

bool TopologyLearner::offer(std::optional<Candidate>& best, NodeId node, double res, double tau) const {
    if (!(res <= tau)) return false;
    if (!best || res < best->residual) best = Candidate{node, res};
    return cfg_.matchRule == MatchRule::FirstPass;
}

TopologyLearner::Chain TopologyLearner::chain_up(const PartialForest& state, NodeId top) const {
    Chain chain;
    const auto& d = state.des[top];
    if (!d) return chain;
    const auto k1 = state.par[d->first];
    if (!k1) return chain;
    chain.k1 = *k1;
    for (NodeId v = chain.k1; v != top;) {
        const auto& up = state.par[v];
        if (!up || *up == kRootNode) return chain;
        const auto& z = graph_.impedance(v, *up);
        chain.r += z.r;
        chain.x += z.x;
        v = *up;
    }
    chain.ok = true;
    return chain;
}

double TopologyLearner::triple_residual(const PartialForest& state, NodeId top, const Chain& chain, double extraR,
                                        double extraX, NodeId c) const {
    const auto [a, b] = *state.des[top];
    const auto& za = graph_.impedance(a, chain.k1);
    const auto& zb = graph_.impedance(b, chain.k1);
    // The common ancestor id only has to agree between the three summaries.
    const PathSummary k1Path{-1, chain.k1, chain.r + extraR, chain.x + extraX};
    const PathSummary aPath{-1, a, za.r + k1Path.rSum, za.x + k1Path.xSum};
    const PathSummary bPath{-1, b, zb.r + k1Path.rSum, zb.x + k1Path.xSum};
    const double rhs = theorem2_rhs(aPath, bPath, k1Path, stats_.at(a), stats_.at(b));
    return residual(phi(a, c) - phi(b, c), rhs);
}

PartialForest TopologyLearner::stage1_leaf_pairs() const {
    const auto n = static_cast<std::size_t>(graph_.node_count());
    PartialForest state;
    state.par.assign(n, std::nullopt);
    state.des.assign(n, std::nullopt);

    for (NodeId a : leaves_) {
        if (state.par[a]) continue;
        std::optional<Candidate> best;  // node encodes b * n + c
        bool done = false;
        for (NodeId b : graph_.neighbors(a)) {
            if (!isMissing_[b]) continue;
            const auto& zab = graph_.impedance(a, b);
            for (NodeId c : graph_.neighbors(b)) {
                if (c == a || !isLeaf_[c]) continue;
                if (state.par[c] && *state.par[c] != b) continue;
                const double rhs = theorem1_rhs(zab, graph_.impedance(b, c), stats_.at(a), stats_.at(c));
                if (offer(best, b * static_cast<NodeId>(n) + c, residual(phi(a, c), rhs), cfg_.tau1)) {
                    done = true;
                    break;
                }
            }
            if (done) break;
        }
        if (!best) continue;
        const NodeId b = best->node / static_cast<NodeId>(n);
        const NodeId c = best->node % static_cast<NodeId>(n);
        state.edges.try_emplace(Edge::between(a, b), Provenance{Stage::LeafPair, best->residual});
        state.edges.try_emplace(Edge::between(b, c), Provenance{Stage::LeafPair, best->residual});
        state.par[a] = b;
        if (!state.par[c]) state.par[c] = b;
        if (!state.des[b]) state.des[b] = std::minmax(a, c);
    }
    return state;
}

PartialForest TopologyLearner::stage2_intermediates(PartialForest state) const {
    const auto n = static_cast<std::size_t>(graph_.node_count());
    std::vector<bool> fresh(n, false);
    for (NodeId k : missing_)
        if (state.des[k]) fresh[k] = true;

    auto isDescendant = [&](NodeId v, NodeId of) {
        for (auto up = state.par[v]; up; up = state.par[*up]) {
            if (*up == of) return true;
            if (*up == kRootNode) break;
        }
        return false;
    };

    while (true) {
        std::vector<NodeId> parentless;
        std::vector<bool> discovered(n, false);
        for (NodeId k : missing_) {
            if (!state.des[k]) continue;
            discovered[k] = true;
            if (!state.par[k]) parentless.push_back(k);
        }
        std::vector<bool> freshNext(n, false);
        int found = 0;

        for (NodeId k : parentless) {
            const Chain chain = chain_up(state, k);
            if (!chain.ok) continue;
            const auto [a, b] = *state.des[k];

            // Parent already discovered through another child.
            std::optional<Candidate> best;
            for (NodeId k2 : graph_.neighbors(k)) {
                if (!isMissing_[k2] || !discovered[k2] || !(fresh[k] || fresh[k2])) continue;
                const NodeId c = state.des[k2]->first;
                const auto& z = graph_.impedance(k, k2);
                const double res = triple_residual(state, k, chain, z.r, z.x, c);
                if (res <= cfg_.tau2 && isDescendant(k2, k)) continue;
                if (offer(best, k2, res, cfg_.tau2)) break;
            }
            if (best) {
                state.par[k] = best->node;
                state.edges.try_emplace(Edge::between(k, best->node), Provenance{Stage::Intermediate, best->residual});
                ++found;
                continue;
            }
            if (!fresh[k]) continue;

            // Parent not yet discovered: look for any terminal node that
            // branches off exactly there. Leaves already known to sit below k
            // cannot.
            std::vector<bool> below(n, false);
            for (NodeId c : leaves_)
                if (isDescendant(c, k)) below[c] = true;
            bool done = false;
            for (NodeId k2 : graph_.neighbors(k)) {
                if (!isMissing_[k2] || state.des[k2]) continue;
                const auto& z = graph_.impedance(k, k2);
                for (NodeId c : leaves_) {
                    if (c == a || c == b || below[c]) continue;
                    if (offer(best, k2, triple_residual(state, k, chain, z.r, z.x, c), cfg_.tau2)) {
                        done = true;
                        break;
                    }
                }
                if (done) break;
            }
            if (best) {
                state.par[k] = best->node;
                state.des[best->node] = state.des[k];
                state.edges.try_emplace(Edge::between(k, best->node), Provenance{Stage::Intermediate, best->residual});
                freshNext[best->node] = true;
                ++found;
            }
        }

        fresh = std::move(freshNext);
        if (found == 0) break;
        ++state.stage2Iterations;
    }

    std::vector<NodeId> tops;
    std::vector<NodeId> undiscovered;
    for (NodeId k : missing_) {
        if (!state.des[k]) undiscovered.push_back(k);
        else if (!state.par[k]) tops.push_back(k);
    }
    if (tops.size() == 1) {
        const NodeId k = tops.front();
        if (graph_.has_edge(k, kRootNode)) {
            state.par[k] = kRootNode;
            state.edges.try_emplace(Edge::between(k, kRootNode), Provenance{Stage::RootJoin, 0.0});
        } else {
            state.diagnostics.push_back("RootJoinMissing: top node " + std::to_string(k) +
                                        " has no candidate line to the substation");
        }
    } else if (tops.size() > 1) {
        state.stalled = true;
        std::string ids;
        for (NodeId k : tops) ids += (ids.empty() ? "" : ",") + std::to_string(k);
        state.diagnostics.push_back("Stalled: " + std::to_string(tops.size()) +
                                    " intermediates without a parent: " + ids);
    }
    if (!undiscovered.empty()) {
        std::string ids;
        for (NodeId k : undiscovered) ids += (ids.empty() ? "" : ",") + std::to_string(k);
        state.diagnostics.push_back("UndiscoveredIntermediate: " + ids);
    }
    return state;
}

LearnedTopology TopologyLearner::stage3_place_leaves(PartialForest state) const {
    std::vector<NodeId> discovered;
    std::map<NodeId, NodeId> parentMap;
    for (NodeId k : missing_) {
        if (!state.des[k]) continue;
        discovered.push_back(k);
        if (state.par[k]) parentMap[k] = *state.par[k];
    }
    std::vector<NodeId> order = post_order(discovered, parentMap);
    std::map<NodeId, Chain> chains;
    for (NodeId k : order) chains[k] = chain_up(state, k);

    for (NodeId c : leaves_) {
        if (state.par[c]) continue;
        bool placed = false;
        for (auto it = order.begin(); it != order.end(); ++it) {
            const NodeId k2 = *it;
            const Chain& chain = chains[k2];
            if (!chain.ok) continue;
            const auto [a, b] = *state.des[k2];
            if (c == a || c == b || !graph_.has_edge(c, k2)) continue;
            const double res = triple_residual(state, k2, chain, 0.0, 0.0, c);
            if (res <= cfg_.tau2) {
                state.par[c] = k2;
                state.edges.try_emplace(Edge::between(c, k2), Provenance{Stage::LeafPlacement, res});
                order.erase(it);
                placed = true;
                break;
            }
        }
        if (!placed) state.diagnostics.push_back("UnplacedLeaf: " + std::to_string(c));
    }

    LearnedTopology out;
    out.edges = std::move(state.edges);
    out.diagnostics = std::move(state.diagnostics);
    bool allParented = true;
    for (NodeId v = 1; v < graph_.node_count(); ++v) allParented = allParented && state.par[v].has_value();
    if (allParented) {
        auto violations = check_tree(graph_, out.edge_list(), kRootNode, leaves_);
        if (violations.empty()) {
            out.status = TopologyStatus::Complete;
        } else {
            for (const auto& v : violations) {
                out.diagnostics.push_back("InvalidResult: " + std::string(to_string(v.rule)) + ": " + v.message);
            }
        }
    }
    return out;
}

LearnedTopology TopologyLearner::run() const {
    return stage3_place_leaves(stage2_intermediates(stage1_leaf_pairs()));
}

LearnedTopology learn_topology(const PhiMatrix& phi, const InjectionStats& stats, const CandidateGraph& graph,
                               const std::vector<NodeId>& leaves, const std::vector<NodeId>& missing,
                               const LearnerConfig& cfg) {
    return TopologyLearner(phi, stats, graph, leaves, missing, cfg).run();
}

}  // namespace topolearn
