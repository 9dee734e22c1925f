#include "topolearn/powerflow.hpp"

#include <cmath>
#include <random>

namespace topolearn {

void InjectionStats::set(NodeId n, NodeStats s) {
    if (n == kRootNode) throw Error(ErrorCategory::RootNotAllowed, "the substation carries no injection statistics");
    if (n < 0) throw Error(ErrorCategory::UnknownNode, "negative node id");
    byNode_[n] = s;
}

const NodeStats& InjectionStats::at(NodeId n) const {
    auto it = byNode_.find(n);
    if (it == byNode_.end()) {
        throw Error(ErrorCategory::InvalidInput, "no injection statistics for node " + std::to_string(n));
    }
    return it->second;
}

void InjectionStats::check_psd() const {
    for (const auto& [n, s] : byNode_) {
        const double slack = 1e-12 * std::max(1.0, s.varP * s.varQ);
        if (s.varP < 0.0 || s.varQ < 0.0 || s.covPQ * s.covPQ > s.varP * s.varQ + slack ||
            !std::isfinite(s.varP + s.varQ + s.covPQ + s.meanP + s.meanQ)) {
            throw Error(ErrorCategory::NonPSDStats,
                        "injection moments at node " + std::to_string(n) + " are not positive semidefinite");
        }
    }
}

ReducedLaplacian reduced_laplacian(const RadialTree& tree, WeightKind kind) {
    const Eigen::Index dim = tree.node_count() - 1;
    ReducedLaplacian out{kind, Eigen::MatrixXd::Zero(dim, dim)};
    for (NodeId v = 1; v < tree.node_count(); ++v) {
        const auto& z = tree.parent_line(v);
        const double w = 1.0 / (kind == WeightKind::InverseResistance ? z.r : z.x);
        const NodeId p = tree.parent(v);
        out.matrix(v - 1, v - 1) += w;
        if (p != tree.root()) {
            out.matrix(p - 1, p - 1) += w;
            out.matrix(v - 1, p - 1) -= w;
            out.matrix(p - 1, v - 1) -= w;
        }
    }
    return out;
}

double hinv_entry_pathsum(const RadialTree& tree, NodeId a, NodeId b, WeightKind kind) {
    if (!tree.contains(a) || !tree.contains(b)) throw Error(ErrorCategory::UnknownNode, "unknown node");
    if (a == tree.root() || b == tree.root()) {
        throw Error(ErrorCategory::RootNotAllowed, "the reference bus is not part of the reduced system");
    }
    // The shared part of two root paths is exactly the root path of their
    // deepest common ancestor.
    const NodeId meet = tree.common_ancestor(a, b);
    return kind == WeightKind::InverseResistance ? tree.resistance_to_root(meet) : tree.reactance_to_root(meet);
}

Eigen::MatrixXd hinv_dense(const RadialTree& tree, WeightKind kind) {
    const auto lap = reduced_laplacian(tree, kind);
    Eigen::LLT<Eigen::MatrixXd> llt(lap.matrix);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCategory::SingularMatrix, "reduced Laplacian is not positive definite");
    }
    return llt.solve(Eigen::MatrixXd::Identity(lap.matrix.rows(), lap.matrix.cols()));
}

LcpfSolver::LcpfSolver(const RadialTree& tree)
    : dim_(tree.node_count() - 1),
      llR_(reduced_laplacian(tree, WeightKind::InverseResistance).matrix),
      llX_(reduced_laplacian(tree, WeightKind::InverseReactance).matrix) {
    if (llR_.info() != Eigen::Success || llX_.info() != Eigen::Success) {
        throw Error(ErrorCategory::SingularMatrix, "reduced Laplacian is not positive definite");
    }
}

FlowSolution LcpfSolver::solve(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const {
    if (p.size() != dim_ || q.size() != dim_) {
        throw Error(ErrorCategory::DimensionMismatch,
                    "injection vectors must have one entry per non-root node (" + std::to_string(dim_) + ")");
    }
    Eigen::VectorXd rp = llR_.solve(p), rq = llR_.solve(q);
    Eigen::VectorXd xp = llX_.solve(p), xq = llX_.solve(q);
    return {rp + xq, xp - rq};
}

Eigen::MatrixXd LcpfSolver::voltages(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) const {
    if (p.rows() != dim_ || q.rows() != dim_ || p.cols() != q.cols()) {
        throw Error(ErrorCategory::DimensionMismatch, "injection matrices do not match the tree");
    }
    return llR_.solve(p) + llX_.solve(q);
}

FlowSolution lcpf_solve(const RadialTree& tree, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    return LcpfSolver(tree).solve(p, q);
}

VoltageMoments analytic_voltage_moments(const RadialTree& tree, const InjectionStats& stats) {
    const LcpfSolver solver(tree);
    const Eigen::Index dim = solver.dimension();
    Eigen::VectorXd muP(dim), muQ(dim);
    Eigen::MatrixXd omegaP = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd omegaQ = omegaP, omegaPQ = omegaP;
    for (NodeId n = 1; n <= dim; ++n) {
        const auto& s = stats.at(n);
        muP(n - 1) = s.meanP;
        muQ(n - 1) = s.meanQ;
        omegaP(n - 1, n - 1) = s.varP;
        omegaQ(n - 1, n - 1) = s.varQ;
        omegaPQ(n - 1, n - 1) = s.covPQ;
    }
    const auto& fr = solver.resistance_factor();
    const auto& fx = solver.reactance_factor();

    VoltageMoments out;
    out.mean = fr.solve(muP) + fx.solve(muQ);
    // A * D * B with A, B symmetric inverses: solve against (D * B)^T = B * D.
    Eigen::MatrixXd rr = fr.solve(Eigen::MatrixXd(fr.solve(omegaP).transpose()));
    Eigen::MatrixXd xx = fx.solve(Eigen::MatrixXd(fx.solve(omegaQ).transpose()));
    Eigen::MatrixXd rx = fr.solve(Eigen::MatrixXd(fx.solve(omegaPQ).transpose()));
    Eigen::MatrixXd cov = rr + xx + rx + rx.transpose();
    out.cov = 0.5 * (cov + cov.transpose());
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

namespace {

struct InjectionFactor {
    double meanP, meanQ, l11, l21, l22;
};

double unit_draw(std::mt19937_64& rng, InjectionDistribution dist) {
    switch (dist) {
        case InjectionDistribution::Gaussian: {
            std::normal_distribution<double> normal(0.0, 1.0);
            return normal(rng);
        }
        case InjectionDistribution::Uniform: {
            std::uniform_real_distribution<double> uni(-std::sqrt(3.0), std::sqrt(3.0));
            return uni(rng);
        }
        case InjectionDistribution::TwoPoint:
            return (rng() >> 63) ? 1.0 : -1.0;
    }
    return 0.0;
}

}  // namespace

SampleMatrix sample_voltages(const RadialTree& tree, const InjectionStats& stats, Eigen::Index m,
                             std::uint64_t seed, const std::vector<NodeId>& observed,
                             InjectionDistribution dist) {
    if (m < 1) throw Error(ErrorCategory::InvalidInput, "sample count must be at least 1");
    for (NodeId n : observed) {
        if (!tree.contains(n)) throw Error(ErrorCategory::UnknownNode, "unknown observed node " + std::to_string(n));
        if (n == tree.root()) throw Error(ErrorCategory::RootNotAllowed, "the reference bus is not observed");
    }
    stats.check_psd();

    const LcpfSolver solver(tree);
    const Eigen::Index dim = solver.dimension();
    std::vector<InjectionFactor> factors;
    factors.reserve(static_cast<std::size_t>(dim));
    for (NodeId n = 1; n <= dim; ++n) {
        const auto& s = stats.at(n);
        const double l11 = std::sqrt(s.varP);
        const double l21 = l11 > 0.0 ? s.covPQ / l11 : 0.0;
        const double l22 = std::sqrt(std::max(0.0, s.varQ - l21 * l21));
        factors.push_back({s.meanP, s.meanQ, l11, l21, l22});
    }

    SampleMatrix out{observed, Eigen::MatrixXd(m, static_cast<Eigen::Index>(observed.size()))};
    Eigen::MatrixXd p(dim, kSampleShard), q(dim, kSampleShard);
    for (Eigen::Index start = 0, shard = 0; start < m; start += kSampleShard, ++shard) {
        const Eigen::Index len = std::min(kSampleShard, m - start);
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(shard)));
        for (Eigen::Index s = 0; s < len; ++s) {
            for (Eigen::Index d = 0; d < dim; ++d) {
                const auto& f = factors[static_cast<std::size_t>(d)];
                const double z1 = unit_draw(rng, dist);
                const double z2 = unit_draw(rng, dist);
                p(d, s) = f.meanP + f.l11 * z1;
                q(d, s) = f.meanQ + f.l21 * z1 + f.l22 * z2;
            }
        }
        const Eigen::MatrixXd v = solver.voltages(p.leftCols(len), q.leftCols(len));
        for (std::size_t j = 0; j < observed.size(); ++j) {
            out.values.block(start, static_cast<Eigen::Index>(j), len, 1) =
                v.row(observed[j] - 1).transpose();
        }
    }
    return out;
}

}  // namespace topolearn
