#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "topolearn/grid.hpp"

namespace topolearn {

enum class WeightKind { InverseResistance, InverseReactance };

/// Weighted Laplacian with the substation row and column removed.
/// Row/column i corresponds to node i + 1.
struct ReducedLaplacian {
    WeightKind kind = WeightKind::InverseResistance;
    Eigen::MatrixXd matrix;
};

/// Second moments and means of the (p, q) injection at one node.
struct NodeStats {
    double varP = 0.0;
    double varQ = 0.0;
    double covPQ = 0.0;
    double meanP = 0.0;
    double meanQ = 0.0;

    friend bool operator==(const NodeStats&, const NodeStats&) = default;
};

/// Per-node injection statistics. Injections at different nodes are
/// uncorrelated, so only the per-node 2x2 blocks are stored.
class InjectionStats {
public:
    void set(NodeId n, NodeStats s);
    bool has(NodeId n) const { return byNode_.count(n) != 0; }
    /// Throws InvalidInput if the node has no statistics.
    const NodeStats& at(NodeId n) const;
    const std::map<NodeId, NodeStats>& all() const { return byNode_; }

    /// Throws NonPSDStats naming the first node whose 2x2 block is not PSD.
    void check_psd() const;

private:
    std::map<NodeId, NodeStats> byNode_;
};

struct VoltageMoments {
    Eigen::VectorXd mean;  // indexed by node - 1
    Eigen::MatrixXd cov;
};

/// m observations of voltage magnitude deviations (root = 1 p.u. removed).
struct SampleMatrix {
    std::vector<NodeId> observed;
    Eigen::MatrixXd values;  // m x observed.size()

    Eigen::Index sample_count() const { return values.rows(); }
};

enum class InjectionDistribution { Gaussian, Uniform, TwoPoint };

ReducedLaplacian reduced_laplacian(const RadialTree& tree, WeightKind kind);

/// Inverse-Laplacian entry as the r (or x) sum over edges shared by the root
/// paths of a and b.
double hinv_entry_pathsum(const RadialTree& tree, NodeId a, NodeId b, WeightKind kind);

/// Dense inverse through a Cholesky factorization. Test oracle only.
Eigen::MatrixXd hinv_dense(const RadialTree& tree, WeightKind kind);

struct FlowSolution {
    Eigen::VectorXd v;      // voltage magnitude deviation
    Eigen::VectorXd theta;  // phase angle
};

/// Linear coupled power flow on a fixed tree. Both reduced Laplacians are
/// factorized once; solves reuse the factors.
class LcpfSolver {
public:
    explicit LcpfSolver(const RadialTree& tree);

    Eigen::Index dimension() const { return dim_; }
    FlowSolution solve(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const;
    /// Column-wise voltage magnitudes for injection matrices (dim x k).
    Eigen::MatrixXd voltages(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) const;

    const Eigen::LLT<Eigen::MatrixXd>& resistance_factor() const { return llR_; }
    const Eigen::LLT<Eigen::MatrixXd>& reactance_factor() const { return llX_; }

private:
    Eigen::Index dim_;
    Eigen::LLT<Eigen::MatrixXd> llR_;
    Eigen::LLT<Eigen::MatrixXd> llX_;
};

FlowSolution lcpf_solve(const RadialTree& tree, const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Voltage mean and covariance implied by the injection statistics. Every
/// non-root node must have statistics.
VoltageMoments analytic_voltage_moments(const RadialTree& tree, const InjectionStats& stats);

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of shard `index` under base `seed`: splitmix64(seed ^ splitmix64(index + 1)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Samples are generated in shards of this many rows, each shard seeded with
/// derive_seed(seed, shardIndex), so the output never depends on how shards
/// are scheduled.
inline constexpr Eigen::Index kSampleShard = 4096;

SampleMatrix sample_voltages(const RadialTree& tree, const InjectionStats& stats, Eigen::Index m,
                             std::uint64_t seed, const std::vector<NodeId>& observed,
                             InjectionDistribution dist = InjectionDistribution::Gaussian);

}  // namespace topolearn
