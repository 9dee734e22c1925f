#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "topolearn/grid.hpp"
#include "topolearn/learner.hpp"
#include "topolearn/powerflow.hpp"

namespace topolearn {

enum class NodeKind { Root, Leaf, Intermediate };

std::string_view to_string(NodeKind kind);

/// A candidate graph together with node roles, the operational edge set (may
/// be empty when the truth is unknown) and injection statistics.
///
/// Text layout, one record per line, sections in this order:
///
///     # topolearn grid
///     nodes <N>
///     <id> <root|leaf|intermediate>           ids 0..N-1 ascending, 0 = root
///     edges <E>
///     <u> <v> <r> <x> <operational 0|1>       u < v, sorted by (u, v)
///     stats <S>
///     <id> <varP> <varQ> <covPQ> <meanP> <meanQ>   ascending id
///     end
///
/// Blank lines and lines starting with '#' are ignored on input. Numbers are
/// written in shortest round-trip form, so write -> read -> write is
/// byte-identical.
struct GridFile {
    CandidateGraph graph{2};
    std::vector<NodeKind> kinds;
    std::vector<Edge> operational;
    InjectionStats stats;

    int node_count() const { return graph.node_count(); }
    std::vector<NodeId> leaves() const;
    std::vector<NodeId> missing() const;
    bool has_truth() const { return !operational.empty(); }

    /// The operational tree; throws TreeValidationError when it breaks a rule
    /// and InvalidInput when the file carries no operational edges.
    RadialTree truth() const;
};

GridFile parse_grid(std::istream& in);
void write_grid(std::ostream& out, const GridFile& grid);
std::string format_grid(const GridFile& grid);
GridFile read_grid_file(const std::string& path);
void write_grid_file(const std::string& path, const GridFile& grid);

/// CSV: header row of node ids, then one row per observation.
void write_samples(std::ostream& out, const SampleMatrix& samples);
SampleMatrix parse_samples(std::istream& in);

/// Learned edges with provenance:
///
///     # topolearn topology
///     status <complete|partial>
///     edges <E>
///     <u> <v> <stage> <residual>
///     diagnostics <D>
///     <free text>
void write_topology(std::ostream& out, const LearnedTopology& topology);
LearnedTopology parse_topology(std::istream& in);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace topolearn
