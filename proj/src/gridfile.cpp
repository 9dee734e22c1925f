#include "topolearn/gridfile.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace topolearn {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Root: return "root";
        case NodeKind::Leaf: return "leaf";
        case NodeKind::Intermediate: return "intermediate";
    }
    return "unknown";
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::vector<NodeId> GridFile::leaves() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < static_cast<NodeId>(kinds.size()); ++v)
        if (kinds[v] == NodeKind::Leaf) out.push_back(v);
    return out;
}

std::vector<NodeId> GridFile::missing() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < static_cast<NodeId>(kinds.size()); ++v)
        if (kinds[v] == NodeKind::Intermediate) out.push_back(v);
    return out;
}

RadialTree GridFile::truth() const {
    if (operational.empty()) throw Error(ErrorCategory::InvalidInput, "grid file has no operational edges");
    return validate_tree(graph, operational, kRootNode, leaves());
}

namespace {

/// Line reader that skips blanks and comments and tracks line numbers.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineNo_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            auto first = line.find_first_not_of(" \t");
            if (first == std::string::npos || line[first] == '#') continue;
            tokens.clear();
            std::istringstream ss(line);
            for (std::string t; ss >> t;) tokens.push_back(t);
            return true;
        }
        return false;
    }

    std::vector<std::string> expect(std::size_t count, const char* what) {
        std::vector<std::string> tokens;
        if (!next(tokens)) fail(std::string("unexpected end of input, expected ") + what);
        if (tokens.size() != count) fail(std::string("expected ") + std::to_string(count) + " fields for " + what);
        return tokens;
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw Error(ErrorCategory::ParseError, "line " + std::to_string(lineNo_) + ": " + message);
    }

    long integer(const std::string& s) const {
        long value = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), value);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) fail("not an integer: '" + s + "'");
        return value;
    }

    double real(const std::string& s) const {
        double value = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), value);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) fail("not a number: '" + s + "'");
        return value;
    }

    long header(const char* name) {
        auto t = expect(2, name);
        if (t[0] != name) fail(std::string("expected section '") + name + "', got '" + t[0] + "'");
        long count = integer(t[1]);
        if (count < 0) fail("negative count");
        return count;
    }

private:
    std::istream& in_;
    int lineNo_ = 0;
};

}  // namespace

GridFile parse_grid(std::istream& in) {
    LineReader reader(in);
    const long n = reader.header("nodes");
    if (n < 2) reader.fail("a grid needs at least two nodes");

    GridFile grid;
    grid.graph = CandidateGraph(static_cast<int>(n));
    grid.kinds.resize(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        auto t = reader.expect(2, "node record");
        if (reader.integer(t[0]) != i) reader.fail("node ids must be 0..N-1 in ascending order");
        if (t[1] == "root") grid.kinds[i] = NodeKind::Root;
        else if (t[1] == "leaf") grid.kinds[i] = NodeKind::Leaf;
        else if (t[1] == "intermediate") grid.kinds[i] = NodeKind::Intermediate;
        else reader.fail("unknown node kind '" + t[1] + "'");
        if ((i == kRootNode) != (grid.kinds[i] == NodeKind::Root)) reader.fail("node 0 and only node 0 is the root");
    }

    const long e = reader.header("edges");
    std::optional<Edge> previous;
    for (long i = 0; i < e; ++i) {
        auto t = reader.expect(5, "edge record");
        const auto u = static_cast<NodeId>(reader.integer(t[0]));
        const auto v = static_cast<NodeId>(reader.integer(t[1]));
        if (u >= v) reader.fail("edge endpoints must satisfy u < v");
        const Edge edge{u, v};
        if (previous && !(*previous < edge)) reader.fail("edges must be sorted by (u, v) without repeats");
        previous = edge;
        try {
            grid.graph.add_edge(u, v, {reader.real(t[2]), reader.real(t[3])});
        } catch (const Error& err) {
            reader.fail(err.what());
        }
        if (t[4] == "1") grid.operational.push_back(edge);
        else if (t[4] != "0") reader.fail("operational flag must be 0 or 1");
    }

    const long s = reader.header("stats");
    NodeId lastStat = kRootNode;
    for (long i = 0; i < s; ++i) {
        auto t = reader.expect(6, "stats record");
        const auto id = static_cast<NodeId>(reader.integer(t[0]));
        if (id <= lastStat || id >= n) reader.fail("stats ids must be ascending non-root node ids");
        lastStat = id;
        grid.stats.set(id, {reader.real(t[1]), reader.real(t[2]), reader.real(t[3]), reader.real(t[4]),
                            reader.real(t[5])});
    }
    try {
        grid.stats.check_psd();
    } catch (const Error& err) {
        reader.fail(err.what());
    }
    auto t = reader.expect(1, "end marker");
    if (t[0] != "end") reader.fail("expected 'end'");
    std::vector<std::string> extra;
    if (reader.next(extra)) reader.fail("content after 'end'");
    return grid;
}

void write_grid(std::ostream& out, const GridFile& grid) {
    std::vector<Edge> operational = grid.operational;
    std::sort(operational.begin(), operational.end());
    out << "# topolearn grid\n";
    out << "nodes " << grid.node_count() << "\n";
    for (NodeId v = 0; v < grid.node_count(); ++v) out << v << " " << to_string(grid.kinds.at(v)) << "\n";
    out << "edges " << grid.graph.edge_count() << "\n";
    for (const auto& [e, z] : grid.graph.edges()) {
        const bool on = std::binary_search(operational.begin(), operational.end(), e);
        out << e.u << " " << e.v << " " << format_double(z.r) << " " << format_double(z.x) << " " << (on ? 1 : 0)
            << "\n";
    }
    out << "stats " << grid.stats.all().size() << "\n";
    for (const auto& [id, s] : grid.stats.all()) {
        out << id << " " << format_double(s.varP) << " " << format_double(s.varQ) << " " << format_double(s.covPQ)
            << " " << format_double(s.meanP) << " " << format_double(s.meanQ) << "\n";
    }
    out << "end\n";
}

std::string format_grid(const GridFile& grid) {
    std::ostringstream os;
    write_grid(os, grid);
    return os.str();
}

GridFile read_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::IoError, "cannot open grid file '" + path + "'");
    return parse_grid(in);
}

void write_grid_file(const std::string& path, const GridFile& grid) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCategory::IoError, "cannot write grid file '" + path + "'");
    write_grid(out, grid);
    if (!out) throw Error(ErrorCategory::IoError, "write failed for '" + path + "'");
}

void write_samples(std::ostream& out, const SampleMatrix& samples) {
    for (std::size_t j = 0; j < samples.observed.size(); ++j) out << (j ? "," : "") << samples.observed[j];
    out << "\n";
    std::string row;
    for (Eigen::Index i = 0; i < samples.values.rows(); ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < samples.values.cols(); ++j) {
            if (j) row += ',';
            row += format_double(samples.values(i, j));
        }
        row += '\n';
        out << row;
    }
}

SampleMatrix parse_samples(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    auto fail = [](long line, const std::string& what) -> void {
        throw Error(ErrorCategory::ParseError, "samples line " + std::to_string(line) + ": " + what);
    };

    SampleMatrix out;
    std::string line;
    if (!std::getline(in, line)) fail(1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (const auto& cell : split(line)) {
        long id = 0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), id);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) fail(1, "bad node id '" + cell + "'");
        out.observed.push_back(static_cast<NodeId>(id));
    }
    std::vector<double> flat;
    long lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != out.observed.size()) fail(lineNo, "wrong number of columns");
        for (const auto& cell : cells) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) fail(lineNo, "bad value '" + cell + "'");
            flat.push_back(v);
        }
    }
    const auto k = static_cast<Eigen::Index>(out.observed.size());
    const Eigen::Index m = k ? static_cast<Eigen::Index>(flat.size()) / k : 0;
    out.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), m, k);
    return out;
}

void write_topology(std::ostream& out, const LearnedTopology& topology) {
    out << "# topolearn topology\n";
    out << "status " << (topology.status == TopologyStatus::Complete ? "complete" : "partial") << "\n";
    out << "edges " << topology.edges.size() << "\n";
    for (const auto& [e, prov] : topology.edges) {
        out << e.u << " " << e.v << " " << to_string(prov.stage) << " " << format_double(prov.residual) << "\n";
    }
    out << "diagnostics " << topology.diagnostics.size() << "\n";
    for (const auto& d : topology.diagnostics) out << d << "\n";
}

LearnedTopology parse_topology(std::istream& in) {
    LineReader reader(in);
    LearnedTopology out;
    auto status = reader.expect(2, "status");
    if (status[0] != "status" || (status[1] != "complete" && status[1] != "partial")) reader.fail("bad status line");
    out.status = status[1] == "complete" ? TopologyStatus::Complete : TopologyStatus::Partial;
    const long e = reader.header("edges");
    for (long i = 0; i < e; ++i) {
        auto t = reader.expect(4, "edge record");
        Stage stage{};
        if (t[2] == "leaf-pair") stage = Stage::LeafPair;
        else if (t[2] == "intermediate") stage = Stage::Intermediate;
        else if (t[2] == "leaf-placement") stage = Stage::LeafPlacement;
        else if (t[2] == "root-join") stage = Stage::RootJoin;
        else reader.fail("unknown stage '" + t[2] + "'");
        out.edges.emplace(Edge::between(static_cast<NodeId>(reader.integer(t[0])),
                                        static_cast<NodeId>(reader.integer(t[1]))),
                          Provenance{stage, reader.real(t[3])});
    }
    // Diagnostics are free text and may contain '#'; read them raw.
    std::vector<std::string> header;
    if (!reader.next(header) || header.size() != 2 || header[0] != "diagnostics") reader.fail("expected diagnostics");
    const long d = reader.integer(header[1]);
    std::string line;
    for (long i = 0; i < d && std::getline(in, line); ++i) out.diagnostics.push_back(line);
    return out;
}

}  // namespace topolearn
