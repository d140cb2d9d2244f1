#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "schemasift/fd_graph.h"

namespace schemasift {

/// One undirected edge of the cost view. `u < v`.
struct WeightedEdge {
    uint32_t u;
    uint32_t v;
    uint32_t cost;

    friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Undirected view of the graph with forward/reverse pairs and parallel relations collapsed to a
/// single edge. An edge costs 0 when it joins a terminal to a key column (primary key or foreign
/// key endpoint) of the terminal's own table, 1 otherwise. Sorted by (u, v).
std::vector<WeightedEdge> edge_costs(const FdGraph& graph, std::span<const uint32_t> terminals);

struct SteinerResult {
    std::vector<uint32_t> nodes;      // sorted
    std::vector<WeightedEdge> edges;  // sorted by (u, v)
    std::vector<uint32_t> auxiliary;  // nodes that are not terminals, sorted
    uint64_t total_cost = 0;
};

/// Greedy Steiner forest over the cost view.
///
/// Terminals are grown into shortest-path regions at once (0-1 Dijkstra from all of them), and
/// region boundary edges are offered to a Kruskal pass as bridges of cost d(u) + w + d(v).
/// Cheaper bridges win; among equal costs a direct terminal-to-terminal edge wins, then smaller
/// node indices. The chosen bridge paths are expanded, re-spanned by a minimum spanning tree and
/// trimmed of non-terminal leaves. Terminals that cannot reach each other end up in separate
/// trees. Throws InvalidArgument for an empty, duplicated or out-of-range terminal list.
SteinerResult greedy_steiner(const FdGraph& graph, std::span<const uint32_t> terminals);

struct ClosureColumn {
    uint32_t node;
    bool terminal;
};

struct ClosureResult {
    std::vector<uint32_t> terminals;     // top-m, best first
    std::vector<ClosureColumn> columns;  // C*, in node order
    SteinerResult tree;
};

/// Top-m nodes by score with ties broken by node order. m is clamped to the node count.
std::vector<uint32_t> top_m(std::span<const double> scores, size_t m);

/// Picks the top-m columns as terminals and re-inserts the columns needed to connect them.
ClosureResult closure(std::span<const double> scores, const FdGraph& graph, size_t m);
/// Same, with an explicit terminal set.
ClosureResult closure_from_terminals(const FdGraph& graph, std::vector<uint32_t> terminals);

/// "source<TAB>target<TAB>cost" per chosen edge, in display names.
std::string dump_steiner_edges(const FdGraph& graph, const SteinerResult& result);

}  // namespace schemasift
