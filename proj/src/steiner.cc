#include "schemasift/steiner.h"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "schemasift/error.h"

namespace schemasift {

namespace {

constexpr uint64_t kUnreached = std::numeric_limits<uint64_t>::max();
constexpr uint32_t kNone = std::numeric_limits<uint32_t>::max();

class DisjointSets {
   public:
    explicit DisjointSets(size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }
    uint32_t find(uint32_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    bool unite(uint32_t a, uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (a > b) std::swap(a, b);
        parent_[b] = a;
        return true;
    }

   private:
    std::vector<uint32_t> parent_;
};

void check_terminals(const FdGraph& graph, std::span<const uint32_t> terminals) {
    if (terminals.empty()) throw Error(ErrorCode::InvalidArgument, "terminal set is empty");
    std::vector<bool> seen(graph.node_count(), false);
    for (auto t : terminals) {
        if (t >= graph.node_count()) {
            throw Error(ErrorCode::InvalidArgument, "terminal " + std::to_string(t) + " is not a graph node");
        }
        if (seen[t]) throw Error(ErrorCode::InvalidArgument, "terminal " + std::to_string(t) + " repeated");
        seen[t] = true;
    }
}

struct Adjacency {
    std::vector<uint32_t> offsets;
    std::vector<std::pair<uint32_t, uint32_t>> entries;  // (neighbour, cost)

    Adjacency(size_t n, const std::vector<WeightedEdge>& edges) : offsets(n + 1, 0) {
        for (auto& e : edges) {
            ++offsets[e.u + 1];
            ++offsets[e.v + 1];
        }
        for (size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
        entries.resize(offsets[n]);
        std::vector<uint32_t> fill(offsets.begin(), offsets.end() - 1);
        for (auto& e : edges) {
            entries[fill[e.u]++] = {e.v, e.cost};
            entries[fill[e.v]++] = {e.u, e.cost};
        }
    }
};

}  // namespace

std::vector<WeightedEdge> edge_costs(const FdGraph& graph, std::span<const uint32_t> terminals) {
    std::vector<bool> is_terminal(graph.node_count(), false);
    for (auto t : terminals) {
        if (t < graph.node_count()) is_terminal[t] = true;
    }
    auto rule = [&](uint32_t a, uint32_t b) -> uint32_t {
        if (graph.table_of(a) != graph.table_of(b)) return 1;
        if ((is_terminal[a] && graph.is_key(b)) || (is_terminal[b] && graph.is_key(a))) return 0;
        return 1;
    };
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> collapsed;
    for (auto& e : graph.edges()) {
        if (e.source == e.target) continue;
        auto key = std::minmax(e.source, e.target);
        auto cost = rule(key.first, key.second);
        auto [it, inserted] = collapsed.emplace(std::pair{key.first, key.second}, cost);
        if (!inserted) it->second = std::min(it->second, cost);
    }
    std::vector<WeightedEdge> out;
    out.reserve(collapsed.size());
    for (auto& [k, c] : collapsed) out.push_back({k.first, k.second, c});
    return out;
}

SteinerResult greedy_steiner(const FdGraph& graph, std::span<const uint32_t> terminals) {
    check_terminals(graph, terminals);
    const size_t n = graph.node_count();
    auto edges = edge_costs(graph, terminals);
    Adjacency adj(n, edges);

    std::vector<bool> is_terminal(n, false);
    for (auto t : terminals) is_terminal[t] = true;

    // Shortest-path regions around every terminal. Costs are 0/1, so a deque suffices; a node's
    // region is fixed the first time it is popped.
    std::vector<uint64_t> dist(n, kUnreached);
    std::vector<uint32_t> base(n, kNone), pred(n, kNone);
    std::vector<bool> done(n, false);
    std::deque<uint32_t> queue;
    std::vector<uint32_t> sorted_terminals(terminals.begin(), terminals.end());
    std::sort(sorted_terminals.begin(), sorted_terminals.end());
    for (auto t : sorted_terminals) {
        dist[t] = 0;
        base[t] = t;
        queue.push_back(t);
    }
    while (!queue.empty()) {
        auto x = queue.front();
        queue.pop_front();
        if (done[x]) continue;
        done[x] = true;
        for (auto i = adj.offsets[x]; i < adj.offsets[x + 1]; ++i) {
            auto [y, w] = adj.entries[i];
            const uint64_t nd = dist[x] + w;
            const bool better = nd < dist[y] || (nd == dist[y] && !done[y] && base[x] < base[y]);
            if (done[y] || is_terminal[y] || !better) continue;
            dist[y] = nd;
            base[y] = base[x];
            pred[y] = x;
            if (w == 0) {
                queue.push_front(y);
            } else {
                queue.push_back(y);
            }
        }
    }

    // Bridges between regions, cheapest first.
    struct Bridge {
        uint64_t cost;
        bool direct;  // an edge joining two terminals
        uint32_t u, v, w;
    };
    std::vector<Bridge> bridges;
    for (auto& e : edges) {
        if (base[e.u] == kNone || base[e.v] == kNone || base[e.u] == base[e.v]) continue;
        bridges.push_back({dist[e.u] + e.cost + dist[e.v], is_terminal[e.u] && is_terminal[e.v], e.u, e.v, e.cost});
    }
    std::sort(bridges.begin(), bridges.end(), [](const Bridge& a, const Bridge& b) {
        return std::tuple(a.cost, !a.direct, a.u, a.v) < std::tuple(b.cost, !b.direct, b.u, b.v);
    });

    DisjointSets regions(n);
    std::vector<bool> chosen(n, false);
    for (auto t : terminals) chosen[t] = true;
    for (auto& b : bridges) {
        if (!regions.unite(base[b.u], base[b.v])) continue;
        for (uint32_t end : {b.u, b.v}) {
            for (auto x = end; x != kNone && !chosen[x]; x = pred[x]) chosen[x] = true;
        }
    }

    // Re-span the chosen nodes and trim dangling non-terminals.
    DisjointSets forest(n);
    std::vector<WeightedEdge> induced;
    for (auto& e : edges) {
        if (chosen[e.u] && chosen[e.v]) induced.push_back(e);
    }
    std::stable_sort(induced.begin(), induced.end(),
                     [](const WeightedEdge& a, const WeightedEdge& b) { return a.cost < b.cost; });
    std::vector<WeightedEdge> tree;
    for (auto& e : induced) {
        if (forest.unite(e.u, e.v)) tree.push_back(e);
    }
    std::vector<uint32_t> degree(n, 0);
    for (auto& e : tree) {
        ++degree[e.u];
        ++degree[e.v];
    }
    std::vector<bool> removed_edge(tree.size(), false);
    std::vector<std::vector<size_t>> incident(n);
    for (size_t i = 0; i < tree.size(); ++i) {
        incident[tree[i].u].push_back(i);
        incident[tree[i].v].push_back(i);
    }
    std::vector<uint32_t> leaves;
    for (uint32_t x = 0; x < n; ++x) {
        if (chosen[x] && !is_terminal[x] && degree[x] <= 1) leaves.push_back(x);
    }
    while (!leaves.empty()) {
        auto x = leaves.back();
        leaves.pop_back();
        if (!chosen[x]) continue;
        chosen[x] = false;
        for (auto i : incident[x]) {
            if (removed_edge[i]) continue;
            removed_edge[i] = true;
            auto other = tree[i].u == x ? tree[i].v : tree[i].u;
            if (--degree[other] <= 1 && !is_terminal[other] && chosen[other]) leaves.push_back(other);
        }
    }

    SteinerResult result;
    for (uint32_t x = 0; x < n; ++x) {
        if (!chosen[x]) continue;
        result.nodes.push_back(x);
        if (!is_terminal[x]) result.auxiliary.push_back(x);
    }
    for (size_t i = 0; i < tree.size(); ++i) {
        if (removed_edge[i]) continue;
        result.edges.push_back(tree[i]);
        result.total_cost += tree[i].cost;
    }
    std::sort(result.edges.begin(), result.edges.end(),
              [](const WeightedEdge& a, const WeightedEdge& b) { return std::pair(a.u, a.v) < std::pair(b.u, b.v); });
    return result;
}

std::vector<uint32_t> top_m(std::span<const double> scores, size_t m) {
    std::vector<uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    m = std::min(m, order.size());
    std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) { return scores[a] > scores[b]; });
    order.resize(m);
    return order;
}

ClosureResult closure_from_terminals(const FdGraph& graph, std::vector<uint32_t> terminals) {
    ClosureResult out;
    out.tree = greedy_steiner(graph, terminals);
    out.terminals = std::move(terminals);
    std::vector<bool> is_terminal(graph.node_count(), false);
    for (auto t : out.terminals) is_terminal[t] = true;
    for (auto x : out.tree.nodes) out.columns.push_back({x, is_terminal[x]});
    return out;
}

ClosureResult closure(std::span<const double> scores, const FdGraph& graph, size_t m) {
    if (m == 0) throw Error(ErrorCode::InvalidArgument, "closure needs at least one terminal");
    if (scores.size() != graph.node_count()) {
        throw Error(ErrorCode::DimensionMismatch, "score count differs from the node count");
    }
    return closure_from_terminals(graph, top_m(scores, m));
}

std::string dump_steiner_edges(const FdGraph& graph, const SteinerResult& result) {
    std::string out;
    for (auto& e : result.edges) {
        out += graph.node(e.u).display() + "\t" + graph.node(e.v).display() + "\t" + std::to_string(e.cost) + "\n";
    }
    return out;
}

}  // namespace schemasift
