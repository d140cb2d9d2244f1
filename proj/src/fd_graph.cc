#include "schemasift/fd_graph.h"

#include <set>
#include <tuple>

#include "schemasift/binary_io.h"
#include "schemasift/error.h"
#include "schemasift/text.h"

namespace schemasift {

using nlohmann::json;

EdgeType reverse(EdgeType t) {
    auto v = static_cast<uint8_t>(t);
    return static_cast<EdgeType>(v < 3 ? v + 3 : v - 3);
}

bool is_forward(EdgeType t) { return static_cast<uint8_t>(t) < 3; }

const char* to_string(EdgeType t) {
    switch (t) {
        case EdgeType::foreign_key: return "foreign_key";
        case EdgeType::column_to_foreign_key: return "column_to_foreign_key";
        case EdgeType::column_to_primary_key: return "column_to_primary_key";
        case EdgeType::rev_foreign_key: return "rev_foreign_key";
        case EdgeType::rev_column_to_foreign_key: return "rev_column_to_foreign_key";
        case EdgeType::rev_column_to_primary_key: return "rev_column_to_primary_key";
    }
    return "?";
}

EdgeType parse_edge_type(std::string_view s) {
    for (auto t : kAllEdgeTypes) {
        if (s == to_string(t)) return t;
    }
    throw Error(ErrorCode::Parse, "unknown edge type '" + std::string(s) + "'");
}

FdGraph::FdGraph(std::string db_id, std::vector<ColumnRef> nodes, std::vector<uint32_t> node_table,
                 std::vector<uint8_t> node_flags, std::vector<Edge> edges)
    : db_id_(std::move(db_id)),
      nodes_(std::move(nodes)),
      node_table_(std::move(node_table)),
      node_flags_(std::move(node_flags)),
      edges_(std::move(edges)) {
    if (node_table_.size() != nodes_.size() || node_flags_.size() != nodes_.size()) {
        throw Error(ErrorCode::ShapeMismatch, "node attribute arrays disagree with node count");
    }
    index_.reserve(nodes_.size());
    for (uint32_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.emplace(nodes_[i].key(), i).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate node " + nodes_[i].display());
        }
    }
    for (auto& e : edges_) {
        if (e.source >= nodes_.size() || e.target >= nodes_.size() || static_cast<uint8_t>(e.type) >= kNumEdgeTypes) {
            throw Error(ErrorCode::Corruption, "edge endpoint or type out of range");
        }
    }
}

std::optional<uint32_t> FdGraph::index_of(const ColumnRef& ref) const {
    auto it = index_.find(ref.key());
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

FdGraph FdGraph::permuted(const std::vector<uint32_t>& perm) const {
    size_t n = nodes_.size();
    std::vector<ColumnRef> nodes(n);
    std::vector<uint32_t> table(n);
    std::vector<uint8_t> flags(n);
    for (size_t i = 0; i < n; ++i) {
        nodes[perm[i]] = nodes_[i];
        table[perm[i]] = node_table_[i];
        flags[perm[i]] = node_flags_[i];
    }
    std::vector<Edge> edges;
    edges.reserve(edges_.size());
    for (auto& e : edges_) edges.push_back({perm[e.source], perm[e.target], e.type});
    return FdGraph(db_id_, std::move(nodes), std::move(table), std::move(flags), std::move(edges));
}

namespace {

/// Lower-cased name forms of a table: the name itself and a naive singular.
std::vector<std::string> table_stems(std::string_view table) {
    std::string t = to_lower(table);
    std::vector<std::string> stems{t};
    auto ends_with = [&](std::string_view suffix) {
        return t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    std::string singular;
    if (ends_with("ies")) {
        singular = t.substr(0, t.size() - 3) + "y";
    } else if (ends_with("sses") || ends_with("xes") || ends_with("ches") || ends_with("shes")) {
        singular = t.substr(0, t.size() - 2);
    } else if (ends_with("s") && !ends_with("ss")) {
        singular = t.substr(0, t.size() - 1);
    }
    if (!singular.empty() && singular != t) stems.push_back(singular);
    return stems;
}

enum class TypeFamily { unknown, numeric, text };

TypeFamily type_family(std::string_view sql_type) {
    auto t = to_lower(sql_type);
    if (t.empty()) return TypeFamily::unknown;
    for (auto* n : {"int", "num", "dec", "real", "float", "double"}) {
        if (t.find(n) != std::string::npos) return TypeFamily::numeric;
    }
    for (auto* s : {"char", "text", "string", "clob", "varchar"}) {
        if (t.find(s) != std::string::npos) return TypeFamily::text;
    }
    return TypeFamily::unknown;
}

bool types_compatible(std::string_view a, std::string_view b) {
    auto fa = type_family(a), fb = type_family(b);
    return fa == TypeFamily::unknown || fb == TypeFamily::unknown || fa == fb;
}

bool fk_exists(const std::vector<ForeignKey>& fks, const ColumnRef& source, const ColumnRef& target) {
    for (auto& fk : fks) {
        if (fk.source == source && fk.target == target) return true;
    }
    return false;
}

bool is_fk_source(const std::vector<ForeignKey>& fks, const ColumnRef& ref) {
    for (auto& fk : fks) {
        if (fk.source == ref) return true;
    }
    return false;
}

}  // namespace

KeyPrediction infer_keys_heuristic(const DatabaseSchema& schema) {
    KeyPrediction out;
    // Effective primary keys: declared, else predicted.
    std::vector<std::vector<std::string>> effective_pk(schema.tables.size());
    for (size_t ti = 0; ti < schema.tables.size(); ++ti) {
        auto& t = schema.tables[ti];
        if (!t.primary_key.empty()) {
            effective_pk[ti] = t.primary_key;
            continue;
        }
        std::vector<std::string> candidates{"id"};
        for (auto& stem : table_stems(t.name)) candidates.push_back(stem + "_id");
        for (auto& stem : table_stems(t.name)) candidates.push_back(stem + "id");
        for (auto& cand : candidates) {
            if (auto* c = t.find_column(cand)) {
                effective_pk[ti] = {c->name};
                out.primary_keys.push_back({t.name, {c->name}});
                break;
            }
        }
    }

    for (size_t ui = 0; ui < schema.tables.size(); ++ui) {
        auto& tu = schema.tables[ui];
        for (auto& cu : tu.columns) {
            ColumnRef source{tu.name, cu.name};
            if (is_fk_source(schema.foreign_keys, source)) continue;
            auto lname = to_lower(cu.name);
            bool sole_pk = effective_pk[ui].size() == 1 && iequals(effective_pk[ui][0], cu.name);
            for (size_t vi = 0; vi < schema.tables.size(); ++vi) {
                if (vi == ui || effective_pk[vi].size() != 1) continue;
                auto& tv = schema.tables[vi];
                auto& pk = effective_pk[vi][0];
                auto lpk = to_lower(pk);
                bool match = false;
                for (auto& stem : table_stems(tv.name)) match = match || lname == stem + "_" + lpk;
                if (!match && lpk != "id" && lname == lpk && !sole_pk) match = true;
                if (!match) continue;
                auto* target_col = tv.find_column(pk);
                if (!types_compatible(cu.sql_type, target_col->sql_type)) continue;
                ColumnRef target{tv.name, target_col->name};
                if (fk_exists(schema.foreign_keys, source, target)) break;
                out.foreign_keys.push_back({source, target, Provenance::predicted});
                break;
            }
        }
    }
    return out;
}

MergeResult merge_keys(const DatabaseSchema& schema, const KeyPrediction& predicted) {
    MergeResult result{schema, {}};
    auto& merged = result.schema;
    for (auto& [table_name, cols] : predicted.primary_keys) {
        TableDef* table = nullptr;
        for (auto& t : merged.tables) {
            if (iequals(t.name, table_name)) table = &t;
        }
        if (!table) {
            throw Error(ErrorCode::DanglingReference, "predicted primary key names missing table '" + table_name + "'");
        }
        for (auto& c : cols) {
            if (!table->find_column(c)) {
                throw Error(ErrorCode::DanglingReference,
                            "predicted primary key names missing column '" + table_name + "." + c + "'");
            }
        }
        auto& t = *table;
        if (t.primary_key.empty()) {
            for (auto& c : cols) t.primary_key.push_back(t.find_column(c)->name);
            continue;
        }
        std::set<std::string> declared, pred;
        for (auto& c : t.primary_key) declared.insert(to_lower(c));
        for (auto& c : cols) pred.insert(to_lower(c));
        if (declared != pred) {
            result.warnings.push_back("key conflict: predicted primary key for '" + t.name +
                                      "' contradicts the declared key; declared key kept");
        }
    }
    for (auto& fk : predicted.foreign_keys) {
        auto source = merged.canonical(fk.source);
        auto target = merged.canonical(fk.target);
        if (!source || !target) {
            throw Error(ErrorCode::DanglingReference,
                        "predicted foreign key " + fk.source.display() + " -> " + fk.target.display() +
                            " references a missing column");
        }
        if (*source == *target || fk_exists(merged.foreign_keys, *source, *target)) continue;
        merged.foreign_keys.push_back({*source, *target, Provenance::predicted});
    }
    validate(merged);
    return result;
}

FdGraph build_fd_graph(const DatabaseSchema& schema) {
    validate(schema);
    std::vector<ColumnRef> nodes;
    std::vector<uint32_t> node_table;
    std::vector<uint8_t> flags;
    std::unordered_map<std::string, uint32_t> index;
    // Per table: first node index.
    std::vector<uint32_t> table_base;
    for (uint32_t ti = 0; ti < schema.tables.size(); ++ti) {
        auto& t = schema.tables[ti];
        table_base.push_back(static_cast<uint32_t>(nodes.size()));
        for (auto& c : t.columns) {
            ColumnRef ref{t.name, c.name};
            index.emplace(ref.key(), static_cast<uint32_t>(nodes.size()));
            nodes.push_back(std::move(ref));
            node_table.push_back(ti);
            flags.push_back(t.is_primary_key(c.name) ? kPrimaryKey : 0);
        }
    }
    auto idx = [&](const ColumnRef& r) { return index.at(r.key()); };
    for (auto& fk : schema.foreign_keys) {
        flags[idx(fk.source)] |= kForeignKeySource;
        flags[idx(fk.target)] |= kForeignKeyTarget;
    }

    std::vector<Edge> forward;
    std::set<std::tuple<uint32_t, uint32_t, uint8_t>> seen;
    auto add = [&](uint32_t s, uint32_t t, EdgeType type) {
        if (s == t) return;
        if (seen.emplace(s, t, static_cast<uint8_t>(type)).second) forward.push_back({s, t, type});
    };
    auto non_key = [&](uint32_t n) { return (flags[n] & (kPrimaryKey | kForeignKeySource)) == 0; };
    auto table_nodes = [&](uint32_t ti) {
        std::vector<uint32_t> out;
        for (uint32_t k = 0; k < schema.tables[ti].columns.size(); ++k) out.push_back(table_base[ti] + k);
        return out;
    };

    for (auto& fk : schema.foreign_keys) add(idx(fk.source), idx(fk.target), EdgeType::foreign_key);
    for (auto& fk : schema.foreign_keys) {
        uint32_t src = idx(fk.source), dst = idx(fk.target);
        for (auto n : table_nodes(node_table[src])) {
            if (non_key(n)) add(n, src, EdgeType::column_to_foreign_key);
        }
        for (auto n : table_nodes(node_table[dst])) {
            if (non_key(n)) add(n, dst, EdgeType::column_to_foreign_key);
        }
    }
    for (uint32_t ti = 0; ti < schema.tables.size(); ++ti) {
        auto& t = schema.tables[ti];
        for (auto& p : t.primary_key) {
            uint32_t pk = idx({t.name, p});
            for (auto n : table_nodes(ti)) {
                if (!(flags[n] & kPrimaryKey)) add(n, pk, EdgeType::column_to_primary_key);
            }
        }
    }

    std::vector<Edge> edges = forward;
    edges.reserve(forward.size() * 2);
    for (auto& e : forward) edges.push_back({e.target, e.source, reverse(e.type)});
    return FdGraph(schema.db_id, std::move(nodes), std::move(node_table), std::move(flags), std::move(edges));
}

namespace {
constexpr uint32_t kGraphVersion = 1;
constexpr std::string_view kGraphMagic = "SSFDGRPH";
}  // namespace

std::string serialize_graph(const FdGraph& graph) {
    Container c;
    c.magic = make_magic(kGraphMagic);
    c.version = kGraphVersion;
    {
        ByteWriter w;
        w.str(graph.db_id());
        c.sections["META"] = w.take();
    }
    {
        ByteWriter w;
        w.u32(static_cast<uint32_t>(graph.node_count()));
        for (uint32_t i = 0; i < graph.node_count(); ++i) {
            w.str(graph.node(i).table);
            w.str(graph.node(i).column);
            w.u32(graph.table_of(i));
            w.u8(graph.flags(i));
        }
        c.sections["NODE"] = w.take();
    }
    {
        ByteWriter w;
        w.u64(graph.edges().size());
        for (auto& e : graph.edges()) {
            w.u32(e.source);
            w.u32(e.target);
            w.u8(static_cast<uint8_t>(e.type));
        }
        c.sections["EDGE"] = w.take();
    }
    return c.encode();
}

FdGraph load_graph(std::string_view bytes) {
    auto c = Container::decode(bytes, kGraphMagic, kGraphVersion);
    for (auto* tag : {"META", "NODE", "EDGE"}) {
        if (!c.sections.count(tag)) throw Error(ErrorCode::Corruption, std::string("missing section ") + tag);
    }
    ByteReader meta(c.sections["META"]);
    auto db_id = meta.str();
    ByteReader nr(c.sections["NODE"]);
    auto n = nr.u32();
    std::vector<ColumnRef> nodes;
    std::vector<uint32_t> table;
    std::vector<uint8_t> flags;
    nodes.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        auto t = nr.str();
        auto col = nr.str();
        nodes.push_back({std::move(t), std::move(col)});
        table.push_back(nr.u32());
        flags.push_back(nr.u8());
    }
    ByteReader er(c.sections["EDGE"]);
    auto m = er.u64();
    if (m > er.remaining() / 9) throw Error(ErrorCode::Corruption, "edge count exceeds section size");
    std::vector<Edge> edges;
    edges.reserve(m);
    for (uint64_t i = 0; i < m; ++i) {
        auto s = er.u32();
        auto t = er.u32();
        auto ty = er.u8();
        if (ty >= kNumEdgeTypes) throw Error(ErrorCode::Corruption, "bad edge type");
        edges.push_back({s, t, static_cast<EdgeType>(ty)});
    }
    if (!nr.done() || !er.done()) throw Error(ErrorCode::Corruption, "trailing bytes in graph sections");
    return FdGraph(std::move(db_id), std::move(nodes), std::move(table), std::move(flags), std::move(edges));
}

std::string dump_graph_text(const FdGraph& graph) {
    std::string out;
    for (auto& e : graph.edges()) {
        out += graph.node(e.source).display();
        out += '\t';
        out += to_string(e.type);
        out += '\t';
        out += graph.node(e.target).display();
        out += '\n';
    }
    return out;
}

json key_prediction_to_json(const KeyPrediction& p) {
    json doc;
    doc["primary_keys"] = json::object();
    for (auto& [table, cols] : p.primary_keys) doc["primary_keys"][table] = cols;
    doc["foreign_keys"] = json::array();
    for (auto& fk : p.foreign_keys) {
        doc["foreign_keys"].push_back({{"source", fk.source.display()}, {"target", fk.target.display()}});
    }
    return doc;
}

KeyPrediction key_prediction_from_json(const json& doc) {
    KeyPrediction p;
    try {
        if (auto it = doc.find("primary_keys"); it != doc.end()) {
            for (auto& [table, cols] : it->items()) {
                p.primary_keys.push_back({table, cols.get<std::vector<std::string>>()});
            }
        }
        if (auto it = doc.find("foreign_keys"); it != doc.end()) {
            for (auto& fk : *it) {
                p.foreign_keys.push_back({parse_column_ref(fk.at("source").get<std::string>()),
                                          parse_column_ref(fk.at("target").get<std::string>()), Provenance::predicted});
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("key prediction file: ") + e.what());
    }
    return p;
}

}  // namespace schemasift
