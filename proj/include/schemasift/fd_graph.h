#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "schemasift/schema.h"

namespace schemasift {

/// The three dependency relations and their reverse mirrors. Reverses are distinct relation
/// types so the reranker learns them separately.
enum class EdgeType : uint8_t {
    foreign_key = 0,
    column_to_foreign_key = 1,
    column_to_primary_key = 2,
    rev_foreign_key = 3,
    rev_column_to_foreign_key = 4,
    rev_column_to_primary_key = 5,
};

inline constexpr size_t kNumEdgeTypes = 6;

inline constexpr std::array<EdgeType, kNumEdgeTypes> kAllEdgeTypes = {
    EdgeType::foreign_key,     EdgeType::column_to_foreign_key,     EdgeType::column_to_primary_key,
    EdgeType::rev_foreign_key, EdgeType::rev_column_to_foreign_key, EdgeType::rev_column_to_primary_key,
};

EdgeType reverse(EdgeType t);
bool is_forward(EdgeType t);
const char* to_string(EdgeType t);
EdgeType parse_edge_type(std::string_view s);

enum NodeFlags : uint8_t {
    kPrimaryKey = 1,
    kForeignKeySource = 2,
    kForeignKeyTarget = 4,
};

struct Edge {
    uint32_t source;
    uint32_t target;
    EdgeType type;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Column-level typed directed multigraph. Node order is table order then column order.
class FdGraph {
   public:
    FdGraph() = default;
    FdGraph(std::string db_id, std::vector<ColumnRef> nodes, std::vector<uint32_t> node_table,
            std::vector<uint8_t> node_flags, std::vector<Edge> edges);

    const std::string& db_id() const { return db_id_; }
    size_t node_count() const { return nodes_.size(); }
    const std::vector<ColumnRef>& nodes() const { return nodes_; }
    const ColumnRef& node(uint32_t i) const { return nodes_[i]; }
    uint32_t table_of(uint32_t i) const { return node_table_[i]; }
    uint8_t flags(uint32_t i) const { return node_flags_[i]; }
    /// Primary-key member or foreign-key endpoint.
    bool is_key(uint32_t i) const { return node_flags_[i] != 0; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::optional<uint32_t> index_of(const ColumnRef& ref) const;

    /// The same graph with nodes renumbered: new index of old node i is perm[i].
    FdGraph permuted(const std::vector<uint32_t>& perm) const;

    friend bool operator==(const FdGraph& a, const FdGraph& b) {
        return a.db_id_ == b.db_id_ && a.nodes_ == b.nodes_ && a.node_table_ == b.node_table_ &&
               a.node_flags_ == b.node_flags_ && a.edges_ == b.edges_;
    }

   private:
    std::string db_id_;
    std::vector<ColumnRef> nodes_;
    std::vector<uint32_t> node_table_;
    std::vector<uint8_t> node_flags_;
    std::vector<Edge> edges_;
    std::unordered_map<std::string, uint32_t> index_;
};

/// Recovered keys for a schema that omits some declarations.
struct KeyPrediction {
    /// (table, ordered primary-key columns), in table order.
    std::vector<std::pair<std::string, std::vector<std::string>>> primary_keys;
    std::vector<ForeignKey> foreign_keys;

    bool empty() const { return primary_keys.empty() && foreign_keys.empty(); }
};

/// Naming-convention key recovery.
///
/// Primary keys, only for tables without a declared one: the first column named `id`,
/// `<table>_id` or `<table>id`, where `<table>` may be the singular form of the table name.
///
/// Foreign keys: a column of one table pointing at the single-column primary key (declared or
/// predicted) of another table, when its name is `<table-stem>_<pk>` (cards.location_id ->
/// locations.id) or reuses a distinctive key name verbatim (enrollments.student_no ->
/// students.student_no). A column that is already a declared FK source, or that is the sole
/// primary key of its own table in the verbatim case, is skipped. Numeric and text types never
/// pair. At most one prediction per source column; output order follows the schema.
KeyPrediction infer_keys_heuristic(const DatabaseSchema& schema);

struct MergeResult {
    DatabaseSchema schema;
    /// Conflicts where a declared key overrode a prediction.
    std::vector<std::string> warnings;
};

/// Declared keys always win. Predicted primary keys fill tables without one; predicted foreign
/// keys are appended with provenance=predicted unless the same link already exists. Throws
/// DanglingReference when a prediction names a missing column.
MergeResult merge_keys(const DatabaseSchema& schema, const KeyPrediction& predicted);

/// Builds the dependency graph over every column of the schema (keys already merged):
///  - foreign_key u -> v for each FK,
///  - column_to_foreign_key from every non-key column of the FK's table to the FK source, and
///    from every non-key column of the referenced table to the referenced column,
///  - column_to_primary_key from every non-PK column to each PK member,
///  - the reverse mirror of each of the above.
/// "Non-key" excludes PK members and FK sources of that table.
FdGraph build_fd_graph(const DatabaseSchema& schema);

std::string serialize_graph(const FdGraph& graph);
FdGraph load_graph(std::string_view bytes);

/// One edge per line: source<TAB>type<TAB>target.
std::string dump_graph_text(const FdGraph& graph);

nlohmann::json key_prediction_to_json(const KeyPrediction& p);
KeyPrediction key_prediction_from_json(const nlohmann::json& doc);

}  // namespace schemasift
