#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace schemasift {

/// A column addressed by table and column name. Identifiers compare case-insensitively; the
/// original spelling is kept for display.
struct ColumnRef {
    std::string table;
    std::string column;

    /// Lower-cased "table.column".
    std::string key() const;
    std::string display() const { return table + "." + column; }

    friend bool operator==(const ColumnRef& a, const ColumnRef& b);
    friend bool operator<(const ColumnRef& a, const ColumnRef& b);
};

/// Parses "table.column". The split happens at the first dot.
ColumnRef parse_column_ref(std::string_view text);

using ColumnSet = std::set<ColumnRef>;

enum class Dialect { sqlite, bigquery, snowflake, generic };

const char* to_string(Dialect d);
Dialect parse_dialect(std::string_view s);

struct ColumnDef {
    std::string name;
    std::string sql_type;
    std::optional<std::string> description;
    std::optional<std::string> value_description;
    bool nullable_flag = false;
    std::vector<std::string> sample_values;

    friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

struct TableDef {
    std::string name;
    std::optional<std::string> description;
    std::vector<ColumnDef> columns;
    std::vector<std::string> primary_key;

    const ColumnDef* find_column(std::string_view column) const;
    bool is_primary_key(std::string_view column) const;

    friend bool operator==(const TableDef&, const TableDef&) = default;
};

enum class Provenance { declared, predicted };

struct ForeignKey {
    ColumnRef source;
    ColumnRef target;
    Provenance provenance = Provenance::declared;

    friend bool operator==(const ForeignKey& a, const ForeignKey& b) {
        return a.source == b.source && a.target == b.target && a.provenance == b.provenance;
    }
};

struct DatabaseSchema {
    std::string db_id;
    std::vector<TableDef> tables;
    std::vector<ForeignKey> foreign_keys;
    Dialect dialect = Dialect::generic;

    const TableDef* find_table(std::string_view name) const;
    const ColumnDef* find_column(const ColumnRef& ref) const;
    /// Resolves a reference to the schema's own spelling, or nullopt.
    std::optional<ColumnRef> canonical(const ColumnRef& ref) const;
    /// Every column in table order, then column order.
    std::vector<ColumnRef> all_columns() const;
    size_t column_count() const;

    friend bool operator==(const DatabaseSchema&, const DatabaseSchema&) = default;
};

/// Throws DanglingReference / InvalidArgument when an invariant is violated.
void validate(const DatabaseSchema& schema);

struct LabeledExample {
    std::string question;
    std::string db_id;
    ColumnSet positives;
    ColumnSet negatives;
    std::vector<std::string> gold_sql;
};

enum class SchemaFormat {
    /// Native one-database-per-file JSON document.
    native,
    /// Spider-style tables manifest: a JSON array of databases.
    spider,
};

SchemaFormat parse_schema_format(std::string_view s);

/// Parses every database in the document.
std::vector<DatabaseSchema> parse_schemas(std::string_view text, SchemaFormat format);
/// Loads a file holding exactly one database (a Spider manifest with several needs `db_id`).
DatabaseSchema load_schema(const std::filesystem::path& path, SchemaFormat format,
                           std::optional<std::string> db_id = std::nullopt);
std::vector<DatabaseSchema> load_schemas(const std::filesystem::path& path, SchemaFormat format);

nlohmann::json schema_to_json(const DatabaseSchema& schema);
DatabaseSchema schema_from_json(const nlohmann::json& doc);
std::string serialize_schema(const DatabaseSchema& schema);

}  // namespace schemasift
