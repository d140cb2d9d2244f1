#include "schemasift/schema.h"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "schemasift/error.h"
#include "schemasift/text.h"

namespace schemasift {

using nlohmann::json;

std::string ColumnRef::key() const { return to_lower(table) + "." + to_lower(column); }

bool operator==(const ColumnRef& a, const ColumnRef& b) {
    return iequals(a.table, b.table) && iequals(a.column, b.column);
}

bool operator<(const ColumnRef& a, const ColumnRef& b) {
    auto at = to_lower(a.table), bt = to_lower(b.table);
    if (at != bt) return at < bt;
    return to_lower(a.column) < to_lower(b.column);
}

ColumnRef parse_column_ref(std::string_view text) {
    auto dot = text.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
        throw Error(ErrorCode::Parse, "expected table.column, got '" + std::string(text) + "'");
    }
    return ColumnRef{trim(text.substr(0, dot)), trim(text.substr(dot + 1))};
}

const char* to_string(Dialect d) {
    switch (d) {
        case Dialect::sqlite: return "sqlite";
        case Dialect::bigquery: return "bigquery";
        case Dialect::snowflake: return "snowflake";
        case Dialect::generic: return "generic";
    }
    return "generic";
}

Dialect parse_dialect(std::string_view s) {
    auto l = to_lower(s);
    if (l == "sqlite") return Dialect::sqlite;
    if (l == "bigquery") return Dialect::bigquery;
    if (l == "snowflake") return Dialect::snowflake;
    if (l == "generic" || l.empty()) return Dialect::generic;
    throw Error(ErrorCode::Parse, "unknown dialect '" + std::string(s) + "'");
}

SchemaFormat parse_schema_format(std::string_view s) {
    auto l = to_lower(s);
    if (l == "native" || l == "json") return SchemaFormat::native;
    if (l == "spider") return SchemaFormat::spider;
    throw Error(ErrorCode::InvalidArgument, "unknown schema format '" + std::string(s) + "'");
}

const ColumnDef* TableDef::find_column(std::string_view column) const {
    for (auto& c : columns) {
        if (iequals(c.name, column)) return &c;
    }
    return nullptr;
}

bool TableDef::is_primary_key(std::string_view column) const {
    for (auto& p : primary_key) {
        if (iequals(p, column)) return true;
    }
    return false;
}

const TableDef* DatabaseSchema::find_table(std::string_view name) const {
    for (auto& t : tables) {
        if (iequals(t.name, name)) return &t;
    }
    return nullptr;
}

const ColumnDef* DatabaseSchema::find_column(const ColumnRef& ref) const {
    auto* t = find_table(ref.table);
    return t ? t->find_column(ref.column) : nullptr;
}

std::optional<ColumnRef> DatabaseSchema::canonical(const ColumnRef& ref) const {
    auto* t = find_table(ref.table);
    if (!t) return std::nullopt;
    auto* c = t->find_column(ref.column);
    if (!c) return std::nullopt;
    return ColumnRef{t->name, c->name};
}

std::vector<ColumnRef> DatabaseSchema::all_columns() const {
    std::vector<ColumnRef> out;
    out.reserve(column_count());
    for (auto& t : tables) {
        for (auto& c : t.columns) out.push_back({t.name, c.name});
    }
    return out;
}

size_t DatabaseSchema::column_count() const {
    size_t n = 0;
    for (auto& t : tables) n += t.columns.size();
    return n;
}

void validate(const DatabaseSchema& schema) {
    std::unordered_set<std::string> table_names;
    for (auto& t : schema.tables) {
        if (t.name.empty()) throw Error(ErrorCode::InvalidArgument, "table with empty name");
        if (!table_names.insert(to_lower(t.name)).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate table '" + t.name + "'");
        }
        std::unordered_set<std::string> column_names;
        for (auto& c : t.columns) {
            if (c.name.empty()) {
                throw Error(ErrorCode::InvalidArgument, "column with empty name in table '" + t.name + "'");
            }
            if (!column_names.insert(to_lower(c.name)).second) {
                throw Error(ErrorCode::InvalidArgument, "duplicate column '" + t.name + "." + c.name + "'");
            }
        }
        for (auto& p : t.primary_key) {
            if (!t.find_column(p)) {
                throw Error(ErrorCode::DanglingReference,
                            "primary key member '" + t.name + "." + p + "' does not exist");
            }
        }
    }
    for (auto& fk : schema.foreign_keys) {
        for (auto* end : {&fk.source, &fk.target}) {
            if (!schema.find_column(*end)) {
                throw Error(ErrorCode::DanglingReference, "foreign key " + fk.source.display() + " -> " +
                                                              fk.target.display() + " references missing column " +
                                                              end->display());
            }
        }
        if (fk.source == fk.target) {
            throw Error(ErrorCode::InvalidArgument, "self-referential foreign key on " + fk.source.display());
        }
    }
}

namespace {

/// Tracks the JSON path being decoded so field errors can name their location.
class FieldReader {
   public:
    explicit FieldReader(std::string path) : path_(std::move(path)) {}

    FieldReader at(const std::string& key) const { return FieldReader(path_ + "." + key); }
    FieldReader at(size_t index) const { return FieldReader(path_ + "[" + std::to_string(index) + "]"); }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::Parse, "field " + path_ + ": " + what);
    }

    const json& require(const json& obj, const std::string& key) const {
        if (!obj.is_object()) fail("expected an object");
        auto it = obj.find(key);
        if (it == obj.end()) at(key).fail("missing required field");
        return *it;
    }

    std::string string(const json& v) const {
        if (!v.is_string()) fail("expected a string");
        return v.get<std::string>();
    }

    std::optional<std::string> optional_string(const json& obj, const std::string& key) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return std::nullopt;
        return at(key).string(*it);
    }

    const json& array(const json& v) const {
        if (!v.is_array()) fail("expected an array");
        return v;
    }

    const std::string& path() const { return path_; }

   private:
    std::string path_;
};

ColumnRef read_ref(const FieldReader& r, const json& v) {
    if (v.is_string()) {
        try {
            return parse_column_ref(v.get<std::string>());
        } catch (const Error& e) {
            r.fail(e.what());
        }
    }
    if (v.is_object()) {
        return ColumnRef{r.at("table").string(r.require(v, "table")), r.at("column").string(r.require(v, "column"))};
    }
    r.fail("expected \"table.column\" or {table, column}");
}

std::string sample_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "NULL";
    return v.dump();
}

/// Rewrites foreign-key endpoints to the schema's own spelling when they resolve.
void canonicalize_refs(DatabaseSchema& schema) {
    for (auto& fk : schema.foreign_keys) {
        if (auto c = schema.canonical(fk.source)) fk.source = *c;
        if (auto c = schema.canonical(fk.target)) fk.target = *c;
    }
}

DatabaseSchema read_native(const json& doc, const FieldReader& r) {
    DatabaseSchema schema;
    schema.db_id = r.at("db_id").string(r.require(doc, "db_id"));
    if (auto d = r.optional_string(doc, "dialect")) {
        try {
            schema.dialect = parse_dialect(*d);
        } catch (const Error& e) {
            r.at("dialect").fail(e.what());
        }
    }
    auto tr = r.at("tables");
    auto& tables = tr.array(r.require(doc, "tables"));
    for (size_t i = 0; i < tables.size(); ++i) {
        auto t_r = tr.at(i);
        auto& t = tables[i];
        TableDef table;
        table.name = t_r.at("name").string(t_r.require(t, "name"));
        table.description = t_r.optional_string(t, "description");
        auto cr = t_r.at("columns");
        auto& cols = cr.array(t_r.require(t, "columns"));
        for (size_t j = 0; j < cols.size(); ++j) {
            auto c_r = cr.at(j);
            auto& c = cols[j];
            ColumnDef col;
            col.name = c_r.at("name").string(c_r.require(c, "name"));
            if (auto ty = c_r.optional_string(c, "type")) col.sql_type = *ty;
            col.description = c_r.optional_string(c, "description");
            col.value_description = c_r.optional_string(c, "value_description");
            if (auto it = c.find("nullable"); it != c.end() && !it->is_null()) {
                if (!it->is_boolean()) c_r.at("nullable").fail("expected a boolean");
                col.nullable_flag = it->get<bool>();
            }
            if (auto it = c.find("sample_values"); it != c.end() && !it->is_null()) {
                for (auto& v : c_r.at("sample_values").array(*it)) col.sample_values.push_back(sample_to_string(v));
            }
            table.columns.push_back(std::move(col));
        }
        if (auto it = t.find("primary_key"); it != t.end() && !it->is_null()) {
            auto pr = t_r.at("primary_key");
            auto& pk = pr.array(*it);
            for (size_t j = 0; j < pk.size(); ++j) table.primary_key.push_back(pr.at(j).string(pk[j]));
        }
        schema.tables.push_back(std::move(table));
    }
    if (auto it = doc.find("foreign_keys"); it != doc.end() && !it->is_null()) {
        auto fr = r.at("foreign_keys");
        auto& fks = fr.array(*it);
        for (size_t i = 0; i < fks.size(); ++i) {
            auto f_r = fr.at(i);
            ForeignKey fk;
            fk.source = read_ref(f_r.at("source"), f_r.require(fks[i], "source"));
            fk.target = read_ref(f_r.at("target"), f_r.require(fks[i], "target"));
            if (auto p = f_r.optional_string(fks[i], "provenance")) {
                if (*p == "declared") {
                    fk.provenance = Provenance::declared;
                } else if (*p == "predicted") {
                    fk.provenance = Provenance::predicted;
                } else {
                    f_r.at("provenance").fail("expected declared|predicted");
                }
            }
            schema.foreign_keys.push_back(std::move(fk));
        }
    }
    canonicalize_refs(schema);
    return schema;
}

/// Spider tables manifest: column lists are flat with a table index per column.
DatabaseSchema read_spider(const json& doc, const FieldReader& r) {
    DatabaseSchema schema;
    schema.db_id = r.at("db_id").string(r.require(doc, "db_id"));
    schema.dialect = Dialect::sqlite;
    auto tn_r = r.at("table_names_original");
    auto& table_names = tn_r.array(r.require(doc, "table_names_original"));
    for (size_t i = 0; i < table_names.size(); ++i) {
        TableDef t;
        t.name = tn_r.at(i).string(table_names[i]);
        schema.tables.push_back(std::move(t));
    }
    auto cn_r = r.at("column_names_original");
    auto& column_names = cn_r.array(r.require(doc, "column_names_original"));
    const json* types = nullptr;
    if (auto it = doc.find("column_types"); it != doc.end()) types = &r.at("column_types").array(*it);

    // Flat column index -> (table index, column index within table).
    std::vector<std::pair<int, int>> flat(column_names.size(), {-1, -1});
    for (size_t i = 0; i < column_names.size(); ++i) {
        auto e_r = cn_r.at(i);
        auto& e = e_r.array(column_names[i]);
        if (e.size() != 2 || !e[0].is_number_integer()) e_r.fail("expected [table_index, name]");
        int ti = e[0].get<int>();
        if (ti < 0) continue;  // the "*" pseudo-column
        if (static_cast<size_t>(ti) >= schema.tables.size()) e_r.fail("table index out of range");
        ColumnDef col;
        col.name = e_r.at(1).string(e[1]);
        if (types && i < types->size() && (*types)[i].is_string()) col.sql_type = (*types)[i].get<std::string>();
        auto& cols = schema.tables[ti].columns;
        flat[i] = {ti, static_cast<int>(cols.size())};
        cols.push_back(std::move(col));
    }
    auto column_at = [&](const FieldReader& fr, const json& v) -> std::pair<int, int> {
        if (!v.is_number_integer()) fr.fail("expected a column index");
        auto idx = v.get<long>();
        if (idx < 0 || static_cast<size_t>(idx) >= flat.size() || flat[idx].first < 0) {
            throw Error(ErrorCode::DanglingReference, "field " + fr.path() + ": column index " +
                                                          std::to_string(idx) + " does not name a column");
        }
        return flat[idx];
    };
    if (auto it = doc.find("primary_keys"); it != doc.end()) {
        auto pr = r.at("primary_keys");
        auto& pks = pr.array(*it);
        for (size_t i = 0; i < pks.size(); ++i) {
            std::vector<json> members;
            if (pks[i].is_array()) {
                members.assign(pks[i].begin(), pks[i].end());
            } else {
                members.push_back(pks[i]);
            }
            for (auto& m : members) {
                auto [ti, ci] = column_at(pr.at(i), m);
                auto& t = schema.tables[ti];
                if (!t.is_primary_key(t.columns[ci].name)) t.primary_key.push_back(t.columns[ci].name);
            }
        }
    }
    if (auto it = doc.find("foreign_keys"); it != doc.end()) {
        auto fr = r.at("foreign_keys");
        auto& fks = fr.array(*it);
        for (size_t i = 0; i < fks.size(); ++i) {
            auto& pair = fr.at(i).array(fks[i]);
            if (pair.size() != 2) fr.at(i).fail("expected [source, target]");
            auto [st, sc] = column_at(fr.at(i).at(0), pair[0]);
            auto [tt, tc] = column_at(fr.at(i).at(1), pair[1]);
            ForeignKey fk{{schema.tables[st].name, schema.tables[st].columns[sc].name},
                          {schema.tables[tt].name, schema.tables[tt].columns[tc].name},
                          Provenance::declared};
            if (fk.source == fk.target) continue;
            bool dup = false;
            for (auto& f : schema.foreign_keys) dup = dup || (f.source == fk.source && f.target == fk.target);
            if (!dup) schema.foreign_keys.push_back(std::move(fk));
        }
    }
    return schema;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<DatabaseSchema> parse_schemas(std::string_view text, SchemaFormat format) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        size_t line = 1, col = 1;
        for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                                          e.what());
    }
    std::vector<DatabaseSchema> out;
    if (format == SchemaFormat::native) {
        out.push_back(read_native(doc, FieldReader("$")));
    } else {
        FieldReader root("$");
        if (doc.is_object()) {
            out.push_back(read_spider(doc, root));
        } else {
            auto& dbs = root.array(doc);
            for (size_t i = 0; i < dbs.size(); ++i) out.push_back(read_spider(dbs[i], root.at(i)));
        }
    }
    for (auto& s : out) validate(s);
    return out;
}

std::vector<DatabaseSchema> load_schemas(const std::filesystem::path& path, SchemaFormat format) {
    return parse_schemas(read_file(path), format);
}

DatabaseSchema load_schema(const std::filesystem::path& path, SchemaFormat format, std::optional<std::string> db_id) {
    auto all = load_schemas(path, format);
    if (db_id) {
        for (auto& s : all) {
            if (s.db_id == *db_id) return std::move(s);
        }
        throw Error(ErrorCode::InvalidArgument, "database '" + *db_id + "' not found in " + path.string());
    }
    if (all.size() != 1) {
        throw Error(ErrorCode::InvalidArgument,
                    path.string() + " holds " + std::to_string(all.size()) + " databases; name one with db_id");
    }
    return std::move(all.front());
}

json schema_to_json(const DatabaseSchema& schema) {
    json doc;
    doc["db_id"] = schema.db_id;
    doc["dialect"] = to_string(schema.dialect);
    doc["tables"] = json::array();
    for (auto& t : schema.tables) {
        json jt;
        jt["name"] = t.name;
        if (t.description) jt["description"] = *t.description;
        jt["columns"] = json::array();
        for (auto& c : t.columns) {
            json jc;
            jc["name"] = c.name;
            jc["type"] = c.sql_type;
            if (c.description) jc["description"] = *c.description;
            if (c.value_description) jc["value_description"] = *c.value_description;
            jc["nullable"] = c.nullable_flag;
            jc["sample_values"] = c.sample_values;
            jt["columns"].push_back(std::move(jc));
        }
        jt["primary_key"] = t.primary_key;
        doc["tables"].push_back(std::move(jt));
    }
    doc["foreign_keys"] = json::array();
    for (auto& fk : schema.foreign_keys) {
        doc["foreign_keys"].push_back({{"source", {{"table", fk.source.table}, {"column", fk.source.column}}},
                                       {"target", {{"table", fk.target.table}, {"column", fk.target.column}}},
                                       {"provenance", fk.provenance == Provenance::declared ? "declared" : "predicted"}});
    }
    return doc;
}

DatabaseSchema schema_from_json(const json& doc) {
    auto schema = read_native(doc, FieldReader("$"));
    validate(schema);
    return schema;
}

std::string serialize_schema(const DatabaseSchema& schema) { return schema_to_json(schema).dump(2) + "\n"; }

}  // namespace schemasift
