#include <gtest/gtest.h>

#include <fstream>
#include <functional>

#include "schemasift/error.h"
#include "schemasift/schema.h"
#include "support/fixtures.h"

namespace schemasift {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::Io;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

TEST(ColumnRef, CaseInsensitiveIdentity) {
    ColumnRef a{"Courses", "Dept_ID"}, b{"courses", "dept_id"};
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a < b || b < a);
    EXPECT_EQ(a.key(), "courses.dept_id");
    EXPECT_EQ(a.display(), "Courses.Dept_ID");
}

TEST(ColumnRef, ParseSplitsAtFirstDot) {
    auto r = parse_column_ref("T.a.b");
    EXPECT_EQ(r.table, "T");
    EXPECT_EQ(r.column, "a.b");
    EXPECT_EQ(code_of([] { parse_column_ref("nodot"); }), ErrorCode::Parse);
    EXPECT_EQ(code_of([] { parse_column_ref(".x"); }), ErrorCode::Parse);
}

TEST(LoadSchema, UniversityFixture) {
    auto s = testing::university_schema();
    EXPECT_EQ(s.db_id, "university");
    EXPECT_EQ(s.dialect, Dialect::sqlite);
    ASSERT_EQ(s.tables.size(), 4u);
    EXPECT_EQ(s.tables[0].name, "Departments");
    EXPECT_EQ(s.column_count(), 14u);
    EXPECT_EQ(s.tables[3].primary_key, (std::vector<std::string>{"sid", "cid"}));
    ASSERT_EQ(s.foreign_keys.size(), 4u);
    EXPECT_EQ(s.foreign_keys[0].source, (ColumnRef{"Courses", "dept_id"}));
    EXPECT_EQ(s.foreign_keys[0].target, (ColumnRef{"Departments", "did"}));
    EXPECT_EQ(s.foreign_keys[0].provenance, Provenance::declared);
    auto* name = s.find_column({"departments", "NAME"});
    ASSERT_NE(name, nullptr);
    EXPECT_EQ(name->sample_values, (std::vector<std::string>{"Computer Science", "Mathematics"}));
    EXPECT_TRUE(s.find_column({"Departments", "building"})->nullable_flag);
    EXPECT_EQ(s.canonical({"COURSES", "CID"})->display(), "Courses.cid");
    EXPECT_FALSE(s.canonical({"Courses", "nope"}).has_value());
}

TEST(LoadSchema, ZeroTablesIsFine) {
    auto all = parse_schemas(R"({"db_id": "empty", "tables": []})", SchemaFormat::native);
    ASSERT_EQ(all.size(), 1u);
    EXPECT_TRUE(all[0].tables.empty());
    EXPECT_EQ(all[0].column_count(), 0u);
}

TEST(LoadSchema, DanglingForeignKey) {
    const char* doc = R"({"db_id": "x", "tables": [{"name": "A", "columns": [{"name": "id"}]}],
                          "foreign_keys": [{"source": "A.id", "target": "B.id"}]})";
    EXPECT_EQ(code_of([&] { parse_schemas(doc, SchemaFormat::native); }), ErrorCode::DanglingReference);
    EXPECT_NE(message_of([&] { parse_schemas(doc, SchemaFormat::native); }).find("B.id"), std::string::npos);
}

TEST(LoadSchema, DanglingPrimaryKeyMember) {
    const char* doc = R"({"db_id": "x", "tables": [{"name": "A", "columns": [{"name": "id"}], "primary_key": ["ghost"]}]})";
    EXPECT_EQ(code_of([&] { parse_schemas(doc, SchemaFormat::native); }), ErrorCode::DanglingReference);
    EXPECT_NE(message_of([&] { parse_schemas(doc, SchemaFormat::native); }).find("ghost"), std::string::npos);
}

TEST(LoadSchema, InvariantViolations) {
    EXPECT_EQ(code_of([] {
                  parse_schemas(R"({"db_id": "x", "tables": [{"name": "A", "columns": []}, {"name": "a", "columns": []}]})",
                                SchemaFormat::native);
              }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] {
                  parse_schemas(R"({"db_id": "x", "tables": [{"name": "A", "columns": [{"name": "c"}, {"name": "C"}]}]})",
                                SchemaFormat::native);
              }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] {
                  parse_schemas(R"({"db_id": "x", "tables": [{"name": "A", "columns": [{"name": "c"}]}],
                                    "foreign_keys": [{"source": "A.c", "target": "A.c"}]})",
                                SchemaFormat::native);
              }),
              ErrorCode::InvalidArgument);
}

TEST(LoadSchema, FieldPathInErrors) {
    auto msg = message_of([] {
        parse_schemas(R"({"db_id": "x", "tables": [{"name": "A", "columns": [{"type": "int"}]}]})", SchemaFormat::native);
    });
    EXPECT_NE(msg.find("$.tables[0].columns[0].name"), std::string::npos) << msg;
    msg = message_of([] {
        parse_schemas(R"({"db_id": "x", "tables": [{"name": "A", "columns": [{"name": "c", "nullable": "yes"}]}]})",
                      SchemaFormat::native);
    });
    EXPECT_NE(msg.find("nullable"), std::string::npos) << msg;
}

TEST(LoadSchema, SyntaxErrorReportsLine) {
    auto msg = message_of([] { parse_schemas("{\n  \"db_id\": \"x\",\n  \"tables\": [,]\n}", SchemaFormat::native); });
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_EQ(code_of([] { parse_schemas("{", SchemaFormat::native); }), ErrorCode::Parse);
}

TEST(LoadSchema, MissingFile) {
    EXPECT_EQ(code_of([] { load_schema("/nonexistent/schema.json", SchemaFormat::native); }), ErrorCode::Io);
}

TEST(LoadSchema, SpiderManifest) {
    const char* manifest = R"([
      {"db_id": "concert",
       "table_names_original": ["singer", "concert", "singer_in_concert"],
       "column_names_original": [[-1, "*"], [0, "Singer_ID"], [0, "Name"], [1, "concert_ID"], [1, "Theme"],
                                 [2, "concert_ID"], [2, "Singer_ID"]],
       "column_types": ["text", "number", "text", "number", "text", "number", "number"],
       "primary_keys": [1, 3, [5, 6]],
       "foreign_keys": [[5, 3], [6, 1]]},
      {"db_id": "other", "table_names_original": ["t"], "column_names_original": [[-1, "*"], [0, "x"]]}
    ])";
    auto all = parse_schemas(manifest, SchemaFormat::spider);
    ASSERT_EQ(all.size(), 2u);
    auto& s = all[0];
    EXPECT_EQ(s.db_id, "concert");
    ASSERT_EQ(s.tables.size(), 3u);
    EXPECT_EQ(s.tables[0].columns.size(), 2u);
    EXPECT_EQ(s.tables[0].columns[0].sql_type, "number");
    EXPECT_EQ(s.tables[2].primary_key, (std::vector<std::string>{"concert_ID", "Singer_ID"}));
    ASSERT_EQ(s.foreign_keys.size(), 2u);
    EXPECT_EQ(s.foreign_keys[0].source.display(), "singer_in_concert.concert_ID");
    EXPECT_EQ(s.foreign_keys[0].target.display(), "concert.concert_ID");

    auto dir = testing::scratch_dir("spider");
    std::ofstream(dir / "tables.json") << manifest;
    EXPECT_EQ(load_schema(dir / "tables.json", SchemaFormat::spider, "other").tables[0].columns[0].name, "x");
    EXPECT_EQ(code_of([&] { load_schema(dir / "tables.json", SchemaFormat::spider); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { load_schema(dir / "tables.json", SchemaFormat::spider, "missing"); }),
              ErrorCode::InvalidArgument);
}

TEST(LoadSchema, SpiderBadColumnIndex) {
    const char* doc = R"({"db_id": "d", "table_names_original": ["t"], "column_names_original": [[-1, "*"], [0, "x"]],
                          "foreign_keys": [[1, 9]]})";
    EXPECT_EQ(code_of([&] { parse_schemas(doc, SchemaFormat::spider); }), ErrorCode::DanglingReference);
}

TEST(SchemaJson, RoundTripIsIdentity) {
    auto s = testing::university_schema();
    s.foreign_keys[1].provenance = Provenance::predicted;
    auto text = serialize_schema(s);
    auto back = parse_schemas(text, SchemaFormat::native);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], s);
    EXPECT_EQ(serialize_schema(back[0]), text);
}

TEST(SchemaJson, FormatAndDialectNames) {
    EXPECT_EQ(parse_schema_format("spider"), SchemaFormat::spider);
    EXPECT_EQ(parse_schema_format("native"), SchemaFormat::native);
    EXPECT_EQ(code_of([] { parse_schema_format("xml"); }), ErrorCode::InvalidArgument);
    for (auto d : {Dialect::sqlite, Dialect::bigquery, Dialect::snowflake, Dialect::generic}) {
        EXPECT_EQ(parse_dialect(to_string(d)), d);
    }
}

}  // namespace
}  // namespace schemasift
