#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "schemasift/error.h"
#include "schemasift/value_index.h"
#include "support/fixtures.h"

namespace schemasift {
namespace {

const ColumnRef kCol{"T", "c"};

ValueIndex toy_index() {
    ValueIndex idx;
    for (auto* v : {"alpha", "alpha beta", "beta gamma delta", "alpha alpha gamma", "epsilon"}) idx.add(kCol, v);
    idx.finalize();
    return idx;
}

// Frozen from an independent evaluation of BM25 (k1 = 1.2, b = 0.75,
// idf = ln(1 + (N - n + 0.5) / (n + 0.5))) over the five toy documents.
TEST(Bm25, ToyCorpusMatchesHandComputation) {
    auto hits = toy_index().retrieve("alpha beta", kCol, 10);
    ASSERT_EQ(hits.size(), 4u);
    EXPECT_EQ(hits[0].value, "alpha beta");
    EXPECT_NEAR(hits[0].score, 1.414465238086587, 1e-12);
    EXPECT_EQ(hits[1].value, "beta gamma delta");
    EXPECT_NEAR(hits[1].score, 0.7268042347843697, 1e-12);
    EXPECT_EQ(hits[2].value, "alpha");
    EXPECT_NEAR(hits[2].score, 0.6775956009210925, 1e-12);
    EXPECT_EQ(hits[3].value, "alpha alpha gamma");
    EXPECT_NEAR(hits[3].score, 0.6497492063626914, 1e-12);
}

TEST(Bm25, TiesBreakLexicographically) {
    auto hits = toy_index().retrieve("gamma", kCol, 10);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].value, "alpha alpha gamma");
    EXPECT_EQ(hits[1].value, "beta gamma delta");
    EXPECT_EQ(hits[0].score, hits[1].score);
}

TEST(Bm25, QueryOrderAndRepetitionDoNotMatter) {
    auto idx = toy_index();
    auto a = idx.retrieve("alpha beta", kCol, 10);
    auto b = idx.retrieve("BETA, alpha!", kCol, 10);
    auto c = idx.retrieve("alpha alpha beta", kCol, 10);
    ASSERT_EQ(a.size(), b.size());
    ASSERT_EQ(a.size(), c.size());
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].value, b[i].value);
        EXPECT_EQ(a[i].score, b[i].score);
        EXPECT_EQ(a[i].score, c[i].score);
    }
}

TEST(Bm25, TruncatesToK) {
    auto hits = toy_index().retrieve("alpha beta", kCol, 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[1].value, "beta gamma delta");
}

TEST(Bm25, NoSharedTokenGivesNothing) { EXPECT_TRUE(toy_index().retrieve("zeta eta", kCol, 5).empty()); }

TEST(Bm25, UnknownColumn) {
    try {
        toy_index().retrieve("alpha", {"T", "missing"}, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownColumn);
    }
}

TEST(Bm25, CourseQueryFindsDepartmentName) {
    auto schema = testing::university_schema();
    auto idx = build_value_index(schema, {{{"Departments", "name"}, "Computer Science"},
                                          {{"Departments", "name"}, "History"},
                                          {{"Departments", "name"}, "Mathematics"},
                                          {{"Courses", "title"}, "Databases"}});
    auto hits = idx.retrieve("Count the number of courses offered in the Computer Science department",
                             {"Departments", "name"}, 2);
    ASSERT_FALSE(hits.empty());
    EXPECT_EQ(hits[0].value, "Computer Science");
    EXPECT_EQ(hits.size(), 1u);
}

TEST(ValueIndexBuild, DistinctValuesAndEmptyColumns) {
    auto schema = testing::university_schema();
    auto idx = build_value_index(schema, {{{"Departments", "name"}, "Computer Science"},
                                          {{"Departments", "name"}, "History"},
                                          {{"departments", "NAME"}, "Computer Science"}});
    EXPECT_EQ(idx.column_count(), schema.column_count());
    auto* names = idx.column_index({"Departments", "name"});
    ASSERT_NE(names, nullptr);
    EXPECT_EQ(names->values, (std::vector<std::string>{"Computer Science", "History"}));
    EXPECT_EQ(names->doc_lengths, (std::vector<uint32_t>{2, 1}));
    EXPECT_DOUBLE_EQ(names->avgdl, 1.5);
    auto* empty = idx.column_index({"Students", "email"});
    ASSERT_NE(empty, nullptr);
    EXPECT_TRUE(empty->values.empty());
    EXPECT_TRUE(empty->postings.empty());
    EXPECT_TRUE(idx.retrieve("anything", {"Students", "email"}, 3).empty());
}

TEST(ValueIndexBuild, PostingsResolveAndLengthsMatchTokens) {
    auto idx = toy_index();
    auto* col = idx.column_index(kCol);
    ASSERT_NE(col, nullptr);
    std::vector<uint32_t> recount(col->values.size(), 0);
    for (auto& [term, list] : col->postings) {
        for (auto& p : list) {
            ASSERT_LT(p.value_id, col->values.size());
            recount[p.value_id] += p.term_frequency;
        }
    }
    EXPECT_EQ(recount, col->doc_lengths);
    EXPECT_EQ(col->postings.at("alpha").size(), 3u);
}

TEST(ValueIndexBuild, OversizeValuesTokenizedByPrefix) {
    Bm25Params params;
    params.max_value_bytes = 10;
    ValueIndex idx(params);
    std::string long_value = "short head" + std::string(50, ' ') + "tailword";
    idx.add(kCol, long_value);
    idx.finalize();
    EXPECT_TRUE(idx.retrieve("tailword", kCol, 1).empty());
    auto hits = idx.retrieve("head", kCol, 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].value, long_value);
}

TEST(ValueIndexProperties, IrrelevantValuesDoNotChangeRanking) {
    std::mt19937_64 rng(4);
    const std::vector<std::string> vocab{"red", "green", "blue", "north", "south", "east", "west", "oak", "pine"};
    for (int trial = 0; trial < 20; ++trial) {
        ValueIndex base, extended;
        for (int v = 0; v < 12; ++v) {
            std::string value = vocab[rng() % 4] + " " + vocab[rng() % vocab.size()];
            base.add(kCol, value);
            extended.add(kCol, value);
        }
        extended.add(kCol, "zzz qqq");
        base.finalize();
        extended.finalize();
        auto a = base.retrieve("red green", kCol, 100);
        auto b = extended.retrieve("red green", kCol, 100);
        ASSERT_EQ(a.size(), b.size());
        for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
    }
}

TEST(ValueIndexProperties, SingleTokenQueryReturnsExactlyTheContainingValues) {
    auto idx = toy_index();
    auto hits = idx.retrieve("alpha", kCol, 1000);
    std::vector<std::string> values;
    for (auto& h : hits) values.push_back(h.value);
    std::sort(values.begin(), values.end());
    EXPECT_EQ(values, (std::vector<std::string>{"alpha", "alpha alpha gamma", "alpha beta"}));
}

TEST(ValueDump, ParsesTabSeparatedRows) {
    auto schema = testing::university_schema();
    auto cells = parse_value_dump("Departments\tname\tComputer Science\ncourses\tTITLE\tData\tbases\n\n", schema);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_EQ(cells[0].first.display(), "Departments.name");
    EXPECT_EQ(cells[0].second, "Computer Science");
    EXPECT_EQ(cells[1].first.display(), "Courses.title");
    EXPECT_EQ(cells[1].second, "Data\tbases");
    try {
        parse_value_dump("Nowhere\tx\tv\n", schema);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownColumn);
    }
}

TEST(ValueIndexFile, RoundTrip) {
    auto idx = toy_index();
    auto bytes = serialize_index(idx);
    auto back = load_index(bytes);
    EXPECT_TRUE(back == idx);
    EXPECT_EQ(serialize_index(back), bytes);
    auto a = idx.retrieve("alpha beta", kCol, 10);
    auto b = back.retrieve("alpha beta", kCol, 10);
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].score, b[i].score);
    bytes[bytes.size() / 2] ^= 0x10;
    EXPECT_THROW(load_index(bytes), Error);
}

}  // namespace
}  // namespace schemasift
