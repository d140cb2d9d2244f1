#include "schemasift/synthetic.h"

#include <algorithm>
#include <random>
#include <set>

#include "schemasift/error.h"

namespace schemasift {

namespace {

class Rng {
   public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    size_t below(size_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<size_t>(x % n);
    }
    size_t between(size_t lo, size_t hi) { return lo + below(hi - lo + 1); }
    bool chance(double p) { return static_cast<double>(gen_() >> 11) * 0x1.0p-53 < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

   private:
    std::mt19937_64 gen_;
};

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

/// Distinct consonant-vowel words of `syllables` syllables, never repeating across calls.
class WordSource {
   public:
    explicit WordSource(Rng& rng) : rng_(rng) {}
    std::string next(size_t syllables) {
        for (;;) {
            std::string w;
            for (size_t i = 0; i < syllables; ++i) {
                w += kConsonants[rng_.below(14)];
                w += kVowels[rng_.below(5)];
            }
            if (used_.insert(w).second) return w;
        }
    }
    std::string code() {
        static constexpr const char* kAlnum = "0123456789qwxyzj";
        for (;;) {
            std::string w = "k";
            for (int i = 0; i < 5; ++i) w += kAlnum[rng_.below(16)];
            if (used_.insert(w).second) return w;
        }
    }

   private:
    Rng& rng_;
    std::set<std::string> used_;
};

struct PlantedTable {
    std::string name;
    std::string pk;
    std::string fk;     // empty for the root
    size_t parent = 0;  // index of the referenced table
    std::vector<std::pair<std::string, std::string>> content;  // column name, its two words joined by a space
};

std::string sql_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        out += c;
        if (c == '\'') out += '\'';
    }
    return out + "'";
}

}  // namespace

PlantedCorpus generate_planted_corpus(const PlantedOptions& options) {
    if (options.databases == 0 || options.tables == 0 || options.columns_per_table < 3) {
        throw Error(ErrorCode::InvalidArgument, "planted corpus needs databases, tables and >= 3 columns per table");
    }
    Rng rng(options.seed);
    WordSource words(rng);
    // One content vocabulary shared by every database, small enough that unrelated columns
    // sometimes share a word with the question.
    std::vector<std::string> vocabulary;
    const size_t content_per_db = options.tables * options.columns_per_table;
    for (size_t i = 0; i < content_per_db; ++i) vocabulary.push_back(words.next(3));
    std::vector<std::string> value_words;
    for (size_t i = 0; i < 200; ++i) value_words.push_back(words.next(2) + words.next(2));

    PlantedCorpus corpus;
    std::vector<std::vector<PlantedTable>> layouts;
    for (size_t d = 0; d < options.databases; ++d) {
        SyntheticDatabase db;
        db.schema.db_id = "planted_" + std::to_string(d);
        db.schema.dialect = Dialect::sqlite;
        std::vector<PlantedTable> tables(options.tables);
        std::set<std::string> names_in_db;
        for (size_t t = 0; t < options.tables; ++t) {
            auto& pt = tables[t];
            pt.name = "t" + words.next(2);
            pt.pk = words.code();
            if (t > 0) {
                pt.parent = rng.below(t);
                pt.fk = words.code();
            }
            const size_t n_content = options.columns_per_table - (t > 0 ? 2 : 1);
            while (pt.content.size() < n_content) {
                auto a = rng.pick(vocabulary), b = rng.pick(vocabulary);
                if (a == b) continue;
                auto name = a + "_" + b;
                if (!names_in_db.insert(name).second) continue;
                pt.content.push_back({name, a + " " + b});
            }
            TableDef def;
            def.name = pt.name;
            def.description = "records of kind " + pt.name;
            def.columns.push_back({pt.pk, "integer", std::nullopt, std::nullopt, false, {}});
            def.primary_key = {pt.pk};
            if (t > 0) {
                def.columns.push_back({pt.fk, "integer", std::nullopt, std::nullopt, false, {}});
                db.schema.foreign_keys.push_back({{pt.name, pt.fk}, {tables[pt.parent].name, tables[pt.parent].pk}});
            }
            for (auto& [name, phrase] : pt.content) {
                ColumnDef col{name, "text", "the " + phrase + " of each entry", std::nullopt, rng.chance(0.3), {}};
                for (size_t v = 0; v < options.values_per_column; ++v) {
                    auto value = rng.pick(value_words);
                    if (v == 0) col.sample_values.push_back(value);
                    db.cells.push_back({{pt.name, name}, value});
                }
                def.columns.push_back(std::move(col));
            }
            for (size_t r = 0; r < options.values_per_column; ++r) {
                db.cells.push_back({{pt.name, pt.pk}, std::to_string(r + 1)});
                if (t > 0) db.cells.push_back({{pt.name, pt.fk}, std::to_string(rng.between(1, 9))});
            }
            db.schema.tables.push_back(std::move(def));
        }
        corpus.databases.push_back(std::move(db));
        layouts.push_back(std::move(tables));
    }

    static const std::vector<std::string> kOpeners = {"list the", "show the", "what are the", "give me the",
                                                      "find the"};
    for (size_t q = 0; q < options.questions; ++q) {
        const size_t d = q % options.databases;
        auto& tables = layouts[d];
        auto& db = corpus.databases[d];
        // A path of up to three tables joined along the foreign-key tree.
        std::vector<size_t> path = {rng.below(tables.size())};
        const size_t want = rng.between(1, 3);
        while (path.size() < want) {
            std::vector<size_t> next;
            auto last = path.back();
            if (last > 0) next.push_back(tables[last].parent);
            for (size_t t = 0; t < tables.size(); ++t) {
                if (t > 0 && tables[t].parent == last) next.push_back(t);
            }
            next.erase(std::remove_if(next.begin(), next.end(),
                                      [&](size_t t) { return std::find(path.begin(), path.end(), t) != path.end(); }),
                       next.end());
            if (next.empty()) break;
            path.push_back(rng.pick(next));
        }
        std::vector<std::string> select_cols, phrases;
        for (auto t : path) {
            auto cols = tables[t].content;
            rng.shuffle(cols);
            const size_t take = path.size() == 1 ? 2 : 1;
            for (size_t i = 0; i < take; ++i) {
                select_cols.push_back(tables[t].name + "." + cols[i].first);
                phrases.push_back(cols[i].second);
            }
        }
        std::string sql = "SELECT ";
        for (size_t i = 0; i < select_cols.size(); ++i) sql += (i ? ", " : "") + select_cols[i];
        sql += " FROM " + tables[path[0]].name;
        for (size_t i = 1; i < path.size(); ++i) {
            auto& a = tables[path[i - 1]];
            auto& b = tables[path[i]];
            sql += " JOIN " + b.name + " ON ";
            if (b.fk.size() && &tables[b.parent] == &a) {
                sql += b.name + "." + b.fk + " = " + a.name + "." + a.pk;
            } else {
                sql += a.name + "." + a.fk + " = " + b.name + "." + b.pk;
            }
        }
        std::string question = rng.pick(kOpeners) + " ";
        for (size_t i = 0; i < phrases.size(); ++i) {
            if (i) question += i + 1 == phrases.size() ? " and " : ", ";
            question += phrases[i];
        }
        if (rng.chance(0.5)) {
            auto& t = tables[path.back()];
            auto& filter = t.content[rng.below(t.content.size())];
            std::string value;
            for (auto& [ref, v] : db.cells) {
                if (ref.table == t.name && ref.column == filter.first) {
                    value = v;
                    break;
                }
            }
            sql += " WHERE " + t.name + "." + filter.first + " = " + sql_quote(value);
            question += " where the " + filter.second + " is " + value;
        }
        corpus.questions.push_back({db.schema.db_id, question, sql});
    }
    return corpus;
}

SyntheticDatabase generate_wide_database(size_t tables, size_t total_columns, uint64_t seed,
                                         size_t values_per_column) {
    if (tables == 0 || total_columns < 2 * tables) {
        throw Error(ErrorCode::InvalidArgument, "wide database needs at least two columns per table");
    }
    Rng rng(seed);
    WordSource words(rng);
    std::vector<std::string> vocabulary;
    for (size_t i = 0; i < 4000; ++i) vocabulary.push_back(words.next(3));
    SyntheticDatabase db;
    db.schema.db_id = "wide_" + std::to_string(tables) + "_" + std::to_string(total_columns);
    db.schema.dialect = Dialect::bigquery;
    for (size_t t = 0; t < tables; ++t) {
        const size_t width = total_columns / tables + (t < total_columns % tables ? 1 : 0);
        TableDef def;
        def.name = words.next(2) + "_" + std::to_string(t);
        def.description = "table of " + rng.pick(vocabulary) + " " + rng.pick(vocabulary);
        def.columns.push_back({"id", "integer", std::nullopt, std::nullopt, false, {}});
        def.primary_key = {"id"};
        const size_t n_fk = t == 0 ? 0 : std::min<size_t>(rng.between(1, 2), width - 1);
        std::set<size_t> parents;
        while (parents.size() < n_fk && parents.size() < t) parents.insert(rng.below(t));
        for (auto p : parents) {
            auto& parent = db.schema.tables[p];
            std::string name = parent.name + "_id";
            def.columns.push_back({name, "integer", std::nullopt, std::nullopt, true, {}});
            db.schema.foreign_keys.push_back({{def.name, name}, {parent.name, "id"}});
        }
        std::set<std::string> used;
        for (auto& c : def.columns) used.insert(c.name);
        while (def.columns.size() < width) {
            auto name = rng.pick(vocabulary) + "_" + rng.pick(vocabulary);
            if (!used.insert(name).second) continue;
            def.columns.push_back({name, rng.chance(0.5) ? "text" : "float", "measured " + name, std::nullopt,
                                   rng.chance(0.2), {}});
        }
        for (auto& c : def.columns) {
            for (size_t v = 0; v < values_per_column; ++v) {
                auto value = c.sql_type == "text" ? rng.pick(vocabulary) : std::to_string(rng.below(100000));
                db.cells.push_back({{def.name, c.name}, value});
            }
        }
        db.schema.tables.push_back(std::move(def));
    }
    return db;
}

DatabaseSchema generate_random_schema(size_t max_columns, uint64_t seed) {
    if (max_columns < 1) throw Error(ErrorCode::InvalidArgument, "random schema needs at least one column");
    Rng rng(seed);
    DatabaseSchema s;
    s.db_id = "random_" + std::to_string(seed);
    const size_t n_tables = rng.between(1, std::max<size_t>(1, std::min<size_t>(max_columns / 2, 12)));
    size_t budget = max_columns;
    for (size_t t = 0; t < n_tables && budget > 0; ++t) {
        const size_t tables_left = n_tables - t;
        const size_t cap = std::max<size_t>(1, budget - (tables_left - 1));
        const size_t width = std::min(cap, rng.between(1, std::max<size_t>(1, 2 * budget / tables_left)));
        budget -= width;
        TableDef def;
        def.name = "t" + std::to_string(t);
        for (size_t c = 0; c < width; ++c) {
            def.columns.push_back({"c" + std::to_string(c), rng.chance(0.5) ? "integer" : "text", std::nullopt,
                                   std::nullopt, false, {}});
        }
        if (rng.chance(0.8)) def.primary_key = {"c0"};
        if (width > 2 && rng.chance(0.15)) def.primary_key = {"c0", "c1"};
        s.tables.push_back(std::move(def));
    }
    // Foreign keys from a random column to another table's first primary-key member.
    const size_t n_fk = rng.below(s.tables.size() + 2);
    for (size_t i = 0; i < n_fk && s.tables.size() > 1; ++i) {
        auto& a = s.tables[rng.below(s.tables.size())];
        auto& b = s.tables[rng.below(s.tables.size())];
        if (&a == &b || b.primary_key.empty()) continue;
        ColumnRef src{a.name, a.columns[rng.below(a.columns.size())].name};
        ColumnRef dst{b.name, b.primary_key.front()};
        bool dup = false;
        for (auto& fk : s.foreign_keys) dup |= fk.source == src;
        if (!dup) s.foreign_keys.push_back({src, dst});
    }
    return s;
}

}  // namespace schemasift
