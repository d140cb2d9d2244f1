#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "schemasift/schema.h"

namespace schemasift {

struct SyntheticDatabase {
    DatabaseSchema schema;
    std::vector<std::pair<ColumnRef, std::string>> cells;
};

struct PlantedOptions {
    size_t databases = 5;
    size_t tables = 20;
    size_t columns_per_table = 10;
    size_t questions = 50;  // spread round-robin over the databases
    size_t values_per_column = 4;
    uint64_t seed = 1;
};

/// A question with its gold SQL over one planted database.
struct PlantedQuestion {
    std::string db_id;
    std::string question;
    std::string sql;
};

struct PlantedCorpus {
    std::vector<SyntheticDatabase> databases;
    std::vector<PlantedQuestion> questions;
};

/// Schemas whose tables form a random tree of foreign keys. Content columns carry two-word
/// names drawn from a shared pseudo-word vocabulary; key columns carry opaque codes that never
/// occur in any question. Each question names two to four content columns spread over one to
/// three joined tables, and may quote a stored value; its SQL selects them through the join path,
/// so the gold labels include join keys the question never mentions.
PlantedCorpus generate_planted_corpus(const PlantedOptions& options);

/// One very wide database: `tables` tables sharing `total_columns` columns as evenly as possible,
/// each with an id primary key and foreign keys to earlier tables. A few values per column.
SyntheticDatabase generate_wide_database(size_t tables, size_t total_columns, uint64_t seed,
                                         size_t values_per_column = 2);

/// A small random schema (no values) for graph-level property tests.
DatabaseSchema generate_random_schema(size_t max_columns, uint64_t seed);

}  // namespace schemasift
