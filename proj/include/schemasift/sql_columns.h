#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "schemasift/schema.h"

namespace schemasift {

/// Every schema column referenced by a single SELECT statement, with table aliases and
/// unqualified names resolved against the statement's FROM scopes (including correlated
/// subqueries). Identifiers inside string literals and comments never count.
///
/// Supported: joins (ON / USING), aggregates, CASE, CAST, IN / EXISTS / scalar subqueries,
/// derived tables, UNION / INTERSECT / EXCEPT, ORDER BY / LIMIT. `SELECT *` and `t.*` expand to
/// the columns of the base tables they cover; `COUNT(*)` references nothing.
///
/// Rejected with UnsupportedSyntax: CTEs (WITH), window functions (OVER), NATURAL joins and
/// anything else outside that subset, since silently under-extracting would corrupt labels.
/// A double-quoted token that resolves to no column is read as a string literal (SQLite rules).
ColumnSet extract_gold_columns(std::string_view sql, const DatabaseSchema& schema);

/// Positives are the union of the columns of every gold statement; negatives are the rest of
/// the schema.
LabeledExample build_labeled_example(std::string question, const std::vector<std::string>& gold_sqls,
                                     const DatabaseSchema& schema);

}  // namespace schemasift
