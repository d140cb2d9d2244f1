#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "schemasift/schema.h"

namespace schemasift {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    /// Values longer than this many bytes are tokenized by prefix only; they are stored whole.
    size_t max_value_bytes = 4096;

    friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct ValueHit {
    std::string value;
    double score;
};

/// Sparse inverted file over the distinct values of each column. Each distinct value is one
/// document; statistics (N, avgdl, document frequency) are per column.
class ValueIndex {
   public:
    struct Posting {
        uint32_t value_id;
        uint32_t term_frequency;
    };

    struct ColumnIndex {
        ColumnRef column;
        std::vector<std::string> values;
        std::vector<uint32_t> doc_lengths;
        std::unordered_map<std::string, std::vector<Posting>> postings;
        double avgdl = 0.0;
    };

    ValueIndex() = default;
    explicit ValueIndex(Bm25Params params) : params_(params) {}

    /// Adds a cell value; repeated values of a column are indexed once. Unknown columns are
    /// registered on first use. Call finalize() before querying.
    void add(const ColumnRef& column, std::string_view value);
    /// Registers a column with zero values.
    void add_column(const ColumnRef& column);
    void finalize();

    /// Values scoring > 0 against the query, best first, ties by value; at most k of them.
    /// Throws UnknownColumn for a column that was never indexed.
    std::vector<ValueHit> retrieve(std::string_view query, const ColumnRef& column, size_t k) const;

    bool has_column(const ColumnRef& column) const;
    const ColumnIndex* column_index(const ColumnRef& column) const;
    const Bm25Params& params() const { return params_; }
    size_t column_count() const { return columns_.size(); }
    const std::vector<ColumnIndex>& columns() const { return columns_; }

    friend bool operator==(const ValueIndex& a, const ValueIndex& b);

   private:
    Bm25Params params_;
    std::vector<ColumnIndex> columns_;
    std::unordered_map<std::string, size_t> column_pos_;
    std::unordered_map<std::string, std::unordered_map<std::string, uint32_t>> value_ids_;

    ColumnIndex& ensure_column(const ColumnRef& column);
};

/// Builds an index over (column, value) pairs. Every schema column is registered, so a column
/// without values yields an empty but valid posting set.
ValueIndex build_value_index(const DatabaseSchema& schema,
                             const std::vector<std::pair<ColumnRef, std::string>>& cells,
                             Bm25Params params = {});

/// Tab-separated (table, column, value) rows. Rows naming columns outside the schema fail with
/// UnknownColumn.
std::vector<std::pair<ColumnRef, std::string>> parse_value_dump(std::string_view text,
                                                                const DatabaseSchema& schema);

std::string serialize_index(const ValueIndex& index);
ValueIndex load_index(std::string_view bytes);

}  // namespace schemasift
