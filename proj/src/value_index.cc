#include "schemasift/value_index.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "schemasift/binary_io.h"
#include "schemasift/error.h"
#include "schemasift/text.h"

namespace schemasift {

ValueIndex::ColumnIndex& ValueIndex::ensure_column(const ColumnRef& column) {
    auto key = column.key();
    auto it = column_pos_.find(key);
    if (it != column_pos_.end()) return columns_[it->second];
    column_pos_.emplace(key, columns_.size());
    columns_.push_back(ColumnIndex{column, {}, {}, {}, 0.0});
    return columns_.back();
}

void ValueIndex::add_column(const ColumnRef& column) { ensure_column(column); }

void ValueIndex::add(const ColumnRef& column, std::string_view value) {
    auto& col = ensure_column(column);
    auto& ids = value_ids_[column.key()];
    if (ids.count(std::string(value))) return;
    auto id = static_cast<uint32_t>(col.values.size());
    ids.emplace(std::string(value), id);
    col.values.emplace_back(value);
    auto tokens = tokenize(value.substr(0, std::min(value.size(), params_.max_value_bytes)));
    col.doc_lengths.push_back(static_cast<uint32_t>(tokens.size()));
    std::map<std::string, uint32_t> tf;
    for (auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) col.postings[term].push_back({id, count});
}

void ValueIndex::finalize() {
    for (auto& col : columns_) {
        double total = 0;
        for (auto len : col.doc_lengths) total += len;
        col.avgdl = col.values.empty() ? 0.0 : total / static_cast<double>(col.values.size());
    }
}

bool ValueIndex::has_column(const ColumnRef& column) const { return column_pos_.count(column.key()) > 0; }

const ValueIndex::ColumnIndex* ValueIndex::column_index(const ColumnRef& column) const {
    auto it = column_pos_.find(column.key());
    return it == column_pos_.end() ? nullptr : &columns_[it->second];
}

std::vector<ValueHit> ValueIndex::retrieve(std::string_view query, const ColumnRef& column, size_t k) const {
    auto* col = column_index(column);
    if (!col) throw Error(ErrorCode::UnknownColumn, "column " + column.display() + " is not indexed");
    if (k == 0 || col->values.empty()) return {};
    auto terms = tokenize(query);
    std::set<std::string> unique_terms(terms.begin(), terms.end());
    const double n_docs = static_cast<double>(col->values.size());
    const double avgdl = col->avgdl > 0 ? col->avgdl : 1.0;
    std::vector<double> scores(col->values.size(), 0.0);
    for (auto& term : unique_terms) {
        auto it = col->postings.find(term);
        if (it == col->postings.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::max(0.0, std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5)));
        for (auto& p : it->second) {
            const double tf = p.term_frequency;
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * col->doc_lengths[p.value_id] / avgdl);
            scores[p.value_id] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    std::vector<ValueHit> hits;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > 0) hits.push_back({col->values[i], scores[i]});
    }
    std::sort(hits.begin(), hits.end(), [](const ValueHit& a, const ValueHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.value < b.value;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

bool operator==(const ValueIndex& a, const ValueIndex& b) {
    if (!(a.params_ == b.params_) || a.columns_.size() != b.columns_.size()) return false;
    for (size_t i = 0; i < a.columns_.size(); ++i) {
        auto& x = a.columns_[i];
        auto& y = b.columns_[i];
        if (!(x.column == y.column) || x.values != y.values || x.doc_lengths != y.doc_lengths || x.avgdl != y.avgdl ||
            x.postings.size() != y.postings.size()) {
            return false;
        }
        for (auto& [term, list] : x.postings) {
            auto it = y.postings.find(term);
            if (it == y.postings.end() || it->second.size() != list.size()) return false;
            for (size_t j = 0; j < list.size(); ++j) {
                if (list[j].value_id != it->second[j].value_id ||
                    list[j].term_frequency != it->second[j].term_frequency) {
                    return false;
                }
            }
        }
    }
    return true;
}

ValueIndex build_value_index(const DatabaseSchema& schema, const std::vector<std::pair<ColumnRef, std::string>>& cells,
                             Bm25Params params) {
    ValueIndex index(params);
    for (auto& c : schema.all_columns()) index.add_column(c);
    for (auto& [ref, value] : cells) {
        auto canonical = schema.canonical(ref);
        if (!canonical) throw Error(ErrorCode::UnknownColumn, ref.display() + " is not in schema " + schema.db_id);
        index.add(*canonical, value);
    }
    index.finalize();
    return index;
}

namespace {

std::string unescape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char n = s[i + 1];
            if (n == 't' || n == 'n' || n == '\\') {
                out += n == 't' ? '\t' : n == 'n' ? '\n' : '\\';
                ++i;
                continue;
            }
        }
        out += s[i];
    }
    return out;
}

}  // namespace

std::vector<std::pair<ColumnRef, std::string>> parse_value_dump(std::string_view text, const DatabaseSchema& schema) {
    std::vector<std::pair<ColumnRef, std::string>> cells;
    size_t line_no = 0;
    for (auto& raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos) {
            throw Error(ErrorCode::Parse, "value dump line " + std::to_string(line_no) + ": expected table<TAB>column<TAB>value");
        }
        ColumnRef ref{std::string(line.substr(0, t1)), std::string(line.substr(t1 + 1, t2 - t1 - 1))};
        auto canonical = schema.canonical(ref);
        if (!canonical) {
            throw Error(ErrorCode::UnknownColumn,
                        "value dump line " + std::to_string(line_no) + ": " + ref.display() + " is not in the schema");
        }
        cells.emplace_back(*canonical, unescape_field(line.substr(t2 + 1)));
    }
    return cells;
}

namespace {
constexpr uint32_t kIndexVersion = 1;
constexpr std::string_view kIndexMagic = "SSVALIDX";
}  // namespace

std::string serialize_index(const ValueIndex& index) {
    ByteWriter w;
    w.f64(index.params().k1);
    w.f64(index.params().b);
    w.u64(index.params().max_value_bytes);
    w.u32(static_cast<uint32_t>(index.columns().size()));
    for (auto& col : index.columns()) {
        w.str(col.column.table);
        w.str(col.column.column);
        w.u32(static_cast<uint32_t>(col.values.size()));
        for (auto& v : col.values) w.str(v);
    }
    Container c;
    c.magic = make_magic(kIndexMagic);
    c.version = kIndexVersion;
    c.sections["VIDX"] = w.take();
    return c.encode();
}

ValueIndex load_index(std::string_view bytes) {
    auto c = Container::decode(bytes, kIndexMagic, kIndexVersion);
    auto it = c.sections.find("VIDX");
    if (it == c.sections.end()) throw Error(ErrorCode::Corruption, "missing section VIDX");
    ByteReader r(it->second);
    Bm25Params params;
    params.k1 = r.f64();
    params.b = r.f64();
    params.max_value_bytes = r.u64();
    ValueIndex index(params);
    auto ncols = r.u32();
    for (uint32_t i = 0; i < ncols; ++i) {
        ColumnRef ref;
        ref.table = r.str();
        ref.column = r.str();
        index.add_column(ref);
        auto n = r.u32();
        for (uint32_t j = 0; j < n; ++j) index.add(ref, r.str());
    }
    if (!r.done()) throw Error(ErrorCode::Corruption, "trailing bytes in index section");
    index.finalize();
    return index;
}

}  // namespace schemasift
