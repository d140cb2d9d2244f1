#include "schemasift/column_encoder.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "prompt_template.h"
#include "schemasift/binary_io.h"
#include "schemasift/error.h"
#include "schemasift/text.h"

namespace schemasift {

ColumnContext assemble_context(const DatabaseSchema& schema, const ColumnRef& column, std::string_view query,
                               const ValueIndex* index, const ContextOptions& options) {
    auto* table = schema.find_table(column.table);
    auto* col = table ? table->find_column(column.column) : nullptr;
    if (!col) throw Error(ErrorCode::UnknownColumn, column.display() + " is not in schema " + schema.db_id);

    ColumnContext ctx;
    ctx.table_name = table->name;
    ctx.column_name = col->name;
    ctx.table_description = table->description.value_or("");
    ctx.column_description = col->description.value_or("");
    ctx.data_type = col->sql_type;
    ctx.missingness_flag = col->nullable_flag;
    ctx.value_description = col->value_description.value_or("");
    if (index && index->has_column(column)) {
        for (auto& hit : index->retrieve(query, column, options.sample_k)) ctx.sample_values.push_back(hit.value);
    }
    if (ctx.sample_values.empty() && !col->sample_values.empty()) ctx.sample_values.push_back(col->sample_values.front());
    return fit_context(std::move(ctx), query, options.max_prompt_tokens);
}

std::string serialize_context(const ColumnContext& c) {
    std::string out;
    out += "Table name: " + c.table_name + "\n";
    out += "Column name: " + c.column_name + "\n";
    out += "Table description: " + c.table_description + "\n";
    out += "Column description: " + c.column_description + "\n";
    out += "Data type: " + c.data_type + "\n";
    out += "Sample values: " + nlohmann::json(c.sample_values).dump() + "\n";
    out += std::string("Missingness flag: ") + (c.missingness_flag ? "true" : "false") + "\n";
    out += "Value description: " + c.value_description;
    return out;
}

std::string_view prompt_template() { return resources::kPromptTemplateV1; }

std::string_view prompt_template_version() { return "column-relevance-v1"; }

std::string render_prompt(std::string_view query, const ColumnContext& context) {
    static constexpr std::string_view kQuery = "{q}";
    static constexpr std::string_view kDocument = "{context(c)}";
    auto tpl = prompt_template();
    auto qpos = tpl.find(kQuery);
    auto dpos = tpl.find(kDocument);
    std::string out;
    out.reserve(tpl.size() + query.size() + 512);
    out += tpl.substr(0, qpos);
    out += query;
    out += tpl.substr(qpos + kQuery.size(), dpos - qpos - kQuery.size());
    out += serialize_context(context);
    out += tpl.substr(dpos + kDocument.size());
    return out;
}

size_t count_prompt_tokens(std::string_view text) {
    size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

namespace {

/// Drops trailing words until `text` loses at least `excess` tokens or is empty.
void cut_words(std::string& text, size_t& excess) {
    while (excess > 0 && !text.empty()) {
        auto pos = text.find_last_of(" \n\t");
        if (pos == std::string::npos) {
            text.clear();
        } else {
            text.resize(pos);
            while (!text.empty() && (text.back() == ' ' || text.back() == '\n' || text.back() == '\t')) text.pop_back();
        }
        --excess;
    }
}

}  // namespace

ColumnContext fit_context(ColumnContext context, std::string_view query, size_t max_prompt_tokens) {
    auto over = [&] {
        auto n = count_prompt_tokens(render_prompt(query, context));
        return n > max_prompt_tokens ? n - max_prompt_tokens : size_t{0};
    };
    size_t excess = over();
    while (excess > 0 && !context.sample_values.empty()) {
        context.sample_values.pop_back();
        excess = over();
    }
    for (auto* field : {&context.value_description, &context.column_description, &context.table_description}) {
        if (excess == 0) break;
        cut_words(*field, excess);
        excess = over();
    }
    return context;
}

void check_embedding(const EmbeddingVector& v, size_t expected_dim) {
    if (v.dim() != expected_dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "embedding has " + std::to_string(v.dim()) + " dims, expected " + std::to_string(expected_dim));
    }
    for (double x : v.values) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NumericFailure, "non-finite embedding entry");
    }
}

EmbeddingVector embed(EmbeddingProvider& provider, std::string_view query, const ColumnContext& context) {
    EmbedItem item{std::string(query), context};
    auto out = provider.embed_batch(std::span<const EmbedItem>(&item, 1));
    if (out.size() != 1) throw Error(ErrorCode::MalformedResponse, "provider returned wrong batch size");
    check_embedding(out.front(), provider.dim());
    return std::move(out.front());
}

namespace {

constexpr size_t kOverlapDims = 8;
constexpr double kBias = 0.05;
constexpr double kOverlapWeight = 1.0;

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",   "the",  "of",   "in",    "on",   "at",    "to",   "for",  "by",   "with", "and",
        "or",   "is",   "are",  "was",  "were",  "be",   "what",  "which", "who", "whom", "how",  "many",
        "much", "list", "show", "give", "find",  "all",  "each",  "every", "that", "this", "those", "these",
        "from", "as",   "it",   "its",  "their", "there", "do",   "does", "did",  "me",   "number", "count",
    };
    return words;
}

std::set<std::string> content_terms(std::string_view text) {
    std::set<std::string> out;
    for (auto& t : tokenize(text)) {
        if (!stopwords().count(t)) out.insert(t);
    }
    return out;
}

size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
    size_t n = 0;
    for (auto& t : a) n += b.count(t);
    return n;
}

void hash_field(std::vector<double>& hashed, uint64_t field_salt, std::string_view text) {
    const size_t buckets = hashed.size();
    auto tokens = tokenize(text);
    auto put = [&](const std::string& term) {
        uint64_t h = fnv1a64(term);
        hashed[mix64(h) % buckets] += (mix64(h ^ 0x5bd1e995ULL) & 1) ? 1.0 : -1.0;
        uint64_t hf = fnv1a64(term, field_salt);
        hashed[mix64(hf) % buckets] += (mix64(hf ^ 0x5bd1e995ULL) & 1) ? 1.0 : -1.0;
    };
    for (size_t i = 0; i < tokens.size(); ++i) {
        put(tokens[i]);
        if (i + 1 < tokens.size()) put(tokens[i] + " " + tokens[i + 1]);
    }
}

}  // namespace

EmbeddingVector hash_embed(std::string_view query, const ColumnContext& c, size_t dim) {
    if (dim < kOverlapDims) throw Error(ErrorCode::InvalidArgument, "hash embedding needs dim >= 8");
    std::vector<double> hashed(dim - kOverlapDims, 0.0);
    uint64_t salt = 1;
    hash_field(hashed, salt++, query);
    for (auto* field : {&c.table_name, &c.column_name, &c.table_description, &c.column_description, &c.data_type}) {
        hash_field(hashed, salt++, *field);
    }
    for (auto& v : c.sample_values) hash_field(hashed, salt, v);
    ++salt;
    hash_field(hashed, salt++, c.missingness_flag ? "nullable" : "");
    hash_field(hashed, salt++, c.value_description);

    double hashed_norm = 0;
    for (double x : hashed) hashed_norm += x * x;
    hashed_norm = std::sqrt(hashed_norm);

    EmbeddingVector out;
    out.values.assign(dim, 0.0);
    if (hashed_norm == 0) {
        out.values[0] = 1.0;
        return out;
    }

    auto q = content_terms(query);
    std::string samples;
    for (auto& v : c.sample_values) samples += v + " ";
    auto name = content_terms(c.column_name);
    auto table = content_terms(c.table_name);
    auto desc = content_terms(c.column_description + " " + c.value_description);
    auto values = content_terms(samples);
    auto tdesc = content_terms(c.table_description);
    std::set<std::string> all = name;
    for (auto* s : {&table, &desc, &values, &tdesc}) all.insert(s->begin(), s->end());

    const double qn = q.empty() ? 1.0 : static_cast<double>(q.size());
    auto frac_of = [](size_t hits, const std::set<std::string>& of) {
        return of.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(of.size());
    };
    double o[kOverlapDims] = {
        kBias,
        frac_of(overlap(q, name), name),
        frac_of(overlap(q, table), table),
        overlap(q, desc) / qn,
        overlap(q, values) / qn,
        overlap(q, tdesc) / qn,
        (overlap(q, name) + overlap(q, values)) > 0 ? 1.0 : 0.0,
        overlap(q, all) / qn,
    };
    for (size_t i = 0; i < kOverlapDims; ++i) out.values[i] = i == 0 ? o[i] : kOverlapWeight * o[i];
    for (size_t i = 0; i < hashed.size(); ++i) out.values[kOverlapDims + i] = hashed[i] / hashed_norm;
    double norm = 0;
    for (double x : out.values) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : out.values) x /= norm;
    return out;
}

HashEmbedder::HashEmbedder(size_t dim) : dim_(dim) {
    if (dim < kOverlapDims) throw Error(ErrorCode::InvalidArgument, "hash embedding needs dim >= 8");
}

std::string HashEmbedder::version() const { return "hash-v1-d" + std::to_string(dim_); }

std::vector<EmbeddingVector> HashEmbedder::embed_batch(std::span<const EmbedItem> items) {
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (auto& item : items) out.push_back(hash_embed(item.query, item.context, dim_));
    return out;
}

CachingProvider::CachingProvider(std::shared_ptr<EmbeddingProvider> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::vector<EmbeddingVector> CachingProvider::embed_batch(std::span<const EmbedItem> items) {
    std::vector<EmbeddingVector> out(items.size());
    std::vector<std::filesystem::path> paths(items.size());
    std::vector<EmbedItem> missing;
    std::vector<size_t> missing_pos;
    const auto version = inner_->version();
    for (size_t i = 0; i < items.size(); ++i) {
        auto prompt = render_prompt(items[i].query, items[i].context);
        char name[40];
        std::snprintf(name, sizeof(name), "%016llx%016llx",
                      static_cast<unsigned long long>(fnv1a64(prompt, fnv1a64(version))),
                      static_cast<unsigned long long>(fnv1a64(prompt, 0x9e3779b9ULL)));
        paths[i] = dir_ / (std::string(name) + ".emb");
        bool loaded = false;
        if (std::filesystem::exists(paths[i])) {
            try {
                auto bytes = read_file_bytes(paths[i]);
                ByteReader r(bytes);
                auto n = r.u32();
                if (n == inner_->dim()) {
                    EmbeddingVector v;
                    v.values.resize(n);
                    for (auto& x : v.values) x = r.f64();
                    out[i] = std::move(v);
                    loaded = r.done();
                }
            } catch (const Error&) {
                loaded = false;
            }
        }
        if (loaded) {
            ++hits_;
        } else {
            missing.push_back(items[i]);
            missing_pos.push_back(i);
        }
    }
    if (!missing.empty()) {
        auto fresh = inner_->embed_batch(missing);
        for (size_t j = 0; j < fresh.size(); ++j) {
            ByteWriter w;
            w.u32(static_cast<uint32_t>(fresh[j].dim()));
            for (double x : fresh[j].values) w.f64(x);
            write_file_atomic(paths[missing_pos[j]], w.data());
            out[missing_pos[j]] = std::move(fresh[j]);
        }
    }
    return out;
}

}  // namespace schemasift
