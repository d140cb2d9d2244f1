#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "schemasift/schema.h"
#include "schemasift/value_index.h"

namespace schemasift {

/// The per-column document shown to the relevance model, in rendering order.
struct ColumnContext {
    std::string table_name;
    std::string column_name;
    std::string table_description;
    std::string column_description;
    std::string data_type;
    std::vector<std::string> sample_values;
    bool missingness_flag = false;
    std::string value_description;

    friend bool operator==(const ColumnContext&, const ColumnContext&) = default;
};

struct ContextOptions {
    /// Query-matched values placed in the sample field.
    size_t sample_k = 2;
    /// Budget for the rendered prompt, counted in word tokens. Sample values are dropped first,
    /// then descriptions are cut from the end.
    size_t max_prompt_tokens = 4096;
};

/// Missing metadata becomes an empty field, never invented text. Samples come from BM25
/// retrieval when `index` is given and finds a match, else the column's first stored sample.
ColumnContext assemble_context(const DatabaseSchema& schema, const ColumnRef& column, std::string_view query,
                               const ValueIndex* index, const ContextOptions& options = {});

/// "key: value" lines in field order. Sample values render as a JSON string array.
std::string serialize_context(const ColumnContext& context);

std::string_view prompt_template();
std::string_view prompt_template_version();

/// Fills the relevance prompt template with the question and the serialized context.
std::string render_prompt(std::string_view query, const ColumnContext& context);

size_t count_prompt_tokens(std::string_view text);

/// Applies the prompt-length budget; returns the context unchanged when it already fits.
ColumnContext fit_context(ColumnContext context, std::string_view query, size_t max_prompt_tokens);

struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Unnormalized "yes" logit from a remote scorer.
struct ProviderScore {
    double logit = 0.0;
};

struct EmbedItem {
    std::string query;
    ColumnContext context;
};

/// Anything that turns (question, column context) pairs into fixed-width vectors.
class EmbeddingProvider {
   public:
    virtual ~EmbeddingProvider() = default;

    virtual size_t dim() const = 0;
    virtual std::string version() const = 0;
    /// Order-preserving. Implementations validate dimension and finiteness.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const EmbedItem> items) = 0;
    /// Concurrent batches the engine may issue.
    virtual size_t max_in_flight() const { return 1; }
};

/// Checks an embedding against the provider contract; throws DimensionMismatch/NumericFailure.
void check_embedding(const EmbeddingVector& v, size_t expected_dim);

EmbeddingVector embed(EmbeddingProvider& provider, std::string_view query, const ColumnContext& context);

/// Deterministic offline stand-in for the LLM encoder.
///
/// Layout: the first 8 dimensions hold query/column overlap statistics (how much of the
/// column's name, table name, descriptions and sample values the question mentions) plus a
/// small constant; the rest are feature-hashed unigrams and bigrams of the question and every
/// context field. Each token lands twice: once with a field-independent sign, so text shared by
/// the question and the column raises their inner product, and once with a field-salted sign.
/// The result is L2-normalized. Input with no tokens at all maps to the first basis vector.
EmbeddingVector hash_embed(std::string_view query, const ColumnContext& context, size_t dim);

class HashEmbedder final : public EmbeddingProvider {
   public:
    explicit HashEmbedder(size_t dim);

    size_t dim() const override { return dim_; }
    std::string version() const override;
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedItem> items) override;
    size_t max_in_flight() const override { return 64; }

   private:
    size_t dim_;
};

/// On-disk cache in front of another provider, keyed by a content hash of the provider version
/// and the rendered prompt.
class CachingProvider final : public EmbeddingProvider {
   public:
    CachingProvider(std::shared_ptr<EmbeddingProvider> inner, std::filesystem::path dir);

    size_t dim() const override { return inner_->dim(); }
    std::string version() const override { return inner_->version(); }
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedItem> items) override;
    size_t max_in_flight() const override { return inner_->max_in_flight(); }

    size_t hits() const { return hits_; }

   private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::filesystem::path dir_;
    std::atomic<size_t> hits_{0};
};

}  // namespace schemasift
