#pragma once

#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "schemasift/column_encoder.h"
#include "schemasift/fd_graph.h"

namespace schemasift {

/// Connection settings for an external scorer service.
///
/// Wire protocol, one JSON POST per batch to `endpoint`:
///   request  {"model_hint": str, "mode": "embed" | "score", "items": [{"query": str, "document": str}]}
///   response {"model_version": str, "results": [{"embedding": [num...]} | {"logit": num}]}
/// `document` is the rendered relevance prompt for the item. Status 429 or 503 means the batch was
/// too large for the server right now; the client halves it and retries each half.
/// Key prediction uses the same endpoint with
///   request  {"model_hint": str, "mode": "predict_keys", "schema": <native schema document>}
///   response {"model_version": str, "primary_keys": {...}, "foreign_keys": [...]}
struct RemoteConfig {
    std::string endpoint;  // http://host:port/path
    std::string model_hint;
    size_t dim = 0;
    size_t max_batch = 32;
    size_t max_in_flight = 4;
    int timeout_ms = 30000;
    int retries = 2;
    /// Sent as a bearer token when non-empty. Read from SCHEMASIFT_AUTH_TOKEN by the CLI.
    std::string auth_token;
};

class RemoteClient {
   public:
    explicit RemoteClient(RemoteConfig config);

    /// One request/response exchange with transport retries. Throws ProviderUnavailable,
    /// OverCapacity or MalformedResponse.
    nlohmann::json post(const nlohmann::json& request) const;

    const RemoteConfig& config() const { return config_; }

   private:
    RemoteConfig config_;
    std::string base_;
    std::string path_;
};

class RemoteProvider final : public EmbeddingProvider {
   public:
    explicit RemoteProvider(RemoteConfig config);

    size_t dim() const override { return client_.config().dim; }
    /// The model version echoed by the server, or the hint before the first call.
    std::string version() const override;
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedItem> items) override;
    size_t max_in_flight() const override { return client_.config().max_in_flight; }

    std::vector<ProviderScore> score_batch(std::span<const EmbedItem> items);

    /// Number of HTTP requests issued so far.
    size_t requests() const;

   private:
    RemoteClient client_;
    mutable std::mutex mu_;
    std::optional<std::string> model_version_;
    size_t requests_ = 0;

    std::vector<nlohmann::json> run(std::span<const EmbedItem> items, const char* mode);
    std::vector<nlohmann::json> run_chunk(std::span<const EmbedItem> items, const char* mode);
    void check_version(const nlohmann::json& response);
};

KeyPrediction remote_predict_keys(const RemoteClient& client, const DatabaseSchema& schema);

}  // namespace schemasift
