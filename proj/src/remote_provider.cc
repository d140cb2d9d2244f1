#include "schemasift/remote_provider.h"

#include <cmath>
#include <future>

#include "httplib.h"
#include "schemasift/error.h"

namespace schemasift {

using nlohmann::json;

RemoteClient::RemoteClient(RemoteConfig config) : config_(std::move(config)) {
    const auto& ep = config_.endpoint;
    auto scheme = ep.find("://");
    auto path_start = ep.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (scheme == std::string::npos || ep.compare(0, scheme, "http") != 0) {
        throw Error(ErrorCode::InvalidArgument, "remote endpoint must be an http:// URL, got '" + ep + "'");
    }
    base_ = path_start == std::string::npos ? ep : ep.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : ep.substr(path_start);
    if (config_.max_batch == 0) throw Error(ErrorCode::InvalidArgument, "max_batch must be positive");
}

json RemoteClient::post(const json& request) const {
    httplib::Client cli(base_);
    auto secs = config_.timeout_ms / 1000;
    auto usecs = (config_.timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);
    auto body = request.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        auto res = cli.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status == 503) {
            throw Error(ErrorCode::OverCapacity, "server rejected batch with status " + std::to_string(res->status));
        }
        if (res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorCode::ProviderUnavailable, "server answered status " + std::to_string(res->status));
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
        }
    }
    throw Error(ErrorCode::ProviderUnavailable, base_ + path_ + ": " + last_error);
}

RemoteProvider::RemoteProvider(RemoteConfig config) : client_(std::move(config)) {
    if (client_.config().dim == 0) throw Error(ErrorCode::InvalidArgument, "remote provider needs a declared dim");
}

std::string RemoteProvider::version() const {
    std::lock_guard lock(mu_);
    return model_version_.value_or(client_.config().model_hint);
}

size_t RemoteProvider::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

void RemoteProvider::check_version(const json& response) {
    auto it = response.find("model_version");
    if (it == response.end() || !it->is_string()) {
        throw Error(ErrorCode::MalformedResponse, "response lacks model_version");
    }
    std::lock_guard lock(mu_);
    auto v = it->get<std::string>();
    if (!model_version_) {
        model_version_ = v;
    } else if (*model_version_ != v) {
        throw Error(ErrorCode::VersionMismatch, "model version changed from " + *model_version_ + " to " + v);
    }
}

std::vector<json> RemoteProvider::run_chunk(std::span<const EmbedItem> items, const char* mode) {
    json request;
    request["model_hint"] = client_.config().model_hint;
    request["mode"] = mode;
    request["items"] = json::array();
    for (auto& item : items) {
        request["items"].push_back({{"query", item.query}, {"document", render_prompt(item.query, item.context)}});
    }
    json response;
    try {
        {
            std::lock_guard lock(mu_);
            ++requests_;
        }
        response = client_.post(request);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::OverCapacity || items.size() < 2) throw;
        auto half = items.size() / 2;
        auto left = run_chunk(items.subspan(0, half), mode);
        auto right = run_chunk(items.subspan(half), mode);
        left.insert(left.end(), right.begin(), right.end());
        return left;
    }
    check_version(response);
    auto it = response.find("results");
    if (it == response.end() || !it->is_array() || it->size() != items.size()) {
        throw Error(ErrorCode::MalformedResponse, "results array missing or of the wrong length");
    }
    return std::vector<json>(it->begin(), it->end());
}

std::vector<json> RemoteProvider::run(std::span<const EmbedItem> items, const char* mode) {
    if (items.empty()) return {};
    const size_t batch = client_.config().max_batch;
    std::vector<std::span<const EmbedItem>> chunks;
    for (size_t i = 0; i < items.size(); i += batch) chunks.push_back(items.subspan(i, std::min(batch, items.size() - i)));
    std::vector<json> out;
    out.reserve(items.size());
    const size_t window = std::max<size_t>(1, client_.config().max_in_flight);
    for (size_t start = 0; start < chunks.size(); start += window) {
        std::vector<std::future<std::vector<json>>> inflight;
        for (size_t c = start; c < std::min(chunks.size(), start + window); ++c) {
            inflight.push_back(std::async(std::launch::async, [this, chunk = chunks[c], mode] {
                return run_chunk(chunk, mode);
            }));
        }
        for (auto& f : inflight) {
            auto part = f.get();
            out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
    }
    return out;
}

std::vector<EmbeddingVector> RemoteProvider::embed_batch(std::span<const EmbedItem> items) {
    auto results = run(items, "embed");
    std::vector<EmbeddingVector> out;
    out.reserve(results.size());
    for (auto& r : results) {
        auto it = r.find("embedding");
        if (it == r.end() || !it->is_array()) throw Error(ErrorCode::MalformedResponse, "result lacks embedding");
        EmbeddingVector v;
        v.values.reserve(it->size());
        for (auto& x : *it) {
            if (!x.is_number()) throw Error(ErrorCode::MalformedResponse, "non-numeric embedding entry");
            v.values.push_back(x.get<double>());
        }
        check_embedding(v, dim());
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<ProviderScore> RemoteProvider::score_batch(std::span<const EmbedItem> items) {
    auto results = run(items, "score");
    std::vector<ProviderScore> out;
    out.reserve(results.size());
    for (auto& r : results) {
        auto it = r.find("logit");
        if (it == r.end() || !it->is_number()) throw Error(ErrorCode::MalformedResponse, "result lacks logit");
        double logit = it->get<double>();
        if (!std::isfinite(logit)) throw Error(ErrorCode::NumericFailure, "non-finite logit");
        out.push_back({logit});
    }
    return out;
}

KeyPrediction remote_predict_keys(const RemoteClient& client, const DatabaseSchema& schema) {
    json request;
    request["model_hint"] = client.config().model_hint;
    request["mode"] = "predict_keys";
    request["schema"] = schema_to_json(schema);
    auto response = client.post(request);
    return key_prediction_from_json(response);
}

}  // namespace schemasift
