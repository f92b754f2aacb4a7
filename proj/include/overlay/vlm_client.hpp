#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "overlay/errors.hpp"

namespace overlay {

struct VlmRequest {
    std::vector<uint8_t> image;  // raw bytes, by value across the boundary
    std::string image_format = "pgm";
    std::string prompt;
    int max_output_tokens = 512;
    double temperature = 0.0;
    std::string request_id;  // the mock matches this against rule image ids
};

struct VlmResponse {
    std::string text;  // raw model output, byte-identical to the wire
    std::chrono::milliseconds latency{0};
    bool truncated = false;
};

struct RetryPolicy {
    int max_retries = 2;       // total attempts <= 1 + max_retries
    int base_delay_ms = 250;   // doubled per retry
    int max_delay_ms = 4000;
};

/// Observer for audit trails: called once per completed exchange.
using ExchangeObserver =
    std::function<void(const VlmRequest&, const VlmResponse&)>;

/// Uniform client boundary. complete() validates the request, then retries
/// transient transport failures (timeouts, rate limits) with exponential
/// backoff. Protocol errors and well-formed output are never retried.
class VlmClient {
public:
    virtual ~VlmClient() = default;

    VlmResponse complete(const VlmRequest& request);

    void set_observer(ExchangeObserver obs) { observer_ = std::move(obs); }
    long request_count() const { return request_count_.load(); }
    long attempt_count() const { return attempt_count_.load(); }

protected:
    explicit VlmClient(RetryPolicy policy) : policy_(policy) {}

    /// One transport attempt. Throws TransportError / RateLimitError for
    /// transient failures, ProtocolError for malformed replies.
    virtual VlmResponse attempt(const VlmRequest& request) = 0;

private:
    RetryPolicy policy_;
    ExchangeObserver observer_;
    std::atomic<long> request_count_{0};
    std::atomic<long> attempt_count_{0};
};

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

struct ScriptRule {
    std::optional<std::string> prompt_contains;  // substring match
    std::optional<std::string> image_id;         // exact match on request_id
    std::optional<std::string> response;
    std::optional<std::string> error;  // "timeout" | "rate_limit" | "malformed"
};

/// First matching rule wins; a rule with no matchers matches everything.
struct ScriptedBehavior {
    std::vector<ScriptRule> rules;
    ScriptRule fallback;  // applied when no rule matches
};

ScriptedBehavior load_script(const std::filesystem::path& path);

class MockVlmClient : public VlmClient {
public:
    explicit MockVlmClient(ScriptedBehavior behavior,
                           RetryPolicy policy = {.max_retries = 2,
                                                 .base_delay_ms = 0,
                                                 .max_delay_ms = 0})
        : VlmClient(policy), behavior_(std::move(behavior)) {}

protected:
    VlmResponse attempt(const VlmRequest& request) override;

private:
    ScriptedBehavior behavior_;
};

// ---------------------------------------------------------------------------
// Real HTTP adapter
// ---------------------------------------------------------------------------

/// Wire schema v1: POST {base_url}{path} with a JSON body
///   {"image": <base64>, "format": <tag>, "prompt": <text>,
///    "max_output_tokens": <int>, "temperature": <real>}
/// and an Authorization: Bearer header read from the environment variable
/// named by auth_env. The reply must be JSON with a "text" string field.
struct EndpointConfig {
    std::string base_url;
    std::string path = "/v1/complete";
    std::string auth_env;  // name of the env var holding the token
    int timeout_ms = 30000;
    int max_in_flight = 4;
    RetryPolicy retry;
};

EndpointConfig load_endpoint_config(const std::filesystem::path& path);

class HttpVlmClient : public VlmClient {
public:
    explicit HttpVlmClient(EndpointConfig config);
    ~HttpVlmClient() override;

protected:
    VlmResponse attempt(const VlmRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string base64_encode(const std::vector<uint8_t>& bytes);

}  // namespace overlay
