#include <condition_variable>
#include <cstdlib>
#include <mutex>

#include <httplib.h>
#include <json.hpp>

#include "overlay/vlm_client.hpp"

namespace overlay {

struct HttpVlmClient::Impl {
    EndpointConfig config;
    std::string token;
    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
};

HttpVlmClient::HttpVlmClient(EndpointConfig config)
    : VlmClient(config.retry), impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
    if (!impl_->config.auth_env.empty()) {
        if (const char* tok = std::getenv(impl_->config.auth_env.c_str()))
            impl_->token = tok;
    }
}

HttpVlmClient::~HttpVlmClient() = default;

VlmResponse HttpVlmClient::attempt(const VlmRequest& request) {
    // cap concurrent requests to the endpoint
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait(lock,
                   [&] { return impl_->in_flight < impl_->config.max_in_flight; });
    ++impl_->in_flight;
    lock.unlock();
    struct Release {
        Impl* impl;
        ~Release() {
            std::lock_guard g(impl->mu);
            --impl->in_flight;
            impl->cv.notify_one();
        }
    } release{impl_.get()};

    httplib::Client cli(impl_->config.base_url);
    cli.set_connection_timeout(impl_->config.timeout_ms / 1000,
                               (impl_->config.timeout_ms % 1000) * 1000);
    cli.set_read_timeout(impl_->config.timeout_ms / 1000,
                         (impl_->config.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!impl_->token.empty())
        headers.emplace("Authorization", "Bearer " + impl_->token);

    nlohmann::json body;
    body["image"] = base64_encode(request.image);
    body["format"] = request.image_format;
    body["prompt"] = request.prompt;
    body["max_output_tokens"] = request.max_output_tokens;
    body["temperature"] = request.temperature;

    auto res = cli.Post(impl_->config.path, headers, body.dump(), "application/json");
    if (!res)
        throw TransportError("endpoint unreachable: " +
                             httplib::to_string(res.error()));
    if (res->status == 429) throw RateLimitError("endpoint rate limit (429)");
    if (res->status >= 500)
        throw TransportError("endpoint error " + std::to_string(res->status));
    if (res->status != 200)
        throw ProtocolError("unexpected status " + std::to_string(res->status),
                            res->body);

    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError("reply is not JSON", res->body);
    }
    if (!reply.contains("text") || !reply["text"].is_string())
        throw ProtocolError("reply missing \"text\" field", res->body);

    VlmResponse out;
    out.text = reply["text"].get<std::string>();
    if (reply.contains("truncated")) out.truncated = reply["truncated"].get<bool>();
    return out;
}

}  // namespace overlay
