#include "overlay/vlm_client.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace overlay {

VlmResponse VlmClient::complete(const VlmRequest& request) {
    if (request.prompt.empty())
        throw ContractError("complete: prompt must not be empty");
    if (request.temperature < 0)
        throw ContractError("complete: temperature must be >= 0");
    request_count_.fetch_add(1);
    int delay_ms = policy_.base_delay_ms;
    for (int att = 0; ; ++att) {
        attempt_count_.fetch_add(1);
        try {
            const auto start = std::chrono::steady_clock::now();
            VlmResponse resp = attempt(request);
            resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            if (observer_) observer_(request, resp);
            return resp;
        } catch (const TransportError&) {
            if (att >= policy_.max_retries) throw;
            if (delay_ms > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = std::min(policy_.max_delay_ms, std::max(1, delay_ms) * 2);
        }
    }
}

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

namespace {

ScriptRule parse_rule(const nlohmann::json& j, const std::string& where) {
    ScriptRule r;
    if (j.contains("prompt_contains"))
        r.prompt_contains = j["prompt_contains"].get<std::string>();
    if (j.contains("image_id")) r.image_id = j["image_id"].get<std::string>();
    if (j.contains("response")) r.response = j["response"].get<std::string>();
    if (j.contains("error")) {
        const auto e = j["error"].get<std::string>();
        if (e != "timeout" && e != "rate_limit" && e != "malformed")
            throw SchemaError(where + ": unknown error directive \"" + e + "\"");
        r.error = e;
    }
    if (!r.response && !r.error)
        throw SchemaError(where + ": rule needs a response or an error directive");
    if (r.response && r.error)
        throw SchemaError(where + ": response and error are mutually exclusive");
    return r;
}

bool matches(const ScriptRule& r, const VlmRequest& req) {
    if (r.prompt_contains &&
        req.prompt.find(*r.prompt_contains) == std::string::npos)
        return false;
    if (r.image_id && req.request_id != *r.image_id) return false;
    return true;
}

[[noreturn]] void raise_directive(const std::string& error) {
    if (error == "timeout") throw TransportError("scripted timeout");
    if (error == "rate_limit") throw RateLimitError("scripted rate limit");
    throw ProtocolError("scripted malformed reply", "<scripted garbage>");
}

}  // namespace

ScriptedBehavior load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("invalid script: ") + e.what());
    }
    ScriptedBehavior b;
    if (j.contains("rules")) {
        int idx = 0;
        for (const auto& rj : j["rules"]) {
            b.rules.push_back(parse_rule(rj, "rule " + std::to_string(idx)));
            ++idx;
        }
    }
    if (j.contains("default")) {
        b.fallback = parse_rule(j["default"], "default");
    } else {
        b.fallback.error = "malformed";
    }
    return b;
}

VlmResponse MockVlmClient::attempt(const VlmRequest& request) {
    const ScriptRule* hit = &behavior_.fallback;
    for (const auto& r : behavior_.rules) {
        if (matches(r, request)) {
            hit = &r;
            break;
        }
    }
    if (hit->error) raise_directive(*hit->error);
    VlmResponse resp;
    resp.text = hit->response.value_or("");
    return resp;
}

// ---------------------------------------------------------------------------
// Base64
// ---------------------------------------------------------------------------

std::string base64_encode(const std::vector<uint8_t>& bytes) {
    static const char* tbl =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += tbl[v & 63];
    }
    const size_t rem = bytes.size() - i;
    if (rem == 1) {
        const uint32_t v = bytes[i] << 16;
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP adapter
// ---------------------------------------------------------------------------

EndpointConfig load_endpoint_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open endpoint config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("invalid endpoint config: ") + e.what());
    }
    EndpointConfig c;
    c.base_url = j.at("base_url").get<std::string>();
    if (j.contains("path")) c.path = j["path"].get<std::string>();
    c.auth_env = j.at("auth_env").get<std::string>();
    if (j.contains("timeout_ms")) c.timeout_ms = j["timeout_ms"].get<int>();
    if (j.contains("max_in_flight")) c.max_in_flight = j["max_in_flight"].get<int>();
    if (j.contains("max_retries")) c.retry.max_retries = j["max_retries"].get<int>();
    return c;
}

}  // namespace overlay
