#pragma once

// HTTP transport for the remote advisor. Kept out of hypothesis.hpp so only
// translation units that actually talk HTTP pay for the header; everything
// else interacts with the advisor through the RemoteTransport function type.

#include <httplib.h>

#include "knobtune/tuner.hpp"

namespace knobtune {

/// Splits "http://host:port/path" into client base and request path.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw DomainError("advisor URL lacks a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// One POST per advice; nullopt on transport failure or non-200 status so the
/// session falls back to the stub policy.
inline RemoteTransport make_http_transport(const std::string& url, int timeout_ms = 30000) {
    return [url, timeout_ms](const json& body) -> std::optional<json> {
        try {
            auto [base, path] = split_url(url);
            httplib::Client client(base);
            client.set_connection_timeout(0, timeout_ms * 1000);
            client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
            auto res = client.Post(path, body.dump(), "application/json");
            if (!res || res->status != 200) return std::nullopt;
            return json::parse(res->body);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };
}

}  // namespace knobtune
