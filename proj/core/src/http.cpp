#include "http.hpp"

#include <thread>

#include <httplib.h>

#include "flowmine/error.hpp"

namespace flowmine::detail {

HttpTarget parse_http_url(const std::string& url) {
    const std::string scheme = "http://";
    if (!url.starts_with(scheme)) throw ConfigError("endpoint must be an http:// URL: " + url);
    std::string rest = url.substr(scheme.size());
    HttpTarget t;
    auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    if (slash != std::string::npos) t.path = rest.substr(slash);
    auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        t.host = authority.substr(0, colon);
        try {
            t.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad port in endpoint: " + url);
        }
    } else {
        t.host = authority;
    }
    if (t.host.empty()) throw ConfigError("missing host in endpoint: " + url);
    return t;
}

std::string post_json(const HttpTarget& target, const std::string& body, const std::string& api_key,
                      std::chrono::milliseconds timeout) {
    httplib::Client client(target.host, target.port);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(target.path, headers, body, "application/json");
    if (!res) throw ServiceError("request to " + target.host + target.path + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw ServiceError("request to " + target.host + target.path + " returned HTTP " + std::to_string(res->status));
    return res->body;
}

std::string with_retries(int max_retries, std::chrono::milliseconds initial_backoff,
                         const std::function<std::string()>& fn) {
    auto delay = initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const UnparseableResponse&) {
            throw;
        } catch (const ServiceError& e) {
            if (attempt >= max_retries)
                throw ServiceError(std::string(e.what()) + " (after " + std::to_string(attempt + 1) + " attempts)");
        }
        std::this_thread::sleep_for(delay);
        delay *= 2;
    }
}

} // namespace flowmine::detail
