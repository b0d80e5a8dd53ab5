#pragma once
#include <chrono>
#include <functional>
#include <string>

namespace flowmine::detail {

struct HttpTarget {
    std::string host;
    int port = 80;
    std::string path = "/";
};

// Parses "http://host[:port][/path]". Throws ConfigError otherwise.
HttpTarget parse_http_url(const std::string& url);

// POSTs a JSON body and returns the response body; throws ServiceError on
// transport failure or a non-2xx status.
std::string post_json(const HttpTarget& target, const std::string& body, const std::string& api_key,
                      std::chrono::milliseconds timeout);

// Runs fn, retrying ServiceError up to max_retries times with doubling delay.
std::string with_retries(int max_retries, std::chrono::milliseconds initial_backoff,
                         const std::function<std::string()>& fn);

} // namespace flowmine::detail
