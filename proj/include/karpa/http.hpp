#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace karpa {

// POSTs a JSON body to `url` (http:// or https://) and parses the JSON reply.
// Connection failures, 429 and 5xx raise a retryable ProviderError; other
// non-2xx statuses and unparseable bodies raise a non-retryable one.
nlohmann::json http_post_json(const std::string& url, const nlohmann::json& body,
                              const std::string& bearer_token, int timeout_seconds);

// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace karpa
