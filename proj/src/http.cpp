#include "karpa/http.hpp"

#include <httplib.h>

#include "karpa/error.hpp"

namespace karpa {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json http_post_json(const std::string& url, const nlohmann::json& body,
                              const std::string& bearer_token, int timeout_seconds) {
  const auto [host, path] = split_url(url);
  httplib::Client client(host);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("transport error contacting " + url + ": " + httplib::to_string(res.error()),
                        true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError("HTTP " + std::to_string(res->status) + " from " + url, true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError("HTTP " + std::to_string(res->status) + " from " + url + ": " + res->body,
                        false);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderError(std::string("malformed JSON response: ") + e.what(), false);
  }
}

}  // namespace karpa
