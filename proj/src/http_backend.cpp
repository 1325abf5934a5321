#include "medcot/http_backend.hpp"

#include <cstdlib>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace medcot {

HttpBackend::HttpBackend(int timeout_seconds)
    : timeout_seconds_(timeout_seconds) {}

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw std::runtime_error("endpoint URL lacks a scheme: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  ParsedEndpoint out;
  if (path_start == std::string::npos) {
    out.origin = endpoint;
  } else {
    out.origin = endpoint.substr(0, path_start);
    out.path_prefix = endpoint.substr(path_start);
  }
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/')
    out.path_prefix.pop_back();
  return out;
}

BackendReply::Status classify_http_status(int status) {
  if (status >= 200 && status < 300) return BackendReply::Status::Ok;
  switch (status) {
    case 408:
    case 425:
    case 429:
    case 500:
    case 502:
    case 503:
    case 504:
      return BackendReply::Status::Transient;
    default:
      return BackendReply::Status::Permanent;
  }
}

std::string chat_request_body(const ChatRequest& req) {
  nlohmann::json body{
      {"model", req.model},
      {"messages",
       nlohmann::json::array(
           {nlohmann::json{{"role", "user"}, {"content", req.prompt}}})},
      {"temperature", req.temperature},
      {"top_p", req.top_p},
      {"max_tokens", req.max_tokens}};
  return body.dump();
}

BackendReply parse_chat_response(int http_status, const std::string& body) {
  BackendReply reply;
  reply.http_status = http_status;
  reply.status = classify_http_status(http_status);
  if (reply.status != BackendReply::Status::Ok) {
    reply.error = "HTTP " + std::to_string(http_status) +
                  (body.empty() ? "" : ": " + body.substr(0, 200));
    return reply;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const std::exception& e) {
    reply.status = BackendReply::Status::Permanent;
    reply.error = std::string("unparseable response body: ") + e.what();
    return reply;
  }
  if (j.contains("usage")) {
    reply.tokens_in = j["usage"].value("prompt_tokens", 0L);
    reply.tokens_out = j["usage"].value("completion_tokens", 0L);
  }
  try {
    const auto& choices = j.at("choices");
    if (choices.empty()) throw std::runtime_error("empty choices");
    reply.text = choices.at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception&) {
    reply.status = BackendReply::Status::Permanent;
    reply.error = "response missing message text";
    return reply;
  }
  return reply;
}

BackendReply HttpBackend::send(const AgentSpec& agent, const ChatRequest& req) {
  const ParsedEndpoint ep = parse_endpoint(agent.endpoint);

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (ep.origin.rfind("https://", 0) == 0) {
    BackendReply reply;
    reply.status = BackendReply::Status::Permanent;
    reply.error = "built without TLS support; https endpoints unavailable";
    return reply;
  }
#endif

  httplib::Client client(ep.origin);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(api_key_env_name(agent).c_str());
      key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const std::string path = ep.path_prefix + "/chat/completions";
  auto res = client.Post(path, headers, chat_request_body(req),
                         "application/json");
  if (!res) {
    BackendReply reply;
    reply.status = BackendReply::Status::Transient;
    reply.error = "connection failure: " + httplib::to_string(res.error());
    return reply;
  }
  return parse_chat_response(res->status, res->body);
}

}  // namespace medcot
