#pragma once

#include <string>

#include "medcot/gateway.hpp"

namespace medcot {

// POSTs OpenAI-compatible chat-completion requests to the agent's endpoint.
// The endpoint is a base URL (e.g. "https://api.example.com/v1"); the backend
// appends "/chat/completions". API keys are read from the environment
// variable named by api_key_env_name(agent) and sent as a bearer token.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(int timeout_seconds = 120);
  BackendReply send(const AgentSpec& agent, const ChatRequest& req) override;

 private:
  int timeout_seconds_;
};

struct ParsedEndpoint {
  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // "" or "/v1" etc., no trailing slash
};
ParsedEndpoint parse_endpoint(const std::string& endpoint);

// Shared with tests: classify an HTTP status per the retry policy.
BackendReply::Status classify_http_status(int status);

// Builds the JSON request body (single user message).
std::string chat_request_body(const ChatRequest& req);

// Extracts (text, tokens_in, tokens_out) from a chat-completion response
// body; returns a Permanent reply if the message text is missing.
BackendReply parse_chat_response(int http_status, const std::string& body);

}  // namespace medcot
