#include <string>

#include "medcot/stages.hpp"
#include "medcot/util.hpp"

namespace medcot {

namespace {

// Drops code-fence marker lines (``` or ```lang) so fenced JSON scans clean.
std::string strip_code_fences(std::string_view reply) {
  if (reply.find("```") == std::string_view::npos) return std::string(reply);
  std::string out;
  for (const auto& line : split_lines(reply)) {
    if (starts_with(trim(line), "```")) continue;
    out += line;
    out += '\n';
  }
  return out;
}

// Balanced-object scan from an opening brace, aware of strings and escapes.
// Returns one past the closing brace, or npos if the object never closes.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;  // skip escaped character
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

nlohmann::json extract_json(std::string_view reply,
                            const std::vector<std::string>& required_keys) {
  const std::string text = strip_code_fences(reply);
  bool saw_parseable = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    const std::size_t end = balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    const auto candidate =
        nlohmann::json::parse(text.substr(i, end - i), nullptr,
                              /*allow_exceptions=*/false);
    if (candidate.is_discarded() || !candidate.is_object()) continue;
    saw_parseable = true;
    bool has_all = true;
    for (const auto& key : required_keys)
      if (!candidate.contains(key)) {
        has_all = false;
        break;
      }
    if (has_all) return candidate;
  }
  if (saw_parseable) {
    std::string keys;
    for (const auto& k : required_keys)
      keys += (keys.empty() ? "" : ", ") + k;
    throw ExtractError(ExtractError::Kind::MissingKeys,
                       "JSON object lacks required keys: " + keys);
  }
  throw ExtractError(ExtractError::Kind::NoObject,
                     "no parseable JSON object in reply");
}

}  // namespace medcot
