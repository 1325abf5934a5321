#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace medcot {

enum class TemplateId { Generate, Verify, Summarize, Rank, Refine, Score };

std::string to_string(TemplateId id);
TemplateId template_id_from_string(const std::string& s);
const std::vector<TemplateId>& all_template_ids();

struct PromptTemplate {
  TemplateId id{TemplateId::Generate};
  std::string body;
  std::set<std::string> required_placeholders;  // derived from body
};

// Placeholders are single-brace {name} where name is an identifier
// ([A-Za-z_][A-Za-z0-9_]*). Braces not forming such a token are literal text.
std::set<std::string> scan_placeholders(std::string_view body);

PromptTemplate make_template(TemplateId id, std::string body);

// Strict single-pass substitution: bindings must cover the template's
// placeholder set exactly; bound values are never re-expanded.
std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& bindings);

class PromptRegistry {
 public:
  // Registry loaded with the six canonical template bodies.
  static PromptRegistry builtin();

  const PromptTemplate& get(TemplateId id) const;

  // Replaces a body; the override must declare the same placeholder set.
  void set_override(TemplateId id, std::string body);

  std::string render(TemplateId id,
                     const std::map<std::string, std::string>& bindings) const;

  // Stable digest over all six bodies (feeds the plan fingerprint).
  std::string digest() const;

 private:
  PromptRegistry() = default;
  std::map<TemplateId, PromptTemplate> templates_;
};

// The canonical Rank body hard-codes a four-option A..D block. For any other
// label set the option block is rebuilt with one "<label>) {opt<label>}" line
// per actual label; the rest of the body is untouched.
PromptTemplate rank_template_for(const std::vector<std::string>& labels,
                                 const PromptTemplate& base);

// Canonical bodies (byte-pinned by golden-file tests).
std::string_view builtin_template_body(TemplateId id);

}  // namespace medcot
