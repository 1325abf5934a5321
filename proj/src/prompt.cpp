#include "medcot/prompt.hpp"

#include <stdexcept>

#include "medcot/util.hpp"

namespace medcot {

std::string to_string(TemplateId id) {
  switch (id) {
    case TemplateId::Generate: return "generate";
    case TemplateId::Verify: return "verify";
    case TemplateId::Summarize: return "summarize";
    case TemplateId::Rank: return "rank";
    case TemplateId::Refine: return "refine";
    case TemplateId::Score: return "score";
  }
  throw std::runtime_error("unknown template id");
}

TemplateId template_id_from_string(const std::string& s) {
  for (TemplateId id : all_template_ids())
    if (to_string(id) == s) return id;
  throw std::runtime_error("unknown template id: " + s);
}

const std::vector<TemplateId>& all_template_ids() {
  static const std::vector<TemplateId> ids{
      TemplateId::Generate, TemplateId::Verify, TemplateId::Summarize,
      TemplateId::Rank,     TemplateId::Refine, TemplateId::Score};
  return ids;
}

static bool ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Returns the placeholder name if body[pos] starts a "{name}" token.
static std::size_t match_placeholder(std::string_view body, std::size_t pos,
                                     std::string& name) {
  if (body[pos] != '{' || pos + 1 >= body.size()) return 0;
  std::size_t i = pos + 1;
  if (!ident_start(body[i])) return 0;
  while (i < body.size() && ident_char(body[i])) ++i;
  if (i >= body.size() || body[i] != '}') return 0;
  name.assign(body.substr(pos + 1, i - pos - 1));
  return i - pos + 1;  // token length including braces
}

std::set<std::string> scan_placeholders(std::string_view body) {
  std::set<std::string> out;
  std::string name;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (std::size_t len = match_placeholder(body, i, name); len) {
      out.insert(name);
      i += len - 1;
    }
  }
  return out;
}

PromptTemplate make_template(TemplateId id, std::string body) {
  PromptTemplate t;
  t.id = id;
  t.required_placeholders = scan_placeholders(body);
  t.body = std::move(body);
  return t;
}

std::string render_template(
    const PromptTemplate& tmpl,
    const std::map<std::string, std::string>& bindings) {
  for (const auto& name : tmpl.required_placeholders)
    if (!bindings.count(name))
      throw std::runtime_error("missing binding for placeholder {" + name +
                               "} in template " + to_string(tmpl.id));
  for (const auto& [name, _] : bindings)
    if (!tmpl.required_placeholders.count(name))
      throw std::runtime_error("extra binding '" + name +
                               "' not used by template " + to_string(tmpl.id));

  std::string out;
  out.reserve(tmpl.body.size());
  std::string name;
  const std::string_view body = tmpl.body;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (std::size_t len = match_placeholder(body, i, name); len) {
      out += bindings.at(name);  // single pass: values never re-expanded
      i += len - 1;
    } else {
      out += body[i];
    }
  }
  return out;
}

PromptRegistry PromptRegistry::builtin() {
  PromptRegistry reg;
  for (TemplateId id : all_template_ids())
    reg.templates_.emplace(id,
                           make_template(id, std::string(builtin_template_body(id))));
  return reg;
}

const PromptTemplate& PromptRegistry::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end())
    throw std::runtime_error("unknown template id: " + to_string(id));
  return it->second;
}

void PromptRegistry::set_override(TemplateId id, std::string body) {
  const auto& current = get(id);
  auto replacement = make_template(id, std::move(body));
  if (replacement.required_placeholders != current.required_placeholders) {
    std::string expected, got;
    for (const auto& p : current.required_placeholders)
      expected += (expected.empty() ? "" : ", ") + p;
    for (const auto& p : replacement.required_placeholders)
      got += (got.empty() ? "" : ", ") + p;
    throw std::runtime_error("template override for '" + to_string(id) +
                             "' must declare the same placeholder set "
                             "(expected: " + expected + "; got: " + got + ")");
  }
  templates_[id] = std::move(replacement);
}

std::string PromptRegistry::render(
    TemplateId id, const std::map<std::string, std::string>& bindings) const {
  return render_template(get(id), bindings);
}

std::string PromptRegistry::digest() const {
  std::string all;
  for (TemplateId id : all_template_ids()) {
    all += to_string(id);
    all += '\x1f';
    all += get(id).body;
    all += '\x1e';
  }
  return fnv1a64_hex(all);
}

static std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label) out += ident_char(c) ? c : '_';
  return out;
}

PromptTemplate rank_template_for(const std::vector<std::string>& labels,
                                 const PromptTemplate& base) {
  if (labels.empty()) throw std::runtime_error("rank template needs labels");
  const std::vector<std::string> canonical{"A", "B", "C", "D"};
  if (labels == canonical) return base;

  static const std::string kCanonicalBlock =
      "A) {optA}\nB) {optB}\nC) {optC}\nD) {optD}";
  auto pos = base.body.find(kCanonicalBlock);
  if (pos == std::string::npos)
    throw std::runtime_error(
        "rank template body lacks the canonical option block; cannot adapt "
        "to a non-A..D label set");

  std::string block;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string name = "opt" + sanitize_label(labels[i]);
    if (!seen.insert(name).second)
      throw std::runtime_error("option labels collide after sanitizing: " +
                               labels[i]);
    if (i) block += '\n';
    block += labels[i] + ") {" + name + "}";
  }
  std::string body = base.body;
  body.replace(pos, kCanonicalBlock.size(), block);
  return make_template(base.id, std::move(body));
}

}  // namespace medcot
