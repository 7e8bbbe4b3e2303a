#include "capeval/prompts.hpp"

#include <map>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"
#include "prompt_templates.hpp"

namespace capeval {
namespace {

// Single left-to-right pass: substituted text is never rescanned, so a
// caption containing "{context}" is inserted verbatim.
std::string substitute(std::string_view tpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = tpl.substr(i + 1, close - i - 1);
        if (auto it = values.find(name); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

std::string inputs_digest(PromptMode mode, std::initializer_list<std::string_view> parts) {
  json j = json::array({to_string(mode)});
  for (auto p : parts) j.push_back(std::string(p));
  return digest_any(canonical_dump(j));
}

RenderedPrompt make(PromptMode mode, std::string text, std::initializer_list<std::string_view> parts,
                    const std::string& caption) {
  RenderedPrompt p;
  p.mode = mode;
  p.template_id = template_id(mode);
  p.text = std::move(text);
  p.inputs_digest = inputs_digest(mode, parts);
  p.caption_digest = caption.empty() ? std::string() : digest_any(caption);
  return p;
}

void require_non_empty(const std::string& value, const char* what) {
  if (trim(value).empty()) throw Error(ErrorKind::kInvalidInput, std::string(what) + " must not be empty");
}

}  // namespace

std::string to_string(PromptMode m) {
  switch (m) {
    case PromptMode::kVanilla: return "vanilla";
    case PromptMode::kReference: return "reference";
    case PromptMode::kDescriptionStep1: return "description_step1";
    case PromptMode::kVisceStep1: return "visce_step1";
    case PromptMode::kStep2: return "step2";
  }
  return "vanilla";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  for (auto m : {PromptMode::kVanilla, PromptMode::kReference, PromptMode::kDescriptionStep1,
                 PromptMode::kVisceStep1, PromptMode::kStep2}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorKind::kValidation, "unknown prompt mode '" + s + "'");
}

std::string template_id(PromptMode m) { return to_string(m) + "@v1"; }

std::string_view template_text(PromptMode m) {
  switch (m) {
    case PromptMode::kVanilla: return detail::kVanillaTemplate;
    case PromptMode::kReference: return detail::kReferenceTemplate;
    case PromptMode::kDescriptionStep1: return detail::kDescriptionStep1Template;
    case PromptMode::kVisceStep1: return detail::kVisceStep1Template;
    case PromptMode::kStep2: return detail::kStep2Template;
  }
  return {};
}

std::string join_references(const ReferenceSet& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.references.size(); ++i) {
    if (i) out += '\n';
    out += refs.references[i];
  }
  return out;
}

RenderedPrompt render_vanilla(const std::string& caption) {
  require_non_empty(caption, "caption");
  auto text = substitute(template_text(PromptMode::kVanilla), {{"caption", caption}});
  return make(PromptMode::kVanilla, std::move(text), {caption}, caption);
}

RenderedPrompt render_reference(const std::string& caption, const ReferenceSet& refs) {
  require_non_empty(caption, "caption");
  if (refs.references.empty()) throw Error(ErrorKind::kInvalidInput, "reference set must not be empty");
  for (const auto& r : refs.references) require_non_empty(r, "reference");
  const auto joined = join_references(refs);
  auto text = substitute(template_text(PromptMode::kReference), {{"caption", caption}, {"references", joined}});
  return make(PromptMode::kReference, std::move(text), {caption, joined}, caption);
}

RenderedPrompt render_description_step1() {
  return make(PromptMode::kDescriptionStep1, std::string(template_text(PromptMode::kDescriptionStep1)), {}, {});
}

RenderedPrompt render_visce_step1() {
  return make(PromptMode::kVisceStep1, std::string(template_text(PromptMode::kVisceStep1)), {}, {});
}

RenderedPrompt render_step2(const std::string& caption, const std::string& context) {
  require_non_empty(caption, "caption");
  require_non_empty(context, "context");
  auto text = substitute(template_text(PromptMode::kStep2), {{"caption", caption}, {"context", context}});
  return make(PromptMode::kStep2, std::move(text), {caption, context}, caption);
}

void to_json(json& j, const RenderedPrompt& v) {
  j = json{{"mode", to_string(v.mode)},
           {"template_id", v.template_id},
           {"text", v.text},
           {"inputs_digest", v.inputs_digest},
           {"caption_digest", v.caption_digest}};
}

void from_json(const json& j, RenderedPrompt& v) {
  v.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
  v.template_id = j.at("template_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.inputs_digest = j.at("inputs_digest").get<std::string>();
  v.caption_digest = j.value("caption_digest", std::string());
}

}  // namespace capeval
