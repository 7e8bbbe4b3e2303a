#pragma once

#include <string>
#include <string_view>

#include "capeval/types.hpp"

namespace capeval {

enum class PromptMode { kVanilla, kReference, kDescriptionStep1, kVisceStep1, kStep2 };

std::string to_string(PromptMode m);
PromptMode prompt_mode_from_string(const std::string& s);

/// Versioned template identifier, e.g. "visce_step1@v1". Participates in
/// cache keys, so bump the version whenever a template's bytes change.
std::string template_id(PromptMode m);

/// Raw template text with its placeholders intact.
std::string_view template_text(PromptMode m);

struct RenderedPrompt {
  PromptMode mode = PromptMode::kVanilla;
  std::string template_id;
  std::string text;
  // Digest over the substituted values (mode-tagged), not the full text.
  std::string inputs_digest;
  // Digest of the candidate caption, empty for image-only prompts.
  std::string caption_digest;

  bool operator==(const RenderedPrompt&) const = default;
};

RenderedPrompt render_vanilla(const std::string& caption);
RenderedPrompt render_reference(const std::string& caption, const ReferenceSet& refs);
RenderedPrompt render_description_step1();
RenderedPrompt render_visce_step1();
RenderedPrompt render_step2(const std::string& caption, const std::string& context);

/// Newline-joined, order preserved.
std::string join_references(const ReferenceSet& refs);

void to_json(json& j, const RenderedPrompt& v);
void from_json(const json& j, RenderedPrompt& v);

}  // namespace capeval
