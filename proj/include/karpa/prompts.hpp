#pragma once

#include <map>
#include <string>

namespace karpa {

struct PromptTemplates {
  std::string initial_planning;
  std::string replanning;
  std::string reasoning;

  // Templates shipped under prompts/, compiled in.
  static const PromptTemplates& defaults();
  // Reads initial_planning.txt, replanning.txt and reasoning.txt from `dir`.
  static PromptTemplates load(const std::string& dir);
};

// Replaces each `{{name}}` in `tpl` with vars.at(name). Substituted text is not
// rescanned. Throws ConfigError on an unknown placeholder.
std::string render_template(const std::string& tpl, const std::map<std::string, std::string>& vars);

}  // namespace karpa
