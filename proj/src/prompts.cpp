#include "karpa/prompts.hpp"

#include <fstream>
#include <sstream>

#include "karpa/error.hpp"

namespace karpa {

namespace {
std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read prompt template: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

PromptTemplates PromptTemplates::load(const std::string& dir) {
  return {read_file(dir + "/initial_planning.txt"), read_file(dir + "/replanning.txt"),
          read_file(dir + "/reasoning.txt")};
}

std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const auto open = tpl.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    const auto name = tpl.substr(open + 2, close - open - 2);
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("template placeholder without value: {{" + name + "}}");
    out.append(tpl, pos, open - pos);
    out.append(it->second);
    pos = close + 2;
  }
  out.append(tpl, pos, std::string::npos);
  return out;
}

}  // namespace karpa
