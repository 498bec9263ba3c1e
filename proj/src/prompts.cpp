#include "tracefix/prompts.hpp"

#include <fstream>
#include <sstream>

namespace tracefix {

namespace {

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9'); }

// Calls visit(name) for each {placeholder}; returns text with each replaced
// by the visitor's result.
template <typename Visitor>
std::string scan(const std::string& text, Visitor&& visit) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && is_name_char(text[j])) ++j;
      if (j > i + 1 && j < text.size() && text[j] == '}' && text[i + 1] >= 'a' && text[i + 1] <= 'z') {
        out += visit(text.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

std::string RenderedPrompt::text() const {
  if (system.empty()) return user;
  return system + "\n\n" + user;
}

PromptTemplate::PromptTemplate(std::string system, std::string user)
    : system_(std::move(system)), user_(std::move(user)) {}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  std::string system, user;
  std::string* current = nullptr;
  std::istringstream lines{std::string(text)};
  std::string line;
  bool any_section = false;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[system]") {
      current = &system;
      any_section = true;
      continue;
    }
    if (line == "[user]") {
      current = &user;
      any_section = true;
      continue;
    }
    if (!current) {
      if (line.empty()) continue;
      throw PromptError("template text before a [system] or [user] section");
    }
    *current += line;
    *current += '\n';
  }
  if (!any_section) throw PromptError("template has no [user] section");
  return PromptTemplate(strip_trailing_newlines(system), strip_trailing_newlines(user));
}

std::set<std::string> PromptTemplate::placeholders() const {
  std::set<std::string> names;
  auto collect = [&](const std::string& name) {
    names.insert(name);
    return std::string();
  };
  scan(system_, collect);
  scan(user_, collect);
  return names;
}

RenderedPrompt PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  auto fill = [&](const std::string& name) -> std::string {
    auto it = values.find(name);
    if (it == values.end()) throw PromptError("no value for placeholder {" + name + "}");
    return it->second;
  };
  return {scan(system_, fill), scan(user_, fill)};
}

PromptLibrary::PromptLibrary() {
  for (const auto& [name, source] : embedded_prompt_sources()) templates_[name] = PromptTemplate::parse(source);
}

const PromptLibrary& PromptLibrary::defaults() {
  static const PromptLibrary library;
  return library;
}

void PromptLibrary::load_file(const std::string& name, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("cannot read prompt template " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  templates_[name] = PromptTemplate::parse(text.str());
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw PromptError("unknown prompt template: " + name);
  return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

}  // namespace tracefix
