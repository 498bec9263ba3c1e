#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tracefix/error.hpp"

namespace tracefix {

class PromptError : public Error {
 public:
  using Error::Error;
};

struct RenderedPrompt {
  std::string system;
  std::string user;

  /// System and user text joined, for hashing and substring checks.
  std::string text() const;
};

/// A two-part chat template. Files use a `[system]` line and a `[user]`
/// line to open each section; placeholders are `{lower_snake_name}`.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string system, std::string user);

  static PromptTemplate parse(std::string_view text);

  std::set<std::string> placeholders() const;

  /// Substitutes every placeholder in one pass; values are inserted
  /// verbatim. Throws PromptError if a placeholder has no value.
  RenderedPrompt render(const std::map<std::string, std::string>& values) const;

  const std::string& system() const { return system_; }
  const std::string& user() const { return user_; }

 private:
  std::string system_;
  std::string user_;
};

/// Named templates: the built-in set, optionally overridden from files.
class PromptLibrary {
 public:
  static const PromptLibrary& defaults();

  PromptLibrary();

  /// Replaces template `name` with the contents of `path`.
  void load_file(const std::string& name, const std::filesystem::path& path);

  const PromptTemplate& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

/// Built-in template sources, generated from prompts/*.txt at build time.
const std::vector<std::pair<std::string, std::string>>& embedded_prompt_sources();

}  // namespace tracefix
