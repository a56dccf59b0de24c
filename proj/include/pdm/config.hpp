#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pdm {

// Flat key=value run configuration. Keys live in a fixed registry; unknown
// keys are rejected so typos fail loudly. Values are stored as text and
// parsed by the typed getters, which also validate enum-like keys.
// resolved_text() serializes every registry key with its effective value, so
// a persisted config reproduces the run with no external state.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool is_set(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Comma-separated integer list; empty value -> empty list.
  std::vector<int> get_int_list(const std::string& key) const;

  // Every registry key with its effective value, one per line, sorted.
  std::string resolved_text() const;

  static const std::map<std::string, std::string>& registry();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pdm
