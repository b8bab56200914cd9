#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pdeshard {

// Flat key = value text split into [sections]. '#' starts a comment.
//
//   [generate]
//   n = 64
//   steps = 300
class Manifest {
 public:
  static Manifest parse(const std::string& text);
  static Manifest load(const std::filesystem::path& path);

  bool has_section(const std::string& name) const { return sections_.count(name) != 0; }
  std::vector<std::string> keys(const std::string& section) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;

  std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;

  const std::string& text() const noexcept { return text_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string text_;
};

}  // namespace pdeshard
