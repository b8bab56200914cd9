#include "pdeshard/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pdeshard/error.hpp"

namespace pdeshard {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  m.text_ = text;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("manifest line " + std::to_string(lineno) + ": unclosed section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("manifest line " + std::to_string(lineno) + ": empty section name");
      m.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("manifest line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("manifest line " + std::to_string(lineno) + ": key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("manifest line " + std::to_string(lineno) + ": empty key");
    auto [it, inserted] = m.sections_[section].emplace(key, trim(line.substr(eq + 1)));
    if (!inserted)
      throw ConfigError("manifest line " + std::to_string(lineno) + ": duplicate key '" + key + "' in [" + section +
                        "]");
  }
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::string> Manifest::keys(const std::string& section) const {
  std::vector<std::string> out;
  if (auto it = sections_.find(section); it != sections_.end())
    for (const auto& [k, v] : it->second) out.push_back(k);
  return out;
}

std::optional<std::string> Manifest::get(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return std::nullopt;
  auto kv = it->second.find(key);
  if (kv == it->second.end()) return std::nullopt;
  return kv->second;
}

std::string Manifest::get_or(const std::string& section, const std::string& key, const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double Manifest::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("manifest [" + section + "] " + key + ": not a number: '" + *v + "'");
  }
}

long long Manifest::get_int(const std::string& section, const std::string& key, long long fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError("manifest [" + section + "] " + key + ": not an integer: '" + *v + "'");
  return out;
}

}  // namespace pdeshard
