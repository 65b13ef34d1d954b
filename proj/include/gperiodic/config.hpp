#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gperiodic/error.hpp"
#include "json.hpp"

namespace gperiodic {

namespace detail {

class TomlLine {
 public:
  TomlLine(const std::string& text, int line) : s_(text), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_); }

  std::string key() {
    skip_ws();
    if (peek() == '"') return quoted();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-'))
      ++pos_;
    if (pos_ == start) fail("expected a key");
    return s_.substr(start, pos_ - start);
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    while (peek() == '.') {
      ++pos_;
      parts.push_back(key());
    }
    return parts;
  }

  nlohmann::json value() {
    const char c = peek();
    if (c == '"') return quoted();
    if (c == '[') {
      ++pos_;
      nlohmann::json arr = nlohmann::json::array();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      while (true) {
        arr.push_back(value());
        if (peek() == ',') {
          ++pos_;
          if (peek() == ']') {
            ++pos_;
            return arr;
          }
          continue;
        }
        expect(']');
        return arr;
      }
    }
    if (c == '{') {
      ++pos_;
      nlohmann::json obj = nlohmann::json::object();
      if (peek() == '}') {
        ++pos_;
        return obj;
      }
      while (true) {
        const auto k = dotted_key();
        expect('=');
        insert(obj, k, value());
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect('}');
        return obj;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '}' && s_[pos_] != '#' &&
           s_[pos_] != ' ' && s_[pos_] != '\t')
      ++pos_;
    const std::string tok = s_.substr(start, pos_ - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) fail("expected a value");
    std::string clean;
    for (char ch : tok)
      if (ch != '_') clean.push_back(ch);
    try {
      std::size_t used = 0;
      if (clean.find_first_of(".eE") == std::string::npos && clean != "inf" && clean != "nan") {
        const long long v = std::stoll(clean, &used);
        if (used == clean.size()) return v;
      }
      const double d = std::stod(clean, &used);
      if (used == clean.size()) return d;
    } catch (const std::exception&) {
    }
    fail("bad value '" + tok + "'");
  }

  void insert(nlohmann::json& obj, const std::vector<std::string>& path, nlohmann::json v) const {
    nlohmann::json* cur = &obj;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      auto& next = (*cur)[path[i]];
      if (next.is_null()) next = nlohmann::json::object();
      if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
      cur = &next;
    }
    if (cur->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*cur)[path.back()] = std::move(v);
  }

 private:
  std::string quoted() {
    expect('"');
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        ++pos_;
        const char e = s_[pos_];
        out.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
      } else {
        out.push_back(s_[pos_]);
      }
      ++pos_;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// TOML subset: [tables], [dotted.tables], key = value, strings, integers,
/// floats, booleans, single-line arrays and inline tables, # comments.
inline nlohmann::json parse_toml(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    detail::TomlLine t(raw, line);
    if (t.at_end()) continue;
    if (t.peek() == '[') {
      t.expect('[');
      const auto path = t.dotted_key();
      t.expect(']');
      if (!t.at_end()) t.fail("trailing characters after table header");
      table = &root;
      for (const auto& part : path) {
        auto& next = (*table)[part];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object()) t.fail("table '" + part + "' redefines a value");
        table = &next;
      }
      continue;
    }
    const auto key = t.dotted_key();
    t.expect('=');
    auto v = t.value();
    if (!t.at_end()) t.fail("trailing characters after value");
    t.insert(*table, key, std::move(v));
  }
  return root;
}

/// Reads a config file: JSON when the first non-blank character is '{',
/// TOML subset otherwise.
inline nlohmann::json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), 0);
    }
  }
  return parse_toml(text);
}

}  // namespace gperiodic
