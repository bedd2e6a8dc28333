#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "infmix/config.hpp"
#include "infmix/error.hpp"

namespace infmix::config {

namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  json run() {
    json root = json::object();
    json* cur = &root;
    for (;;) {
      skip_ws_nl();
      if (eof()) break;
      if (peek() == '[') {
        bool array = s_.substr(i_, 2) == "[[";
        i_ += array ? 2 : 1;
        auto path = key_path();
        skip_ws();
        expect(']');
        if (array) expect(']');
        end_of_line();
        cur = open_table(root, path, array);
      } else {
        auto path = key_path();
        skip_ws();
        expect('=');
        skip_ws();
        json v = value();
        end_of_line();
        assign(*cur, path, std::move(v));
      }
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("toml line " + std::to_string(line_) + ": " + msg);
  }
  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }
  char get() {
    char c = s_[i_++];
    if (c == '\n') ++line_;
    return c;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') get();
  }
  void skip_ws_nl() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        get();
        continue;
      }
      return;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (!eof() && peek() != '\n') fail("unexpected trailing characters");
  }

  std::string bare_or_quoted_key() {
    skip_ws();
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += get();
    if (k.empty()) fail("expected a key");
    return k;
  }
  std::vector<std::string> key_path() {
    std::vector<std::string> p{bare_or_quoted_key()};
    for (;;) {
      skip_ws();
      if (peek() != '.') break;
      get();
      p.push_back(bare_or_quoted_key());
    }
    return p;
  }

  json* open_table(json& root, const std::vector<std::string>& path, bool array) {
    json* t = &root;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      json& next = (*t)[path[k]];
      if (next.is_null()) next = json::object();
      if (next.is_array() && !next.empty() && next.back().is_object()) {
        t = &next.back();
        continue;
      }
      if (!next.is_object()) fail("key '" + path[k] + "' is not a table");
      t = &next;
    }
    json& last = (*t)[path.back()];
    if (array) {
      if (last.is_null()) last = json::array();
      if (!last.is_array()) fail("key '" + path.back() + "' is not an array of tables");
      last.push_back(json::object());
      return &last.back();
    }
    if (last.is_null()) last = json::object();
    if (!last.is_object()) fail("key '" + path.back() + "' is not a table");
    return &last;
  }

  void assign(json& t, const std::vector<std::string>& path, json v) {
    json* cur = &t;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      json& next = (*cur)[path[k]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("key '" + path[k] + "' is not a table");
      cur = &next;
    }
    if (cur->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*cur)[path.back()] = std::move(v);
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      char e = get();
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }
  std::string literal_string() {
    expect('\'');
    std::string out;
    while (!eof() && peek() != '\'') {
      if (peek() == '\n') fail("unterminated string");
      out += get();
    }
    expect('\'');
    return out;
  }

  json number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      tok += get();
    std::string clean;
    for (char c : tok)
      if (c != '_') clean += c;
    std::string body = clean;
    double sign = 1.0;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
      sign = body[0] == '-' ? -1.0 : 1.0;
      body.erase(0, 1);
    }
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* b = clean.data();
    const char* e = clean.data() + clean.size();
    if (!clean.empty() && clean[0] == '+') ++b;
    if (is_float) {
      double d = 0.0;
      auto r = std::from_chars(b, e, d);
      if (r.ec != std::errc() || r.ptr != e) fail("bad number '" + tok + "'");
      return d;
    }
    std::int64_t v = 0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) fail("bad number '" + tok + "'");
    return v;
  }

  json value() {
    char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') {
      get();
      json arr = json::array();
      for (;;) {
        skip_ws_nl();
        if (peek() == ']') {
          get();
          return arr;
        }
        arr.push_back(value());
        skip_ws_nl();
        if (peek() == ',') {
          get();
          continue;
        }
        skip_ws_nl();
        expect(']');
        return arr;
      }
    }
    if (c == '{') {
      get();
      json t = json::object();
      skip_ws();
      if (peek() == '}') {
        get();
        return t;
      }
      for (;;) {
        auto path = key_path();
        skip_ws();
        expect('=');
        skip_ws();
        assign(t, path, value());
        skip_ws();
        if (peek() == ',') {
          get();
          continue;
        }
        expect('}');
        return t;
      }
    }
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return false;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == 'i' || c == 'n') return number();
    fail("unexpected value");
  }

  std::string_view s_;
  std::size_t i_ = 0;
  int line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).run(); }

nlohmann::json load_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (p.extension() == ".json") {
    try {
      return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("json config: ") + e.what());
    }
  }
  return parse_toml(ss.str());
}

}  // namespace infmix::config
