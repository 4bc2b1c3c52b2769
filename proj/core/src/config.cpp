#include "schoolmerge/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "schoolmerge/errors.hpp"

namespace schoolmerge {

namespace {

// Minimal recursive-descent TOML reader. Handles the config subset we emit
// and document: tables, scalars, arrays, inline tables.
class TomlParser {
 public:
  explicit TomlParser(const std::string& text) : text_(text) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    skip_ws_and_comments(true);
    while (pos_ < text_.size()) {
      if (peek() == '[') {
        table = open_table(root);
      } else {
        auto [key, value] = parse_key_value();
        if (table->contains(key)) fail("duplicate key '" + key + "'");
        (*table)[key] = std::move(value);
      }
      expect_line_end();
      skip_ws_and_comments(true);
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("toml: " + msg + " at line " + std::to_string(line_));
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  char take() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws_and_comments(bool cross_lines) {
    while (pos_ < text_.size()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        take();
      } else if (c == '#') {
        while (pos_ < text_.size() && peek() != '\n') take();
      } else if (c == '\n' && cross_lines) {
        take();
      } else {
        break;
      }
    }
  }

  void expect_line_end() {
    skip_ws_and_comments(false);
    if (pos_ >= text_.size()) return;
    if (peek() != '\n') fail("expected end of line");
    take();
  }

  static bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string parse_key() {
    skip_ws_and_comments(false);
    if (peek() == '"') return parse_string();
    std::string key;
    while (pos_ < text_.size() && is_bare_char(peek())) key.push_back(take());
    if (key.empty()) fail("expected key");
    return key;
  }

  nlohmann::json* open_table(nlohmann::json& root) {
    take();  // '['
    nlohmann::json* node = &root;
    for (;;) {
      std::string part = parse_key();
      if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
      node = &(*node)[part];
      if (!node->is_object()) fail("table '" + part + "' clashes with a value");
      skip_ws_and_comments(false);
      if (peek() == '.') {
        take();
        continue;
      }
      break;
    }
    if (peek() != ']') fail("expected ']'");
    take();
    return node;
  }

  std::pair<std::string, nlohmann::json> parse_key_value() {
    std::string key = parse_key();
    skip_ws_and_comments(false);
    if (peek() != '=') fail("expected '=' after key '" + key + "'");
    take();
    skip_ws_and_comments(false);
    return {key, parse_value()};
  }

  nlohmann::json parse_value() {
    char c = peek();
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    return parse_scalar();
  }

  std::string parse_string() {
    take();  // opening quote
    std::string out;
    while (pos_ < text_.size() && peek() != '"') {
      char c = take();
      if (c == '\n') fail("unterminated string");
      if (c == '\\') {
        if (pos_ >= text_.size()) fail("unterminated escape");
        char e = take();
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail("unsupported escape");
        }
      } else {
        out.push_back(c);
      }
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    take();  // closing quote
    return out;
  }

  nlohmann::json parse_array() {
    take();  // '['
    nlohmann::json arr = nlohmann::json::array();
    skip_ws_and_comments(true);
    while (peek() != ']') {
      arr.push_back(parse_value());
      skip_ws_and_comments(true);
      if (peek() == ',') {
        take();
        skip_ws_and_comments(true);
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    take();  // ']'
    return arr;
  }

  nlohmann::json parse_inline_table() {
    take();  // '{'
    nlohmann::json obj = nlohmann::json::object();
    skip_ws_and_comments(false);
    while (peek() != '}') {
      auto [key, value] = parse_key_value();
      if (obj.contains(key)) fail("duplicate key '" + key + "'");
      obj[key] = std::move(value);
      skip_ws_and_comments(false);
      if (peek() == ',') {
        take();
        skip_ws_and_comments(false);
      } else if (peek() != '}') {
        fail("expected ',' or '}' in inline table");
      }
    }
    take();  // '}'
    return obj;
  }

  nlohmann::json parse_scalar() {
    std::string tok;
    while (pos_ < text_.size()) {
      char c = peek();
      if (is_bare_char(c) || c == '+' || c == '.') {
        tok.push_back(take());
      } else {
        break;
      }
    }
    if (tok.empty()) fail("expected value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    const bool looks_float = tok.find('.') != std::string::npos ||
                             tok.find('e') != std::string::npos ||
                             tok.find('E') != std::string::npos ||
                             tok == "inf" || tok == "-inf" || tok == "nan";
    std::size_t used = 0;
    try {
      if (!looks_float) {
        long long v = std::stoll(tok, &used);
        if (used == tok.size()) return v;
      }
      double v = std::stod(tok, &used);
      if (used == tok.size()) return v;
    } catch (const std::exception&) {
      fail("cannot parse value '" + tok + "'");
    }
    fail("cannot parse value '" + tok + "'");
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(const std::string& text) {
  return TomlParser(text).parse();
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "toml") return parse_toml(text);
  if (ext == "json") {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("json: ") + e.what());
    }
  }
  throw ValidationError("config must be .json or .toml: " + path);
}

}  // namespace schoolmerge
