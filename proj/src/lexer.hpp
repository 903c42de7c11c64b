#ifndef ENDPT_SRC_LEXER_HPP
#define ENDPT_SRC_LEXER_HPP

// Shared tokenizer for the polynomial and signal text grammars.

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "endpt/errors.hpp"

namespace endpt::detail {

struct Token {
  enum class Kind { number, ident, punct, end };
  Kind kind;
  std::string text;
  double value = 0.0;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char ch = s[i];
    if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
      ++i;
      continue;
    }
    const std::size_t col = i + 1;
    if ((std::isdigit(static_cast<unsigned char>(ch)) != 0) || ch == '.') {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
      if (ec != std::errc{}) throw ParseError("malformed number", 1, col);
      const auto len = static_cast<std::size_t>(ptr - (s.data() + i));
      out.push_back({Token::Kind::number, std::string(s.substr(i, len)), v, col});
      i += len;
    } else if (std::isalpha(static_cast<unsigned char>(ch)) != 0) {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) != 0)) ++j;
      out.push_back({Token::Kind::ident, std::string(s.substr(i, j - i)), 0.0, col});
      i = j;
    } else if (std::string_view("+-*^(),[]").find(ch) != std::string_view::npos) {
      out.push_back({Token::Kind::punct, std::string(1, ch), 0.0, col});
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + ch + "'", 1, col);
    }
  }
  out.push_back({Token::Kind::end, "", 0.0, s.size() + 1});
  return out;
}

class TokenStream {
 public:
  explicit TokenStream(std::string_view s) : toks_(tokenize(s)) {}

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_end() const { return peek().kind == Token::Kind::end; }

  bool accept(std::string_view punct) {
    if (peek().kind == Token::Kind::punct && peek().text == punct) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(std::string_view punct) {
    if (!accept(punct)) fail("expected '" + std::string(punct) + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    const std::string got = t.kind == Token::Kind::end ? "end of input" : "'" + t.text + "'";
    throw ParseError(msg + ", got " + got, 1, t.column);
  }

  unsigned expect_exponent() {
    const Token& t = peek();
    if (t.kind != Token::Kind::number || t.text.find_first_not_of("0123456789") != std::string::npos) {
      fail("expected non-negative integer exponent");
    }
    next();
    return static_cast<unsigned>(t.value);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace endpt::detail

#endif  // ENDPT_SRC_LEXER_HPP
