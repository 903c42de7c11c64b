// Grammar:
//   expr    := ['+'|'-'] term { ('+'|'-') term }
//   term    := factor { '*' factor }
//   factor  := ('+'|'-') factor | power
//   power   := primary [ '^' integer ]
//   primary := number | 'pi' | 'x'<k> | 't' | '(' expr ')'
// Juxtaposition ("2x1") is rejected.

#include <numbers>

#include "endpt/polynomial.hpp"
#include "lexer.hpp"

namespace endpt {

namespace {

class PolyParser {
 public:
  PolyParser(std::string_view text, std::size_t nvars) : ts_(text), nvars_(nvars) {}

  Polynomial run() {
    Polynomial p = expr();
    if (!ts_.at_end()) ts_.fail("expected operator");
    return p;
  }

 private:
  Polynomial expr() {
    Polynomial acc = term();
    for (;;) {
      if (ts_.accept("+")) {
        acc += term();
      } else if (ts_.accept("-")) {
        acc -= term();
      } else {
        return acc;
      }
    }
  }

  Polynomial term() {
    Polynomial acc = factor();
    while (ts_.accept("*")) acc = acc * factor();
    return acc;
  }

  Polynomial factor() {
    if (ts_.accept("-")) return -factor();
    if (ts_.accept("+")) return factor();
    Polynomial base = primary();
    if (ts_.accept("^")) return base.pow(ts_.expect_exponent());
    return base;
  }

  Polynomial primary() {
    const detail::Token tok = ts_.peek();
    using Kind = detail::Token::Kind;
    if (tok.kind == Kind::number) {
      ts_.next();
      return Polynomial::constant(nvars_, tok.value);
    }
    if (tok.kind == Kind::ident) {
      ts_.next();
      if (tok.text == "t") return Polynomial::time(nvars_);
      if (tok.text == "pi") return Polynomial::constant(nvars_, std::numbers::pi);
      if (tok.text.size() > 1 && tok.text[0] == 'x' &&
          tok.text.find_first_not_of("0123456789", 1) == std::string::npos) {
        const std::size_t idx = std::stoul(tok.text.substr(1));
        if (idx >= 1 && idx <= nvars_) return Polynomial::variable(nvars_, idx - 1);
      }
      throw ParseError("unknown variable '" + tok.text + "'", 1, tok.column);
    }
    if (ts_.accept("(")) {
      Polynomial inner = expr();
      ts_.expect(")");
      return inner;
    }
    ts_.fail("expected number, variable or '('");
  }

  detail::TokenStream ts_;
  std::size_t nvars_;
};

}  // namespace

Polynomial Polynomial::parse(std::string_view text, std::size_t nvars) {
  return PolyParser(text, nvars).run();
}

}  // namespace endpt
