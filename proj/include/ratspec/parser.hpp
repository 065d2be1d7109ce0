#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ratspec/expr.hpp"

namespace ratspec {

/// Expression text together with the variable alphabet it is read against.
struct ExprSource {
  std::string text;
  Signature signature;
};

// Grammar (EBNF), whitespace-insensitive except inside numbers:
//
//   expr     = term , { ("+" | "-") , term } ;
//   term     = factor , { "*" , factor } ;
//   factor   = unary , { "^-1" } ;
//   unary    = "-" , unary | primary ;
//   primary  = "(" , expr , ")"
//            | "inv" , "(" , expr , ")"
//            | "kron" , "(" , matrix , "," , variable , ")"
//            | matrix | variable | complex ;
//   matrix   = "[" , row , { "," , row } , "]" ;
//   row      = "[" , expr , { "," , expr } , "]" ;
//   variable = ("x" | "u") , integer ;
//   complex  = ["-"] , number , ["i"] , [ ("+" | "-") , number , "i" ] ;
//
// "-" between terms is sugar for adding the negation; "inv(E)" is an alias
// for "E^-1". A complex literal `a+bi` binds more tightly than addition, so
// `1+2i` is one constant; parenthesize as `(1)+(2i)` to add separately.
// Matrix literals with constant entries denote constant coefficients;
// matrix literals with expression entries denote the canonical matrix lift.

namespace parser_detail {

enum class Tok {
  Number,      // real literal
  ImagNumber,  // literal immediately followed by 'i'
  Ident,       // inv, kron, x<k>, u<k>, i
  Plus,
  Minus,
  Star,
  InverseOp,  // ^-1
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  End,
};

struct Token {
  Tok kind;
  double number = 0.0;
  std::string ident;
  std::size_t pos = 0;
};

/// Tokenizes the whole input upfront; expression sources are small.
class Lexer {
 public:
  explicit Lexer(std::string_view text) {
    std::size_t pos = 0;
    while (true) {
      Token t = lex_one(text, pos);
      tokens_.push_back(t);
      if (t.kind == Tok::End) break;
    }
  }

  const Token& peek() const { return tokens_[index_]; }
  const Token& peek2() const {
    return tokens_[std::min(index_ + 1, tokens_.size() - 1)];
  }
  Token take() {
    Token t = tokens_[index_];
    if (index_ + 1 < tokens_.size()) ++index_;
    return t;
  }

 private:
  static Token lex_one(std::string_view text, std::size_t& pos) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    Token t;
    t.pos = pos;
    if (pos >= text.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = text[pos];
    switch (c) {
      case '+': t.kind = Tok::Plus; ++pos; return t;
      case '-': t.kind = Tok::Minus; ++pos; return t;
      case '*': t.kind = Tok::Star; ++pos; return t;
      case '(': t.kind = Tok::LParen; ++pos; return t;
      case ')': t.kind = Tok::RParen; ++pos; return t;
      case '[': t.kind = Tok::LBracket; ++pos; return t;
      case ']': t.kind = Tok::RBracket; ++pos; return t;
      case ',': t.kind = Tok::Comma; ++pos; return t;
      case '^': {
        std::size_t p = pos + 1;
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        if (p < text.size() && text[p] == '-' && p + 1 < text.size() && text[p + 1] == '1') {
          t.kind = Tok::InverseOp;
          pos = p + 2;
          return t;
        }
        throw SyntaxError("expected '^-1'", pos);
      }
      default:
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
          return lex_number(text, pos);
        if (std::isalpha(static_cast<unsigned char>(c))) return lex_ident(text, pos);
        throw SyntaxError(std::string("unexpected character '") + c + "'", pos);
    }
  }

  static Token lex_number(std::string_view text, std::size_t& pos) {
    Token t;
    t.pos = pos;
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.'))
      ++pos;
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
      std::size_t p = pos + 1;
      if (p < text.size() && (text[p] == '+' || text[p] == '-')) ++p;
      if (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
        while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
        pos = p;
      }
    }
    auto res = std::from_chars(text.data() + start, text.data() + pos, t.number);
    if (res.ec != std::errc{} || res.ptr != text.data() + pos)
      throw SyntaxError("malformed number", start);
    t.kind = Tok::Number;
    // Trailing 'i' (not part of a longer identifier) marks an imaginary literal.
    if (pos < text.size() && text[pos] == 'i' &&
        (pos + 1 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[pos + 1])))) {
      t.kind = Tok::ImagNumber;
      ++pos;
    }
    return t;
  }

  static Token lex_ident(std::string_view text, std::size_t& pos) {
    Token t;
    t.pos = pos;
    std::size_t start = pos;
    while (pos < text.size() && std::isalnum(static_cast<unsigned char>(text[pos]))) ++pos;
    t.kind = Tok::Ident;
    t.ident = std::string(text.substr(start, pos - start));
    return t;
  }

  std::vector<Token> tokens_;
  std::size_t index_ = 0;
};

/// Negation folds the scalar -1 into the nearest coefficient so that
/// `a - b` desugars to `a + (-1 . b)` without introducing spurious nodes.
inline ExprPtr negate(const ExprPtr& e) {
  switch (e->kind()) {
    case NodeKind::Constant:
      return RationalExpr::constant(-e->coefficient(), e->signature());
    case NodeKind::ScaledVariable:
      return RationalExpr::scaled_variable(-e->coefficient(), e->var(), e->signature());
    case NodeKind::Product:
      return RationalExpr::product(negate(e->lhs()), e->rhs());
    case NodeKind::Sum:
      return RationalExpr::sum(negate(e->lhs()), negate(e->rhs()));
    case NodeKind::Inverse: {
      Matrix neg_id = -Matrix::Identity(e->rows(), e->rows());
      return RationalExpr::product(RationalExpr::constant(neg_id, e->signature()), e);
    }
  }
  throw Error("unreachable");
}

class Parser {
 public:
  Parser(std::string_view text, Signature sig) : lexer_(text), sig_(sig) {}

  ExprPtr parse_expression_eof() {
    ExprPtr e = parse_expr();
    expect(Tok::End, "trailing input after expression");
    return e;
  }

  ExprMatrix parse_matrix_eof() {
    if (lexer_.peek().kind != Tok::LBracket)
      throw SyntaxError("expected matrix literal", lexer_.peek().pos);
    ExprMatrix m = parse_matrix_grid();
    expect(Tok::End, "trailing input after matrix");
    return m;
  }

 private:
  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (lexer_.peek().kind == Tok::Plus || lexer_.peek().kind == Tok::Minus) {
      bool minus = lexer_.take().kind == Tok::Minus;
      ExprPtr rhs = parse_term();
      e = RationalExpr::sum(e, minus ? negate(rhs) : rhs);
    }
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    while (lexer_.peek().kind == Tok::Star) {
      lexer_.take();
      e = RationalExpr::product(e, parse_factor());
    }
    return e;
  }

  ExprPtr parse_factor() {
    ExprPtr e = parse_unary();
    while (lexer_.peek().kind == Tok::InverseOp) {
      std::size_t pos = lexer_.take().pos;
      e = checked_inverse(e, pos);
    }
    return e;
  }

  ExprPtr parse_unary() {
    if (lexer_.peek().kind == Tok::Minus) {
      // A sign directly on a numeric literal belongs to the literal, so
      // that `-1-2i` reads as the constant -1-2i.
      if (lexer_.peek2().kind == Tok::Number || lexer_.peek2().kind == Tok::ImagNumber) {
        lexer_.take();
        return parse_complex_literal(true);
      }
      lexer_.take();
      return negate(parse_unary());
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = lexer_.peek();
    switch (t.kind) {
      case Tok::Number:
      case Tok::ImagNumber:
        return parse_complex_literal(false);
      case Tok::LParen: {
        lexer_.take();
        ExprPtr e = parse_expr();
        expect(Tok::RParen, "expected ')'");
        return e;
      }
      case Tok::LBracket: {
        ExprMatrix m = parse_matrix_grid();
        return lift_matrix(m);
      }
      case Tok::Ident:
        return parse_ident();
      default:
        throw SyntaxError("expected expression", t.pos);
    }
  }

  ExprPtr parse_ident() {
    Token t = lexer_.take();
    if (t.ident == "i")
      return RationalExpr::constant(Matrix::Constant(1, 1, Complex(0, 1)), sig_);
    if (t.ident == "inv") {
      expect(Tok::LParen, "expected '(' after inv");
      ExprPtr e = parse_expr();
      expect(Tok::RParen, "expected ')'");
      return checked_inverse(e, t.pos);
    }
    if (t.ident == "kron") {
      expect(Tok::LParen, "expected '(' after kron");
      Matrix coeff = parse_constant_matrix();
      expect(Tok::Comma, "expected ',' in kron");
      Token v = lexer_.take();
      if (v.kind != Tok::Ident) throw SyntaxError("expected variable in kron", v.pos);
      VarRef ref = parse_var_name(v);
      expect(Tok::RParen, "expected ')'");
      return RationalExpr::scaled_variable(coeff, ref, sig_);
    }
    return RationalExpr::variable(parse_var_name(t), sig_);
  }

  VarRef parse_var_name(const Token& t) {
    const std::string& s = t.ident;
    if (s.size() < 2 || (s[0] != 'x' && s[0] != 'u'))
      throw SyntaxError("unknown identifier '" + s + "'", t.pos);
    int index = 0;
    auto res = std::from_chars(s.data() + 1, s.data() + s.size(), index);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw SyntaxError("unknown identifier '" + s + "'", t.pos);
    VarRef ref{s[0] == 'x' ? VarKind::SelfAdjoint : VarKind::Unitary, index - 1};
    try {
      check_var(sig_, ref);
    } catch (const UnknownVariableError& e) {
      throw UnknownVariableError(std::string(e.what()) + " (at offset " +
                                 std::to_string(t.pos) + ")");
    }
    return ref;
  }

  ExprPtr parse_complex_literal(bool negate_first) {
    Token first = lexer_.take();
    Complex value = first.kind == Tok::ImagNumber ? Complex(0, first.number)
                                                  : Complex(first.number, 0);
    if (negate_first) value = -value;
    // `a+bi` / `a-bi` fuse only when the real part came first.
    if (first.kind == Tok::Number &&
        (lexer_.peek().kind == Tok::Plus || lexer_.peek().kind == Tok::Minus) &&
        lexer_.peek2().kind == Tok::ImagNumber) {
      bool minus = lexer_.take().kind == Tok::Minus;
      Token imag = lexer_.take();
      value += Complex(0, minus ? -imag.number : imag.number);
    }
    return RationalExpr::constant(Matrix::Constant(1, 1, value), sig_);
  }

  ExprMatrix parse_matrix_grid() {
    expect(Tok::LBracket, "expected '['");
    ExprMatrix m;
    while (true) {
      expect(Tok::LBracket, "expected '[' starting a row");
      std::vector<ExprPtr> row;
      while (true) {
        ExprPtr e = parse_expr();
        if (e->rows() != 1 || e->cols() != 1)
          throw ShapeMismatchError("matrix entries must be scalar expressions");
        row.push_back(std::move(e));
        if (lexer_.peek().kind != Tok::Comma) break;
        lexer_.take();
      }
      expect(Tok::RBracket, "expected ']' ending a row");
      if (!m.entries.empty() && m.entries.front().size() != row.size())
        throw ShapeMismatchError("ragged matrix literal");
      m.entries.push_back(std::move(row));
      if (lexer_.peek().kind != Tok::Comma) break;
      lexer_.take();
    }
    expect(Tok::RBracket, "expected ']' ending the matrix");
    return m;
  }

  Matrix parse_constant_matrix() {
    std::size_t pos = lexer_.peek().pos;
    ExprMatrix grid = parse_matrix_grid();
    Matrix out(grid.rows(), grid.cols());
    for (Eigen::Index i = 0; i < grid.rows(); ++i)
      for (Eigen::Index j = 0; j < grid.cols(); ++j) {
        const ExprPtr& e = grid.entries[i][j];
        if (e->kind() != NodeKind::Constant)
          throw SyntaxError("kron coefficient must be a constant matrix", pos);
        out(i, j) = e->coefficient()(0, 0);
      }
    return out;
  }

  ExprPtr checked_inverse(const ExprPtr& e, std::size_t pos) {
    if (e->rows() != e->cols())
      throw SyntaxError("cannot invert a " + std::to_string(e->rows()) + "x" +
                            std::to_string(e->cols()) + " expression",
                        pos);
    return RationalExpr::inverse(e);
  }

  void expect(Tok kind, const char* message) {
    if (lexer_.peek().kind != kind) throw SyntaxError(message, lexer_.peek().pos);
    lexer_.take();
  }

  Lexer lexer_;
  Signature sig_;
};

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string format_complex(Complex z) {
  if (z.imag() == 0.0) return format_double(z.real());
  std::string imag = format_double(z.imag()) + "i";
  if (z.real() == 0.0) return imag;
  return format_double(z.real()) + (z.imag() < 0 ? "" : "+") + imag;
}

inline std::string format_matrix_literal(const Matrix& a) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out += i ? ",[" : "[";
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out += ",";
      out += format_complex(a(i, j));
    }
    out += "]";
  }
  return out + "]";
}

}  // namespace parser_detail

inline ExprPtr parse(const ExprSource& src) {
  return parser_detail::Parser(src.text, src.signature).parse_expression_eof();
}

inline ExprPtr parse(std::string_view text, Signature sig) {
  return parser_detail::Parser(text, sig).parse_expression_eof();
}

/// Parses a top-level matrix literal as a grid of scalar expressions.
inline ExprMatrix parse_matrix(std::string_view text, Signature sig) {
  ExprMatrix m = parser_detail::Parser(text, sig).parse_matrix_eof();
  m.validate();
  return m;
}

inline std::string var_name(VarRef v) {
  return (v.kind == VarKind::SelfAdjoint ? "x" : "u") + std::to_string(v.index + 1);
}

/// Canonical fully parenthesized rendering; parse(render(e)) is structurally
/// identical to e.
inline std::string render(const ExprPtr& e) {
  using namespace parser_detail;
  switch (e->kind()) {
    case NodeKind::Constant: {
      const Matrix& a = e->coefficient();
      if (a.rows() == 1 && a.cols() == 1) return format_complex(a(0, 0));
      return format_matrix_literal(a);
    }
    case NodeKind::ScaledVariable: {
      const Matrix& a = e->coefficient();
      if (a.rows() == 1 && a.cols() == 1 && a(0, 0) == Complex(1, 0)) return var_name(e->var());
      return "kron(" + format_matrix_literal(a) + ", " + var_name(e->var()) + ")";
    }
    case NodeKind::Sum:
      return "((" + render(e->lhs()) + ") + (" + render(e->rhs()) + "))";
    case NodeKind::Product:
      return "((" + render(e->lhs()) + ") * (" + render(e->rhs()) + "))";
    case NodeKind::Inverse:
      return "(" + render(e->lhs()) + ")^-1";
  }
  throw Error("unreachable");
}

/// Expression file: a `signature: d1=<n> d2=<m>` header line followed by the
/// expression text (which may span several lines).
inline ExprSource read_expr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open expression file: " + path);
  std::string header;
  std::getline(in, header);
  int d1 = -1, d2 = -1;
  if (std::sscanf(header.c_str(), " signature: d1=%d d2=%d", &d1, &d2) != 2)
    throw ConfigError("expression file must start with 'signature: d1=<n> d2=<m>': " + path);
  std::stringstream rest;
  rest << in.rdbuf();
  return ExprSource{rest.str(), Signature(d1, d2)};
}

inline void write_expr_file(const std::string& path, const ExprPtr& e) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write expression file: " + path);
  out << "signature: d1=" << e->signature().selfadjoint_count
      << " d2=" << e->signature().unitary_count << "\n"
      << render(e) << "\n";
}

}  // namespace ratspec
