#pragma once
// sdpl/parse.hpp
//
// Lexer and recursive-descent parser for the concrete syntax.
//
//   program  := ("arg" IDENT ":" ty ";")* term
//   term     := "let" bind ("," bind)* "in" term
//             | "if" bool "then" term "else" term
//             | "while" bool "do" term
//             | "letrec" IDENT "(" IDENT ":" ty ")" ":" ty ":=" term "in" term
//             | sum
//   bind     := IDENT ":" ty "=" term
//             | "(" IDENT ":" ty ("," IDENT ":" ty)+ ")" "=" term
//   sum      := postfix ("+" postfix)*
//   postfix  := primary (".rd(" IDENT ":" ty "." term ")" "(" term ")"
//               | ".fd(" IDENT ":" ty "." term ")" "(" term ")")*
//   primary  := NUMBER | "*" | IDENT | NAME "(" term ("," term)* ")"
//             | "fst" "(" term ")" | "snd" "(" term ")"
//             | "(" term ("," term)* ")"
//   bool     := "true" | "false" | NAME "(" term ")"
//   ty       := atom ("*" atom)*          (left-associative product)
//   atom     := "real" ("^" INT)? | "1" | "(" ty ")"
//
// Chained lets, tuple patterns and fd are sugar and are expanded during
// parsing; the resulting AST contains core constructs only. Multi-argument
// applications f(a, b, c) build left-nested pairs. "--" starts a line
// comment. Since every binder is ascribed, the parser can synthesize the
// body type that the fd expansion needs from its lexical environment.

#include <cctype>
#include <string>
#include <vector>

#include "sdpl/syntax.hpp"
#include "sdpl/typing.hpp"

namespace sdpl {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, Span sp)
      : std::runtime_error(std::to_string(sp.line) + ":" + std::to_string(sp.col) +
                           ": " + msg),
        span(sp) {}
  Span span;
};

struct Program {
  std::vector<std::pair<std::string, Ty>> args;
  TermPtr term;
};

namespace detail {

enum class Tok { Ident, Keyword, Number, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double num = 0.0;
  Span span;
};

inline bool is_ident_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
inline bool is_ident_char(char c) {
  return std::isalnum((unsigned char)c) || c == '_' || c == '\'';
}

inline const std::set<std::string>& keywords() {
  static const std::set<std::string> kw = {"let",  "in",   "if",     "then",
                                           "else", "while", "do",     "letrec",
                                           "fst",  "snd",  "true",   "false",
                                           "arg",  "real"};
  return kw;
}

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') { ++line; col = 1; } else { ++col; }
    }
    i += n;
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') { advance(1); continue; }
    if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Span sp{line, col};
    if (is_ident_start(c)) {
      size_t j = i;
      while (j < src.size() && is_ident_char(src[j])) ++j;
      std::string word = src.substr(i, j - i);
      advance(j - i);
      out.push_back({keywords().count(word) ? Tok::Keyword : Tok::Ident, word, 0, sp});
      continue;
    }
    bool neg_num = c == '-' && i + 1 < src.size() &&
                   (std::isdigit((unsigned char)src[i + 1]) || src[i + 1] == '.');
    if (std::isdigit((unsigned char)c) || neg_num) {
      size_t j = i + (neg_num ? 1 : 0);
      while (j < src.size() && std::isdigit((unsigned char)src[j])) ++j;
      if (j < src.size() && src[j] == '.' && j + 1 < src.size() &&
          std::isdigit((unsigned char)src[j + 1])) {
        ++j;
        while (j < src.size() && std::isdigit((unsigned char)src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit((unsigned char)src[k])) {
          j = k;
          while (j < src.size() && std::isdigit((unsigned char)src[j])) ++j;
        }
      }
      std::string text = src.substr(i, j - i);
      advance(j - i);
      out.push_back({Tok::Number, text, std::strtod(text.c_str(), nullptr), sp});
      continue;
    }
    if (c == ':' && i + 1 < src.size() && src[i + 1] == '=') {
      advance(2);
      out.push_back({Tok::Sym, ":=", 0, sp});
      continue;
    }
    static const std::string singles = "()+*,.;:=^";
    if (singles.find(c) != std::string::npos) {
      advance(1);
      out.push_back({Tok::Sym, std::string(1, c), 0, sp});
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", sp);
  }
  out.push_back({Tok::End, "", 0, {line, col}});
  return out;
}

class Parser {
public:
  Parser(const std::string& src, const Signature& sig)
      : toks_(lex(src)), sig_(sig) {}

  Program parse_program() {
    Program prog;
    while (at_keyword("arg")) {
      next();
      Token name = expect(Tok::Ident, "argument name");
      expect_sym(":");
      Ty ty = parse_ty();
      expect_sym(";");
      prog.args.emplace_back(name.text, ty);
      ctx_.emplace_back(name.text, ty);
    }
    prog.term = parse_term();
    if (peek().kind != Tok::End)
      throw ParseError("unexpected trailing input '" + peek().text + "'", peek().span);
    return prog;
  }

  TermPtr parse_single_term() {
    TermPtr t = parse_term();
    if (peek().kind != Tok::End)
      throw ParseError("unexpected trailing input '" + peek().text + "'", peek().span);
    return t;
  }

private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  const Signature& sig_;
  Context ctx_;       // lexical environment, for the fd sugar
  FunContext funs_;   // lexical function environment, for the fd sugar
  FreshNames fresh_;

  const Token& peek(size_t k = 0) const {
    size_t i = pos_ + k;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_sym(const std::string& s) const {
    return peek().kind == Tok::Sym && peek().text == s;
  }
  bool at_keyword(const std::string& s) const {
    return peek().kind == Tok::Keyword && peek().text == s;
  }
  Token expect(Tok k, const std::string& what) {
    if (peek().kind != k)
      throw ParseError("expected " + what + ", got '" + peek().text + "'",
                       peek().span);
    return next();
  }
  void expect_sym(const std::string& s) {
    if (!at_sym(s))
      throw ParseError("expected '" + s + "', got '" + peek().text + "'",
                       peek().span);
    next();
  }
  void expect_keyword(const std::string& s) {
    if (!at_keyword(s))
      throw ParseError("expected '" + s + "', got '" + peek().text + "'",
                       peek().span);
    next();
  }

  // ------------------------------------------------------------- types

  Ty parse_ty_atom() {
    if (at_keyword("real")) {
      next();
      if (at_sym("^")) {
        next();
        Token n = expect(Tok::Number, "exponent");
        int k = static_cast<int>(n.num);
        if (k < 1 || k != n.num)
          throw ParseError("real^n needs a positive integer", n.span);
        return Ty::reals(k);
      }
      return Ty::real();
    }
    if (peek().kind == Tok::Number && peek().text == "1") {
      next();
      return Ty::unit();
    }
    if (at_sym("(")) {
      next();
      Ty t = parse_ty();
      expect_sym(")");
      return t;
    }
    throw ParseError("expected a type, got '" + peek().text + "'", peek().span);
  }

  Ty parse_ty() {
    Ty t = parse_ty_atom();
    while (at_sym("*")) {
      next();
      t = Ty::prod(t, parse_ty_atom());
    }
    return t;
  }

  // ------------------------------------------------------------- terms

  TermPtr parse_term() {
    if (at_keyword("let")) return parse_let();
    if (at_keyword("if")) {
      Span sp = next().span;
      BoolTerm g = parse_bool();
      expect_keyword("then");
      TermPtr a = parse_term();
      expect_keyword("else");
      TermPtr b = parse_term();
      return t_if(std::move(g), std::move(a), std::move(b), sp);
    }
    if (at_keyword("while")) {
      Span sp = next().span;
      BoolTerm g = parse_bool();
      expect_keyword("do");
      TermPtr body = parse_term();
      return t_while(std::move(g), std::move(body), sp);
    }
    if (at_keyword("letrec")) return parse_letrec();
    return parse_sum();
  }

  struct Bind {
    // simple binder or expanded tuple pattern components
    std::vector<std::pair<std::string, Ty>> names;  // >1 means pattern
    TermPtr bound;
    Span span;
  };

  TermPtr parse_let() {
    Span sp = next().span;  // 'let'
    std::vector<Bind> binds;
    for (;;) {
      binds.push_back(parse_bind());
      // each binder scopes over the following binds and the body
      push_bind_ctx(binds.back());
      if (at_sym(",")) { next(); continue; }
      break;
    }
    expect_keyword("in");
    TermPtr body = parse_term();
    for (auto it = binds.rbegin(); it != binds.rend(); ++it) {
      pop_bind_ctx(*it);
      body = desugar_bind(*it, body);
    }
    (void)sp;
    return body;
  }

  Bind parse_bind() {
    Bind b;
    b.span = peek().span;
    if (at_sym("(")) {
      next();
      for (;;) {
        Token name = expect(Tok::Ident, "pattern variable");
        expect_sym(":");
        Ty ty = parse_ty();
        b.names.emplace_back(name.text, ty);
        if (at_sym(",")) { next(); continue; }
        break;
      }
      expect_sym(")");
      if (b.names.size() < 2)
        throw ParseError("tuple pattern needs at least two components", b.span);
    } else {
      Token name = expect(Tok::Ident, "binder name");
      expect_sym(":");
      Ty ty = parse_ty();
      b.names.emplace_back(name.text, ty);
    }
    expect_sym("=");
    b.bound = parse_term();
    return b;
  }

  void push_bind_ctx(const Bind& b) {
    for (const auto& nt : b.names) ctx_.push_back(nt);
  }
  void pop_bind_ctx(const Bind& b) {
    ctx_.resize(ctx_.size() - b.names.size());
  }

  // let x : T = m in body, or the tuple-pattern expansion
  //   let p' : T1*..*Tn = m in let x1 = fst(..) in ... in body
  TermPtr desugar_bind(const Bind& b, TermPtr body) {
    if (b.names.size() == 1)
      return t_let(b.names[0].first, b.names[0].second, b.bound, std::move(body),
                   b.span);
    Ty whole = b.names[0].second;
    for (size_t i = 1; i < b.names.size(); ++i)
      whole = Ty::prod(whole, b.names[i].second);
    std::set<std::string> avoid = all_names(b.bound);
    avoid.merge(all_names(body));
    for (const auto& nt : b.names) avoid.insert(nt.first);
    std::string p = fresh_.fresh("p", avoid);
    const size_t n = b.names.size();
    for (size_t idx = n; idx-- > 0;) {
      // component access path in the left-nested product
      TermPtr acc = t_var(p);
      for (size_t k = 0; k < n - 1 - idx; ++k) acc = t_fst(std::move(acc));
      if (idx > 0) acc = t_snd(std::move(acc));
      body = t_let(b.names[idx].first, b.names[idx].second, std::move(acc),
                   std::move(body), b.span);
    }
    return t_let(p, whole, b.bound, std::move(body), b.span);
  }

  TermPtr parse_letrec() {
    Span sp = next().span;  // 'letrec'
    Token f = expect(Tok::Ident, "function name");
    expect_sym("(");
    Token x = expect(Tok::Ident, "parameter name");
    expect_sym(":");
    Ty a = parse_ty();
    expect_sym(")");
    expect_sym(":");
    Ty bty = parse_ty();
    expect_sym(":=");
    // the body sees only its parameter and the extended function env
    Context saved_ctx;
    saved_ctx.swap(ctx_);
    ctx_.emplace_back(x.text, a);
    funs_.emplace_back(f.text, FunSig{a, bty});
    TermPtr body = parse_term();
    ctx_ = std::move(saved_ctx);
    expect_keyword("in");
    TermPtr cont = parse_term();
    funs_.pop_back();
    return t_letrec(f.text, x.text, a, bty, std::move(body), std::move(cont), sp);
  }

  TermPtr parse_sum() {
    TermPtr t = parse_postfix();
    while (at_sym("+")) {
      Span sp = next().span;
      t = t_add(std::move(t), parse_postfix(), sp);
    }
    return t;
  }

  TermPtr parse_postfix() {
    TermPtr t = parse_primary();
    while (at_sym(".")) {
      Span sp = next().span;
      Token kind = expect(Tok::Ident, "'rd' or 'fd'");
      if (kind.text != "rd" && kind.text != "fd")
        throw ParseError("expected 'rd' or 'fd' after '.'", kind.span);
      expect_sym("(");
      Token x = expect(Tok::Ident, "bound variable");
      expect_sym(":");
      Ty xty = parse_ty();
      expect_sym(".");
      ctx_.emplace_back(x.text, xty);
      TermPtr body = parse_term();
      expect_sym(")");
      expect_sym("(");
      TermPtr point = parse_term_outside_binder();
      expect_sym(")");
      if (kind.text == "rd") {
        ctx_.pop_back();
        t = t_rd(std::move(t), x.text, xty, std::move(body), std::move(point), sp);
      } else {
        // fd sugar: needs the body type, synthesized from the lexical env
        Ty mty = Ty::real();
        try {
          mty = type_of(sig_, funs_, ctx_, body);
        } catch (const TypeError& e) {
          throw ParseError(std::string("cannot expand fd here: ") + e.what(),
                           kind.span);
        }
        ctx_.pop_back();
        t = fd_term(x.text, xty, body, mty, point, t, fresh_);
      }
    }
    return t;
  }

  // The rd/fd point is parsed outside the binder's scope.
  TermPtr parse_term_outside_binder() {
    auto saved = ctx_.back();
    ctx_.pop_back();
    TermPtr t = parse_term();
    ctx_.push_back(saved);
    return t;
  }

  TermPtr parse_primary() {
    const Token& tk = peek();
    if (tk.kind == Tok::Number) {
      next();
      return t_const(tk.num, tk.span);
    }
    if (at_sym("*")) {
      next();
      return t_star(tk.span);
    }
    if (at_keyword("fst") || at_keyword("snd")) {
      bool is_fst = tk.text == "fst";
      next();
      expect_sym("(");
      TermPtr m = parse_term();
      expect_sym(")");
      return is_fst ? t_fst(std::move(m), tk.span) : t_snd(std::move(m), tk.span);
    }
    if (at_sym("(")) {
      next();
      TermPtr t = parse_term();
      while (at_sym(",")) {
        next();
        t = t_pair(std::move(t), parse_term(), tk.span);
      }
      expect_sym(")");
      return t;
    }
    if (tk.kind == Tok::Ident) {
      next();
      if (at_sym("(")) {
        next();
        TermPtr arg = parse_term();
        while (at_sym(",")) {
          next();
          arg = t_pair(std::move(arg), parse_term(), tk.span);
        }
        expect_sym(")");
        if (sig_.is_op(tk.text)) return t_op(tk.text, std::move(arg), tk.span);
        return t_call(tk.text, std::move(arg), tk.span);
      }
      return t_var(tk.text, tk.span);
    }
    throw ParseError("expected a term, got '" + tk.text + "'", tk.span);
  }

  BoolTerm parse_bool() {
    const Token& tk = peek();
    if (at_keyword("true")) { next(); return b_true(); }
    if (at_keyword("false")) { next(); return b_false(); }
    if (tk.kind == Tok::Ident) {
      if (!sig_.is_pred(tk.text))
        throw ParseError("unknown predicate '" + tk.text + "'", tk.span);
      next();
      expect_sym("(");
      TermPtr arg = parse_term();
      expect_sym(")");
      return b_pred(tk.text, std::move(arg));
    }
    throw ParseError("expected a guard, got '" + tk.text + "'", tk.span);
  }
};

}  // namespace detail

inline TermPtr parse_term(const std::string& src, const Signature& sig) {
  return detail::Parser(src, sig).parse_single_term();
}

inline Program parse_program(const std::string& src, const Signature& sig) {
  return detail::Parser(src, sig).parse_program();
}

}  // namespace sdpl
