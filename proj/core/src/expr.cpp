#include "daeo/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <utility>

namespace daeo {

namespace {

ExprPtr make_const(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::constant;
  e->value = v;
  return e;
}

ExprPtr make_var(VarKind k, int idx) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::variable;
  e->var = k;
  e->index = idx;
  return e;
}

ExprPtr make_unary(Expr::UnaryOp op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::unary;
  e->uop = op;
  e->a = std::move(a);
  return e;
}

ExprPtr make_binary(Expr::BinaryOp op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::binary;
  e->bop = op;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

bool is_const(const ExprPtr& e, double v) {
  return e->kind == Expr::Kind::constant && e->value == v;
}

bool is_any_const(const ExprPtr& e) { return e->kind == Expr::Kind::constant; }

// Simplifying constructors keep derivative trees small. They fold constants
// and drop additive/multiplicative identities; they never change values.
ExprPtr s_neg(ExprPtr a) {
  if (is_any_const(a)) return make_const(-a->value);
  if (a->kind == Expr::Kind::unary && a->uop == Expr::UnaryOp::neg) return a->a;
  return make_unary(Expr::UnaryOp::neg, std::move(a));
}

ExprPtr s_add(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (is_any_const(a) && is_any_const(b)) return make_const(a->value + b->value);
  return make_binary(Expr::BinaryOp::add, std::move(a), std::move(b));
}

ExprPtr s_sub(ExprPtr a, ExprPtr b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return s_neg(std::move(b));
  if (is_any_const(a) && is_any_const(b)) return make_const(a->value - b->value);
  return make_binary(Expr::BinaryOp::sub, std::move(a), std::move(b));
}

ExprPtr s_mul(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_any_const(a) && is_any_const(b)) return make_const(a->value * b->value);
  return make_binary(Expr::BinaryOp::mul, std::move(a), std::move(b));
}

ExprPtr s_div(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0.0)) return make_const(0.0);
  if (is_const(b, 1.0)) return a;
  return make_binary(Expr::BinaryOp::div, std::move(a), std::move(b));
}

ExprPtr s_pow(ExprPtr a, ExprPtr b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(b, 0.0)) return make_const(1.0);
  return make_binary(Expr::BinaryOp::pow, std::move(a), std::move(b));
}

struct Parser {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }

  bool peek_is(char c) {
    skip_ws();
    return pos < s.size() && s[pos] == c;
  }

  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    for (;;) {
      skip_ws();
      if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        char op = s[pos++];
        ExprPtr rhs = parse_term();
        lhs = make_binary(op == '+' ? Expr::BinaryOp::add : Expr::BinaryOp::sub,
                          std::move(lhs), std::move(rhs));
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_factor();
    for (;;) {
      skip_ws();
      if (pos < s.size() && (s[pos] == '*' || s[pos] == '/')) {
        char op = s[pos++];
        ExprPtr rhs = parse_factor();
        lhs = make_binary(op == '*' ? Expr::BinaryOp::mul : Expr::BinaryOp::div,
                          std::move(lhs), std::move(rhs));
      } else {
        return lhs;
      }
    }
  }

  // '^' binds tighter than unary minus and associates to the right.
  ExprPtr parse_factor() {
    skip_ws();
    if (pos < s.size() && s[pos] == '-') {
      ++pos;
      return make_unary(Expr::UnaryOp::neg, parse_factor());
    }
    ExprPtr b = parse_base();
    skip_ws();
    if (pos < s.size() && s[pos] == '^') {
      ++pos;
      ExprPtr e = parse_factor();
      return make_binary(Expr::BinaryOp::pow, std::move(b), std::move(e));
    }
    return b;
  }

  ExprPtr parse_base() {
    skip_ws();
    if (pos >= s.size()) throw ParseError("unexpected end of expression", pos);
    char c = s[pos];
    if (c == '(') {
      ++pos;
      ExprPtr inner = parse_expr();
      skip_ws();
      if (pos >= s.size() || s[pos] != ')')
        throw ParseError("expected ')'", pos);
      ++pos;
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos);
  }

  ExprPtr parse_number() {
    const char* begin = s.c_str() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("invalid number", pos);
    pos += static_cast<std::size_t>(end - begin);
    if (!std::isfinite(v)) throw ParseError("number out of range", pos);
    return make_const(v);
  }

  ExprPtr parse_ident() {
    std::size_t start = pos;
    std::size_t letters_end = pos;
    while (letters_end < s.size() &&
           ((s[letters_end] >= 'a' && s[letters_end] <= 'z') ||
            (s[letters_end] >= 'A' && s[letters_end] <= 'Z')))
      ++letters_end;
    std::size_t digits_end = letters_end;
    while (digits_end < s.size() && s[digits_end] >= '0' && s[digits_end] <= '9')
      ++digits_end;
    std::string letters = s.substr(start, letters_end - start);
    std::string digits = s.substr(letters_end, digits_end - letters_end);
    pos = digits_end;

    if (digits.empty()) {
      if (letters == "t") return make_var(VarKind::t, 0);
      static const std::pair<const char*, Expr::UnaryOp> fns[] = {
          {"sin", Expr::UnaryOp::sin},   {"cos", Expr::UnaryOp::cos},
          {"exp", Expr::UnaryOp::exp},   {"log", Expr::UnaryOp::log},
          {"tanh", Expr::UnaryOp::tanh}, {"sqrt", Expr::UnaryOp::sqrt},
          {"abs", Expr::UnaryOp::abs},   {"sign", Expr::UnaryOp::sign}};
      for (const auto& [name, op] : fns) {
        if (letters == name) {
          skip_ws();
          if (pos >= s.size() || s[pos] != '(')
            throw ParseError("function '" + letters + "' requires '('", pos);
          ++pos;
          ExprPtr arg = parse_expr();
          skip_ws();
          if (pos >= s.size() || s[pos] != ')')
            throw ParseError("expected ')'", pos);
          ++pos;
          return make_unary(op, std::move(arg));
        }
      }
      throw ParseError("unknown identifier '" + letters + "'", start);
    }

    VarKind kind;
    if (letters == "x") kind = VarKind::x;
    else if (letters == "u") kind = VarKind::u;
    else if (letters == "y") kind = VarKind::y;
    else if (letters == "w") kind = VarKind::w;
    else throw ParseError("unknown identifier '" + letters + digits + "'", start);
    long idx = std::strtol(digits.c_str(), nullptr, 10);
    if (idx < 1) throw ParseError("variable indices start at 1", start);
    return make_var(kind, static_cast<int>(idx - 1));
  }
};

const char* var_prefix(VarKind k) {
  switch (k) {
    case VarKind::x: return "x";
    case VarKind::u: return "u";
    case VarKind::y: return "y";
    case VarKind::w: return "w";
    case VarKind::t: return "t";
  }
  return "?";
}

const char* fn_name(Expr::UnaryOp op) {
  switch (op) {
    case Expr::UnaryOp::neg: return "-";
    case Expr::UnaryOp::sin: return "sin";
    case Expr::UnaryOp::cos: return "cos";
    case Expr::UnaryOp::exp: return "exp";
    case Expr::UnaryOp::log: return "log";
    case Expr::UnaryOp::tanh: return "tanh";
    case Expr::UnaryOp::sqrt: return "sqrt";
    case Expr::UnaryOp::abs: return "abs";
    case Expr::UnaryOp::sign: return "sign";
  }
  return "?";
}

// Precedence levels: +,- are 1; *,/ are 2; unary minus 3; ^ is 4; atoms 5.
int level_of(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::constant:
      return e.value < 0 ? 3 : 5;
    case Expr::Kind::variable:
      return 5;
    case Expr::Kind::unary:
      return e.uop == Expr::UnaryOp::neg ? 3 : 5;
    case Expr::Kind::binary:
      switch (e.bop) {
        case Expr::BinaryOp::add:
        case Expr::BinaryOp::sub: return 1;
        case Expr::BinaryOp::mul:
        case Expr::BinaryOp::div: return 2;
        case Expr::BinaryOp::pow: return 4;
      }
  }
  return 5;
}

void format_double(double v, std::string& out) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void print_expr(const Expr& e, int min_level, std::string& out) {
  const int lv = level_of(e);
  const bool parens = lv < min_level;
  if (parens) out += '(';
  switch (e.kind) {
    case Expr::Kind::constant:
      format_double(e.value, out);
      break;
    case Expr::Kind::variable:
      out += var_prefix(e.var);
      if (e.var != VarKind::t) out += std::to_string(e.index + 1);
      break;
    case Expr::Kind::unary:
      if (e.uop == Expr::UnaryOp::neg) {
        out += '-';
        print_expr(*e.a, 3, out);
      } else {
        out += fn_name(e.uop);
        out += '(';
        print_expr(*e.a, 0, out);
        out += ')';
      }
      break;
    case Expr::Kind::binary: {
      const char* op = nullptr;
      int lmin = lv, rmin = lv + 1;
      switch (e.bop) {
        case Expr::BinaryOp::add: op = "+"; break;
        case Expr::BinaryOp::sub: op = "-"; break;
        case Expr::BinaryOp::mul: op = "*"; break;
        case Expr::BinaryOp::div: op = "/"; break;
        case Expr::BinaryOp::pow:
          op = "^";
          lmin = 5;  // base of '^' must be an atom or parenthesized
          rmin = 3;  // exponent may be a unary minus or another power
          break;
      }
      print_expr(*e.a, lmin, out);
      out += op;
      print_expr(*e.b, rmin, out);
      break;
    }
  }
  if (parens) out += ')';
}

double apply_unary(Expr::UnaryOp op, double v) {
  switch (op) {
    case Expr::UnaryOp::neg: return -v;
    case Expr::UnaryOp::sin: return std::sin(v);
    case Expr::UnaryOp::cos: return std::cos(v);
    case Expr::UnaryOp::exp: return std::exp(v);
    case Expr::UnaryOp::log:
      if (v <= 0.0) throw EvalError("log of non-positive value");
      return std::log(v);
    case Expr::UnaryOp::tanh: return std::tanh(v);
    case Expr::UnaryOp::sqrt:
      if (v < 0.0) throw EvalError("sqrt of negative value");
      return std::sqrt(v);
    case Expr::UnaryOp::abs: return std::fabs(v);
    case Expr::UnaryOp::sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  }
  throw EvalError("unknown unary operator");
}

}  // namespace

ExprPtr parse_expression(const std::string& text) {
  Parser p{text};
  ExprPtr e = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size())
    throw ParseError(std::string("unexpected character '") + text[p.pos] + "'",
                     p.pos);
  return e;
}

double eval(const Expr& e, const EvalContext& ctx) {
  switch (e.kind) {
    case Expr::Kind::constant:
      return e.value;
    case Expr::Kind::variable: {
      const Vec* v = nullptr;
      switch (e.var) {
        case VarKind::x: v = &ctx.x; break;
        case VarKind::u: v = &ctx.u; break;
        case VarKind::y: v = &ctx.y; break;
        case VarKind::w: v = &ctx.w; break;
        case VarKind::t: return ctx.t;
      }
      if (e.index >= v->size())
        throw EvalError(std::string("variable ") + var_prefix(e.var) +
                        std::to_string(e.index + 1) + " not bound");
      return (*v)(e.index);
    }
    case Expr::Kind::unary: {
      double r = apply_unary(e.uop, eval(*e.a, ctx));
      if (!std::isfinite(r)) throw EvalError("non-finite intermediate value");
      return r;
    }
    case Expr::Kind::binary: {
      double a = eval(*e.a, ctx);
      double b = eval(*e.b, ctx);
      double r = 0.0;
      switch (e.bop) {
        case Expr::BinaryOp::add: r = a + b; break;
        case Expr::BinaryOp::sub: r = a - b; break;
        case Expr::BinaryOp::mul: r = a * b; break;
        case Expr::BinaryOp::div:
          if (b == 0.0) throw EvalError("division by zero");
          r = a / b;
          break;
        case Expr::BinaryOp::pow:
          if (a < 0.0 && b != std::floor(b))
            throw EvalError("fractional power of negative base");
          if (a == 0.0 && b < 0.0) throw EvalError("zero raised to negative power");
          r = std::pow(a, b);
          break;
      }
      if (!std::isfinite(r)) throw EvalError("non-finite intermediate value");
      return r;
    }
  }
  throw EvalError("malformed expression node");
}

ExprPtr differentiate(const Expr& e, VarKind kind, int index) {
  switch (e.kind) {
    case Expr::Kind::constant:
      return make_const(0.0);
    case Expr::Kind::variable:
      return make_const(e.var == kind && e.index == index ? 1.0 : 0.0);
    case Expr::Kind::unary: {
      ExprPtr da = differentiate(*e.a, kind, index);
      switch (e.uop) {
        case Expr::UnaryOp::neg:
          return s_neg(std::move(da));
        case Expr::UnaryOp::sin:
          return s_mul(make_unary(Expr::UnaryOp::cos, e.a), std::move(da));
        case Expr::UnaryOp::cos:
          return s_neg(s_mul(make_unary(Expr::UnaryOp::sin, e.a), std::move(da)));
        case Expr::UnaryOp::exp:
          return s_mul(make_unary(Expr::UnaryOp::exp, e.a), std::move(da));
        case Expr::UnaryOp::log:
          return s_div(std::move(da), e.a);
        case Expr::UnaryOp::tanh: {
          ExprPtr th = make_unary(Expr::UnaryOp::tanh, e.a);
          return s_mul(s_sub(make_const(1.0), s_mul(th, th)), std::move(da));
        }
        case Expr::UnaryOp::sqrt:
          return s_div(std::move(da),
                       s_mul(make_const(2.0), make_unary(Expr::UnaryOp::sqrt, e.a)));
        case Expr::UnaryOp::abs:
          // d|v|/dv = sign(v); sign(0) = 0 here.
          return s_mul(make_unary(Expr::UnaryOp::sign, e.a), std::move(da));
        case Expr::UnaryOp::sign:
          return make_const(0.0);
      }
      break;
    }
    case Expr::Kind::binary: {
      ExprPtr da = differentiate(*e.a, kind, index);
      ExprPtr db = differentiate(*e.b, kind, index);
      switch (e.bop) {
        case Expr::BinaryOp::add:
          return s_add(std::move(da), std::move(db));
        case Expr::BinaryOp::sub:
          return s_sub(std::move(da), std::move(db));
        case Expr::BinaryOp::mul:
          return s_add(s_mul(std::move(da), e.b), s_mul(e.a, std::move(db)));
        case Expr::BinaryOp::div:
          return s_div(s_sub(s_mul(std::move(da), e.b), s_mul(e.a, std::move(db))),
                       s_pow(e.b, make_const(2.0)));
        case Expr::BinaryOp::pow: {
          if (is_any_const(e.b)) {
            double c = e.b->value;
            return s_mul(s_mul(make_const(c), s_pow(e.a, make_const(c - 1.0))),
                         std::move(da));
          }
          // General case f^g * (g' log f + g f'/f); valid for f > 0.
          ExprPtr logf = make_unary(Expr::UnaryOp::log, e.a);
          ExprPtr term = s_add(s_mul(std::move(db), std::move(logf)),
                               s_div(s_mul(e.b, std::move(da)), e.a));
          return s_mul(s_pow(e.a, e.b), std::move(term));
        }
      }
      break;
    }
  }
  throw std::logic_error("differentiate: malformed expression node");
}

std::string to_string(const Expr& e) {
  std::string out;
  print_expr(e, 0, out);
  return out;
}

bool structurally_equal(const Expr& lhs, const Expr& rhs) {
  if (lhs.kind != rhs.kind) return false;
  switch (lhs.kind) {
    case Expr::Kind::constant:
      return lhs.value == rhs.value;
    case Expr::Kind::variable:
      return lhs.var == rhs.var && lhs.index == rhs.index;
    case Expr::Kind::unary:
      return lhs.uop == rhs.uop && structurally_equal(*lhs.a, *rhs.a);
    case Expr::Kind::binary:
      return lhs.bop == rhs.bop && structurally_equal(*lhs.a, *rhs.a) &&
             structurally_equal(*lhs.b, *rhs.b);
  }
  return false;
}

bool has_nonsmooth_primitive(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::constant:
    case Expr::Kind::variable:
      return false;
    case Expr::Kind::unary:
      if (e.uop == Expr::UnaryOp::abs || e.uop == Expr::UnaryOp::sqrt ||
          e.uop == Expr::UnaryOp::log || e.uop == Expr::UnaryOp::sign)
        return true;
      return has_nonsmooth_primitive(*e.a);
    case Expr::Kind::binary:
      return has_nonsmooth_primitive(*e.a) || has_nonsmooth_primitive(*e.b);
  }
  return false;
}

namespace {

void check_indices(const Expr& e, const VectorFunction& f) {
  switch (e.kind) {
    case Expr::Kind::constant:
      return;
    case Expr::Kind::variable: {
      int dim = 0;
      switch (e.var) {
        case VarKind::x: dim = f.n_x; break;
        case VarKind::u: dim = f.n_u; break;
        case VarKind::y: dim = f.n_y; break;
        case VarKind::w: dim = f.n_w; break;
        case VarKind::t:
          if (!f.allow_t)
            throw std::invalid_argument("variable t is not allowed here");
          return;
      }
      if (e.index >= dim)
        throw std::invalid_argument(
            std::string("variable ") + var_prefix(e.var) +
            std::to_string(e.index + 1) + " exceeds declared dimension " +
            std::to_string(dim));
      return;
    }
    case Expr::Kind::unary:
      check_indices(*e.a, f);
      return;
    case Expr::Kind::binary:
      check_indices(*e.a, f);
      check_indices(*e.b, f);
      return;
  }
}

}  // namespace

void VectorFunction::validate() const {
  for (const auto& e : exprs) {
    if (!e) throw std::invalid_argument("null expression in vector function");
    check_indices(*e, *this);
  }
}

Vec VectorFunction::eval(const EvalContext& ctx) const {
  Vec out(out_dim());
  for (int i = 0; i < out_dim(); ++i) out(i) = daeo::eval(*exprs[i], ctx);
  return out;
}

std::vector<std::vector<ExprPtr>> VectorFunction::derivative_table(
    VarKind kind) const {
  int dim = 0;
  switch (kind) {
    case VarKind::x: dim = n_x; break;
    case VarKind::u: dim = n_u; break;
    case VarKind::y: dim = n_y; break;
    case VarKind::w: dim = n_w; break;
    case VarKind::t: dim = 1; break;
  }
  std::vector<std::vector<ExprPtr>> table(exprs.size());
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    table[i].resize(dim);
    for (int j = 0; j < dim; ++j)
      table[i][j] = differentiate(*exprs[i], kind, j);
  }
  return table;
}

Mat VectorFunction::jacobian(VarKind kind, const EvalContext& ctx) const {
  auto table = derivative_table(kind);
  const int rows = out_dim();
  const int cols = rows ? static_cast<int>(table[0].size()) : 0;
  Mat J(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) J(i, j) = daeo::eval(*table[i][j], ctx);
  return J;
}

namespace {

Vec sample_box(std::mt19937_64& rng, int dim, double box) {
  std::uniform_real_distribution<double> dist(-box, box);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = dist(rng);
  return v;
}

}  // namespace

double estimate_lipschitz_margin(const VectorFunction& f_l, const Mat& F,
                                 double box, int n_pairs, std::uint64_t seed) {
  if (F.cols() != f_l.n_x)
    throw std::invalid_argument("Lipschitz shape matrix: column count must equal the x-dimension");
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    EvalContext ca, cb;
    ca.u = cb.u = sample_box(rng, f_l.n_u, box);
    ca.y = cb.y = sample_box(rng, f_l.n_y, box);
    ca.x = sample_box(rng, f_l.n_x, box);
    if (i % 2 == 0) {
      cb.x = ca.x + sample_box(rng, f_l.n_x, 1e-5 * std::max(box, 1.0));
    } else {
      cb.x = sample_box(rng, f_l.n_x, box);
    }
    double num, denom;
    try {
      num = (f_l.eval(cb) - f_l.eval(ca)).norm();
      denom = (F * (cb.x - ca.x)).norm();
    } catch (const EvalError&) {
      continue;  // pair outside the nonlinearity's domain
    }
    if (denom == 0.0) {
      if (num > 1e-12) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, num / denom);
  }
  return worst;
}

double estimate_monotonicity_margin(const VectorFunction& f_m, const Mat& Theta,
                                    double mu, double box, int n_pairs,
                                    std::uint64_t seed) {
  if (Theta.rows() != f_m.n_w || Theta.cols() != f_m.out_dim())
    throw std::invalid_argument("monotonicity weight: shape must be n_w by out_dim");
  std::mt19937_64 rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_pairs; ++i) {
    EvalContext ca, cb;
    ca.u = cb.u = sample_box(rng, f_m.n_u, box);
    ca.y = cb.y = sample_box(rng, f_m.n_y, box);
    ca.w = sample_box(rng, f_m.n_w, box);
    if (i % 2 == 0) {
      cb.w = ca.w + sample_box(rng, f_m.n_w, 1e-5 * std::max(box, 1.0));
    } else {
      cb.w = sample_box(rng, f_m.n_w, box);
    }
    Vec d = cb.w - ca.w;
    if (d.norm() == 0.0) continue;
    double slack;
    try {
      slack = d.dot(Theta * (f_m.eval(cb) - f_m.eval(ca))) -
              0.5 * mu * d.squaredNorm();
    } catch (const EvalError&) {
      continue;
    }
    worst = std::min(worst, slack);
  }
  return worst;
}

}  // namespace daeo
