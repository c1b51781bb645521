#include "adlim/profile.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

namespace adlim {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}
}  // namespace

Profile::Profile() { root_.kind = Kind::Const; root_.a = 0.0; }

Profile Profile::constant(double c) {
  Node n;
  n.kind = Kind::Const;
  n.a = c;
  return Profile(n);
}

Profile Profile::cosine(double amplitude, double freq, double phase) {
  Node n;
  n.kind = Kind::Cosine;
  n.a = amplitude;
  n.b = freq;
  n.c = phase;
  return Profile(n);
}

Profile Profile::gaussian(double amplitude, double center, double width) {
  if (!(width > 0.0)) {
    throw std::invalid_argument("gaussian profile width must be positive");
  }
  Node n;
  n.kind = Kind::Gaussian;
  n.a = amplitude;
  n.b = center;
  n.c = width;
  return Profile(n);
}

Profile Profile::exp_of(const Profile& exponent, double amplitude) {
  Node n;
  n.kind = Kind::ExpOf;
  n.a = amplitude;
  n.kids.push_back(exponent.root_);
  return Profile(n);
}

Profile Profile::operator+(const Profile& other) const {
  Node n;
  n.kind = Kind::Sum;
  flatten_sum(root_, &n.kids);
  flatten_sum(other.root_, &n.kids);
  return Profile(n);
}

Profile Profile::operator-(const Profile& other) const {
  return *this + other.scaled(-1.0);
}

Profile Profile::scaled(double factor) const {
  return Profile(scaled_node(root_, factor));
}

Profile::Node Profile::scaled_node(const Node& n, double factor) {
  Node out = n;
  if (n.kind == Kind::Sum) {
    for (auto& kid : out.kids) kid = scaled_node(kid, factor);
  } else {
    out.a *= factor;
  }
  return out;
}

void Profile::flatten_sum(const Node& n, std::vector<Node>* out) {
  if (n.kind == Kind::Sum) {
    for (const auto& kid : n.kids) flatten_sum(kid, out);
  } else if (!(n.kind == Kind::Const && n.a == 0.0)) {
    out->push_back(n);
  }
}

double Profile::node_value(const Node& n, double x) {
  switch (n.kind) {
    case Kind::Const:
      return n.a;
    case Kind::Cosine:
      return n.a * std::cos(n.b * x + n.c);
    case Kind::Gaussian: {
      double u = (x - n.b) / n.c;
      return n.a * std::exp(-u * u);
    }
    case Kind::ExpOf:
      return n.a * std::exp(node_value(n.kids[0], x));
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& kid : n.kids) s += node_value(kid, x);
      return s;
    }
  }
  return 0.0;
}

double Profile::node_deriv(const Node& n, double x) {
  switch (n.kind) {
    case Kind::Const:
      return 0.0;
    case Kind::Cosine:
      return -n.a * n.b * std::sin(n.b * x + n.c);
    case Kind::Gaussian: {
      double u = (x - n.b) / n.c;
      return n.a * std::exp(-u * u) * (-2.0 * u / n.c);
    }
    case Kind::ExpOf:
      return node_value(n, x) * node_deriv(n.kids[0], x);
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& kid : n.kids) s += node_deriv(kid, x);
      return s;
    }
  }
  return 0.0;
}

double Profile::node_deriv2(const Node& n, double x) {
  switch (n.kind) {
    case Kind::Const:
      return 0.0;
    case Kind::Cosine:
      return -n.a * n.b * n.b * std::cos(n.b * x + n.c);
    case Kind::Gaussian: {
      double u = (x - n.b) / n.c;
      return n.a * std::exp(-u * u) * (4.0 * u * u - 2.0) / (n.c * n.c);
    }
    case Kind::ExpOf: {
      double g1 = node_deriv(n.kids[0], x);
      double g2 = node_deriv2(n.kids[0], x);
      return node_value(n, x) * (g2 + g1 * g1);
    }
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& kid : n.kids) s += node_deriv2(kid, x);
      return s;
    }
  }
  return 0.0;
}

double Profile::value(double x) const { return node_value(root_, x); }
double Profile::deriv(double x) const { return node_deriv(root_, x); }
double Profile::deriv2(double x) const { return node_deriv2(root_, x); }

bool Profile::is_zero() const {
  if (root_.kind == Kind::Const) return root_.a == 0.0;
  if (root_.kind == Kind::Sum) {
    if (root_.kids.empty()) return true;
    for (const auto& kid : root_.kids) {
      if (!(kid.kind == Kind::Const && kid.a == 0.0)) return false;
    }
    return true;
  }
  return false;
}

bool Profile::is_constant() const { return is_const(root_); }

double Profile::min_on_grid(double L, int samples) const {
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    lo = std::min(lo, value(L * i / samples));
  }
  return lo;
}

bool Profile::node_periodic(const Node& n, double L, double tol) {
  switch (n.kind) {
    case Kind::Const:
      return true;
    case Kind::Cosine: {
      if (n.a == 0.0 || n.b == 0.0) return true;
      double cycles = n.b * L / (2.0 * kPi);
      return std::abs(cycles - std::round(cycles)) < 1e-9;
    }
    case Kind::Gaussian: {
      double u = (L / 2.0) / n.c;
      return std::abs(n.a) * std::exp(-u * u) < tol;
    }
    case Kind::ExpOf:
      return node_periodic(n.kids[0], L, tol);
    case Kind::Sum:
      for (const auto& kid : n.kids) {
        if (!node_periodic(kid, L, tol)) return false;
      }
      return true;
  }
  return true;
}

bool Profile::periodic_on(double L, double tol) const {
  return node_periodic(root_, L, tol);
}

std::string Profile::describe_node(const Node& n) {
  std::ostringstream os;
  switch (n.kind) {
    case Kind::Const:
      os << format_double(n.a);
      break;
    case Kind::Cosine:
      os << format_double(n.a) << "*cos(" << format_double(n.b) << "*x";
      if (n.c != 0.0) os << " + " << format_double(n.c);
      os << ")";
      break;
    case Kind::Gaussian:
      os << format_double(n.a) << "*exp(-((x - " << format_double(n.b)
         << ")/" << format_double(n.c) << ")^2)";
      break;
    case Kind::ExpOf:
      if (n.a != 1.0) os << format_double(n.a) << "*";
      os << "exp(" << describe_node(n.kids[0]) << ")";
      break;
    case Kind::Sum: {
      if (n.kids.empty()) return "0";
      for (std::size_t i = 0; i < n.kids.size(); ++i) {
        if (i > 0) os << " + ";
        os << describe_node(n.kids[i]);
      }
      break;
    }
  }
  return os.str();
}

std::string Profile::describe() const { return describe_node(root_); }

bool Profile::is_const(const Node& n) {
  switch (n.kind) {
    case Kind::Const:
      return true;
    case Kind::Cosine:
      return n.a == 0.0 || n.b == 0.0;
    case Kind::Gaussian:
      return n.a == 0.0;
    case Kind::ExpOf:
      return is_const(n.kids[0]);
    case Kind::Sum:
      for (const auto& kid : n.kids) {
        if (!is_const(kid)) return false;
      }
      return true;
  }
  return false;
}

Profile::Node Profile::multiply(const Node& lhs, const Node& rhs,
                                std::size_t pos) {
  // Constant trees evaluate to the same value everywhere; x = 0 is exact.
  if (is_const(lhs)) return scaled_node(rhs, node_value(lhs, 0.0));
  if (is_const(rhs)) return scaled_node(lhs, node_value(rhs, 0.0));
  if (lhs.kind == Kind::Sum) {
    Node out;
    out.kind = Kind::Sum;
    for (const auto& kid : lhs.kids) {
      flatten_sum(multiply(kid, rhs, pos), &out.kids);
    }
    return out;
  }
  if (rhs.kind == Kind::Sum) return multiply(rhs, lhs, pos);
  throw ProfileParseError(
      "product of two non-constant factors ('" + describe_node(lhs) +
          "' * '" + describe_node(rhs) +
          "') is outside the coefficient grammar",
      pos);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

enum class TokKind { Number, Ident, Symbol, End };

struct Token {
  TokKind kind = TokKind::End;
  double number = 0.0;
  std::string text;  // identifier name or symbol spelling
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) {
      ++i_;
    }
    tok_ = Token{};
    tok_.pos = i_;
    if (i_ >= src_.size()) {
      tok_.kind = TokKind::End;
      tok_.text = "end of input";
      return;
    }
    char ch = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      const char* begin = src_.c_str() + i_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) {
        throw ProfileParseError("malformed number at '" + std::string(1, ch) + "'", i_);
      }
      tok_.kind = TokKind::Number;
      tok_.number = v;
      tok_.text = std::string(begin, static_cast<std::size_t>(end - begin));
      i_ += static_cast<std::size_t>(end - begin);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) {
        ++j;
      }
      tok_.kind = TokKind::Ident;
      tok_.text = src_.substr(i_, j - i_);
      i_ = j;
      return;
    }
    static const std::string symbols = "+-*/()^,";
    if (symbols.find(ch) != std::string::npos) {
      tok_.kind = TokKind::Symbol;
      tok_.text = std::string(1, ch);
      ++i_;
      return;
    }
    throw ProfileParseError("unexpected character '" + std::string(1, ch) + "'", i_);
  }

  const std::string& src_;
  std::size_t i_ = 0;
  Token tok_;
};

// Affine expressions in x (for arguments of cos/sin and gaussian exponents).
struct Affine {
  double k = 0.0;    // coefficient of x
  double c = 0.0;    // constant part
};

}  // namespace

class ProfileParser {
 public:
  explicit ProfileParser(const std::string& src) : lex_(src) {}

  Profile::Node parse_all() {
    Profile::Node n = parse_sum();
    const Token& t = lex_.peek();
    if (t.kind != TokKind::End) {
      throw ProfileParseError("unexpected token '" + t.text + "' after expression", t.pos);
    }
    return n;
  }

 private:
  using Node = Profile::Node;
  using Kind = Profile::Kind;

  bool is_symbol(const Token& t, const char* s) const {
    return t.kind == TokKind::Symbol && t.text == s;
  }

  Node parse_sum() {
    double sign = 1.0;
    if (is_symbol(lex_.peek(), "+") || is_symbol(lex_.peek(), "-")) {
      sign = lex_.take().text == "-" ? -1.0 : 1.0;
    }
    Node acc;
    acc.kind = Kind::Sum;
    Profile::flatten_sum(Profile::scaled_node(parse_term(), sign), &acc.kids);
    while (is_symbol(lex_.peek(), "+") || is_symbol(lex_.peek(), "-")) {
      double s = lex_.take().text == "-" ? -1.0 : 1.0;
      Profile::flatten_sum(Profile::scaled_node(parse_term(), s), &acc.kids);
    }
    if (acc.kids.empty()) {
      acc.kind = Kind::Const;
      acc.a = 0.0;
    }
    return acc;
  }

  Node parse_term() {
    Node acc = parse_factor();
    for (;;) {
      const Token& t = lex_.peek();
      if (is_symbol(t, "*")) {
        std::size_t pos = lex_.take().pos;
        Node rhs = parse_factor();
        acc = Profile::multiply(acc, rhs, pos);
      } else if (is_symbol(t, "/")) {
        Token op = lex_.take();
        Node rhs = parse_factor();
        if (!Profile::is_const(rhs)) {
          throw ProfileParseError("division by non-constant expression", op.pos);
        }
        double v = Profile::node_value(rhs, 0.0);
        if (v == 0.0) throw ProfileParseError("division by zero", op.pos);
        acc = Profile::scaled_node(acc, 1.0 / v);
      } else {
        break;
      }
    }
    return acc;
  }

  Node parse_factor() {
    const Token t = lex_.take();
    if (t.kind == TokKind::Number) {
      Node n;
      n.kind = Kind::Const;
      n.a = t.number;
      return n;
    }
    if (t.kind == TokKind::Ident) {
      if (t.text == "pi") {
        Node n;
        n.kind = Kind::Const;
        n.a = kPi;
        return n;
      }
      if (t.text == "cos" || t.text == "sin") return parse_trig(t);
      if (t.text == "exp") return parse_exp(t);
      if (t.text == "x") {
        throw ProfileParseError(
            "bare 'x' outside cos/sin/exp arguments is not in the coefficient grammar",
            t.pos);
      }
      throw ProfileParseError("unknown identifier '" + t.text + "'", t.pos);
    }
    if (is_symbol(t, "(")) {
      Node inner = parse_sum();
      expect_symbol(")");
      return inner;
    }
    throw ProfileParseError("unexpected token '" + t.text + "'", t.pos);
  }

  void expect_symbol(const char* s) {
    const Token& t = lex_.peek();
    if (!is_symbol(t, s)) {
      throw ProfileParseError(
          std::string("expected '") + s + "', found '" + t.text + "'", t.pos);
    }
    lex_.take();
  }

  Node parse_trig(const Token& name) {
    expect_symbol("(");
    Affine arg = parse_affine();
    expect_symbol(")");
    Node n;
    n.kind = Kind::Cosine;
    n.a = 1.0;
    n.b = arg.k;
    // sin(kx + c) == cos(kx + c - pi/2)
    n.c = name.text == "sin" ? arg.c - kPi / 2.0 : arg.c;
    if (arg.k == 0.0) {
      // Constant argument: fold to a constant.
      Node cst;
      cst.kind = Kind::Const;
      cst.a = name.text == "sin" ? std::sin(arg.c) : std::cos(arg.c);
      return cst;
    }
    return n;
  }

  // exp(...) comes in three shapes: exp(<constant>) folds; exp(-(x-c)^2/w2)
  // and relatives make a gaussian; anything else must be a non-constant sum
  // in the grammar (e.g. exp(0.1*sin(x))), handled by ExpOf.
  Node parse_exp(const Token& name) {
    expect_symbol("(");
    // Try the gaussian shapes first; on failure re-parse as a profile sum.
    std::size_t mark = 0;
    (void)mark;
    // The lexer has no rewind, so parse a full profile sum with '^' support:
    // parse_exp_body returns either a gaussian Node directly or a profile
    // exponent Node.
    Node body = parse_exp_body(name.pos);
    expect_symbol(")");
    return body;
  }

  // Inside exp(...) the grammar allows:
  //   <sum of profile terms>                  -> ExpOf (or fold when constant)
  //   -(x - c)^2,  -(x - c)^2 / w2,  -((x - c)/w)^2
  // The '^' character only ever appears in the squared forms, which always
  // start with '-' '('.
  Node parse_exp_body(std::size_t exp_pos) {
    if (is_symbol(lex_.peek(), "-")) {
      Token minus = lex_.take();
      if (!is_symbol(lex_.peek(), "(")) {
        throw ProfileParseError(
            "expected '(' after '-' in exp(...) exponent", minus.pos);
      }
      lex_.take();
      if (is_symbol(lex_.peek(), "(")) {
        // -((x - c)/w)^2
        lex_.take();
        Affine a = parse_affine();
        expect_symbol(")");
        expect_symbol("/");
        double w = parse_number_like("gaussian width");
        expect_symbol(")");
        expect_symbol("^");
        expect_square_exponent();
        return gaussian_from_affine(a, w * w, minus.pos);
      }
      // -(x - c)^2 with optional trailing "/ w2"
      Affine a = parse_affine();
      expect_symbol(")");
      expect_symbol("^");
      expect_square_exponent();
      double w2 = 1.0;
      if (is_symbol(lex_.peek(), "/")) {
        lex_.take();
        w2 = parse_number_like("gaussian width squared");
      }
      return gaussian_from_affine(a, w2, minus.pos);
    }
    Node inner = parse_sum();
    if (Profile::is_const(inner)) {
      Node cst;
      cst.kind = Kind::Const;
      cst.a = std::exp(Profile::node_value(inner, 0.0));
      return cst;
    }
    Node n;
    n.kind = Kind::ExpOf;
    n.a = 1.0;
    n.kids.push_back(inner);
    (void)exp_pos;
    return n;
  }

  void expect_square_exponent() {
    const Token t = lex_.take();
    if (t.kind != TokKind::Number || t.number != 2.0) {
      throw ProfileParseError(
          "only squared exponents are supported in exp(...), found '" + t.text + "'",
          t.pos);
    }
  }

  double parse_number_like(const char* what) {
    // number (optionally with pi factors), no x.
    Node n = parse_factor();
    if (!Profile::is_const(n)) {
      throw ProfileParseError(std::string("expected numeric ") + what, lex_.peek().pos);
    }
    return Profile::node_value(n, 0.0);
  }

  Node gaussian_from_affine(const Affine& a, double w2, std::size_t pos) {
    if (a.k == 0.0) {
      throw ProfileParseError("gaussian exponent does not depend on x", pos);
    }
    if (!(w2 > 0.0)) {
      throw ProfileParseError("gaussian width must be positive", pos);
    }
    // -(k x + c)^2 / w2 == -((x - (-c/k))^2) / (w2 / k^2)
    Node n;
    n.kind = Kind::Gaussian;
    n.a = 1.0;
    n.b = -a.c / a.k;
    n.c = std::sqrt(w2) / std::abs(a.k);
    return n;
  }

  // Affine expression in x: sums/differences of products of numbers, pi and
  // at most one 'x' per product.
  Affine parse_affine() {
    Affine acc = parse_affine_term(take_sign());
    for (;;) {
      const Token& t = lex_.peek();
      if (is_symbol(t, "+") || is_symbol(t, "-")) {
        double s = lex_.take().text == "-" ? -1.0 : 1.0;
        Affine rhs = parse_affine_term(s);
        acc.k += rhs.k;
        acc.c += rhs.c;
      } else {
        return acc;
      }
    }
  }

  double take_sign() {
    if (is_symbol(lex_.peek(), "-")) {
      lex_.take();
      return -1.0;
    }
    if (is_symbol(lex_.peek(), "+")) lex_.take();
    return 1.0;
  }

  Affine parse_affine_term(double sign) {
    double coeff = sign;
    bool has_x = false;
    for (;;) {
      const Token t = lex_.take();
      if (t.kind == TokKind::Number) {
        coeff *= t.number;
      } else if (t.kind == TokKind::Ident && t.text == "pi") {
        coeff *= kPi;
      } else if (t.kind == TokKind::Ident && t.text == "x") {
        if (has_x) {
          throw ProfileParseError("argument is not affine in x (x*x)", t.pos);
        }
        has_x = true;
      } else {
        throw ProfileParseError(
            "unexpected token '" + t.text + "' in affine argument", t.pos);
      }
      if (is_symbol(lex_.peek(), "*")) {
        lex_.take();
        continue;
      }
      if (is_symbol(lex_.peek(), "/")) {
        Token op = lex_.take();
        const Token d = lex_.take();
        double div = 0.0;
        if (d.kind == TokKind::Number) {
          div = d.number;
        } else if (d.kind == TokKind::Ident && d.text == "pi") {
          div = kPi;
        } else {
          throw ProfileParseError("expected numeric divisor, found '" + d.text + "'",
                                  d.pos);
        }
        if (div == 0.0) throw ProfileParseError("division by zero", op.pos);
        coeff /= div;
        if (is_symbol(lex_.peek(), "*") || is_symbol(lex_.peek(), "/")) continue;
        break;
      }
      break;
    }
    Affine a;
    if (has_x) {
      a.k = coeff;
    } else {
      a.c = coeff;
    }
    return a;
  }

  Lexer lex_;
};

Profile Profile::parse(const std::string& text) {
  ProfileParser parser(text);
  return Profile(parser.parse_all());
}

}  // namespace adlim
