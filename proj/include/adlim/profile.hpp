#pragma once
// Smooth scalar coefficient fields on the base circle, with exact first and
// second derivatives.
//
// Geometry profiles (strip width, fibre length) and potential profiles are the
// analytic inputs of every model.  Downstream code differentiates them, so a
// sampled representation is not good enough: we keep a tiny expression tree
// (constants, cosines, gaussians, exponentials of such sums) and evaluate
// value/deriv/deriv2 in closed form.  The config-file grammar maps onto the
// same tree; anything outside it is rejected with a located parse error.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace adlim {

// Error raised by Profile::parse.  `position` is the 0-based byte offset of
// the offending token in the source text; the message names the token.
class ProfileParseError : public std::runtime_error {
 public:
  ProfileParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class Profile {
 public:
  Profile();  // identically zero

  double value(double x) const;
  double deriv(double x) const;
  double deriv2(double x) const;

  // Primitive factories.
  static Profile constant(double c);
  // amplitude * cos(freq * x + phase)
  static Profile cosine(double amplitude, double freq, double phase);
  // amplitude * exp(-((x - center)/width)^2), width > 0
  static Profile gaussian(double amplitude, double center, double width);
  // amplitude * exp(g(x)) for a profile g
  static Profile exp_of(const Profile& exponent, double amplitude = 1.0);

  Profile operator+(const Profile& other) const;
  Profile operator-(const Profile& other) const;
  Profile scaled(double factor) const;

  // Parses the coefficient grammar used by config files: sums and differences
  // of products of numeric factors (literals, `pi`, parenthesised numeric
  // expressions) with at most one transcendental factor per term, where a
  // transcendental factor is one of
  //     cos(<affine in x>)   sin(<affine in x>)
  //     exp(-(x - c)^2 / w2) exp(-((x - c)/w)^2) exp(<affine-in-x free sum>)
  // and exp(...) of a non-constant sum of such terms (e.g. exp(0.1*sin(x))).
  // Parenthesised sums multiply through by distribution.  Anything else —
  // unknown identifiers, products of two transcendentals, non-gaussian
  // squared exponents — raises ProfileParseError naming the offending token.
  static Profile parse(const std::string& text);

  bool is_zero() const;
  bool is_constant() const;  // no x-dependence anywhere in the tree

  // Canonical human-readable rendering; stable across runs for CSV metadata.
  std::string describe() const;

  // Minimum over a dense sample of [0, L); used for positivity checks.
  double min_on_grid(double L, int samples = 8192) const;

  // True when every oscillatory frequency fits the circle of circumference L
  // and every gaussian has decayed below `tol` at distance L/2 from its
  // center, i.e. the profile is L-periodic to within `tol`.
  bool periodic_on(double L, double tol = 1e-9) const;

 private:
  enum class Kind { Const, Cosine, Gaussian, ExpOf, Sum };

  struct Node {
    Kind kind = Kind::Const;
    double a = 0.0;  // amplitude (Const: the value)
    double b = 0.0;  // Cosine: frequency; Gaussian: center
    double c = 0.0;  // Cosine: phase; Gaussian: width
    std::vector<Node> kids;  // Sum: terms; ExpOf: single exponent
  };

  static double node_value(const Node& n, double x);
  static double node_deriv(const Node& n, double x);
  static double node_deriv2(const Node& n, double x);
  static Node scaled_node(const Node& n, double factor);
  static void flatten_sum(const Node& n, std::vector<Node>* out);
  static std::string describe_node(const Node& n);
  static bool node_periodic(const Node& n, double L, double tol);

  // Product with the distribution rules described at parse(); used by the
  // parser.  Throws ProfileParseError (at `pos`) when both operands are
  // transcendental.
  static Node multiply(const Node& lhs, const Node& rhs, std::size_t pos);
  static bool is_const(const Node& n);

  explicit Profile(Node root) : root_(std::move(root)) {}
  Node root_;

  friend class ProfileParser;
};

}  // namespace adlim
