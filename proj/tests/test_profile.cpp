#include "doctest.h"

#include <cmath>
#include <string>

#include "adlim/grid.hpp"
#include "adlim/profile.hpp"

using adlim::kPiConst;
using adlim::Profile;
using adlim::ProfileParseError;

namespace {

// Finite-difference oracle for the closed-form derivatives.  Central
// differences at step h: the first derivative is accurate to ~h^2 relative,
// the second one is dominated by roundoff ~machine-eps/h^2, hence the looser
// tolerance.  Every downstream module differentiates profiles analytically,
// so this is the check that anchors all of them.
void check_derivatives_against_fd(const Profile& p) {
  const int n_samples = 64;
  const double h = 1e-5;
  for (int i = 0; i < n_samples; ++i) {
    const double x = 2.0 * kPiConst * i / n_samples;
    const double fd1 = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
    const double fd2 =
        (p.value(x + h) - 2.0 * p.value(x) + p.value(x - h)) / (h * h);
    CHECK(std::abs(p.deriv(x) - fd1) <= 1e-6 * std::max(1.0, std::abs(fd1)));
    CHECK(std::abs(p.deriv2(x) - fd2) <= 1e-4 * std::max(1.0, std::abs(fd2)));
  }
}

}  // namespace

TEST_CASE("analytic derivatives match finite differences") {
  check_derivatives_against_fd(Profile::parse("1.25 + 0.1*cos(1*x)"));
  check_derivatives_against_fd(Profile::parse("0.3*sin(2*x + 0.5) - 0.05"));
  check_derivatives_against_fd(Profile::gaussian(0.7, kPiConst, 0.5));
  check_derivatives_against_fd(
      Profile::exp_of(Profile::cosine(0.1, 1.0, -0.5 * kPiConst), 2.0));
  // A sum mixing every node kind.
  check_derivatives_against_fd(Profile::parse(
      "1 + 0.2*cos(3*x) + 0.1*exp(-((x - 3.1)/0.6)^2) + 0.5*exp(0.05*sin(1*x))"));
}

TEST_CASE("parsed expressions evaluate to their closed forms") {
  const Profile p = Profile::parse("1.25 + 0.1*cos(1*x)");
  for (double x : {0.0, 0.7, 2.0, 5.5}) {
    CHECK(p.value(x) == doctest::Approx(1.25 + 0.1 * std::cos(x)).epsilon(1e-14));
    CHECK(p.deriv(x) == doctest::Approx(-0.1 * std::sin(x)).epsilon(1e-14));
    CHECK(p.deriv2(x) == doctest::Approx(-0.1 * std::cos(x)).epsilon(1e-14));
  }

  // pi literal and parenthesised sums distribute through products.
  const Profile q = Profile::parse("2*pi*(1 + 0.2*cos(1*x))");
  CHECK(q.value(0.0) == doctest::Approx(2.4 * kPiConst).epsilon(1e-14));
  CHECK(q.value(kPiConst) == doctest::Approx(1.6 * kPiConst).epsilon(1e-14));

  // Both accepted gaussian spellings agree with the factory.
  const Profile g = Profile::gaussian(1.0, 2.0, 0.5);
  const Profile g1 = Profile::parse("exp(-((x - 2)/0.5)^2)");
  const Profile g2 = Profile::parse("exp(-(x - 2)^2 / 0.25)");
  for (double x : {1.0, 2.0, 2.3}) {
    CHECK(g1.value(x) == doctest::Approx(g.value(x)).epsilon(1e-14));
    CHECK(g2.value(x) == doctest::Approx(g.value(x)).epsilon(1e-14));
  }

  // exp of a non-constant sum.
  const Profile e = Profile::parse("2*pi*exp(0.1*sin(1*x))");
  CHECK(e.value(0.0) == doctest::Approx(2.0 * kPiConst).epsilon(1e-14));
  CHECK(e.deriv(0.0) == doctest::Approx(0.2 * kPiConst).epsilon(1e-13));
}

TEST_CASE("parse errors carry the offending position and token") {
  const std::string text = "0.1*cos(x";
  try {
    Profile::parse(text);
    FAIL("unbalanced expression must not parse");
  } catch (const ProfileParseError& err) {
    CHECK(err.position() <= text.size());
    CHECK(std::string(err.what()).size() > 0);
  }

  try {
    Profile::parse("1 + tan(1*x)");
    FAIL("unknown identifier must not parse");
  } catch (const ProfileParseError& err) {
    CHECK(std::string(err.what()).find("tan") != std::string::npos);
    CHECK(err.position() == 4);
  }
}

TEST_CASE("grammar rejects products of two transcendentals") {
  CHECK_THROWS_AS(Profile::parse("cos(1*x)*sin(1*x)"), ProfileParseError);
  CHECK_THROWS_AS(Profile::parse("exp(-((x - 2)/0.5)^2)*cos(1*x)"),
                  ProfileParseError);
  // Numeric factors multiply transcendentals freely.
  CHECK_NOTHROW(Profile::parse("2*pi*0.5*cos(1*x)*3"));
}

TEST_CASE("periodicity detection on the base circle") {
  const double L = 2.0 * kPiConst;
  CHECK(Profile::parse("1.25 + 0.1*cos(1*x)").periodic_on(L));
  CHECK(Profile::parse("0.3*sin(2*x + 0.5)").periodic_on(L));
  // Frequency 1/2 does not fit the circle.
  CHECK_FALSE(Profile::cosine(1.0, 0.5, 0.0).periodic_on(L));
  // A narrow centered gaussian decays below tolerance within half a period,
  // a wide one does not.
  CHECK(Profile::gaussian(1.0, kPiConst, 0.5).periodic_on(L));
  CHECK_FALSE(Profile::gaussian(1.0, kPiConst, 1.2).periodic_on(L));
  CHECK(Profile::parse("exp(0.1*sin(1*x))").periodic_on(L));
}

TEST_CASE("grid minimum, constancy flags, and stable description") {
  const Profile p = Profile::parse("1.25 + 0.1*cos(1*x)");
  // The sample grid hits x = pi exactly, so the minimum is exact.
  CHECK(p.min_on_grid(2.0 * kPiConst) == doctest::Approx(1.15).epsilon(1e-13));

  CHECK(Profile().is_zero());
  CHECK(Profile::constant(3.0).is_constant());
  CHECK_FALSE(p.is_constant());
  CHECK(Profile::exp_of(Profile::constant(0.0)).is_constant());

  CHECK(p.describe() == Profile::parse("1.25 + 0.1*cos(1*x)").describe());
  CHECK_FALSE(p.describe().empty());
  CHECK(p.describe() != Profile::parse("1.25 + 0.2*cos(1*x)").describe());
}

TEST_CASE("profile algebra matches pointwise arithmetic") {
  const Profile p = Profile::parse("1 + 0.3*cos(1*x)");
  const Profile q = Profile::gaussian(0.5, 1.0, 0.7);
  for (double x : {0.0, 0.9, 4.2}) {
    CHECK((p + q).value(x) ==
          doctest::Approx(p.value(x) + q.value(x)).epsilon(1e-14));
    CHECK((p - q).deriv(x) ==
          doctest::Approx(p.deriv(x) - q.deriv(x)).epsilon(1e-13));
    CHECK(p.scaled(-2.0).deriv2(x) ==
          doctest::Approx(-2.0 * p.deriv2(x)).epsilon(1e-14));
  }
}
