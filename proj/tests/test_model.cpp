#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bz/model.hpp"

using namespace bz;

TEST_CASE("default parameters satisfy the stability guard") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.diffusion_number() < 0.25);
  CHECK(p.epsilon == 0.02);
  CHECK(p.f == 1.4);
  CHECK(p.q == 0.002);
  CHECK(p.dt == 0.001);
  CHECK(p.dx == 0.25);
}

TEST_CASE("validate rejects bad parameters") {
  ModelParams p;
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.epsilon = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.q = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.d_u = 16.0;  // dt*d_u/dx^2 = 0.256
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("reaction rhs at u=0, v=0 reduces to phi/epsilon") {
  ModelParams p;
  for (double phi : {0.0, 0.002, 0.05, 0.0766, 0.079, 0.2, 0.5, 1.0}) {
    Rates r = reaction_rhs(0.0, 0.0, phi, p);
    CHECK(r.du_dt == doctest::Approx(phi / p.epsilon).epsilon(1e-14));
    CHECK(r.dv_dt == 0.0);
  }
}

TEST_CASE("reaction rhs spot values") {
  ModelParams p;
  // Worked by hand from the rate law with the default constants.
  CHECK(reaction_rhs(0.0, 0.0, 0.05, p).du_dt ==
        doctest::Approx(2.5).epsilon(1e-14));
  CHECK(reaction_rhs(1.0, 0.0, 0.05, p).du_dt ==
        doctest::Approx(-2.4900199600798407).epsilon(1e-13));
  // u == q kills the switching term: du = (q - q^2)/eps.
  CHECK(reaction_rhs(0.002, 0.1, 0.05, p).du_dt ==
        doctest::Approx(0.0998).epsilon(1e-13));
  CHECK(reaction_rhs(0.002, 0.1, 0.05, p).dv_dt ==
        doctest::Approx(-0.098).epsilon(1e-13));
  CHECK(reaction_rhs(0.05, 0.05, 0.05, p).du_dt ==
        doctest::Approx(-3.163461538461538).epsilon(1e-13));
  CHECK(reaction_rhs(0.05, 0.05, 0.05, p).dv_dt == doctest::Approx(0.0));
}

TEST_CASE("reaction rhs is a pure function") {
  ModelParams p;
  Rates a = reaction_rhs(0.3, 0.1, 0.0766, p);
  Rates b = reaction_rhs(0.3, 0.1, 0.0766, p);
  CHECK(a.du_dt == b.du_dt);
  CHECK(a.dv_dt == b.dv_dt);
}

TEST_CASE("quiescent steady state zeroes the residual") {
  ModelParams p;
  for (double phi : {0.01, 0.05, 0.0766, 0.079, 0.1, 0.2, 0.5}) {
    double us = quiescent_steady_state(phi, p);
    CHECK(us > 0.0);
    CHECK(us < 0.01);
    double residual = reaction_rhs(us, us, phi, p).du_dt * p.epsilon;
    CHECK(std::fabs(residual) < 1e-9);
    CHECK(reaction_rhs(us, us, phi, p).dv_dt == 0.0);
  }
}

TEST_CASE("quiescent steady state at phi=0 is exactly zero") {
  ModelParams p;
  CHECK(quiescent_steady_state(0.0, p) == 0.0);
}

TEST_CASE("quiescent steady state regression values") {
  ModelParams p;
  CHECK(quiescent_steady_state(0.05, p) ==
        doctest::Approx(0.002170272661).epsilon(1e-6));
  CHECK(quiescent_steady_state(0.0766, p) ==
        doctest::Approx(0.002108678559).epsilon(1e-6));
  CHECK(quiescent_steady_state(0.2, p) ==
        doctest::Approx(0.002040561572).epsilon(1e-6));
  // The resting concentration decreases slightly as phi grows.
  CHECK(quiescent_steady_state(0.2, p) < quiescent_steady_state(0.05, p));
}

TEST_CASE("blow-up error carries location") {
  BlowUpError e(42, 17, "boom");
  CHECK(e.step() == 42);
  CHECK(e.cell() == 17);
  CHECK(std::string(e.what()) == "boom");
}
