#include "bz/model.hpp"

#include <cmath>

namespace bz {

void ModelParams::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0)) {
      throw std::invalid_argument(std::string(name) + " must be positive");
    }
  };
  positive(epsilon, "epsilon");
  positive(f, "f");
  positive(q, "q");
  positive(d_u, "d_u");
  positive(dt, "dt");
  positive(dx, "dx");
  if (!(q < 1.0)) {
    throw std::invalid_argument("q must be < 1");
  }
  if (!(diffusion_number() < 0.25)) {
    throw std::invalid_argument("dt*d_u/dx^2 must be < 0.25");
  }
}

Rates reaction_rhs(double u, double v, double phi, const ModelParams& p) {
  double du_dt =
      (1.0 / p.epsilon) * (u - u * u - (p.f * v + phi) * ((u - p.q) / (u + p.q)));
  double dv_dt = u - v;
  return {du_dt, dv_dt};
}

double quiescent_steady_state(double phi, const ModelParams& p) {
  if (phi == 0.0) {
    return 0.0;
  }
  auto residual = [&](double u) {
    return u - u * u - (p.f * u + phi) * ((u - p.q) / (u + p.q));
  };
  // residual(0) = phi > 0; scan for the first sign change, then bisect.
  double lo = 0.0;
  double hi = -1.0;
  const double scan_step = 1e-4;
  double prev = residual(0.0);
  for (double u = scan_step; u <= 1.0 + scan_step; u += scan_step) {
    double r = residual(u);
    if ((prev > 0.0) != (r > 0.0) || r == 0.0) {
      lo = u - scan_step;
      hi = u;
      break;
    }
    prev = r;
  }
  if (hi < 0.0) {
    throw std::invalid_argument("no quiescent state in [0,1] for given phi");
  }
  double rlo = residual(lo);
  while (hi - lo > 1e-14) {
    double mid = 0.5 * (lo + hi);
    double rm = residual(mid);
    if ((rlo > 0.0) == (rm > 0.0)) {
      lo = mid;
      rlo = rm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace bz
