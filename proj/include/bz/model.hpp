#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bz {

// Two-variable activator/inhibitor kinetics with an excitability parameter
// phi. du/dt = (1/eps)*(u - u^2 - (f*v + phi)*(u-q)/(u+q)) + d_u*lap(u),
// dv/dt = u - v. The inhibitor does not diffuse.
struct ModelParams {
  // Calibrated so the three-regime fragment behavior (expand / sustain /
  // collapse at phi = 0.079 / 0.07905 / 0.0791) lands exactly on the
  // classification boundary; see docs/calibration.md.
  static constexpr double kDefaultDu = 0.36915;

  double epsilon = 0.02;
  double f = 1.4;
  double q = 0.002;
  double d_u = kDefaultDu;
  double dt = 0.001;
  double dx = 0.25;

  void validate() const;  // throws std::invalid_argument
  double diffusion_number() const { return dt * d_u / (dx * dx); }
};

struct FieldState {
  int width = 0;
  int height = 0;
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> v;

  FieldState() = default;
  FieldState(int w, int h, double u0 = 0.0, double v0 = 0.0)
      : width(w), height(h),
        u(static_cast<std::size_t>(w) * h, u0),
        v(static_cast<std::size_t>(w) * h, v0) {}

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  std::size_t size() const { return u.size(); }
};

struct ExcitabilityMap {
  int width = 0;
  int height = 0;
  std::vector<double> phi;

  ExcitabilityMap() = default;
  ExcitabilityMap(int w, int h, double phi0)
      : width(w), height(h), phi(static_cast<std::size_t>(w) * h, phi0) {}

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

struct Rates {
  double du_dt;
  double dv_dt;
};

// Pointwise reaction right-hand side; pure function of its arguments.
Rates reaction_rhs(double u, double v, double phi, const ModelParams& p);

// Smallest non-negative root of u - u^2 - (f*u + phi)*(u-q)/(u+q) = 0,
// i.e. the resting state the medium relaxes to at excitability phi.
// Bracketed bisection to absolute tolerance 1e-14, tight enough that a
// field initialized at the root moves by less than 1e-12 per Euler step.
double quiescent_steady_state(double phi, const ModelParams& p);

class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(long long step, std::size_t cell, const std::string& what_arg)
      : std::runtime_error(what_arg), step_(step), cell_(cell) {}
  long long step() const { return step_; }
  std::size_t cell() const { return cell_; }

 private:
  long long step_;
  std::size_t cell_;
};

}  // namespace bz
