#pragma once

#include <map>
#include <string>
#include <vector>

#include "bz/geometry.hpp"

namespace bz {

// Measured propagation constants for width-12 channels at the default
// excitability values. Builders use them to place probe windows and to
// suggest run lengths; see docs/calibration.md for how they were obtained.
struct CalibrationConstants {
  double wave_speed = 12.5444;            // cells per time unit along a channel
  double fragment_temporal_width = 0.400; // time a cell stays above threshold
  double junction_delay = 0.0;            // extra time per sub-excitable disc crossed
  double fusion_delay = 0.0;              // extra time when a fragment is born by fusion
  double bend_advance = 0.0;              // path cells saved per bend by corner cutting
};

struct FusionGateSpec {
  double input_angle_deg = 30.0; // angle between each input and the output axis
  double arm_length = 150.0;     // input channel length in cells
  double width = 12.0;           // channel width in cells
  CalibrationConstants cal;

  void validate() const; // throws std::invalid_argument on violation
};

struct AdderSpec {
  int bit_count = 2;
  double pitch = 470.0; // vertical spacing between one-bit blocks
  FusionGateSpec gate;

  void validate() const;
};

// A layout plus the synchronization bookkeeping the builder guarantees.
struct CircuitPlan {
  Layout layout;
  // Channel-name chains whose summed lengths must agree within tolerance.
  std::vector<std::vector<std::string>> identities;
  // Expected arrival time at each probe for every input vector that fires it,
  // keyed by probe name (used to center probe windows).
  std::map<std::string, std::vector<double>> expected_arrivals;
  // Suggested simulation length: 1.5x the slowest pad-to-probe journey.
  double suggested_run_time = 0.0;
};

struct BalanceReport {
  struct Entry {
    std::vector<double> path_lengths; // one per chain in the identity
    double max_difference = 0.0;
    bool ok = true;
  };
  std::vector<Entry> entries;
  double tolerance = 0.0;
  bool all_ok = true;
};

// Raised when a builder cannot realize the requested geometry.
class ConstructionError : public std::runtime_error {
 public:
  explicit ConstructionError(const std::string& what) : std::runtime_error(what) {}
};

CircuitPlan build_fusion_gate(const FusionGateSpec& spec);
CircuitPlan build_half_adder(const FusionGateSpec& spec);
CircuitPlan build_full_adder(const FusionGateSpec& spec);
CircuitPlan build_ripple_adder(const AdderSpec& spec);

// Checks that every chain in each identity has the same total length within
// tolerance. Total = sum of the named channels' segment lengths.
BalanceReport check_path_balance(const Layout& layout,
                                 const std::vector<std::vector<std::string>>& identities,
                                 double tolerance);

// Swaps the two grid axes of a layout (exact; lengths are preserved).
Layout transpose_layout(const Layout& in);

// Places the point K on the ray from p along unit direction u such that
// |p,K| + |K,q| equals total. Used to equalize path lengths with one bend.
Vec2 dogleg_apex(const Vec2& p, const Vec2& u, const Vec2& q, double total);

}  // namespace bz
