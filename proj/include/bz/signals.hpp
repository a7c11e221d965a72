#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bz/geometry.hpp"
#include "bz/integrator.hpp"
#include "bz/model.hpp"

namespace bz {

// Minimum 4-connected excited cells inside a probe for a detection; a real
// front spans the channel width, single-cell ripples do not.
inline constexpr int kDetectionContiguity = 10;

// Sets u to pad.value on every pad cell; v untouched. Throws
// std::out_of_range when the pad region leaves the grid.
void apply_stimulus(FieldState& state, const StimulusPad& pad);

struct ComponentStats {
  int area = 0;
  Vec2 centroid;  // mean of cell centers
  int bx0 = 0, by0 = 0, bx1 = 0, by1 = 0;  // inclusive bounds
};

// 4-connected components of {u > threshold}.
std::vector<ComponentStats> excited_components(const FieldState& state,
                                               double threshold = 0.04);

struct ProbeResult {
  std::string name;
  bool fired = false;
  std::optional<double> first_crossing_time;
  double peak_u = 0.0;
};

// Incremental probe evaluation, fed one snapshot at a time so long runs do
// not need to retain frames. Only snapshots inside a probe's window count.
class ProbeMonitor {
 public:
  explicit ProbeMonitor(std::vector<Probe> probes,
                        int contiguity = kDetectionContiguity);
  void feed(const FieldState& state, double t);
  const std::vector<ProbeResult>& results() const { return results_; }

 private:
  std::vector<Probe> probes_;
  std::vector<ProbeResult> results_;
  int contiguity_;
};

// Frame-sequence variant of the same detection rule.
// Throws std::invalid_argument when the frames do not cover the window.
ProbeResult probe_presence(const std::vector<Frame>& frames,
                           const Probe& probe,
                           int contiguity = kDetectionContiguity);

enum class FragmentClass { Expand, Sustain, Collapse };

struct FragmentSnapshot {
  long long step_count = 0;
  double t = 0.0;
  int area = 0;
  Vec2 centroid;
  int bx0 = 0, by0 = 0, bx1 = 0, by1 = 0;
};

struct FragmentTrack {
  std::vector<FragmentSnapshot> snapshots;
  FragmentClass classification = FragmentClass::Sustain;
  // Tail area range relative to the snapshot-5 baseline (snapshots 5..end),
  // for the sustain-band acceptance check.
  double min_area_ratio = 0.0;
  double max_area_ratio = 0.0;
};

const char* fragment_class_name(FragmentClass c);

// Follows the excited component nearest the previous centroid (ties go to
// the eastmost), starting from the seed-region center. Collapse when the
// excited set empties; Expand when the final area exceeds 1.5x the
// snapshot-5 area; Sustain otherwise.
// Requires >= 10 frames; throws std::runtime_error("no-fragment...") when
// frame 1 has no excited component near the seed.
FragmentTrack track_fragment(const std::vector<Frame>& frames,
                             const RegionSpec& seed,
                             double threshold = 0.04);

enum class Axis { PlusX, MinusX, PlusY, MinusY };

// Least-squares front speed (cells per unit time) over the middle 60% of
// the snapshots; front = farthest excited cell along the axis. Throws
// std::runtime_error when no front exists, the motion is not monotone, or
// the fit residual exceeds 5% of the distance traveled.
double measure_wave_speed(const std::vector<Frame>& frames, Axis axis,
                          double threshold = 0.04);

}  // namespace bz
