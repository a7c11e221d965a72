#include "bz/circuits.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bz {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Sub-excitability shared by every disc in the built circuits. Low enough
// that a lone channel-width fragment survives the transit, high enough that
// the disc does not flood sideways at crossings and fusions.
constexpr double kDiscPhi = 0.0773;

constexpr double kFusionRadius = 24.0;
constexpr double kCrossingRadius = 18.0;
constexpr double kMergeRadius = 15.0;
constexpr double kSpacerRadius = 15.0;

// Inputs collide inside the fusion disc at this half-angle. Shallower
// approaches let a lone fragment spill into the sibling outputs, so arms
// requested at a shallower input angle run a short approach at the collision
// angle and carry the remaining run at the requested angle.
constexpr double kCollisionHalfAngleDeg = 45.0;
constexpr double kApproachRun = 40.0;

constexpr double kPadInset = 6.0;
constexpr double kPadRadius = 5.0;
constexpr double kProbeInset = 28.0;
constexpr int kProbeSide = 8;

// Fragment birth at the pad and pickup at the probe together behave like the
// centerline path being this many cells shorter than measured.
constexpr double kLaunchOffsetCells = 7.7;

// Transit delays through discs, time units, measured on width-12 channels at
// the excitability values above.
constexpr double kCrosserDelay = 2.25;      // oblique branch through a crossing disc
constexpr double kRailCrossingDelay = 2.70; // straight rail through its crossing disc
constexpr double kMergeDelay = 1.0;         // arm into a Y-merge disc
constexpr double kFusionPassDelay = 0.0;    // lone fragment straight through a fusion disc
constexpr double kFusionBirthDelay = 1.6;   // fused product, on top of the pass

double deg2rad(double d) { return d * kPi / 180.0; }

Vec2 unitv(double deg) { return {std::cos(deg2rad(deg)), std::sin(deg2rad(deg))}; }

double bearing_deg(Vec2 d) { return std::atan2(d.y, d.x) * 180.0 / kPi; }

double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += norm(pts[i] - pts[i - 1]);
  return len;
}

// Unsigned turn angle at an interior vertex, degrees in [0, 180].
double turn_angle_deg(Vec2 a, Vec2 b, Vec2 c) {
  const double inb = bearing_deg(b - a);
  const double out = bearing_deg(c - b);
  double d = std::fabs(out - inb);
  if (d > 180.0) d = 360.0 - d;
  return d;
}

// Intersection of the lines a + s*da and b + t*db.
Vec2 line_cross(Vec2 a, Vec2 da, Vec2 b, Vec2 db) {
  const double det = da.x * (-db.y) + db.x * da.y;
  if (std::fabs(det) < 1e-12)
    throw ConstructionError("parallel lines cannot cross");
  const Vec2 rhs = b - a;
  const double s = (rhs.x * (-db.y) + db.x * rhs.y) / det;
  return a + s * da;
}

// Straight transit delay through a spacer disc, by radius.
double spacer_delay(double radius) {
  static const double r[] = {5.0, 7.0, 8.0, 9.0, 11.0, 15.0, 18.0};
  static const double t[] = {0.35, 0.90, 1.15, 1.30, 1.60, 2.25, 2.75};
  const int n = 7;
  if (radius <= r[0]) return t[0];
  for (int i = 1; i < n; ++i)
    if (radius <= r[i]) {
      const double f = (radius - r[i - 1]) / (r[i] - r[i - 1]);
      return t[i - 1] + f * (t[i] - t[i - 1]);
    }
  return t[n - 1];
}

// Time gained by corner cutting at a bend of the given turn angle.
double bend_advance_tu(double deg) {
  static const double a[] = {0.0, 30.0, 45.0, 65.0, 90.0, 110.0};
  static const double t[] = {0.0, 0.15, 0.60, 0.28, 1.00, 0.68};
  const int n = 6;
  if (deg <= a[0]) return t[0];
  for (int i = 1; i < n; ++i)
    if (deg <= a[i]) {
      const double f = (deg - a[i - 1]) / (a[i] - a[i - 1]);
      return t[i - 1] + f * (t[i] - t[i - 1]);
    }
  return t[n - 1];
}

// Minimum angular separation between two channel mouths on a disc of radius
// R so the wall between them survives rasterization.
double min_mouth_gap_deg(double radius, double width) {
  const double s = std::min(1.0, (0.5 * width) / (radius + 2.0));
  return 2.0 * std::asin(s) * 180.0 / kPi;
}

struct DiscEvent {
  double delay = 0.0;
  int fusion = 0;  // 1 when the fragment on this route is born by fusion here
};

// One pad-to-probe journey: concatenated channel polylines plus the discs
// crossed along the way. Times derive from the measured constants; the
// user-facing calibration fields act as additive trims.
struct RouteTrace {
  std::vector<Vec2> pts;
  std::vector<DiscEvent> discs;
};

double route_arrival(const RouteTrace& rt, const CalibrationConstants& cal) {
  double length = polyline_length(rt.pts) - kPadInset - kProbeInset;
  double delay = 0.0;
  int disc_count = 0;
  int fusion_count = 0;
  for (const DiscEvent& e : rt.discs) {
    delay += e.delay;
    ++disc_count;
    fusion_count += e.fusion;
  }
  double advance = 0.0;
  int bends = 0;
  for (std::size_t i = 1; i + 1 < rt.pts.size(); ++i) {
    const double a = turn_angle_deg(rt.pts[i - 1], rt.pts[i], rt.pts[i + 1]);
    if (a < 2.0) continue;
    advance += bend_advance_tu(a);
    ++bends;
  }
  length -= kLaunchOffsetCells + cal.bend_advance * bends;
  return length / cal.wave_speed + delay - advance +
         cal.junction_delay * disc_count + cal.fusion_delay * fusion_count;
}

// Replaces the straight run a->b by a V detour with the same endpoints whose
// length exceeds the straight distance by `surplus`. The apex sits to the
// side given by `side` (+1 is 90 degrees clockwise from travel, y down).
std::vector<Vec2> v_detour(Vec2 a, Vec2 b, double surplus, int side) {
  const double span = norm(b - a);
  if (surplus < 0.5) return {a, b};
  const double theta = std::acos(std::min(1.0, span / (span + surplus)));
  const double depth = 0.5 * span * std::tan(theta);
  const Vec2 axis = (1.0 / span) * (b - a);
  const Vec2 perp{-axis.y, axis.x};
  const Vec2 apex = 0.5 * (a + b) + (depth * side) * perp;
  return {a, apex, b};
}

double v_detour_leg_angle_deg(Vec2 a, Vec2 b, double surplus) {
  const double span = norm(b - a);
  if (surplus < 0.5) return 0.0;
  return std::acos(std::min(1.0, span / (span + surplus))) * 180.0 / kPi;
}

void check_leg(double len, double min_len, const char* what) {
  if (len < min_len) {
    std::ostringstream os;
    os << what << " leg too short: " << len << " < " << min_len;
    throw ConstructionError(os.str());
  }
}

// Work-in-progress circuit: geometry in a free coordinate frame, shifted onto
// the grid at the end.
class Sketch {
 public:
  Sketch(const CalibrationConstants& cal, double width)
      : cal_(cal), width_(width) {}

  void path(const std::string& name, std::vector<Vec2> pts) {
    if (pts.size() < 2) throw ConstructionError("path too short: " + name);
    paths_.push_back({name, std::move(pts)});
  }

  void disc(const std::string& name, Vec2 center, double radius) {
    discs_.push_back({name, center, radius});
  }

  void pad(const std::string& var, const std::string& channel) {
    pads_.push_back({var, channel});
  }

  void probe(const std::string& var, const std::string& channel,
             std::vector<double> arrivals) {
    probes_.push_back({var, channel, std::move(arrivals)});
  }

  const std::vector<Vec2>& points_of(const std::string& name) const {
    for (const auto& p : paths_)
      if (p.name == name) return p.pts;
    throw ConstructionError("unknown path: " + name);
  }

  // Concatenates the named paths into one polyline, dropping duplicated
  // joint vertices.
  std::vector<Vec2> journey(const std::vector<std::string>& names) const {
    std::vector<Vec2> out;
    for (const auto& n : names) {
      const auto& pts = points_of(n);
      std::size_t start = 0;
      if (!out.empty() && norm(out.back() - pts.front()) < 1e-6) start = 1;
      for (std::size_t i = start; i < pts.size(); ++i) out.push_back(pts[i]);
    }
    return out;
  }

  double path_len(const std::string& name) const {
    return polyline_length(points_of(name));
  }

  // Places the finished geometry on a grid. When fixed dimensions are given
  // the sketch is centered and must fit; otherwise the grid grows to size.
  Layout materialize(double margin, int fixed_w = 0, int fixed_h = 0) const {
    double lox = 1e9, loy = 1e9, hix = -1e9, hiy = -1e9;
    const double half = 0.5 * width_ + 2.0;
    for (const auto& p : paths_)
      for (const Vec2& v : p.pts) {
        lox = std::min(lox, v.x - half);
        hix = std::max(hix, v.x + half);
        loy = std::min(loy, v.y - half);
        hiy = std::max(hiy, v.y + half);
      }
    for (const auto& d : discs_) {
      lox = std::min(lox, d.center.x - d.radius - 2.0);
      hix = std::max(hix, d.center.x + d.radius + 2.0);
      loy = std::min(loy, d.center.y - d.radius - 2.0);
      hiy = std::max(hiy, d.center.y + d.radius + 2.0);
    }
    const double span_x = hix - lox;
    const double span_y = hiy - loy;
    Vec2 shift;
    Layout l;
    if (fixed_w > 0) {
      if (span_x > fixed_w - 2.0 * margin || span_y > fixed_h - 2.0 * margin)
        throw ConstructionError("circuit does not fit the fixed canvas");
      shift = {0.5 * (fixed_w - span_x) - lox, 0.5 * (fixed_h - span_y) - loy};
      l.grid_width = fixed_w;
      l.grid_height = fixed_h;
    } else {
      shift = {margin - lox, margin - loy};
      l.grid_width = static_cast<int>(std::ceil(span_x + 2.0 * margin)) + 1;
      l.grid_height = static_cast<int>(std::ceil(span_y + 2.0 * margin)) + 1;
    }
    // Integer shift: designed coordinates keep their sub-cell alignment, so
    // junction transits behave identically in every circuit and designed
    // mirror symmetries rasterize exactly.
    shift = {std::round(shift.x), std::round(shift.y)};

    for (const auto& p : paths_) {
      for (std::size_t i = 1; i < p.pts.size(); ++i) {
        Channel c;
        c.name = i == 1 ? p.name : p.name + "_" + std::to_string(i);
        c.start = p.pts[i - 1] + shift;
        c.end = p.pts[i] + shift;
        c.width = width_;
        l.channels.push_back(std::move(c));
      }
    }
    for (const auto& d : discs_) {
      Junction j;
      j.name = d.name;
      j.center = d.center + shift;
      j.radius = d.radius;
      l.junctions.push_back(std::move(j));
    }

    for (const auto& ps : pads_) {
      const auto& pts = points_of(ps.channel);
      const Vec2 dir = (1.0 / norm(pts[1] - pts[0])) * (pts[1] - pts[0]);
      StimulusPad pad;
      pad.name = ps.var;
      pad.region =
          RegionSpec::disc(pts.front() + shift + kPadInset * dir, kPadRadius);
      l.pads.push_back(std::move(pad));
    }

    const double half_window = 3.0 * cal_.fragment_temporal_width;
    for (const auto& pr : probes_) {
      const auto& pts = points_of(pr.channel);
      const Vec2 a = pts[pts.size() - 2];
      const Vec2 b = pts.back();
      const double seg = norm(b - a);
      const double inset = std::min(kProbeInset, std::max(6.0, seg - 6.0));
      const Vec2 dir = (1.0 / seg) * (b - a);
      const Vec2 center = b + shift - inset * dir;
      Probe probe;
      probe.name = pr.var;
      probe.region = RegionSpec::rect(
          static_cast<int>(std::lround(center.x)) - kProbeSide / 2,
          static_cast<int>(std::lround(center.y)) - kProbeSide / 2, kProbeSide,
          kProbeSide);
      double lo = 1e18, hi = -1e18;
      for (double t : pr.arrivals) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
      probe.t_min = lo - half_window;
      probe.t_max = hi + half_window;
      l.probes.push_back(std::move(probe));
    }

    l.phi_junction = kDiscPhi;
    return l;
  }

  // Every pair of channel mouths on a disc must stay far enough apart that
  // rasterization leaves a wall between them.
  void audit_mouths(const Layout& l) const {
    for (const auto& j : l.junctions) {
      std::vector<double> mouths;
      for (const auto& c : l.channels) {
        if (norm(c.start - j.center) < 1.0)
          mouths.push_back(bearing_deg(c.end - j.center));
        if (norm(c.end - j.center) < 1.0)
          mouths.push_back(bearing_deg(c.start - j.center));
      }
      const double min_gap = min_mouth_gap_deg(j.radius, width_);
      for (std::size_t a = 0; a < mouths.size(); ++a)
        for (std::size_t b = a + 1; b < mouths.size(); ++b) {
          double d = std::fabs(mouths[a] - mouths[b]);
          if (d > 180.0) d = 360.0 - d;
          if (d < min_gap - 1e-6) {
            std::ostringstream os;
            os << "channel mouths too close on junction " << j.name << ": "
               << d << " deg, need " << min_gap;
            throw ConstructionError(os.str());
          }
        }
    }
  }

  std::map<std::string, std::vector<double>> arrival_map() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& pr : probes_) out[pr.var] = pr.arrivals;
    return out;
  }

 private:
  struct PathRec {
    std::string name;
    std::vector<Vec2> pts;
  };
  struct DiscRec {
    std::string name;
    Vec2 center;
    double radius;
  };
  struct PadRec {
    std::string var;
    std::string channel;
  };
  struct ProbeRec {
    std::string var;
    std::string channel;
    std::vector<double> arrivals;
  };

  CalibrationConstants cal_;
  double width_;
  std::vector<PathRec> paths_;
  std::vector<DiscRec> discs_;
  std::vector<PadRec> pads_;
  std::vector<ProbeRec> probes_;
};

CircuitPlan finish_plan(const Sketch& sk, Layout layout,
                        std::vector<std::vector<std::string>> identities) {
  const auto violations = validate(layout);
  if (!violations.empty()) {
    std::string msg = "built layout fails validation:";
    for (const auto& v : violations) msg += " " + v;
    throw ConstructionError(msg);
  }
  try {
    rasterize(layout);
  } catch (const LayoutError& e) {
    throw ConstructionError(std::string("built layout does not rasterize: ") +
                            e.what());
  }
  sk.audit_mouths(layout);

  CircuitPlan plan;
  plan.expected_arrivals = sk.arrival_map();
  double slowest = 0.0;
  for (const auto& kv : plan.expected_arrivals)
    for (double t : kv.second) slowest = std::max(slowest, t);
  plan.suggested_run_time = 1.5 * slowest;
  plan.layout = std::move(layout);
  plan.identities = std::move(identities);
  return plan;
}

// Common disc events.
const DiscEvent kEvPass{kFusionPassDelay, 0};
const DiscEvent kEvBorn{kFusionPassDelay + kFusionBirthDelay, 1};
const DiscEvent kEvCross{kCrosserDelay, 0};
const DiscEvent kEvRail{kRailCrossingDelay, 0};
const DiscEvent kEvMerge{kMergeDelay, 0};
const DiscEvent kEvSpacer{spacer_delay(kSpacerRadius), 0};

// Arm extensions below this length fold into the outer leg; longer ones
// become a horizontal feeder so they cannot sweep across neighboring blocks.
constexpr double kFeederThreshold = 30.0;

// Extension length in cells that delays the input arms by `delay` time
// units, accounting for the feeder bend when one will be emitted.
double arm_extension_cells(double delay, const CalibrationConstants& cal,
                           double alpha) {
  const double plain = delay * cal.wave_speed;
  if (plain < kFeederThreshold) return plain;
  return (delay + bend_advance_tu(alpha)) * cal.wave_speed;
}

// Emits the two input arms of a collision pair: a short approach at the
// collision angle next to the disc, the remaining run at the requested
// angle. Equal arm lengths keep the two fragments synchronized. A large
// extension is emitted as a horizontal feeder west of the arm.
void emit_input_arms(Sketch& sk, const FusionGateSpec& spec, Vec2 center,
                     const std::string& upper, const std::string& lower,
                     double extra_arm) {
  const double alpha = spec.input_angle_deg;
  const bool kinked = alpha < kCollisionHalfAngleDeg - 0.5;
  const bool feeder = extra_arm >= kFeederThreshold;
  const double outer = spec.arm_length - (kinked ? kApproachRun : 0.0) +
                       (feeder ? 0.0 : extra_arm);
  check_leg(outer, 20.0, "input arm");
  std::vector<Vec2> up, low;
  if (kinked) {
    const Vec2 au = center - kApproachRun * unitv(45.0);
    const Vec2 al = center - kApproachRun * unitv(-45.0);
    up = {au - outer * unitv(alpha), au, center};
    low = {al - outer * unitv(-alpha), al, center};
  } else {
    up = {center - outer * unitv(45.0), center};
    low = {center - outer * unitv(-45.0), center};
  }
  if (feeder) {
    up.insert(up.begin(), up.front() - extra_arm * unitv(0.0));
    low.insert(low.begin(), low.front() - extra_arm * unitv(0.0));
  }
  sk.path(upper, std::move(up));
  sk.path(lower, std::move(low));
}

}  // namespace

void FusionGateSpec::validate() const {
  if (!(input_angle_deg >= 20.0 && input_angle_deg <= 45.0))
    throw std::invalid_argument("input_angle_deg must lie in [20, 45]");
  if (!(width >= 8.0 && width <= 20.0))
    throw std::invalid_argument("width must lie in [8, 20]");
  if (!(arm_length >= 5.0 * width))
    throw std::invalid_argument("arm_length must be at least 5x width");
  if (!(cal.wave_speed > 0.0) || !(cal.fragment_temporal_width > 0.0))
    throw std::invalid_argument("calibration constants must be positive");
}

void AdderSpec::validate() const {
  if (bit_count < 1) throw std::invalid_argument("bit_count must be >= 1");
  if (!(pitch > 0.0)) throw std::invalid_argument("pitch must be positive");
  gate.validate();
}

// ---------------------------------------------------------------------------
// Fusion gate
// ---------------------------------------------------------------------------

CircuitPlan build_fusion_gate(const FusionGateSpec& spec) {
  spec.validate();
  Sketch sk(spec.cal, spec.width);
  const Vec2 c{0.0, 0.0};
  const double alpha = spec.input_angle_deg;
  const bool kinked = alpha < kCollisionHalfAngleDeg - 0.5;
  const double outer = spec.arm_length - (kinked ? kApproachRun : 0.0);

  emit_input_arms(sk, spec, c, "x", "y", 0.0);
  if (kinked) {
    const Vec2 bx = c + kApproachRun * unitv(45.0);
    const Vec2 by = c + kApproachRun * unitv(-45.0);
    sk.path("xny", {c, bx, bx + outer * unitv(alpha)});
    sk.path("nxy", {c, by, by + outer * unitv(-alpha)});
  } else {
    sk.path("xny", {c, c + outer * unitv(45.0)});
    sk.path("nxy", {c, c + outer * unitv(-45.0)});
  }
  sk.path("xy", {c, c + spec.arm_length * unitv(0.0)});
  sk.disc("c", c, kFusionRadius);

  sk.pad("x", "x");
  sk.pad("y", "y");

  RouteTrace lone_x{sk.journey({"x", "xny"}), {kEvPass}};
  RouteTrace lone_y{sk.journey({"y", "nxy"}), {kEvPass}};
  RouteTrace fused{sk.journey({"x", "xy"}), {kEvBorn}};
  sk.probe("xny", "xny", {route_arrival(lone_x, spec.cal)});
  sk.probe("nxy", "nxy", {route_arrival(lone_y, spec.cal)});
  sk.probe("xy", "xy", {route_arrival(fused, spec.cal)});

  Layout layout = sk.materialize(30.0);
  return finish_plan(sk, std::move(layout), {{"x", "y"}, {"x+xny", "y+nxy"}});
}

// ---------------------------------------------------------------------------
// Half adder
// ---------------------------------------------------------------------------

CircuitPlan build_half_adder(const FusionGateSpec& spec) {
  spec.validate();
  const CalibrationConstants& cal = spec.cal;
  Sketch sk(cal, spec.width);

  const Vec2 c{0.0, 0.0};
  emit_input_arms(sk, spec, c, "a", "b", 0.0);
  sk.disc("c", c, kFusionRadius);

  // Center rail to the crossing disc, then the AND output h beyond it.
  const Vec2 i{120.0, 0.0};
  sk.path("f", {c, i});
  sk.disc("i", i, kCrossingRadius);

  // Lone x continuation: dip south, climb back through the crossing disc at
  // 65 degrees, run a short lane at y = -40 and descend into the merge.
  const double tan65 = std::tan(deg2rad(65.0));
  const double sin65 = std::sin(deg2rad(65.0));
  const Vec2 p1 = c + 80.0 * unitv(45.0);
  const Vec2 p2{i.x - p1.y / tan65, p1.y};
  check_leg(p2.x - p1.x, 20.0, "dip lane");
  const Vec2 p3 = i + (40.0 / sin65) * unitv(-65.0);
  const Vec2 p4 = p3 + 40.0 * unitv(0.0);
  const Vec2 jm = p4 + 40.0 * unitv(-30.0);  // merge center at y = -60
  sk.path("e", {c, p1, p2, i, p3, p4, jm});
  sk.disc("j", jm, kMergeRadius);

  // Lone y continuation reaches the merge from below; a single-apex detour
  // makes |d| equal |e| exactly.
  const double len_e = sk.path_len("e");
  const Vec2 q2 = jm - 40.0 * unitv(30.0);
  const Vec2 apex = dogleg_apex(c, unitv(-45.0), q2, len_e - 40.0);
  const Vec2 mid_d = (0.5 * norm(apex - c)) * unitv(-45.0);
  sk.path("d", {c, mid_d, apex, q2, jm});
  sk.disc("sd", mid_d, kSpacerRadius);

  // Outputs. |h| keeps the three pad-to-probe chains equal in length.
  const double len_g = 80.0;
  sk.path("g", {jm, jm + len_g * unitv(0.0)});
  const double len_h = len_e + len_g - sk.path_len("f");
  sk.path("h", {i, i + len_h * unitv(0.0)});

  sk.pad("x", "a");
  sk.pad("y", "b");

  RouteTrace via_e{sk.journey({"a", "e", "g"}), {kEvPass, kEvCross, kEvMerge}};
  RouteTrace via_d{sk.journey({"b", "d", "g"}), {kEvPass, kEvSpacer, kEvMerge}};
  RouteTrace via_f{sk.journey({"a", "f", "h"}), {kEvBorn, kEvRail}};
  sk.probe("g", "g", {route_arrival(via_e, cal), route_arrival(via_d, cal)});
  sk.probe("h", "h", {route_arrival(via_f, cal)});

  // Fixed canvas by convention; built east-flowing, then transposed so the
  // waves flow south.
  Layout flat = sk.materialize(30.0, 790, 500);
  CircuitPlan plan = finish_plan(sk, std::move(flat),
                                 {{"a+e+g", "b+d+g", "a+f+h"}, {"a", "b"}});
  plan.layout = transpose_layout(plan.layout);
  return plan;
}

// ---------------------------------------------------------------------------
// Full adder
// ---------------------------------------------------------------------------

namespace {

// Facts the ripple builder needs about one emitted full-adder block.
struct FaBlockInfo {
  Vec2 z_entry;  // bend point where the vertical carry feed meets e
  Vec2 u_end;    // end of the carry output rail
  // Arrival times at the probes, one per route class, including any
  // input-arm extension this block was built with.
  std::vector<double> sum_arrivals;
  std::vector<double> carry_arrivals;
  // Stimulus-to-second-fusion-disc time for this block's own inputs (same
  // clock as route_arrival).
  double x_at_fusion2 = 0.0;
  // Tails from the second fusion disc onward for carry-fed routes: through p
  // to the sum probe, through o to the carry probe.
  double p_tail = 0.0;
  double o_tail = 0.0;
};

struct FaNames {
  std::string sfx;
  std::string ch(const char* base) const { return std::string(base) + sfx; }
};

// Emits one full-adder block. The carry-in feed is either a padded vertical
// drop (stand-alone adder, first ripple block) or left open at z_entry for
// the caller to attach a hop channel.
FaBlockInfo emit_full_adder(Sketch& sk, const FusionGateSpec& spec,
                            Vec2 origin, const FaNames& nm, double extra_arm,
                            bool z_pad) {
  const CalibrationConstants& cal = spec.cal;
  const double v = cal.wave_speed;

  const Vec2 d = origin;
  emit_input_arms(sk, spec, d, nm.ch("b"), nm.ch("c"), extra_arm);
  sk.disc(nm.ch("d"), d, kFusionRadius);

  // First AND rail g to the crossing disc j.
  const Vec2 j = d + Vec2{320.0, 0.0};
  sk.path(nm.ch("g"), {d, j});
  sk.disc(nm.ch("j"), j, kCrossingRadius);

  // x continuation h: dip south, climb at 65 degrees through j, approach the
  // parity merge i at 45 degrees.
  const double tan65 = std::tan(deg2rad(65.0));
  const Vec2 p1 = d + 80.0 * unitv(45.0);
  const Vec2 p2{j.x - (p1.y - d.y) / tan65, p1.y};
  check_leg(p2.x - p1.x, 20.0, "dip lane");
  const Vec2 bh = j + (38.79 / std::sin(deg2rad(65.0))) * unitv(-65.0);
  const Vec2 im = bh + 30.0 * unitv(-45.0);  // merge i at y = -60
  sk.path(nm.ch("h"), {d, p1, p2, j, bh, im});
  sk.disc(nm.ch("i"), im, kMergeRadius);
  const double len_h = sk.path_len(nm.ch("h"));

  // y continuation f must match |h| so both lone fragments reach the merge i
  // in step. It climbs to a lane whose depth solves the length equation and
  // descends into the merge's north mouth.
  {
    const Vec2 f3 = im + 58.0 * unitv(195.0);
    const double a_run = f3.x - d.x;
    const double dyf = d.y - f3.y;
    const double sqrt2 = std::sqrt(2.0);
    // |f| = sqrt2*yf + (a_run - (yf - dyf) - yf) + sqrt2*(yf - dyf) + 58
    const double yf =
        (len_h - a_run - dyf - 58.0 + sqrt2 * dyf) / (2.0 * sqrt2 - 2.0);
    check_leg(yf - dyf, 20.0, "parity feed descent");
    const Vec2 f1{d.x + yf, d.y - yf};
    const Vec2 f2{f3.x - (yf - dyf), d.y - yf};
    check_leg(f2.x - f1.x, 40.0, "parity feed lane");
    const Vec2 mid = 0.5 * (f1 + f2);
    sk.path(nm.ch("f"), {d, f1, mid, f2, f3, im});
    sk.disc(nm.ch("sf"), mid, kSpacerRadius);
    if (std::fabs(sk.path_len(nm.ch("f")) - len_h) > 0.5)
      throw ConstructionError("parity feed length mismatch");
  }

  // Parity rail k to the second fusion disc m.
  const double len_k = 231.8;
  const Vec2 m = im + len_k * unitv(-15.0);  // m at y = -120
  sk.path(nm.ch("k"), {im, m});
  sk.disc(nm.ch("m"), m, kFusionRadius);

  // Carry-in feed: slant e into m. The padded vertical drop makes the carry
  // path exactly as long as the x route b+h+k.
  const Vec2 ze = m - 80.0 * unitv(75.0);
  sk.path(nm.ch("e"), {ze, m});
  if (z_pad) {
    const double len_az = (spec.arm_length + extra_arm + len_h + len_k) - 80.0;
    check_leg(len_az, 80.0, "carry-in drop");
    const Vec2 sa = ze - len_az * unitv(90.0);
    const Vec2 mid = ze - 0.5 * len_az * unitv(90.0);
    sk.path(nm.ch("a"), {sa, mid, ze});
    sk.disc(nm.ch("sa"), mid, kSpacerRadius);
  }

  // Second AND output o runs straight into the carry merge s, three quarters
  // of the way back up to the input rail level.
  const double len_o = 75.0 / std::sin(deg2rad(30.0));
  const Vec2 s = m + len_o * unitv(30.0);
  sk.disc(nm.ch("s"), s, kMergeRadius);

  // Carry-in continuation p: dive off m, climb at -20 crossing o at the
  // crossing disc q, approach the sum merge r from the south-west.
  const Vec2 pp1 = m + 38.0 * unitv(75.0);
  const Vec2 q = line_cross(m, unitv(30.0), pp1, unitv(-20.0));
  const double tau_q = norm(q - pp1);
  check_leg(norm(q - m), kFusionRadius + kCrossingRadius + 4.0,
            "crossing disc spacing");
  const Vec2 n1 = m + 40.0 * unitv(-15.0);
  double tau = 110.0;
  Vec2 ap, r, an;
  double surplus = 0.0;
  bool placed = false;
  for (; tau <= 170.0; tau += 2.0) {
    if (tau < tau_q + 28.0) continue;
    ap = pp1 + tau * unitv(-20.0);
    r = ap + 40.0 * unitv(-30.0);
    an = r - 45.0 * unitv(30.0);
    const double straight = 40.0 + norm(an - n1) + 45.0;
    surplus = (38.0 + tau + 40.0) - straight;
    if (surplus >= 10.0 && surplus <= 55.0) {
      placed = true;
      break;
    }
  }
  if (!placed) throw ConstructionError("cannot balance sum continuations");
  sk.path(nm.ch("p"), {m, pp1, q, ap, r});
  sk.disc(nm.ch("q"), q, kCrossingRadius);
  sk.disc(nm.ch("r"), r, kMergeRadius);

  // Parity continuation n matches |p| through a northward V detour.
  if (v_detour_leg_angle_deg(n1, an, surplus) > 52.0)
    throw ConstructionError("sum detour bend too sharp");
  {
    const auto det = v_detour(n1, an, surplus, -1);
    std::vector<Vec2> pts{m};
    for (const Vec2& p : det) pts.push_back(p);
    pts.push_back(r);
    sk.path(nm.ch("n"), pts);
  }
  if (std::fabs(sk.path_len(nm.ch("n")) - sk.path_len(nm.ch("p"))) > 0.5)
    throw ConstructionError("sum continuation length mismatch");
  sk.path(nm.ch("o"), {m, q, s});

  // First AND rail l reaches the carry merge through a south trapezoid
  // detour sized so both AND routes arrive at s together.
  const double len_g = 320.0;
  const double len_o_len = sk.path_len(nm.ch("o"));
  const Vec2 bl = s - 90.0 * unitv(-30.0);
  const Vec2 m1 = j + Vec2{40.0, 0.0};
  const double delay_and1 = kFusionBirthDelay + kRailCrossingDelay;
  const double delay_and2 = kCrosserDelay + kMergeDelay + kFusionPassDelay +
                            kFusionBirthDelay + kRailCrossingDelay;
  const double adv_h =
      bend_advance_tu(45.0) + bend_advance_tu(65.0) + bend_advance_tu(20.0);
  const double adv_l = 3.0 * bend_advance_tu(65.0) + bend_advance_tu(35.0);
  const double len_l = len_h + len_k + len_o_len - len_g +
                       v * ((delay_and2 - delay_and1) - (adv_h - adv_l));
  {
    const double straight = norm(bl - m1);
    const double extra = len_l - (40.0 + straight + 90.0);
    if (extra < 5.0) throw ConstructionError("carry rail detour infeasible");
    const double coeff =
        2.0 * (1.0 - std::cos(deg2rad(65.0))) / std::sin(deg2rad(65.0));
    const double yd = extra / coeff;
    const double lx = yd / tan65;
    check_leg(straight - 2.0 * lx, 40.0, "carry rail detour");
    const Vec2 t1{m1.x + lx, m1.y + yd};
    const Vec2 t2{bl.x - lx, bl.y + yd};
    sk.path(nm.ch("l"), {j, m1, t1, t2, bl, s});
    if (std::fabs(sk.path_len(nm.ch("l")) - len_l) > 1.0)
      throw ConstructionError("carry rail length mismatch");
  }

  // Sum rail t and carry rail u; u closes the fourth chain identity.
  double len_t = 160.0;
  double len_u =
      len_h + len_k + sk.path_len(nm.ch("n")) + len_t - len_g - len_l;
  if (len_u < 70.0) {
    len_t += 70.0 - len_u;
    len_u = 70.0;
  }
  sk.path(nm.ch("t"), {r, r + len_t * unitv(0.0)});
  sk.path(nm.ch("u"), {s, s + len_u * unitv(0.0)});

  // Route tallies.
  FaBlockInfo info;
  info.z_entry = ze;
  info.u_end = s + len_u * unitv(0.0);

  RouteTrace sum_x{
      sk.journey({nm.ch("b"), nm.ch("h"), nm.ch("k"), nm.ch("n"), nm.ch("t")}),
      {kEvPass, kEvCross, kEvMerge, kEvPass, kEvMerge}};
  RouteTrace sum_y{
      sk.journey({nm.ch("c"), nm.ch("f"), nm.ch("k"), nm.ch("n"), nm.ch("t")}),
      {kEvPass, kEvSpacer, kEvMerge, kEvPass, kEvMerge}};
  info.sum_arrivals = {route_arrival(sum_x, cal), route_arrival(sum_y, cal)};
  if (z_pad) {
    RouteTrace sum_z{
        sk.journey({nm.ch("a"), nm.ch("e"), nm.ch("p"), nm.ch("t")}),
        {kEvSpacer, kEvPass, kEvCross, kEvMerge}};
    info.sum_arrivals.push_back(route_arrival(sum_z, cal));
  }

  RouteTrace carry1{sk.journey({nm.ch("b"), nm.ch("g"), nm.ch("l"), nm.ch("u")}),
                    {kEvBorn, kEvRail, kEvMerge}};
  RouteTrace carry2x{
      sk.journey({nm.ch("b"), nm.ch("h"), nm.ch("k"), nm.ch("o"), nm.ch("u")}),
      {kEvPass, kEvCross, kEvMerge, kEvBorn, kEvRail, kEvMerge}};
  RouteTrace carry2y{
      sk.journey({nm.ch("c"), nm.ch("f"), nm.ch("k"), nm.ch("o"), nm.ch("u")}),
      {kEvPass, kEvSpacer, kEvMerge, kEvBorn, kEvRail, kEvMerge}};
  info.carry_arrivals = {route_arrival(carry1, cal),
                         route_arrival(carry2x, cal),
                         route_arrival(carry2y, cal)};

  RouteTrace to_m{sk.journey({nm.ch("b"), nm.ch("h"), nm.ch("k")}),
                  {kEvPass, kEvCross, kEvMerge}};
  info.x_at_fusion2 = route_arrival(to_m, cal);
  RouteTrace thru_p{
      sk.journey({nm.ch("b"), nm.ch("h"), nm.ch("k"), nm.ch("p"), nm.ch("t")}),
      {kEvPass, kEvCross, kEvMerge, kEvPass, kEvCross, kEvMerge}};
  info.p_tail = route_arrival(thru_p, cal) - info.x_at_fusion2;
  RouteTrace thru_o{
      sk.journey({nm.ch("b"), nm.ch("h"), nm.ch("k"), nm.ch("o"), nm.ch("u")}),
      {kEvPass, kEvCross, kEvMerge, kEvBorn, kEvRail, kEvMerge}};
  info.o_tail = route_arrival(thru_o, cal) - info.x_at_fusion2;
  return info;
}

}  // namespace

CircuitPlan build_full_adder(const FusionGateSpec& spec) {
  spec.validate();
  Sketch sk(spec.cal, spec.width);
  FaNames nm{""};
  FaBlockInfo info =
      emit_full_adder(sk, spec, {0.0, 0.0}, nm, 0.0, /*z_pad=*/true);

  sk.pad("x", "b");
  sk.pad("y", "c");
  sk.pad("z", "a");
  sk.probe("t", "t", info.sum_arrivals);
  sk.probe("u", "u", info.carry_arrivals);

  Layout layout = sk.materialize(30.0);
  return finish_plan(sk, std::move(layout),
                     {{"a+e+p+t", "b+h+k+n+t", "c+f+k+n+t", "b+g+l+u"},
                      {"b", "c"},
                      {"p", "n"}});
}

// ---------------------------------------------------------------------------
// Ripple adder
// ---------------------------------------------------------------------------

CircuitPlan build_ripple_adder(const AdderSpec& spec) {
  spec.validate();
  const FusionGateSpec& gate = spec.gate;
  const CalibrationConstants& cal = gate.cal;
  Sketch sk(cal, gate.width);

  std::vector<std::vector<std::string>> identities;
  std::vector<FaBlockInfo> blocks;
  std::vector<std::string> prev_carry_chain;

  // Fixed per-block offsets, captured from the first block: the carry feed
  // bend point, the second fusion disc, and the horizontal stagger that puts
  // each block's carry feed east of the previous block's rails.
  Vec2 ze_off, m_off;
  double base_at_m = 0.0;
  double dx = 0.0;

  for (int k = 0; k < spec.bit_count; ++k) {
    FaNames nm{std::to_string(k)};
    const Vec2 origin{k * dx, k * spec.pitch};

    // Plan the hop from the previous block and the input delay that lines
    // this block's fragments up with the incoming carry.
    double delay_k = 0.0;
    double carry_at_m = 0.0;
    Vec2 ue, e1, e2, ze_k;
    if (k > 0) {
      ue = blocks.back().u_end;
      ze_k = origin + ze_off;
      e1 = {ze_k.x - 28.284, ue.y};
      e2 = {ze_k.x, ue.y + 28.284};
      check_leg(e1.x - ue.x, 40.0, "carry hop");
      if (ze_k.y - e2.y < 40.0)
        throw ConstructionError("pitch too small for the carry hop");
      RouteTrace trace{sk.journey(prev_carry_chain),
                       {kEvBorn, kEvRail, kEvMerge}};
      trace.pts.push_back(e1);
      trace.pts.push_back(e2);
      trace.pts.push_back(ze_k);
      trace.pts.push_back(origin + m_off);
      carry_at_m = route_arrival(trace, cal);
      if (carry_at_m < base_at_m)
        throw ConstructionError("carry arrives before the block inputs");
      delay_k = carry_at_m - base_at_m;
    }

    FaBlockInfo info = emit_full_adder(
        sk, gate, origin, nm,
        arm_extension_cells(delay_k, cal, gate.input_angle_deg), k == 0);
    if (k > 0 && std::fabs(info.x_at_fusion2 - carry_at_m) > 0.05)
      throw ConstructionError("carry hop timing did not close");
    if (k == 0) {
      ze_off = info.z_entry;
      m_off = ze_off + 80.0 * unitv(75.0);
      base_at_m = info.x_at_fusion2;
      dx = (info.u_end.x - ze_off.x) + 28.284 + 60.0;
    } else {
      sk.path("w" + std::to_string(k - 1), {ue, e1, e2, ze_k});
    }

    sk.pad("x" + nm.sfx, nm.ch("b"));
    sk.pad("y" + nm.sfx, nm.ch("c"));
    if (k == 0) sk.pad("z", nm.ch("a"));

    // Probes. Carry-fed route classes reuse the per-block tails.
    std::vector<double> sums = info.sum_arrivals;
    if (k > 0) sums.push_back(carry_at_m + info.p_tail);
    sk.probe("s" + nm.sfx, nm.ch("t"), sums);
    if (k == spec.bit_count - 1) {
      std::vector<double> carries = info.carry_arrivals;
      if (k > 0) carries.push_back(carry_at_m + info.o_tail);
      sk.probe("carry", nm.ch("u"), carries);
    }

    // Chain identities per block; carry-fed blocks drop the carry-in chain,
    // their synchronization is temporal through the hop timing above.
    if (k == 0) {
      identities.push_back(
          {nm.ch("a") + "+" + nm.ch("e") + "+" + nm.ch("p") + "+" + nm.ch("t"),
           nm.ch("b") + "+" + nm.ch("h") + "+" + nm.ch("k") + "+" + nm.ch("n") +
               "+" + nm.ch("t"),
           nm.ch("c") + "+" + nm.ch("f") + "+" + nm.ch("k") + "+" + nm.ch("n") +
               "+" + nm.ch("t"),
           nm.ch("b") + "+" + nm.ch("g") + "+" + nm.ch("l") + "+" +
               nm.ch("u")});
    } else {
      identities.push_back(
          {nm.ch("b") + "+" + nm.ch("h") + "+" + nm.ch("k") + "+" + nm.ch("n") +
               "+" + nm.ch("t"),
           nm.ch("c") + "+" + nm.ch("f") + "+" + nm.ch("k") + "+" + nm.ch("n") +
               "+" + nm.ch("t")});
    }
    identities.push_back({nm.ch("b"), nm.ch("c")});
    identities.push_back({nm.ch("p"), nm.ch("n")});

    prev_carry_chain = {nm.ch("b"), nm.ch("g"), nm.ch("l"), nm.ch("u")};
    blocks.push_back(info);
  }

  Layout layout = sk.materialize(30.0);
  try {
    return finish_plan(sk, std::move(layout), std::move(identities));
  } catch (const ConstructionError& e) {
    throw ConstructionError(std::string(e.what()) +
                            " (is the pitch large enough for the blocks?)");
  }
}

// ---------------------------------------------------------------------------
// Checks and helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_chain(const std::string& chain) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : chain) {
    if (ch == '+') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// A name in a chain covers the channel itself plus its continuation segments
// name_2, name_3, ...
double chain_length(const Layout& l, const std::string& chain) {
  double total = 0.0;
  for (const std::string& name : split_chain(chain)) {
    bool found = false;
    for (const auto& c : l.channels) {
      if (c.name == name ||
          (c.name.size() > name.size() + 1 &&
           c.name.compare(0, name.size(), name) == 0 &&
           c.name[name.size()] == '_')) {
        total += c.length();
        found = true;
      }
    }
    if (!found)
      throw std::invalid_argument("unknown channel in identity: " + name);
  }
  return total;
}

}  // namespace

BalanceReport check_path_balance(
    const Layout& layout,
    const std::vector<std::vector<std::string>>& identities, double tolerance) {
  BalanceReport report;
  report.tolerance = tolerance;
  for (const auto& identity : identities) {
    BalanceReport::Entry entry;
    for (const auto& chain : identity)
      entry.path_lengths.push_back(chain_length(layout, chain));
    double lo = 1e18, hi = -1e18;
    for (double len : entry.path_lengths) {
      lo = std::min(lo, len);
      hi = std::max(hi, len);
    }
    entry.max_difference = entry.path_lengths.empty() ? 0.0 : hi - lo;
    entry.ok = entry.max_difference < tolerance;
    report.all_ok = report.all_ok && entry.ok;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

Layout transpose_layout(const Layout& in) {
  Layout out;
  out.grid_width = in.grid_height;
  out.grid_height = in.grid_width;
  out.phi_channel = in.phi_channel;
  out.phi_junction = in.phi_junction;
  out.phi_background = in.phi_background;
  auto flip = [](Vec2 p) { return Vec2{p.y, p.x}; };
  auto flip_region = [&](const RegionSpec& r) {
    RegionSpec t = r;
    if (t.shape == RegionSpec::Shape::Rect) {
      t.x0 = r.y0;
      t.y0 = r.x0;
      t.width = r.height;
      t.height = r.width;
    } else {
      t.center = flip(r.center);
    }
    return t;
  };
  for (const auto& c : in.channels) {
    Channel t = c;
    t.start = flip(c.start);
    t.end = flip(c.end);
    out.channels.push_back(std::move(t));
  }
  for (const auto& j : in.junctions) {
    Junction t = j;
    t.center = flip(j.center);
    out.junctions.push_back(std::move(t));
  }
  for (const auto& p : in.pads) {
    StimulusPad t = p;
    t.region = flip_region(p.region);
    out.pads.push_back(std::move(t));
  }
  for (const auto& p : in.probes) {
    Probe t = p;
    t.region = flip_region(p.region);
    out.probes.push_back(std::move(t));
  }
  return out;
}

Vec2 dogleg_apex(const Vec2& p, const Vec2& u, const Vec2& q, double total) {
  const double ulen = norm(u);
  if (!(ulen > 0.0)) throw std::invalid_argument("dogleg direction is zero");
  const Vec2 un = (1.0 / ulen) * u;
  const Vec2 w = p - q;
  const double w2 = w.x * w.x + w.y * w.y;
  const double denom = 2.0 * (total + un.x * w.x + un.y * w.y);
  if (!(total > 0.0) || total * total < w2 || denom <= 1e-9)
    throw std::invalid_argument("dogleg cannot reach the target length");
  const double s = (total * total - w2) / denom;
  if (s < 0.0 || s > total)
    throw std::invalid_argument("dogleg cannot reach the target length");
  return p + s * un;
}

}  // namespace bz
