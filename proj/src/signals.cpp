#include "bz/signals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bz {

void apply_stimulus(FieldState& state, const StimulusPad& pad) {
  int bx0, by0, bx1, by1;
  pad.region.cell_bounds(bx0, by0, bx1, by1);
  const bool empty = bx1 < bx0 || by1 < by0;
  if (!empty && (bx0 < 0 || by0 < 0 || bx1 >= state.width ||
                 by1 >= state.height))
    throw std::out_of_range("stimulus pad " + pad.name + " leaves the grid");
  for (int y = by0; y <= by1; ++y)
    for (int x = bx0; x <= bx1; ++x)
      if (pad.region.contains(x, y)) state.u[state.idx(x, y)] = pad.value;
}

std::vector<ComponentStats> excited_components(const FieldState& state,
                                               double threshold) {
  const int w = state.width;
  const int h = state.height;
  std::vector<ComponentStats> out;
  std::vector<int> label(state.size(), -1);
  std::vector<std::size_t> stack;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = state.idx(x0, y0);
      if (label[start] >= 0 || !(state.u[start] > threshold)) continue;
      const int id = static_cast<int>(out.size());
      ComponentStats c;
      c.bx0 = c.bx1 = x0;
      c.by0 = c.by1 = y0;
      double sx = 0.0, sy = 0.0;
      label[start] = id;
      stack.assign(1, start);
      while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(i % w);
        const int y = static_cast<int>(i / w);
        ++c.area;
        sx += x + 0.5;
        sy += y + 0.5;
        c.bx0 = std::min(c.bx0, x);
        c.bx1 = std::max(c.bx1, x);
        c.by0 = std::min(c.by0, y);
        c.by1 = std::max(c.by1, y);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
          const std::size_t ni = state.idx(nx[k], ny[k]);
          if (label[ni] < 0 && state.u[ni] > threshold) {
            label[ni] = id;
            stack.push_back(ni);
          }
        }
      }
      c.centroid = {sx / c.area, sy / c.area};
      out.push_back(c);
    }
  return out;
}

namespace {

// Largest 4-connected excited patch inside a probe rectangle.
int max_contiguous_in_rect(const FieldState& state, const RegionSpec& r,
                           double threshold) {
  const int w = r.width;
  const int h = r.height;
  std::vector<char> mask(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int gx = r.x0 + x;
      const int gy = r.y0 + y;
      if (gx < 0 || gy < 0 || gx >= state.width || gy >= state.height)
        continue;
      if (state.u[state.idx(gx, gy)] > threshold)
        mask[static_cast<std::size_t>(y) * w + x] = 1;
    }
  int best = 0;
  std::vector<int> stack;
  for (int i = 0; i < w * h; ++i) {
    if (!mask[i]) continue;
    int area = 0;
    mask[i] = 0;
    stack.assign(1, i);
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      ++area;
      const int x = j % w;
      const int y = j / w;
      const int nbr[4] = {j - 1, j + 1, j - w, j + w};
      const bool ok[4] = {x > 0, x < w - 1, y > 0, y < h - 1};
      for (int k = 0; k < 4; ++k)
        if (ok[k] && mask[nbr[k]]) {
          mask[nbr[k]] = 0;
          stack.push_back(nbr[k]);
        }
    }
    best = std::max(best, area);
  }
  return best;
}

double probe_peak(const FieldState& state, const RegionSpec& r) {
  double peak = 0.0;
  int bx0, by0, bx1, by1;
  r.cell_bounds(bx0, by0, bx1, by1);
  bx0 = std::max(bx0, 0);
  by0 = std::max(by0, 0);
  bx1 = std::min(bx1, state.width - 1);
  by1 = std::min(by1, state.height - 1);
  for (int y = by0; y <= by1; ++y)
    for (int x = bx0; x <= bx1; ++x)
      if (r.contains(x, y))
        peak = std::max(peak, state.u[state.idx(x, y)]);
  return peak;
}

}  // namespace

ProbeMonitor::ProbeMonitor(std::vector<Probe> probes, int contiguity)
    : probes_(std::move(probes)), contiguity_(contiguity) {
  results_.reserve(probes_.size());
  for (const auto& p : probes_) {
    ProbeResult r;
    r.name = p.name;
    results_.push_back(std::move(r));
  }
}

void ProbeMonitor::feed(const FieldState& state, double t) {
  for (std::size_t i = 0; i < probes_.size(); ++i) {
    const Probe& p = probes_[i];
    if (t < p.t_min || t > p.t_max) continue;
    ProbeResult& r = results_[i];
    r.peak_u = std::max(r.peak_u, probe_peak(state, p.region));
    if (!r.fired &&
        max_contiguous_in_rect(state, p.region, p.threshold) >=
            contiguity_) {
      r.fired = true;
      r.first_crossing_time = t;
    }
  }
}

ProbeResult probe_presence(const std::vector<Frame>& frames,
                           const Probe& probe, int contiguity) {
  if (frames.empty() || frames.front().state.t > probe.t_min ||
      frames.back().state.t < probe.t_max)
    throw std::invalid_argument("probe window for " + probe.name +
                                " is outside the simulated span");
  ProbeMonitor monitor({probe}, contiguity);
  for (const auto& f : frames) monitor.feed(f.state, f.state.t);
  return monitor.results().front();
}

const char* fragment_class_name(FragmentClass c) {
  switch (c) {
    case FragmentClass::Expand:
      return "Expand";
    case FragmentClass::Sustain:
      return "Sustain";
    case FragmentClass::Collapse:
      return "Collapse";
  }
  return "?";
}

FragmentTrack track_fragment(const std::vector<Frame>& frames,
                             const RegionSpec& seed, double threshold) {
  if (frames.size() < 10)
    throw std::invalid_argument(
        "fragment classification needs at least 10 snapshots");

  Vec2 centroid;
  if (seed.shape == RegionSpec::Shape::Rect)
    centroid = {seed.x0 + 0.5 * seed.width, seed.y0 + 0.5 * seed.height};
  else
    centroid = seed.center;

  FragmentTrack track;
  bool collapsed = false;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const Frame& f = frames[fi];
    auto comps = excited_components(f.state, threshold);
    FragmentSnapshot snap;
    snap.step_count = f.step_count;
    snap.t = f.state.t;
    if (comps.empty()) {
      snap.centroid = centroid;
      track.snapshots.push_back(snap);
      collapsed = true;
      break;
    }
    const ComponentStats* best = nullptr;
    double best_d = 0.0;
    for (const auto& c : comps) {
      const Vec2 d = c.centroid - centroid;
      const double dist = d.x * d.x + d.y * d.y;
      if (!best || dist < best_d - 1e-9 ||
          (std::fabs(dist - best_d) <= 1e-9 &&
           c.centroid.x > best->centroid.x)) {
        best = &c;
        best_d = dist;
      }
    }
    if (fi == 0) {
      // The tracker needs something plausibly grown out of the seed.
      const double dx = best->centroid.x - centroid.x;
      const double dy = best->centroid.y - centroid.y;
      if (std::sqrt(dx * dx + dy * dy) > 50.0)
        throw std::runtime_error(
            "no-fragment: nothing excited near the seed region at the first "
            "snapshot");
    }
    centroid = best->centroid;
    snap.area = best->area;
    snap.centroid = best->centroid;
    snap.bx0 = best->bx0;
    snap.by0 = best->by0;
    snap.bx1 = best->bx1;
    snap.by1 = best->by1;
    track.snapshots.push_back(snap);
  }

  if (collapsed && track.snapshots.size() == 1)
    throw std::runtime_error(
        "no-fragment: seed region empty at the first snapshot");

  if (collapsed) {
    track.classification = FragmentClass::Collapse;
  } else {
    const double baseline = track.snapshots[4].area;
    if (track.snapshots.back().area > 1.5 * baseline)
      track.classification = FragmentClass::Expand;
    else
      track.classification = FragmentClass::Sustain;
  }
  if (track.snapshots.size() >= 5 && track.snapshots[4].area > 0) {
    const double baseline = track.snapshots[4].area;
    double lo = track.snapshots[4].area / baseline;
    double hi = lo;
    for (std::size_t i = 4; i < track.snapshots.size(); ++i) {
      const double ratio = track.snapshots[i].area / baseline;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    track.min_area_ratio = lo;
    track.max_area_ratio = hi;
  }
  return track;
}

double measure_wave_speed(const std::vector<Frame>& frames, Axis axis,
                          double threshold) {
  if (frames.size() < 5)
    throw std::invalid_argument("wave speed needs at least 5 snapshots");
  const std::size_t n = frames.size();
  const std::size_t i0 = n / 5;
  const std::size_t i1 = n - n / 5;
  std::vector<double> ts, xs;
  for (std::size_t i = i0; i < i1; ++i) {
    const FieldState& s = frames[i].state;
    bool found = false;
    double front = 0.0;
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        if (!(s.u[s.idx(x, y)] > threshold)) continue;
        double pos = 0.0;
        switch (axis) {
          case Axis::PlusX: pos = x; break;
          case Axis::MinusX: pos = -x; break;
          case Axis::PlusY: pos = y; break;
          case Axis::MinusY: pos = -y; break;
        }
        if (!found || pos > front) front = pos;
        found = true;
      }
    if (!found)
      throw std::runtime_error("no front found in snapshot " +
                               std::to_string(i));
    ts.push_back(frames[i].state.t);
    xs.push_back(front);
  }
  if (ts.size() < 2)
    throw std::invalid_argument("wave speed needs a wider middle window");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] < xs[i - 1] - 1.0)
      throw std::runtime_error("front positions are not monotone");

  const double m = static_cast<double>(ts.size());
  double st = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sx += xs[i];
  }
  const double mt = st / m;
  const double mx = sx / m;
  double cov = 0.0, var = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    cov += (ts[i] - mt) * (xs[i] - mx);
    var += (ts[i] - mt) * (ts[i] - mt);
  }
  if (var == 0.0) throw std::runtime_error("degenerate time axis");
  const double slope = cov / var;
  double ss = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double r = xs[i] - (mx + slope * (ts[i] - mt));
    ss += r * r;
  }
  const double rms = std::sqrt(ss / m);
  const double traveled = std::fabs(slope) * (ts.back() - ts.front());
  if (!(traveled > 0.0) || rms / traveled > 0.05)
    throw std::runtime_error("front fit residual too large");
  return slope;
}

}  // namespace bz
