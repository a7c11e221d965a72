#include "bz/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bz {

StepRegion StepRegion::full(int width, int height) {
  StepRegion r;
  r.spans.reserve(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) r.spans.push_back({y, 0, width - 1});
  return r;
}

StepRegion StepRegion::around_medium(const ExcitabilityMap& map,
                                     double phi_below, int margin) {
  const int w = map.width;
  const int h = map.height;
  std::vector<int> active(static_cast<std::size_t>(w) * h, 0);
  for (std::size_t i = 0; i < active.size(); ++i)
    active[i] = map.phi[i] < phi_below ? 1 : 0;

  // Dilate by `margin` with a sliding window, rows then columns.
  std::vector<int> tmp(active.size(), 0);
  for (int y = 0; y < h; ++y) {
    int count = 0;
    for (int x = 0; x < w + margin; ++x) {
      if (x < w) count += active[map.idx(x, y)];
      const int out = x - margin;
      const int drop = x - 2 * margin - 1;
      if (drop >= 0) count -= active[map.idx(drop, y)];
      if (out >= 0 && out < w) tmp[map.idx(out, y)] = count > 0 ? 1 : 0;
    }
  }
  for (int x = 0; x < w; ++x) {
    int count = 0;
    for (int y = 0; y < h + margin; ++y) {
      if (y < h) count += tmp[map.idx(x, y)];
      const int out = y - margin;
      const int drop = y - 2 * margin - 1;
      if (drop >= 0) count -= tmp[map.idx(x, drop)];
      if (out >= 0 && out < h) active[map.idx(x, out)] = count > 0 ? 1 : 0;
    }
  }

  StepRegion r;
  for (int y = 0; y < h; ++y) {
    int x = 0;
    while (x < w) {
      if (!active[map.idx(x, y)]) {
        ++x;
        continue;
      }
      int x1 = x;
      while (x1 + 1 < w && active[map.idx(x1 + 1, y)]) ++x1;
      r.spans.push_back({y, x, x1});
      x = x1 + 1;
    }
  }
  return r;
}

std::size_t StepRegion::cell_count() const {
  std::size_t n = 0;
  for (const auto& s : spans) n += static_cast<std::size_t>(s.x1 - s.x0 + 1);
  return n;
}

FieldState make_quiescent_state(const ExcitabilityMap& map,
                                const ModelParams& params) {
  FieldState s(map.width, map.height);
  std::map<double, double> roots;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double phi = map.phi[i];
    auto it = roots.find(phi);
    if (it == roots.end())
      it = roots.emplace(phi, quiescent_steady_state(phi, params)).first;
    s.u[i] = it->second;
    s.v[i] = it->second;
  }
  return s;
}

namespace {

// Rows of cells below the map's top excitability, the medium where waves
// can live. A uniform map is all medium.
StepRegion medium_rows(const ExcitabilityMap& map) {
  const auto [lo_it, hi_it] =
      std::minmax_element(map.phi.begin(), map.phi.end());
  const double cutoff = *hi_it;
  if (*lo_it == cutoff) return StepRegion::full(map.width, map.height);
  StepRegion r;
  for (int y = 0; y < map.height; ++y) {
    int x = 0;
    while (x < map.width) {
      if (!(map.phi[map.idx(x, y)] < cutoff)) {
        ++x;
        continue;
      }
      int x1 = x;
      while (x1 + 1 < map.width && map.phi[map.idx(x1 + 1, y)] < cutoff) ++x1;
      r.spans.push_back({y, x, x1});
      x = x1 + 1;
    }
  }
  return r;
}

}  // namespace

FieldState settled_quiescent_state(const ExcitabilityMap& map,
                                   const ModelParams& params,
                                   double settle_time) {
  FieldState s = make_quiescent_state(map, params);
  const auto [lo_it, hi_it] =
      std::minmax_element(map.phi.begin(), map.phi.end());
  if (*lo_it == *hi_it) return s;  // no interfaces, roots are exact
  // Settle at half the working time step. At the full step the strongly
  // damped cells near an excitability interface amplify the relaxation
  // transient into a persistent period-2 flicker (the linearized update
  // factor is about -0.6 there); at half step the update is monotone and
  // the run converges to the true lattice equilibrium, which is a fixed
  // point of the step map at any dt.
  ModelParams settle = params;
  settle.dt = params.dt / 2.0;
  SimulationRun run(settle, map, std::move(s));
  const StepRegion region = StepRegion::around_medium(map, *hi_it, 10);
  StepOptions opt;
  opt.region = &region;
  run_steps(run, std::llround(settle_time / settle.dt), {}, opt);
  return std::move(run.state);
}

ActivityRegion::ActivityRegion(const ExcitabilityMap& map, FieldState baseline,
                               int margin, int rebuild_interval,
                               double tolerance)
    : width_(map.width),
      height_(map.height),
      margin_(margin),
      interval_(rebuild_interval),
      tol_(tolerance) {
  if (margin < 1 || rebuild_interval < 1 || !(tolerance > 0.0))
    throw std::invalid_argument(
        "activity region needs positive margin, interval, and tolerance");
  if (baseline.width != width_ || baseline.height != height_)
    throw std::invalid_argument("activity baseline size differs from map");
  base_u_ = std::move(baseline.u);
  base_v_ = std::move(baseline.v);
  row_lo_.assign(static_cast<std::size_t>(height_), 0);
  row_hi_.assign(static_cast<std::size_t>(height_), 0);

  // Activity can only exceed the tolerance inside the medium or in its
  // damped rim, and a rim cell above tolerance always has a medium cell
  // above tolerance within the dilation margin, so scanning the medium
  // alone is enough.
  scan_ = medium_rows(map);
}

const StepRegion* ActivityRegion::next(SimulationRun& run) {
  if (run.step_count >= next_rebuild_) {
    run.sync_back_buffers(region_);
    rebuild(run.state);
    next_rebuild_ = run.step_count + interval_;
  }
  return &region_;
}

void ActivityRegion::rebuild(const FieldState& state) {
  constexpr int kNone = -1;
  std::fill(row_lo_.begin(), row_lo_.end(), kNone);
  std::fill(row_hi_.begin(), row_hi_.end(), kNone);
  const double* u = state.u.data();
  const double* v = state.v.data();
  for (const auto& s : scan_.spans) {
    const std::size_t row = static_cast<std::size_t>(s.y) * width_;
    int lo = row_lo_[static_cast<std::size_t>(s.y)];
    int hi = row_hi_[static_cast<std::size_t>(s.y)];
    for (int x = s.x0; x <= s.x1; ++x) {
      const std::size_t i = row + static_cast<std::size_t>(x);
      if (std::fabs(u[i] - base_u_[i]) > tol_ ||
          std::fabs(v[i] - base_v_[i]) > tol_) {
        if (lo == kNone) lo = x;
        hi = x;
      }
    }
    row_lo_[static_cast<std::size_t>(s.y)] = lo;
    row_hi_[static_cast<std::size_t>(s.y)] = hi;
  }

  region_.spans.clear();
  for (int y = 0; y < height_; ++y) {
    const int w0 = std::max(0, y - margin_);
    const int w1 = std::min(height_ - 1, y + margin_);
    int lo = kNone;
    int hi = kNone;
    for (int wy = w0; wy <= w1; ++wy) {
      const int rl = row_lo_[static_cast<std::size_t>(wy)];
      if (rl == kNone) continue;
      const int rh = row_hi_[static_cast<std::size_t>(wy)];
      if (lo == kNone || rl < lo) lo = rl;
      if (rh > hi) hi = rh;
    }
    if (lo == kNone) continue;
    region_.spans.push_back(
        {y, std::max(0, lo - margin_), std::min(width_ - 1, hi + margin_)});
  }
}

double laplacian_5pt(const std::vector<double>& field, int width, int height,
                     int x, int y, double dx) {
  if (x < 0 || y < 0 || x >= width || y >= height ||
      field.size() != static_cast<std::size_t>(width) * height)
    throw std::out_of_range("laplacian_5pt index outside lattice");
  auto at = [&](int cx, int cy) {
    return field[static_cast<std::size_t>(cy) * width + cx];
  };
  const double c = at(x, y);
  const double l = x > 0 ? at(x - 1, y) : c;
  const double r = x < width - 1 ? at(x + 1, y) : c;
  const double up = y > 0 ? at(x, y - 1) : c;
  const double dn = y < height - 1 ? at(x, y + 1) : c;
  return ((l + r) + (up + dn) - 4.0 * c) * (1.0 / (dx * dx));
}

SimulationRun::SimulationRun(ModelParams p, ExcitabilityMap m, FieldState s)
    : params(p), map(std::move(m)), state(std::move(s)) {
  params.validate();
  if (map.width != state.width || map.height != state.height)
    throw std::invalid_argument("excitability map and state sizes differ");
  if (state.width < 1 || state.height < 1)
    throw std::invalid_argument("grid must be at least 1x1");
}

namespace {

struct KernelConsts {
  double dt;
  double d_u;
  double inv_dx2;
  double inv_eps;
  double f;
  double q;
};

struct SpanTallies {
  double projected = 0.0;
  double min_raw = 0.0;
  double bad = 0.0;
};

template <bool kReaction>
void update_span(const double* u, const double* v, const double* phi,
                 double* un, double* vn, int width, int height, int y, int x0,
                 int x1, const KernelConsts& k, SpanTallies& tl) {
  const std::size_t row = static_cast<std::size_t>(y) * width;
  const double* uc = u + row;
  const double* uup =
      u + static_cast<std::size_t>(y > 0 ? y - 1 : 0) * width;
  const double* udn =
      u + static_cast<std::size_t>(y < height - 1 ? y + 1 : height - 1) * width;
  const double* vc = v + row;
  const double* ph = phi + row;
  double* ou = un + row;
  double* ov = vn + row;

  double projected = tl.projected;
  double min_raw = tl.min_raw;
  double bad = tl.bad;

  auto cell = [&](int x, int xm, int xp) {
    const double c = uc[x];
    const double lap =
        ((uc[xm] + uc[xp]) + (uup[x] + udn[x]) - 4.0 * c) * k.inv_dx2;
    double du = k.d_u * lap;
    double dv = 0.0;
    if constexpr (kReaction) {
      du += k.inv_eps *
            (c - c * c - (k.f * vc[x] + ph[x]) * ((c - k.q) / (c + k.q)));
      dv = c - vc[x];
    }
    const double raw = c + k.dt * du;
    projected += raw < 0.0 ? 1.0 : 0.0;
    min_raw = raw < min_raw ? raw : min_raw;
    bad += raw < 10.0 ? 0.0 : 1.0;
    ou[x] = raw < 0.0 ? 0.0 : raw;
    ov[x] = vc[x] + k.dt * dv;
  };

  int x = x0;
  if (x == 0 && x <= x1) {
    cell(0, 0, width > 1 ? 1 : 0);
    ++x;
  }
  const int stop = x1 == width - 1 ? x1 - 1 : x1;
#pragma omp simd reduction(+ : projected, bad) reduction(min : min_raw)
  for (int xi = x; xi <= stop; ++xi) {
    const double c = uc[xi];
    const double lap =
        ((uc[xi - 1] + uc[xi + 1]) + (uup[xi] + udn[xi]) - 4.0 * c) *
        k.inv_dx2;
    double du = k.d_u * lap;
    double dv = 0.0;
    if constexpr (kReaction) {
      du += k.inv_eps *
            (c - c * c - (k.f * vc[xi] + ph[xi]) * ((c - k.q) / (c + k.q)));
      dv = c - vc[xi];
    }
    const double raw = c + k.dt * du;
    projected += raw < 0.0 ? 1.0 : 0.0;
    min_raw = raw < min_raw ? raw : min_raw;
    bad += raw < 10.0 ? 0.0 : 1.0;
    ou[xi] = raw < 0.0 ? 0.0 : raw;
    ov[xi] = vc[xi] + k.dt * dv;
  }
  if (stop + 1 == width - 1 && stop + 1 >= x && stop + 1 <= x1)
    cell(width - 1, width - 2, width - 1);

  tl.projected = projected;
  tl.min_raw = min_raw;
  tl.bad = bad;
}

template <bool kReaction>
SpanTallies step_spans(const std::vector<StepRegion::Span>& spans,
                       const double* u, const double* v, const double* phi,
                       double* un, double* vn, int width, int height,
                       const KernelConsts& k, bool parallel, int threads) {
  double projected = 0.0;
  double min_raw = 0.0;
  double bad = 0.0;
  const int n = static_cast<int>(spans.size());
#ifdef _OPENMP
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#else
  const int nthreads = 1;
  (void)threads;
  (void)parallel;
#endif
#pragma omp parallel for schedule(static) num_threads(nthreads) \
    if (parallel) reduction(+ : projected, bad) reduction(min : min_raw)
  for (int i = 0; i < n; ++i) {
    SpanTallies tl;
    update_span<kReaction>(u, v, phi, un, vn, width, height, spans[i].y,
                           spans[i].x0, spans[i].x1, k, tl);
    projected += tl.projected;
    bad += tl.bad;
    min_raw = std::min(min_raw, tl.min_raw);
  }
  return {projected, min_raw, bad};
}

}  // namespace

void euler_step(SimulationRun& run, const StepOptions& options) {
  FieldState& s = run.state;
  if (run.u_next_.size() != s.u.size()) {
    // Back buffers start as a copy so cells outside the step region hold
    // their values across the swap.
    run.u_next_ = s.u;
    run.v_next_ = s.v;
  }

  static thread_local StepRegion cached_full;
  const StepRegion* region = options.region;
  if (!region) {
    if (cached_full.spans.size() != static_cast<std::size_t>(s.height) ||
        (s.height > 0 && cached_full.spans[0].x1 != s.width - 1))
      cached_full = StepRegion::full(s.width, s.height);
    region = &cached_full;
  }

  const ModelParams& p = run.params;
  const KernelConsts k{p.dt,          p.d_u, 1.0 / (p.dx * p.dx),
                       1.0 / p.epsilon, p.f,   p.q};

  SpanTallies tl =
      options.reaction
          ? step_spans<true>(region->spans, s.u.data(), s.v.data(),
                             run.map.phi.data(), run.u_next_.data(),
                             run.v_next_.data(), s.width, s.height, k,
                             options.parallel, options.threads)
          : step_spans<false>(region->spans, s.u.data(), s.v.data(),
                              run.map.phi.data(), run.u_next_.data(),
                              run.v_next_.data(), s.width, s.height, k,
                              options.parallel, options.threads);

  std::swap(s.u, run.u_next_);
  std::swap(s.v, run.v_next_);
  ++run.step_count;
  s.t = static_cast<double>(run.step_count) * p.dt;
  run.stats.projected_cells += static_cast<long long>(tl.projected);
  run.stats.min_raw_u = std::min(run.stats.min_raw_u, tl.min_raw);

  if (tl.bad > 0.0) {
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      if (!(std::fabs(s.u[i]) < 10.0) || !std::isfinite(s.v[i]))
        throw BlowUpError(run.step_count, i,
                          "field value diverged at step " +
                              std::to_string(run.step_count));
    }
  }
}

void SimulationRun::sync_back_buffers(const StepRegion& region) {
  if (u_next_.size() != state.u.size()) return;  // not yet stepped
  for (const auto& s : region.spans) {
    const std::size_t off =
        static_cast<std::size_t>(s.y) * state.width + s.x0;
    const std::size_t len = static_cast<std::size_t>(s.x1 - s.x0 + 1);
    std::copy_n(state.u.data() + off, len, u_next_.data() + off);
    std::copy_n(state.v.data() + off, len, v_next_.data() + off);
  }
}

void run_steps(SimulationRun& run, long long n, const FrameSink& sink,
               const StepOptions& options) {
  for (long long i = 0; i < n; ++i) {
    euler_step(run, options);
    if (sink && run.snapshot_interval > 0 &&
        run.step_count % run.snapshot_interval == 0)
      sink(run.state, run.step_count);
  }
}

void run_steps(SimulationRun& run, long long n, ActivityRegion& activity,
               const FrameSink& sink, const StepOptions& options) {
  StepOptions opt = options;
  for (long long i = 0; i < n; ++i) {
    opt.region = activity.next(run);
    euler_step(run, opt);
    if (sink && run.snapshot_interval > 0 &&
        run.step_count % run.snapshot_interval == 0)
      sink(run.state, run.step_count);
  }
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated frame");
  return value;
}

}  // namespace

void write_frame(std::ostream& out, const FieldState& state,
                 long long step_count, double dt) {
  write_pod(out, static_cast<std::uint32_t>(state.width));
  write_pod(out, static_cast<std::uint32_t>(state.height));
  write_pod(out, static_cast<std::uint64_t>(step_count));
  write_pod(out, dt);
  out.write(reinterpret_cast<const char*>(state.u.data()),
            static_cast<std::streamsize>(state.u.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(state.v.data()),
            static_cast<std::streamsize>(state.v.size() * sizeof(double)));
}

Frame read_frame(std::istream& in) {
  Frame f;
  const auto w = read_pod<std::uint32_t>(in);
  const auto h = read_pod<std::uint32_t>(in);
  f.step_count = static_cast<long long>(read_pod<std::uint64_t>(in));
  f.dt = read_pod<double>(in);
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    throw std::runtime_error("implausible frame dimensions");
  f.state = FieldState(static_cast<int>(w), static_cast<int>(h));
  f.state.t = static_cast<double>(f.step_count) * f.dt;
  in.read(reinterpret_cast<char*>(f.state.u.data()),
          static_cast<std::streamsize>(f.state.u.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(f.state.v.data()),
          static_cast<std::streamsize>(f.state.v.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated frame");
  return f;
}

std::uint64_t field_hash(const FieldState& state) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(state.width),
                                 static_cast<std::uint32_t>(state.height)};
  mix(dims, sizeof(dims));
  mix(state.u.data(), state.u.size() * sizeof(double));
  mix(state.v.data(), state.v.size() * sizeof(double));
  return h;
}

}  // namespace bz
