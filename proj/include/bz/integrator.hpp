#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "bz/model.hpp"

namespace bz {

// Subset of the grid to update, as inclusive row spans. Cells outside the
// region keep their values but are still read as neighbors, so a region
// must extend far enough past the active medium that the frozen rim never
// feels a wave. Spans must be sorted by row and non-overlapping.
struct StepRegion {
  struct Span {
    int y = 0;
    int x0 = 0;
    int x1 = 0;
  };
  std::vector<Span> spans;

  static StepRegion full(int width, int height);
  // Rows covering all cells with phi below the given threshold, dilated by
  // `margin` cells in x and y.
  static StepRegion around_medium(const ExcitabilityMap& map, double phi_below,
                                  int margin);
  std::size_t cell_count() const;
};

struct StepOptions {
  int threads = 0;              // 0: library default
  bool parallel = true;         // false: serial reference path
  bool reaction = true;         // false: pure diffusion (test hook)
  const StepRegion* region = nullptr;  // null: full grid
};

// Running tallies across all steps of a simulation.
struct StepStats {
  long long projected_cells = 0;  // updates that would have gone negative
  double min_raw_u = 0.0;         // most negative raw update seen
};

struct SimulationRun {
  ModelParams params;
  ExcitabilityMap map;
  FieldState state;
  long long step_count = 0;
  int snapshot_interval = 150;
  StepStats stats;

  SimulationRun(ModelParams p, ExcitabilityMap m, FieldState s);

  // Recopies the given cells from the state into the back buffers.
  // Required before the step region shrinks: a cell dropped from the region
  // would otherwise alternate between its last two values across swaps.
  void sync_back_buffers(const StepRegion& region);

 private:
  std::vector<double> u_next_;
  std::vector<double> v_next_;
  friend void euler_step(SimulationRun&, const StepOptions&);
};

// State with every cell at the quiescent steady state of its own phi.
// Exact in uniform surroundings; within a few cells of an excitability step
// the true two-dimensional steady profile differs by up to ~1e-3.
FieldState make_quiescent_state(const ExcitabilityMap& map,
                                const ModelParams& params);

// Quiescent state integrated until the excitability interfaces settle to
// the two-dimensional steady profile (residual ~1e-10 at the default
// settle time, set by the recovery variable's unit relaxation rate).
// Experiments start from this state so that idle cells sit at a genuine
// fixed point of the step map.
FieldState settled_quiescent_state(const ExcitabilityMap& map,
                                   const ModelParams& params,
                                   double settle_time = 16.0);

// Rebuilds a step region around cells that have left a settled baseline,
// so long runs only integrate near live wave activity. Cells frozen at the
// baseline are a fixed point of the step map up to the baseline's own
// settling residual, and above-tolerance influence spreads well under
// `margin` cells per `rebuild_interval` steps at the working parameters,
// so the trimmed region leaves wave fronts unchanged. Only medium cells
// are scanned, and the default tolerance sits above the sympathetic
// wiggle that the damped rim's post-wave flicker induces in channel edge
// cells (~1e-4) yet far below every dynamically relevant scale (the
// excitation threshold is 0.04 and q is 2e-3), so wakes count as inactive
// once they are dynamically dead and the region contracts behind a wave.
class ActivityRegion {
 public:
  ActivityRegion(const ExcitabilityMap& map, FieldState baseline,
                 int margin = 24, int rebuild_interval = 200,
                 double tolerance = 5e-4);
  // Region for the run's next step; rebuilds from the run state on the
  // configured cadence and on the first call, syncing the run's back
  // buffers over the outgoing region whenever it rebuilds.
  const StepRegion* next(SimulationRun& run);
  const StepRegion& current() const { return region_; }

 private:
  void rebuild(const FieldState& state);

  StepRegion scan_;  // rows of the excitable medium, the only cells examined
  std::vector<double> base_u_;
  std::vector<double> base_v_;
  std::vector<int> row_lo_, row_hi_;
  StepRegion region_;
  long long next_rebuild_ = -1;
  int width_ = 0;
  int height_ = 0;
  int margin_;
  int interval_;
  double tol_;
};

// Five-point stencil with zero-flux boundaries: out-of-bounds neighbors
// are replaced by the center value. Same association as the step kernel:
// ((left + right) + (up + down) - 4*center) / dx^2.
// Throws std::out_of_range for an index outside the lattice.
double laplacian_5pt(const std::vector<double>& field, int width, int height,
                     int x, int y, double dx);

// One forward Euler step. The u update is projected at zero: a raw update
// that lands below zero is replaced by zero and counted in stats. Without
// the projection the (u - q)/(u + q) term is unstable once a step
// overshoots below -q, and the scheme blows up at the working time step.
// Throws BlowUpError if a non-finite or runaway value appears anyway.
void euler_step(SimulationRun& run, const StepOptions& options = {});

using FrameSink =
    std::function<void(const FieldState& state, long long step_count)>;

// Advances n steps, emitting the state to the sink (if any) after every step
// where step_count is a multiple of run.snapshot_interval.
void run_steps(SimulationRun& run, long long n, const FrameSink& sink = {},
               const StepOptions& options = {});

// Same, but integrates only the adaptive region; options.region is ignored.
void run_steps(SimulationRun& run, long long n, ActivityRegion& activity,
               const FrameSink& sink = {}, const StepOptions& options = {});

// Frame dump: width(u32) height(u32) step(u64) dt(f64), then the u field
// and the v field in row-major f64, all little-endian.
struct Frame {
  FieldState state;
  long long step_count = 0;
  double dt = 0.0;
};
void write_frame(std::ostream& out, const FieldState& state,
                 long long step_count, double dt);
Frame read_frame(std::istream& in);

// FNV-1a over the raw bytes of both fields, for determinism checks.
std::uint64_t field_hash(const FieldState& state);

}  // namespace bz
