#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "bz/model.hpp"

namespace bz {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

double norm(Vec2 a);
// Squared distance from p to the segment [a, b].
double dist2_point_segment(Vec2 p, Vec2 a, Vec2 b);

// Channels are straight strips: a cell belongs to the channel when its
// center projects onto the segment (0 <= t <= 1) within width/2 of the
// centerline. No end caps, so the covered area tracks length*width; bends
// are made of strips sharing an endpoint, whose corner squares overlap.
struct Channel {
  std::string name;
  Vec2 start;
  Vec2 end;
  double width = 12.0;
  double length() const { return norm(end - start); }
};

struct Junction {
  std::string name;
  Vec2 center;
  double radius = 18.0;
};

// Rectangle (integer cells) or disc (continuous center/radius).
struct RegionSpec {
  enum class Shape { Rect, Disc };
  Shape shape = Shape::Rect;
  int x0 = 0;
  int y0 = 0;
  int width = 10;
  int height = 10;
  Vec2 center;
  double radius = 5.0;

  static RegionSpec rect(int x0, int y0, int w, int h);
  static RegionSpec disc(Vec2 center, double radius);
  bool contains(int x, int y) const;
  // Inclusive cell bounding box; not clipped to any grid.
  void cell_bounds(int& bx0, int& by0, int& bx1, int& by1) const;
};

struct StimulusPad {
  std::string name;  // input variable this pad encodes
  RegionSpec region;
  double value = 1.0;
};

struct Probe {
  std::string name;  // output variable this probe reads
  RegionSpec region;  // rectangle
  double t_min = 0.0;
  double t_max = 0.0;
  double threshold = 0.04;
};

struct Layout {
  static constexpr double kDefaultPhiJunction = 0.0766;

  int grid_width = 0;
  int grid_height = 0;
  std::vector<Channel> channels;
  std::vector<Junction> junctions;
  std::vector<StimulusPad> pads;
  std::vector<Probe> probes;
  double phi_channel = 0.05;
  double phi_junction = kDefaultPhiJunction;
  double phi_background = 0.20;

  const Channel* find_channel(const std::string& name) const;
  const Junction* find_junction(const std::string& name) const;
};

class LayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool channel_contains_cell(const Channel& c, int x, int y);
// Centerline enters the junction disc.
bool junction_incident(const Layout& l, const Junction& j, const Channel& c);
// Shared endpoint or a common junction.
bool channels_connected(const Layout& l, const Channel& a, const Channel& b);

// Paints phi_channel inside channel strips, phi_junction inside junction
// discs (junction wins), phi_background elsewhere. Throws LayoutError when
// two channels overlap away from any junction disc or shared endpoint.
ExcitabilityMap rasterize(const Layout& layout);

// Total check of the Layout invariants; returns one token per violation,
// e.g. "width-too-small(a)" or "dangling-junction(c)". Empty means valid.
std::vector<std::string> validate(const Layout& layout);

// Sum of the named channels' centerline lengths; consecutive names must be
// connected. Throws std::invalid_argument otherwise.
double path_length(const Layout& layout,
                   const std::vector<std::string>& names);

std::string layout_to_json(const Layout& layout);
Layout layout_from_json(const std::string& text);
void save_layout(const Layout& layout, const std::string& path);
Layout load_layout(const std::string& path);

}  // namespace bz
