#include "bz/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace bz {

double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

double dist2_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const Vec2 ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0.0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = ap.x - t * ab.x;
  const double dy = ap.y - t * ab.y;
  return dx * dx + dy * dy;
}

RegionSpec RegionSpec::rect(int x0, int y0, int w, int h) {
  RegionSpec r;
  r.shape = Shape::Rect;
  r.x0 = x0;
  r.y0 = y0;
  r.width = w;
  r.height = h;
  return r;
}

RegionSpec RegionSpec::disc(Vec2 center, double radius) {
  RegionSpec r;
  r.shape = Shape::Disc;
  r.center = center;
  r.radius = radius;
  return r;
}

bool RegionSpec::contains(int x, int y) const {
  if (shape == Shape::Rect)
    return x >= x0 && x < x0 + width && y >= y0 && y < y0 + height;
  const double dx = (x + 0.5) - center.x;
  const double dy = (y + 0.5) - center.y;
  return dx * dx + dy * dy <= radius * radius;
}

void RegionSpec::cell_bounds(int& bx0, int& by0, int& bx1, int& by1) const {
  if (shape == Shape::Rect) {
    bx0 = x0;
    by0 = y0;
    bx1 = x0 + width - 1;
    by1 = y0 + height - 1;
    return;
  }
  bx0 = static_cast<int>(std::floor(center.x - radius - 1.0));
  by0 = static_cast<int>(std::floor(center.y - radius - 1.0));
  bx1 = static_cast<int>(std::ceil(center.x + radius + 1.0));
  by1 = static_cast<int>(std::ceil(center.y + radius + 1.0));
}

const Channel* Layout::find_channel(const std::string& name) const {
  for (const auto& c : channels)
    if (c.name == name) return &c;
  return nullptr;
}

const Junction* Layout::find_junction(const std::string& name) const {
  for (const auto& j : junctions)
    if (j.name == name) return &j;
  return nullptr;
}

bool channel_contains_cell(const Channel& c, int x, int y) {
  const Vec2 p{x + 0.5, y + 0.5};
  const Vec2 ab = c.end - c.start;
  const Vec2 ap = p - c.start;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 <= 0.0) return false;
  const double t = (ap.x * ab.x + ap.y * ab.y) / len2;
  if (t < 0.0 || t > 1.0) return false;
  const double dx = ap.x - t * ab.x;
  const double dy = ap.y - t * ab.y;
  return dx * dx + dy * dy <= 0.25 * c.width * c.width;
}

bool junction_incident(const Layout&, const Junction& j, const Channel& c) {
  return dist2_point_segment(j.center, c.start, c.end) <= j.radius * j.radius;
}

namespace {

bool near(Vec2 a, Vec2 b, double tol) {
  const Vec2 d = a - b;
  return d.x * d.x + d.y * d.y <= tol * tol;
}

std::vector<Vec2> shared_endpoints(const Channel& a, const Channel& b) {
  const double tol = 0.75 * std::min(a.width, b.width);
  std::vector<Vec2> out;
  for (Vec2 pa : {a.start, a.end})
    for (Vec2 pb : {b.start, b.end})
      if (near(pa, pb, tol)) out.push_back(pa);
  return out;
}

}  // namespace

bool channels_connected(const Layout& l, const Channel& a, const Channel& b) {
  if (!shared_endpoints(a, b).empty()) return true;
  for (const auto& j : l.junctions)
    if (junction_incident(l, j, a) && junction_incident(l, j, b)) return true;
  return false;
}

ExcitabilityMap rasterize(const Layout& layout) {
  const int w = layout.grid_width;
  const int h = layout.grid_height;
  ExcitabilityMap map(w, h, layout.phi_background);
  std::vector<int> owner(map.phi.size(), -1);

  // Pairwise overlap permissions are resolved lazily.
  std::map<std::pair<int, int>, std::vector<Vec2>> endpoint_memo;
  auto overlap_allowed = [&](int ia, int ib, int x, int y) {
    const Vec2 p{x + 0.5, y + 0.5};
    for (const auto& j : layout.junctions) {
      const double r = j.radius + 2.0;
      const Vec2 d = p - j.center;
      if (d.x * d.x + d.y * d.y <= r * r) return true;
    }
    const auto key = std::minmax(ia, ib);
    auto it = endpoint_memo.find(key);
    if (it == endpoint_memo.end())
      it = endpoint_memo
               .emplace(key, shared_endpoints(layout.channels[ia],
                                              layout.channels[ib]))
               .first;
    const double reach = 1.5 * std::max(layout.channels[ia].width,
                                        layout.channels[ib].width);
    for (Vec2 e : it->second)
      if (near(p, e, reach)) return true;
    return false;
  };

  for (int ci = 0; ci < static_cast<int>(layout.channels.size()); ++ci) {
    const Channel& c = layout.channels[ci];
    const double half = 0.5 * c.width + 1.0;
    const int bx0 = std::max(
        0, static_cast<int>(std::floor(std::min(c.start.x, c.end.x) - half)));
    const int bx1 = std::min(
        w - 1,
        static_cast<int>(std::ceil(std::max(c.start.x, c.end.x) + half)));
    const int by0 = std::max(
        0, static_cast<int>(std::floor(std::min(c.start.y, c.end.y) - half)));
    const int by1 = std::min(
        h - 1,
        static_cast<int>(std::ceil(std::max(c.start.y, c.end.y) + half)));
    for (int y = by0; y <= by1; ++y)
      for (int x = bx0; x <= bx1; ++x) {
        if (!channel_contains_cell(c, x, y)) continue;
        const std::size_t i = map.idx(x, y);
        if (owner[i] >= 0 && owner[i] != ci &&
            !overlap_allowed(owner[i], ci, x, y))
          throw LayoutError("channels-overlap-outside-junction(" +
                            layout.channels[owner[i]].name + "," + c.name +
                            ")");
        owner[i] = ci;
        map.phi[i] = layout.phi_channel;
      }
  }

  for (const auto& j : layout.junctions) {
    const int bx0 = std::max(
        0, static_cast<int>(std::floor(j.center.x - j.radius - 1.0)));
    const int bx1 = std::min(
        w - 1, static_cast<int>(std::ceil(j.center.x + j.radius + 1.0)));
    const int by0 = std::max(
        0, static_cast<int>(std::floor(j.center.y - j.radius - 1.0)));
    const int by1 = std::min(
        h - 1, static_cast<int>(std::ceil(j.center.y + j.radius + 1.0)));
    for (int y = by0; y <= by1; ++y)
      for (int x = bx0; x <= bx1; ++x) {
        const double dx = (x + 0.5) - j.center.x;
        const double dy = (y + 0.5) - j.center.y;
        if (dx * dx + dy * dy <= j.radius * j.radius)
          map.phi[map.idx(x, y)] = layout.phi_junction;
      }
  }
  return map;
}

namespace {

bool region_in_grid(const RegionSpec& r, int w, int h, double margin) {
  if (r.shape == RegionSpec::Shape::Rect)
    return r.x0 >= margin && r.y0 >= margin && r.x0 + r.width <= w - margin &&
           r.y0 + r.height <= h - margin;
  return r.center.x - r.radius >= margin && r.center.y - r.radius >= margin &&
         r.center.x + r.radius <= w - margin &&
         r.center.y + r.radius <= h - margin;
}

// Channels containing every cell of the region.
std::vector<const Channel*> covering_channels(const Layout& l,
                                              const RegionSpec& r) {
  std::vector<const Channel*> out;
  int bx0, by0, bx1, by1;
  r.cell_bounds(bx0, by0, bx1, by1);
  for (const auto& c : l.channels) {
    bool all = true;
    bool any = false;
    for (int y = by0; y <= by1 && all; ++y)
      for (int x = bx0; x <= bx1; ++x) {
        if (!r.contains(x, y)) continue;
        any = true;
        if (!channel_contains_cell(c, x, y)) {
          all = false;
          break;
        }
      }
    if (all && any) out.push_back(&c);
  }
  return out;
}

}  // namespace

std::vector<std::string> validate(const Layout& layout) {
  std::vector<std::string> out;
  const int w = layout.grid_width;
  const int h = layout.grid_height;
  if (w < 8 || h < 8) out.push_back("grid-too-small");

  std::set<std::string> seen;
  for (const auto& c : layout.channels) {
    if (!seen.insert(c.name).second) out.push_back("duplicate-name(" + c.name + ")");
    if (c.width < 4.0) out.push_back("width-too-small(" + c.name + ")");
    if (!(c.length() > 0.0)) out.push_back("zero-length(" + c.name + ")");
    const double half = 0.5 * c.width;
    const double lox = std::min(c.start.x, c.end.x) - half;
    const double hix = std::max(c.start.x, c.end.x) + half;
    const double loy = std::min(c.start.y, c.end.y) - half;
    const double hiy = std::max(c.start.y, c.end.y) + half;
    if (lox < 2.0 || loy < 2.0 || hix > w - 2.0 || hiy > h - 2.0)
      out.push_back("outside-margin(" + c.name + ")");
  }

  for (const auto& j : layout.junctions) {
    if (!seen.insert(j.name).second) out.push_back("duplicate-name(" + j.name + ")");
    int incident = 0;
    for (const auto& c : layout.channels)
      if (junction_incident(layout, j, c)) {
        ++incident;
        if (j.radius < 0.5 * c.width)
          out.push_back("radius-too-small(" + j.name + ")");
      }
    if (incident < 2) out.push_back("dangling-junction(" + j.name + ")");
    if (j.center.x - j.radius < 2.0 || j.center.y - j.radius < 2.0 ||
        j.center.x + j.radius > w - 2.0 || j.center.y + j.radius > h - 2.0)
      out.push_back("outside-margin(" + j.name + ")");
  }

  if (!(layout.phi_channel < layout.phi_junction &&
        layout.phi_junction < layout.phi_background))
    out.push_back("phi-order-violated");

  // Connectivity over the channel graph.
  const int n = static_cast<int>(layout.channels.size());
  if (n > 1) {
    std::vector<int> comp(n);
    for (int i = 0; i < n; ++i) comp[i] = i;
    bool merged = true;
    while (merged) {
      merged = false;
      for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k)
          if (comp[i] != comp[k] &&
              channels_connected(layout, layout.channels[i],
                                 layout.channels[k])) {
            const int from = std::max(comp[i], comp[k]);
            const int to = std::min(comp[i], comp[k]);
            for (int m = 0; m < n; ++m)
              if (comp[m] == from) comp[m] = to;
            merged = true;
          }
    }
    for (int i = 0; i < n; ++i)
      if (comp[i] != 0) {
        out.push_back("disconnected-channel(" + layout.channels[i].name + ")");
      }
  }

  for (const auto& pad : layout.pads) {
    if (!region_in_grid(pad.region, w, h, 2.0))
      out.push_back("outside-margin(" + pad.name + ")");
    else if (covering_channels(layout, pad.region).size() != 1)
      out.push_back("pad-not-in-one-channel(" + pad.name + ")");
    if (!(pad.value > 0.0)) out.push_back("bad-pad-value(" + pad.name + ")");
  }

  for (const auto& probe : layout.probes) {
    if (probe.region.shape != RegionSpec::Shape::Rect)
      out.push_back("probe-not-rect(" + probe.name + ")");
    else if (!region_in_grid(probe.region, w, h, 2.0))
      out.push_back("outside-margin(" + probe.name + ")");
    else if (covering_channels(layout, probe.region).empty())
      out.push_back("probe-outside-channel(" + probe.name + ")");
    if (!(probe.t_min < probe.t_max))
      out.push_back("bad-window(" + probe.name + ")");
    if (!(probe.threshold > 0.0))
      out.push_back("bad-threshold(" + probe.name + ")");
  }

  return out;
}

double path_length(const Layout& layout,
                   const std::vector<std::string>& names) {
  if (names.empty()) throw std::invalid_argument("empty channel path");
  double total = 0.0;
  const Channel* prev = nullptr;
  for (const auto& name : names) {
    const Channel* c = layout.find_channel(name);
    if (!c) throw std::invalid_argument("unknown channel: " + name);
    if (prev && !channels_connected(layout, *prev, *c))
      throw std::invalid_argument("channels not connected: " + prev->name +
                                  " -> " + name);
    total += c->length();
    prev = c;
  }
  return total;
}

namespace {

using Json = nlohmann::ordered_json;

Json vec_json(Vec2 v) { return Json::array({v.x, v.y}); }

Vec2 vec_from(const Json& j) {
  return Vec2{j.at(0).get<double>(), j.at(1).get<double>()};
}

Json region_json(const RegionSpec& r) {
  Json j;
  if (r.shape == RegionSpec::Shape::Rect)
    j["rect"] = Json::array({r.x0, r.y0, r.width, r.height});
  else
    j["disc"] = Json::array({r.center.x, r.center.y, r.radius});
  return j;
}

RegionSpec region_from(const Json& j) {
  if (j.contains("rect")) {
    const auto& a = j.at("rect");
    return RegionSpec::rect(a.at(0).get<int>(), a.at(1).get<int>(),
                            a.at(2).get<int>(), a.at(3).get<int>());
  }
  const auto& a = j.at("disc");
  return RegionSpec::disc({a.at(0).get<double>(), a.at(1).get<double>()},
                          a.at(2).get<double>());
}

}  // namespace

std::string layout_to_json(const Layout& layout) {
  Json j;
  j["grid"] = {{"width", layout.grid_width}, {"height", layout.grid_height}};
  j["phi"] = {{"channel", layout.phi_channel},
              {"junction", layout.phi_junction},
              {"background", layout.phi_background}};
  j["channels"] = Json::array();
  for (const auto& c : layout.channels)
    j["channels"].push_back({{"name", c.name},
                             {"start", vec_json(c.start)},
                             {"end", vec_json(c.end)},
                             {"width", c.width}});
  j["junctions"] = Json::array();
  for (const auto& jc : layout.junctions)
    j["junctions"].push_back({{"name", jc.name},
                              {"center", vec_json(jc.center)},
                              {"radius", jc.radius}});
  j["pads"] = Json::array();
  for (const auto& p : layout.pads) {
    Json e = region_json(p.region);
    e["name"] = p.name;
    e["value"] = p.value;
    j["pads"].push_back(std::move(e));
  }
  j["probes"] = Json::array();
  for (const auto& p : layout.probes) {
    Json e = region_json(p.region);
    e["name"] = p.name;
    e["window"] = Json::array({p.t_min, p.t_max});
    e["threshold"] = p.threshold;
    j["probes"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

Layout layout_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw LayoutError(std::string("layout parse error: ") + e.what());
  }
  try {
    Layout l;
    l.grid_width = j.at("grid").at("width").get<int>();
    l.grid_height = j.at("grid").at("height").get<int>();
    l.phi_channel = j.at("phi").at("channel").get<double>();
    l.phi_junction = j.at("phi").at("junction").get<double>();
    l.phi_background = j.at("phi").at("background").get<double>();
    for (const auto& e : j.value("channels", Json::array()))
      l.channels.push_back(Channel{e.at("name").get<std::string>(),
                                   vec_from(e.at("start")),
                                   vec_from(e.at("end")),
                                   e.at("width").get<double>()});
    for (const auto& e : j.value("junctions", Json::array()))
      l.junctions.push_back(Junction{e.at("name").get<std::string>(),
                                     vec_from(e.at("center")),
                                     e.at("radius").get<double>()});
    for (const auto& e : j.value("pads", Json::array())) {
      StimulusPad p;
      p.name = e.at("name").get<std::string>();
      p.region = region_from(e);
      p.value = e.value("value", 1.0);
      l.pads.push_back(std::move(p));
    }
    for (const auto& e : j.value("probes", Json::array())) {
      Probe p;
      p.name = e.at("name").get<std::string>();
      p.region = region_from(e);
      p.t_min = e.at("window").at(0).get<double>();
      p.t_max = e.at("window").at(1).get<double>();
      p.threshold = e.value("threshold", 0.04);
      l.probes.push_back(std::move(p));
    }
    return l;
  } catch (const Json::exception& e) {
    throw LayoutError(std::string("layout field error: ") + e.what());
  }
}

void save_layout(const Layout& layout, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << layout_to_json(layout);
}

Layout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return layout_from_json(ss.str());
}

}  // namespace bz
