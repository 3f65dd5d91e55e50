#pragma once

#include "lmpcc/common.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lmpcc {

class GridFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary occupancy grid. Cell (ix, iy) covers
/// [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double resolution, Vec2 origin, int width, int height)
      : resolution_(resolution), origin_(origin), width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * height, 0) {
    if (!(resolution > 0.0)) throw InvalidInput("grid resolution must be > 0");
    if (width <= 0 || height <= 0) throw InvalidInput("grid dimensions must be positive");
  }

  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }

  /// Out-of-map cells count as occupied.
  bool occupied(int ix, int iy) const {
    return !in_bounds(ix, iy) || cells_[index(ix, iy)] != 0;
  }
  void set(int ix, int iy, bool occ) {
    if (in_bounds(ix, iy)) cells_[index(ix, iy)] = occ ? 1 : 0;
  }

  std::array<int, 2> cell_of(Vec2 p) const {
    return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
            static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
  }
  Vec2 cell_center(int ix, int iy) const {
    return origin_ + resolution_ * Vec2(ix + 0.5, iy + 0.5);
  }
  bool occupied_at(Vec2 p) const {
    const auto c = cell_of(p);
    return occupied(c[0], c[1]);
  }

  /// Marks every cell overlapping the axis-aligned box [lo, hi].
  void fill_box(Vec2 lo, Vec2 hi, bool occ = true) {
    const auto a = cell_of(lo);
    const auto b = cell_of(hi - Vec2::Constant(1e-9));
    for (int iy = std::max(0, a[1]); iy <= std::min(height_ - 1, b[1]); ++iy)
      for (int ix = std::max(0, a[0]); ix <= std::min(width_ - 1, b[0]); ++ix) set(ix, iy, occ);
  }

  /// Sets cells whose centre lies inside the rotated ellipse with semi-axes (a, b).
  void fill_ellipse(Vec2 center, double psi, double a, double b, bool occ) {
    const double reach = std::max(a, b) + resolution_;
    const auto lo = cell_of(center - Vec2::Constant(reach));
    const auto hi = cell_of(center + Vec2::Constant(reach));
    const Mat2 rt = rotation(psi).transpose();
    for (int iy = std::max(0, lo[1]); iy <= std::min(height_ - 1, hi[1]); ++iy)
      for (int ix = std::max(0, lo[0]); ix <= std::min(width_ - 1, hi[0]); ++ix) {
        const Vec2 l = rt * (cell_center(ix, iy) - center);
        if (l.x() * l.x() / (a * a) + l.y() * l.y() / (b * b) <= 1.0) set(ix, iy, occ);
      }
  }

  /// True when any occupied cell overlaps the convex quadrilateral with
  /// positive area. Cells outside the map count as occupied.
  bool any_occupied_in(const std::array<Vec2, 4>& quad) const;

  /// True when the disc overlaps an occupied cell with positive area.
  bool disc_hits_occupied(Vec2 center, double radius) const {
    const auto lo = cell_of(center - Vec2::Constant(radius));
    const auto hi = cell_of(center + Vec2::Constant(radius));
    for (int iy = lo[1]; iy <= hi[1]; ++iy)
      for (int ix = lo[0]; ix <= hi[0]; ++ix) {
        if (!occupied(ix, iy)) continue;
        const Vec2 c0 = origin_ + resolution_ * Vec2(ix, iy);
        const Vec2 q = center.cwiseMax(c0).cwiseMin(c0 + Vec2::Constant(resolution_));
        if ((q - center).norm() < radius) return true;
      }
    return false;
  }

  /// Euclidean distance (m) from each cell centre to the nearest occupied
  /// cell centre. Row-major, same indexing as the grid.
  std::vector<double> distance_field() const;

  std::size_t occupied_count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
  }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * width_ + ix; }

  double resolution_{0.05};
  Vec2 origin_{0.0, 0.0};
  int width_{0};
  int height_{0};
  std::vector<std::uint8_t> cells_;
};

namespace detail {

// Clips a convex polygon to y in [y0, y1] and returns its x-extent.
inline std::optional<std::pair<double, double>> band_extent(const std::array<Vec2, 4>& quad,
                                                            double y0, double y1) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  auto take = [&](const Vec2& p) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
  };
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = quad[i];
    const Vec2& b = quad[(i + 1) % 4];
    if (a.y() >= y0 && a.y() <= y1) take(a);
    for (double yc : {y0, y1}) {
      if ((a.y() - yc) * (b.y() - yc) < 0.0) {
        const double t = (yc - a.y()) / (b.y() - a.y());
        take(a + t * (b - a));
      }
    }
  }
  if (xmin > xmax) return std::nullopt;
  return std::make_pair(xmin, xmax);
}

// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    auto meet = [&](int p) { return ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p); };
    double s = meet(v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  d.assign(n, 0.0);
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace detail

inline bool OccupancyGrid::any_occupied_in(const std::array<Vec2, 4>& quad) const {
  constexpr double eps = 1e-9;
  double ymin = quad[0].y(), ymax = quad[0].y();
  for (const auto& p : quad) {
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const int iy0 = static_cast<int>(std::floor((ymin - origin_.y()) / resolution_ + eps));
  const int iy1 = static_cast<int>(std::ceil((ymax - origin_.y()) / resolution_ - eps)) - 1;
  for (int iy = iy0; iy <= iy1; ++iy) {
    const double y0 = origin_.y() + iy * resolution_, y1 = y0 + resolution_;
    const auto ext = detail::band_extent(quad, std::max(y0, ymin), std::min(y1, ymax));
    if (!ext) continue;
    const int ix0 = static_cast<int>(std::floor((ext->first - origin_.x()) / resolution_ + eps));
    const int ix1 =
        static_cast<int>(std::ceil((ext->second - origin_.x()) / resolution_ - eps)) - 1;
    for (int ix = ix0; ix <= ix1; ++ix)
      if (occupied(ix, iy)) return true;
  }
  return false;
}

inline std::vector<double> OccupancyGrid::distance_field() const {
  const double inf = 1e10;  // squared cells; keeps parabola intersections well conditioned
  std::vector<double> grid(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i) grid[i] = cells_[i] ? 0.0 : inf;
  std::vector<double> f, d;
  f.resize(height_);
  for (int ix = 0; ix < width_; ++ix) {
    for (int iy = 0; iy < height_; ++iy) f[iy] = grid[index(ix, iy)];
    detail::edt_1d(f, d);
    for (int iy = 0; iy < height_; ++iy) grid[index(ix, iy)] = d[iy];
  }
  f.resize(width_);
  for (int iy = 0; iy < height_; ++iy) {
    for (int ix = 0; ix < width_; ++ix) f[ix] = grid[index(ix, iy)];
    detail::edt_1d(f, d);
    for (int ix = 0; ix < width_; ++ix) grid[index(ix, iy)] = std::sqrt(d[ix]) * resolution_;
  }
  return grid;
}

/// Reads the plain-text grid format:
///
///   resolution <m>
///   origin <x> <y>
///   size <width> <height>
///   <height rows of width '0'/'1' characters, top row first>
///
/// Lines starting with '#' are comments.
inline OccupancyGrid parse_text_grid(std::istream& in) {
  double res = 0.0;
  Vec2 origin(0.0, 0.0);
  int w = 0, h = 0;
  bool have_res = false, have_origin = false, have_size = false;
  std::string line;
  int line_no = 0;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "resolution") {
      if (!(ls >> res)) throw GridFormatError("line " + std::to_string(line_no) + ": bad resolution");
      have_res = true;
    } else if (key == "origin") {
      double x, y;
      if (!(ls >> x >> y)) throw GridFormatError("line " + std::to_string(line_no) + ": bad origin");
      origin = {x, y};
      have_origin = true;
    } else if (key == "size") {
      if (!(ls >> w >> h)) throw GridFormatError("line " + std::to_string(line_no) + ": bad size");
      have_size = true;
    } else {
      if (line.find_first_not_of("01") != std::string::npos)
        throw GridFormatError("line " + std::to_string(line_no) + ": unexpected content");
      rows.push_back(line);
    }
  }
  if (!have_res || !have_origin || !have_size)
    throw GridFormatError("grid header needs resolution, origin and size");
  if (static_cast<int>(rows.size()) != h)
    throw GridFormatError("expected " + std::to_string(h) + " rows, got " +
                          std::to_string(rows.size()));
  OccupancyGrid g(res, origin, w, h);
  for (int r = 0; r < h; ++r) {
    if (static_cast<int>(rows[r].size()) != w)
      throw GridFormatError("row " + std::to_string(r) + " has wrong width");
    for (int ix = 0; ix < w; ++ix) g.set(ix, h - 1 - r, rows[r][ix] == '1');
  }
  return g;
}

inline void write_text_grid(std::ostream& out, const OccupancyGrid& g) {
  out << "resolution " << g.resolution() << "\n";
  out << "origin " << g.origin().x() << " " << g.origin().y() << "\n";
  out << "size " << g.width() << " " << g.height() << "\n";
  for (int iy = g.height() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < g.width(); ++ix) out << (g.occupied(ix, iy) ? '1' : '0');
    out << "\n";
  }
}

/// Reads a P2 or P5 PGM; pixels darker than half of maxval are occupied.
/// The first image row is the top of the map.
inline OccupancyGrid parse_pgm(std::istream& in, double resolution, Vec2 origin) {
  auto next_token = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw GridFormatError("truncated PGM header");
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5") throw GridFormatError("not a P2/P5 PGM");
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw GridFormatError("bad PGM header");
  OccupancyGrid g(resolution, origin, w, h);
  const double threshold = 0.5 * maxval;
  if (magic == "P2") {
    for (int r = 0; r < h; ++r)
      for (int ix = 0; ix < w; ++ix) {
        int v;
        if (!(in >> v)) throw GridFormatError("truncated PGM data");
        g.set(ix, h - 1 - r, v < threshold);
      }
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval < 256 ? 1 : 2;
    for (int r = 0; r < h; ++r)
      for (int ix = 0; ix < w; ++ix) {
        int v = 0;
        for (int k = 0; k < bytes; ++k) {
          const int c = in.get();
          if (c == EOF) throw GridFormatError("truncated PGM data");
          v = (v << 8) | (c & 0xff);
        }
        g.set(ix, h - 1 - r, v < threshold);
      }
  }
  return g;
}

/// Loads a grid file by extension: ".pgm" uses the given resolution/origin,
/// anything else is the text format.
inline OccupancyGrid load_grid(const std::string& path, double pgm_resolution = 0.05,
                               Vec2 pgm_origin = Vec2::Zero()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("grid not found: " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
    return parse_pgm(in, pgm_resolution, pgm_origin);
  return parse_text_grid(in);
}

}  // namespace lmpcc
