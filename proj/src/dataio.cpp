#include "nsamc/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nsamc/csv.hpp"
#include "nsamc/rng.hpp"

namespace nsamc {

void SceneSpec::validate() const {
  for (double e : extent) {
    if (!(e > 0.0)) throw Error(ErrorCode::InvalidConfig, "room extents must be positive");
  }
  if (extent[0] < 1.7 || extent[1] < 1.7 || extent[2] < 2.2) {
    throw Error(ErrorCode::InvalidConfig, "room must be at least 1.7 x 1.7 x 2.2 m to hold a door and window");
  }
  if (!(boundary_noise_rate >= 0.0 && boundary_noise_rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "boundary noise rate must lie in [0, 1)");
  }
  if (!(boundary_band > 0.0)) throw Error(ErrorCode::InvalidConfig, "boundary band must be positive");
  if (!(jitter_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "jitter must be non-negative");
}

namespace {

struct Rect {
  double s0, s1, z0, z1;

  bool contains(double s, double z) const { return s >= s0 && s <= s1 && z >= z0 && z <= z1; }
  double outside_distance(double s, double z) const {
    const double ds = std::max({s0 - s, 0.0, s - s1});
    const double dz = std::max({z0 - z, 0.0, z - z1});
    return std::hypot(ds, dz);
  }
};

struct Box {
  double x0, x1, y0, y1, height;

  bool covers(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  double footprint_distance(double x, double y) const {
    const double dx = std::max({x0 - x, 0.0, x - x1});
    const double dy = std::max({y0 - y, 0.0, y - y1});
    return std::hypot(dx, dy);
  }
};

struct Layout {
  double sx, sy, sz;
  int door_wall, window_wall;
  Rect door, window;
  std::vector<Box> boxes;

  double wall_length(int w) const { return w < 2 ? sx : sy; }
};

struct Surface {
  enum Kind { Floor, Wall, BoxTop, BoxSideX, BoxSideY } kind;
  int index = 0;  // wall id or box id
  int side = 0;   // which of the two parallel box faces
  double area = 0.0;
};

/// Nearest inter-class edge of a surface point.
struct EdgeHit {
  double distance = std::numeric_limits<double>::infinity();
  int adjacent = -1;

  void offer(double d, int cls) {
    if (d < distance) {
      distance = d;
      adjacent = cls;
    }
  }
};

// Walls sit this far inside the extent so recesses and jitter stay within it.
constexpr double kWallMargin = 0.1;

Layout draw_layout(const SceneSpec& spec) {
  RngStream rng({spec.seed, 0, StreamDomain::kScene, 0});
  Layout lay{spec.extent[0] - 2 * kWallMargin, spec.extent[1] - 2 * kWallMargin, spec.extent[2], 0, 0, {}, {}, {}};
  lay.door_wall = static_cast<int>(rng.below(4));
  lay.window_wall = static_cast<int>((lay.door_wall + 1 + rng.below(3)) % 4);

  const double door_w = 0.9, door_h = std::min(2.0, lay.sz - 0.2);
  const double dl = lay.wall_length(lay.door_wall);
  const double ds = rng.uniform(0.2, dl - 0.2 - door_w);
  lay.door = {ds, ds + door_w, 0.0, door_h};

  const double win_w = 1.0, win_lo = 0.9, win_hi = std::min(1.8, lay.sz - 0.3);
  const double wl = lay.wall_length(lay.window_wall);
  const double ws = rng.uniform(0.2, wl - 0.2 - win_w);
  lay.window = {ws, ws + win_w, win_lo, win_hi};

  for (std::size_t b = 0; b < spec.clutter_boxes; ++b) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double w = rng.uniform(0.4, 0.8), d = rng.uniform(0.4, 0.8), h = rng.uniform(0.4, 0.9);
      if (w > lay.sx - 0.6 || d > lay.sy - 0.6) continue;
      const double x0 = rng.uniform(0.3, lay.sx - 0.3 - w);
      const double y0 = rng.uniform(0.3, lay.sy - 0.3 - d);
      const Box box{x0, x0 + w, y0, y0 + d, h};
      const bool overlaps = std::any_of(lay.boxes.begin(), lay.boxes.end(), [&](const Box& o) {
        return box.x0 < o.x1 + 0.1 && o.x0 < box.x1 + 0.1 && box.y0 < o.y1 + 0.1 && o.y0 < box.y1 + 0.1;
      });
      if (!overlaps) {
        lay.boxes.push_back(box);
        break;
      }
    }
  }
  return lay;
}

std::array<double, 3> wall_point(const Layout& lay, int wall, double s, double z, double recess) {
  switch (wall) {
    case 0: return {s, -recess, z};
    case 1: return {s, lay.sy + recess, z};
    case 2: return {-recess, s, z};
    default: return {lay.sx + recess, s, z};
  }
}

/// Which wall a floor point is nearest to and its coordinate along that wall.
std::pair<int, double> nearest_wall(const Layout& lay, double x, double y, double& dist) {
  const std::array<double, 4> d = {y, lay.sy - y, x, lay.sx - x};
  const int w = static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin());
  dist = d[static_cast<std::size_t>(w)];
  return {w, w < 2 ? x : y};
}

constexpr std::array<double, kSceneClassCount> kReflectance = {0.30, 0.50, 0.56, 0.68, 0.42};
constexpr double kReflectanceSigma = 0.08;

}  // namespace

GeneratedScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const Layout lay = draw_layout(spec);

  std::vector<Surface> surfaces;
  double floor_area = lay.sx * lay.sy;
  for (const auto& b : lay.boxes) floor_area -= (b.x1 - b.x0) * (b.y1 - b.y0);
  surfaces.push_back({Surface::Floor, 0, 0, floor_area});
  for (int w = 0; w < 4; ++w) surfaces.push_back({Surface::Wall, w, 0, lay.wall_length(w) * lay.sz});
  for (std::size_t b = 0; b < lay.boxes.size(); ++b) {
    const auto& box = lay.boxes[b];
    const int id = static_cast<int>(b);
    surfaces.push_back({Surface::BoxTop, id, 0, (box.x1 - box.x0) * (box.y1 - box.y0)});
    for (int side = 0; side < 2; ++side) {
      surfaces.push_back({Surface::BoxSideX, id, side, (box.x1 - box.x0) * box.height});
      surfaces.push_back({Surface::BoxSideY, id, side, (box.y1 - box.y0) * box.height});
    }
  }
  std::vector<double> cumulative(surfaces.size());
  double running = 0.0;
  for (std::size_t k = 0; k < surfaces.size(); ++k) cumulative[k] = (running += surfaces[k].area);

  const std::size_t n = spec.points;
  GeneratedScene scene;
  scene.cloud.coords.resize(static_cast<Eigen::Index>(n), 3);
  scene.cloud.features.resize(static_cast<Eigen::Index>(n), 1);
  scene.cloud.num_classes = kSceneClassCount;
  scene.cloud.labels = std::vector<int>(n);
  scene.clean_labels.resize(n);
  scene.in_band.assign(n, 0);
  scene.flipped.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng({spec.seed, static_cast<std::uint32_t>(i), StreamDomain::kScene, 1});
    const double pick = rng.uniform() * running;
    const auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                            cumulative.begin());
    const Surface& surf = surfaces[std::min(k, surfaces.size() - 1)];

    std::array<double, 3> pos{};
    int cls = kWall;
    EdgeHit edge;
    switch (surf.kind) {
      case Surface::Floor: {
        double x, y;
        do {
          x = rng.uniform(0.0, lay.sx);
          y = rng.uniform(0.0, lay.sy);
        } while (std::any_of(lay.boxes.begin(), lay.boxes.end(), [&](const Box& b) { return b.covers(x, y); }));
        pos = {x, y, 0.0};
        cls = kFloor;
        double wall_dist = 0.0;
        const auto [wall, along] = nearest_wall(lay, x, y, wall_dist);
        const bool under_door = wall == lay.door_wall && along >= lay.door.s0 && along <= lay.door.s1;
        edge.offer(wall_dist, under_door ? kDoor : kWall);
        for (const auto& b : lay.boxes) edge.offer(b.footprint_distance(x, y), kClutter);
        break;
      }
      case Surface::Wall: {
        const int w = surf.index;
        const double s = rng.uniform(0.0, lay.wall_length(w));
        const double z = rng.uniform(0.0, lay.sz);
        const bool has_door = w == lay.door_wall;
        const bool has_window = w == lay.window_wall;
        if (has_door && lay.door.contains(s, z)) {
          cls = kDoor;
          pos = wall_point(lay, w, s, z, spec.door_recess);
          edge.offer(s - lay.door.s0, kWall);
          edge.offer(lay.door.s1 - s, kWall);
          edge.offer(lay.door.z1 - z, kWall);
          edge.offer(z, kFloor);
        } else if (has_window && lay.window.contains(s, z)) {
          cls = kWindow;
          pos = wall_point(lay, w, s, z, spec.window_recess);
          edge.offer(s - lay.window.s0, kWall);
          edge.offer(lay.window.s1 - s, kWall);
          edge.offer(z - lay.window.z0, kWall);
          edge.offer(lay.window.z1 - z, kWall);
        } else {
          cls = kWall;
          pos = wall_point(lay, w, s, z, 0.0);
          edge.offer(z, kFloor);
          if (has_door) edge.offer(lay.door.outside_distance(s, z), kDoor);
          if (has_window) edge.offer(lay.window.outside_distance(s, z), kWindow);
        }
        break;
      }
      case Surface::BoxTop: {
        const auto& b = lay.boxes[static_cast<std::size_t>(surf.index)];
        pos = {rng.uniform(b.x0, b.x1), rng.uniform(b.y0, b.y1), b.height};
        cls = kClutter;
        break;
      }
      case Surface::BoxSideX:
      case Surface::BoxSideY: {
        const auto& b = lay.boxes[static_cast<std::size_t>(surf.index)];
        const double z = rng.uniform(0.0, b.height);
        if (surf.kind == Surface::BoxSideX) {
          pos = {rng.uniform(b.x0, b.x1), surf.side == 0 ? b.y0 : b.y1, z};
        } else {
          pos = {surf.side == 0 ? b.x0 : b.x1, rng.uniform(b.y0, b.y1), z};
        }
        cls = kClutter;
        edge.offer(z, kFloor);
        break;
      }
    }

    const auto row = static_cast<Eigen::Index>(i);
    pos[0] += kWallMargin;
    pos[1] += kWallMargin;
    for (int d = 0; d < 3; ++d) scene.cloud.coords(row, d) = pos[static_cast<std::size_t>(d)] + spec.jitter_sigma * rng.normal();
    scene.cloud.features(row, 0) = kReflectance[static_cast<std::size_t>(cls)] + kReflectanceSigma * rng.normal();

    scene.clean_labels[i] = cls;
    int label = cls;
    const bool band = edge.adjacent >= 0 && edge.distance <= spec.boundary_band;
    scene.in_band[i] = band ? 1 : 0;
    // The flip draw happens for every point so the stream layout does not
    // depend on the noise rate.
    const bool flip = rng.bernoulli(spec.boundary_noise_rate);
    if (band && flip) {
      label = edge.adjacent;
      scene.flipped[i] = 1;
    }
    (*scene.cloud.labels)[i] = label;
  }
  return scene;
}

void BlockSpec::validate() const {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidConfig, "block edge must be positive");
  if (samples == 0) throw Error(ErrorCode::InvalidConfig, "samples per block must be positive");
}

namespace {

using CellMap = std::map<std::array<std::int64_t, 2>, std::vector<std::uint32_t>>;

CellMap bin_cells(const PointCloud& cloud, double edge) {
  CellMap cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const std::array<std::int64_t, 2> cell = {static_cast<std::int64_t>(std::floor(cloud.coords(r, 0) / edge)),
                                              static_cast<std::int64_t>(std::floor(cloud.coords(r, 1) / edge))};
    cells[cell].push_back(static_cast<std::uint32_t>(i));
  }
  return cells;
}

Block make_block(const PointCloud& cloud, double edge, const std::array<std::int64_t, 2>& cell,
                 std::vector<std::uint32_t> rows) {
  Block block;
  block.cell = cell;
  block.source_index = std::move(rows);
  const auto f = static_cast<Eigen::Index>(cloud.feature_dim());
  const auto s = static_cast<Eigen::Index>(block.source_index.size());
  const double cx = (static_cast<double>(cell[0]) + 0.5) * edge;
  const double cy = (static_cast<double>(cell[1]) + 0.5) * edge;
  PointCloud& out = block.cloud;
  out.num_classes = cloud.num_classes;
  out.coords.resize(s, 3);
  out.features.resize(s, f + 3);
  if (cloud.labels) out.labels = std::vector<int>(block.source_index.size());
  for (Eigen::Index k = 0; k < s; ++k) {
    const auto src = static_cast<Eigen::Index>(block.source_index[static_cast<std::size_t>(k)]);
    out.coords.row(k) = cloud.coords.row(src);
    if (f > 0) out.features.row(k).head(f) = cloud.features.row(src);
    out.features(k, f) = cloud.coords(src, 0) - cx;
    out.features(k, f + 1) = cloud.coords(src, 1) - cy;
    out.features(k, f + 2) = cloud.coords(src, 2);
    if (cloud.labels) (*out.labels)[static_cast<std::size_t>(k)] = (*cloud.labels)[static_cast<std::size_t>(src)];
  }
  return block;
}

}  // namespace

std::vector<Block> split_blocks(const PointCloud& cloud, const BlockSpec& spec, std::uint64_t seed) {
  spec.validate();
  validate_cloud(cloud);
  auto cells = bin_cells(cloud, spec.edge);
  std::vector<Block> blocks;
  blocks.reserve(cells.size());
  std::uint32_t block_id = 0;
  for (auto& [cell, members] : cells) {
    RngStream rng({seed, block_id++, StreamDomain::kBlocks, 0});
    std::vector<std::uint32_t> rows(spec.samples);
    if (members.size() >= spec.samples) {
      for (std::size_t k = 0; k < spec.samples; ++k) {
        const auto j = k + static_cast<std::size_t>(rng.below(members.size() - k));
        std::swap(members[k], members[j]);
        rows[k] = members[k];
      }
    } else {
      for (std::size_t k = 0; k < spec.samples; ++k) {
        rows[k] = members[static_cast<std::size_t>(rng.below(members.size()))];
      }
    }
    blocks.push_back(make_block(cloud, spec.edge, cell, std::move(rows)));
  }
  return blocks;
}

std::vector<Block> partition_blocks(const PointCloud& cloud, double edge) {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidConfig, "block edge must be positive");
  validate_cloud(cloud);
  auto cells = bin_cells(cloud, edge);
  std::vector<Block> blocks;
  blocks.reserve(cells.size());
  for (auto& [cell, members] : cells) blocks.push_back(make_block(cloud, edge, cell, std::move(members)));
  return blocks;
}

std::vector<int> gather_labels(const Block& block, const std::vector<int>& values) {
  std::vector<int> out(block.source_index.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = values.at(block.source_index[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Text point format

void write_cloud(const PointCloud& cloud, std::ostream& out) {
  validate_cloud(cloud);
  out << "pcs 1 " << cloud.size() << ' ' << cloud.feature_dim() << ' ' << cloud.num_classes << '\n';
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv::format(cloud.coords(r, 0)) << ' ' << csv::format(cloud.coords(r, 1)) << ' '
        << csv::format(cloud.coords(r, 2));
    for (Eigen::Index c = 0; c < cloud.features.cols(); ++c) out << ' ' << csv::format(cloud.features(r, c));
    out << ' ' << (cloud.labels ? (*cloud.labels)[i] : -1) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing point cloud");
}

void write_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_cloud(cloud, out);
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
    if (pos > start) tokens.push_back(line.substr(start, pos - start));
  }
  return tokens;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::ParseError, "bad number '" + std::string(token) + "' on line " + std::to_string(line),
                line);
  }
  return value;
}

}  // namespace

PointCloud read_cloud(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing header on line 1", 1);
  const auto header = split_ws(line);
  if (header.size() != 5 || header[0] != "pcs") {
    throw Error(ErrorCode::ParseError, "header must read 'pcs <version> N F M' on line 1", 1);
  }
  if (parse_number<int>(header[1], 1) != 1) throw Error(ErrorCode::ParseError, "unsupported version on line 1", 1);
  const auto n = parse_number<std::size_t>(header[2], 1);
  const auto f = parse_number<std::size_t>(header[3], 1);
  const auto m = parse_number<int>(header[4], 1);

  PointCloud cloud;
  cloud.num_classes = m;
  cloud.coords.resize(static_cast<Eigen::Index>(n), 3);
  cloud.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  std::vector<int> labels(n);
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 2;
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::ParseError, "expected " + std::to_string(n) + " points, file ends on line " +
                                             std::to_string(line_no), line_no);
    }
    const auto tokens = split_ws(line);
    if (tokens.size() != 4 + f) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has " + std::to_string(tokens.size()) +
                                             " columns, expected " + std::to_string(4 + f), line_no);
    }
    const auto r = static_cast<Eigen::Index>(i);
    for (int d = 0; d < 3; ++d) cloud.coords(r, d) = parse_number<double>(tokens[static_cast<std::size_t>(d)], line_no);
    for (std::size_t c = 0; c < f; ++c) {
      cloud.features(r, static_cast<Eigen::Index>(c)) = parse_number<double>(tokens[3 + c], line_no);
    }
    labels[i] = parse_number<int>(tokens[3 + f], line_no);
    if (labels[i] >= 0) ++labeled;
  }
  if (labeled != 0 && labeled != n) {
    throw Error(ErrorCode::ParseError, "cloud mixes labeled and unlabeled points");
  }
  if (labeled == n && n > 0) cloud.labels = std::move(labels);
  return cloud;
}

PointCloud read_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_cloud(in);
}

void write_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << "pcs-clean 1 " << labels.size() << '\n';
  for (int l : labels) out << l << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing header on line 1", 1);
  const auto header = split_ws(line);
  if (header.size() != 3 || header[0] != "pcs-clean") {
    throw Error(ErrorCode::ParseError, "header must read 'pcs-clean 1 N' on line 1", 1);
  }
  const auto n = parse_number<std::size_t>(header[2], 1);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "truncated label file", i + 2);
    const auto tokens = split_ws(line);
    if (tokens.size() != 1) throw Error(ErrorCode::ParseError, "expected one label on line " + std::to_string(i + 2), i + 2);
    labels[i] = parse_number<int>(tokens[0], i + 2);
  }
  return labels;
}

}  // namespace nsamc
