#include "drivatt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drivatt/errors.hpp"
#include "drivatt/metrics.hpp"
#include "drivatt/preprocess.hpp"

namespace drivatt::analysis {

std::map<std::string, ConditionHeatmap> condition_heatmaps(std::span<const SessionRecord> sessions,
                                                           ConditionType condition, const HeatmapConfig& cfg) {
  if (!(cfg.stride > 0.0)) throw InvalidArgument("heatmap stride must be > 0");
  if (!(cfg.clip_max > 0.0)) throw InvalidArgument("clip_max must be > 0");
  std::map<std::string, std::vector<AttentionMap>> buckets;
  for (const SessionRecord& s : sessions) {
    if (!s.ego_positions) throw InvalidArgument("session '" + s.session_id + "' has no ego positions");
    const auto& ego = *s.ego_positions;
    double travelled = 0.0;
    long long last_bin = -1;
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      if (t > 0) travelled += std::hypot(ego[t].x - ego[t - 1].x, ego[t].y - ego[t - 1].y);
      const auto bin = static_cast<long long>(std::floor(travelled / cfg.stride));
      if (bin == last_bin) continue;
      last_bin = bin;
      const FrameSample& f = s.frames[t];
      if (f.state.kind == condition) buckets[state_label(f.state)].push_back(f.gt_map);
    }
  }
  if (buckets.empty())
    throw InvalidArgument("no sampled frames carry a " + std::string(to_string(condition)) + " state");
  std::map<std::string, ConditionHeatmap> out;
  for (const auto& [label, maps] : buckets)
    out[label] = {preprocess::cumulative_heatmap(maps, cfg.clip_max), preprocess::mean_map(maps), maps.size()};
  return out;
}

int auto_downsample_factor(int height, int width) {
  for (int f = 1; f <= std::min(height, width); ++f)
    if (height % f == 0 && width % f == 0 &&
        static_cast<std::size_t>(height / f) * static_cast<std::size_t>(width / f) <= metrics::kMaxEmdCells)
      return f;
  throw InvalidArgument("no downsampling factor brings a " + std::to_string(height) + "x" + std::to_string(width) +
                        " map to at most 256 cells");
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

long long cell_of(double v, double size) { return static_cast<long long>(std::floor(v / size)); }

}  // namespace

std::vector<RiskPoint> median_filter(std::span<const RiskPoint> cells, int side, double cell_size) {
  if (side < 1 || side % 2 == 0) throw InvalidArgument("median neighborhood must be a positive odd number");
  std::map<std::pair<long long, long long>, double> grid;
  for (const RiskPoint& p : cells) grid[{cell_of(p.x, cell_size), cell_of(p.y, cell_size)}] = p.raw_mean;
  const int half = side / 2;
  std::vector<RiskPoint> out(cells.begin(), cells.end());
  for (RiskPoint& p : out) {
    const long long cx = cell_of(p.x, cell_size), cy = cell_of(p.y, cell_size);
    std::vector<double> window;
    for (long long dx = -half; dx <= half; ++dx)
      for (long long dy = -half; dy <= half; ++dy)
        if (auto it = grid.find({cx + dx, cy + dy}); it != grid.end()) window.push_back(it->second);
    p.risk = median(std::move(window));
  }
  return out;
}

std::vector<RiskPoint> risk_map(const models::AttentionPredictor& predictor, std::span<const SessionRecord> sessions,
                                const RiskMapConfig& cfg) {
  if (predictor.condition_type() != ConditionType::distraction)
    throw InvalidArgument("risk maps need a distraction-conditioned model, got condition type '" +
                          std::string(to_string(predictor.condition_type())) + "'");
  if (!(cfg.cell_size > 0.0)) throw InvalidArgument("cell_size must be > 0");
  if (cfg.downsample_factor < 0) throw InvalidArgument("downsample_factor must be >= 0");
  for (const SessionRecord& s : sessions)
    if (!s.ego_positions || s.ego_positions->size() != s.frames.size())
      throw InvalidArgument("session '" + s.session_id + "' has no ego positions");

  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<long long, long long>, Acc> cells;
  for (const SessionRecord& s : sessions) {
    if (s.frames.empty()) continue;
    const std::vector<DriverState> attentive(s.frames.size(), DriverState::of(Distraction::attentive));
    const std::vector<DriverState> distracted(s.frames.size(), DriverState::of(Distraction::distracted));
    const std::vector<AttentionMap> a = predictor.predict(s.frames, attentive);
    const std::vector<AttentionMap> d = predictor.predict(s.frames, distracted);
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      const int factor =
          cfg.downsample_factor ? cfg.downsample_factor : auto_downsample_factor(a[t].height(), a[t].width());
      const double risk = metrics::emd(metrics::downsample_map(a[t], factor), metrics::downsample_map(d[t], factor));
      const WorldPosition& p = (*s.ego_positions)[t];
      Acc& acc = cells[{cell_of(p.x, cfg.cell_size), cell_of(p.y, cfg.cell_size)}];
      acc.sum += risk;
      ++acc.n;
    }
  }
  std::vector<RiskPoint> raw;
  raw.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    const double mean = acc.sum / static_cast<double>(acc.n);
    raw.push_back({(static_cast<double>(key.first) + 0.5) * cfg.cell_size,
                   (static_cast<double>(key.second) + 0.5) * cfg.cell_size, mean, mean, acc.n});
  }
  return median_filter(raw, cfg.neighborhood, cfg.cell_size);
}

void write_risk_table(const std::filesystem::path& path, std::span<const RiskPoint> points,
                      const std::vector<std::pair<std::string, std::string>>& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write risk table '" + path.string() + "'");
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "position_x,position_y,risk\n";
  char line[128];
  for (const RiskPoint& p : points) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.17g\n", p.x, p.y, p.risk);
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing risk table '" + path.string() + "'");
}

std::vector<RiskPoint> read_risk_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open risk table '" + path.string() + "'");
  std::vector<RiskPoint> out;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != "position_x,position_y,risk") throw FormatError("risk table '" + path.string() + "' has no header");
      seen_header = true;
      continue;
    }
    RiskPoint p;
    char c1 = 0, c2 = 0;
    std::istringstream is(line);
    if (!(is >> p.x >> c1 >> p.y >> c2 >> p.risk) || c1 != ',' || c2 != ',')
      throw FormatError("risk table '" + path.string() + "' has a malformed row: " + line);
    p.raw_mean = p.risk;
    out.push_back(p);
  }
  if (!seen_header) throw FormatError("risk table '" + path.string() + "' has no header");
  return out;
}

void render_risk_ppm(const std::filesystem::path& path, std::span<const RiskPoint> points, int width, int height) {
  if (width < 16 || height < 16) throw InvalidArgument("image must be at least 16x16");
  std::vector<unsigned char> img(static_cast<std::size_t>(width) * height * 3, 255);
  if (!points.empty()) {
    auto [xmin, xmax] = std::minmax_element(points.begin(), points.end(),
                                            [](const RiskPoint& a, const RiskPoint& b) { return a.x < b.x; });
    auto [ymin, ymax] = std::minmax_element(points.begin(), points.end(),
                                            [](const RiskPoint& a, const RiskPoint& b) { return a.y < b.y; });
    auto [rmin, rmax] = std::minmax_element(
        points.begin(), points.end(), [](const RiskPoint& a, const RiskPoint& b) { return a.risk < b.risk; });
    const double xs = std::max(xmax->x - xmin->x, 1e-9), ys = std::max(ymax->y - ymin->y, 1e-9);
    const double rs = rmax->risk - rmin->risk;
    const int margin = 8, radius = 3;
    for (const RiskPoint& p : points) {
      const double u = (p.x - xmin->x) / xs;
      const double v = ymax->y == ymin->y ? 0.5 : (p.y - ymin->y) / ys;
      const int px = margin + static_cast<int>(std::lround(u * (width - 2 * margin - 1)));
      const int py = height - 1 - margin - static_cast<int>(std::lround(v * (height - 2 * margin - 1)));
      const double level = rs > 0.0 ? (p.risk - rmin->risk) / rs : 0.0;
      const unsigned char r = static_cast<unsigned char>(std::lround(255 * level));
      const unsigned char b = static_cast<unsigned char>(std::lround(255 * (1.0 - level)));
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int x = px + dx, y = py + dy;
          if (x < 0 || y < 0 || x >= width || y >= height || dx * dx + dy * dy > radius * radius) continue;
          unsigned char* c = &img[(static_cast<std::size_t>(y) * width + x) * 3];
          c[0] = r, c[1] = 40, c[2] = b;
        }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image '" + path.string() + "'");
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw std::runtime_error("failed writing image '" + path.string() + "'");
}

}  // namespace drivatt::analysis
