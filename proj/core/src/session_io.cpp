#include "drivatt/session_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "drivatt/errors.hpp"

namespace drivatt::pipeline {
namespace {

static_assert(std::endian::native == std::endian::little, "session files are written in host order");

constexpr char kMagic[8] = {'D', 'R', 'V', 'S', 'E', 'S', 'S', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void put_map(const AttentionMap& m) {
    for (double v : m.values()) put<double>(v);
  }
  std::size_t size() const { return buf_.size(); }
  void patch_u64(std::size_t at, std::uint64_t v) { std::memcpy(buf_.data() + at, &v, sizeof v); }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles(std::size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  const char* take(std::size_t n) {
    need(n);
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n)
      throw TruncatedFile("session file '" + path_ + "' is truncated at byte " + std::to_string(pos_));
  }

  std::vector<char> data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open session file '" + path.string() + "'");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct Header {
  double fps;
  DriveMode mode;
  int map_h, map_w, scene_h, scene_w, scene_c;
  std::uint64_t frame_count;
  std::uint64_t config_hash;
  bool has_ego;
  std::string session_id;
};

Header read_header(Reader& r, const std::string& path) {
  const char* magic = r.take(sizeof kMagic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("'" + path + "' is not a session file");
  const auto version = r.get<std::uint32_t>();
  if (version != kSessionFormatVersion)
    throw VersionMismatch("session file '" + path + "' has format version " + std::to_string(version) +
                          ", expected " + std::to_string(kSessionFormatVersion));
  Header h;
  h.fps = r.get<double>();
  const auto mode = r.get<std::uint8_t>();
  if (mode > 1) throw FormatError("session file '" + path + "' has an invalid drive mode");
  h.mode = static_cast<DriveMode>(mode);
  h.map_h = r.get<std::int32_t>();
  h.map_w = r.get<std::int32_t>();
  h.scene_h = r.get<std::int32_t>();
  h.scene_w = r.get<std::int32_t>();
  h.scene_c = r.get<std::int32_t>();
  h.frame_count = r.get<std::uint64_t>();
  h.config_hash = r.get<std::uint64_t>();
  h.has_ego = r.get<std::uint8_t>() != 0;
  h.session_id = r.get_string();
  if (h.map_h < 1 || h.map_w < 1 || h.scene_h < 0 || h.scene_w < 0 || h.scene_c < 0)
    throw FormatError("session file '" + path + "' has invalid dimensions");
  return h;
}

}  // namespace

void save_session(const std::filesystem::path& path, const SessionRecord& session, std::uint64_t config_hash) {
  if (const std::string why = session_problem(session); !why.empty())
    throw InvalidArgument("cannot save invalid session '" + session.session_id + "': " + why);
  int map_h = kDefaultMapHeight, map_w = kDefaultMapWidth, scene_h = 0, scene_w = 0, scene_c = 0;
  if (!session.frames.empty()) {
    const FrameSample& f0 = session.frames.front();
    map_h = f0.gt_map.height(), map_w = f0.gt_map.width();
    scene_h = f0.frame.height, scene_w = f0.frame.width, scene_c = f0.frame.channels;
  }

  Writer w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kSessionFormatVersion);
  w.put<double>(session.fps);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(session.mode));
  for (int v : {map_h, map_w, scene_h, scene_w, scene_c}) w.put<std::int32_t>(v);
  w.put<std::uint64_t>(session.frames.size());
  w.put<std::uint64_t>(config_hash);
  w.put<std::uint8_t>(session.ego_positions ? 1 : 0);
  w.put_string(session.session_id);

  for (std::size_t i = 0; i < session.frames.size(); ++i) {
    const FrameSample& f = session.frames[i];
    const bool dims_ok = f.gt_map.height() == map_h && f.gt_map.width() == map_w && f.frame.height == scene_h &&
                         f.frame.width == scene_w && f.frame.channels == scene_c &&
                         (!f.webcam_map || (f.webcam_map->height() == map_h && f.webcam_map->width() == map_w));
    if (!dims_ok) throw ShapeMismatch("frame " + std::to_string(i) + " dimensions differ from the first frame");
    const std::size_t len_at = w.size();
    w.put<std::uint64_t>(0);
    const std::size_t start = w.size();
    w.put<double>(f.timestamp);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(f.state.kind));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(f.state.intention));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(f.state.distraction));
    w.put<double>(f.dist_to_intersection);
    w.put_map(f.gt_map);
    w.put<std::uint8_t>(f.webcam_map ? 1 : 0);
    if (f.webcam_map) w.put_map(*f.webcam_map);
    for (float v : f.frame.data) w.put<std::uint8_t>(pixel_to_byte(v));
    w.patch_u64(len_at, w.size() - start);
  }
  if (session.ego_positions)
    for (const WorldPosition& p : *session.ego_positions) {
      w.put<double>(p.x);
      w.put<double>(p.y);
    }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write session file '" + path.string() + "'");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing session file '" + path.string() + "'");
}

SessionRecord load_session(const std::filesystem::path& path) {
  const std::string name = path.string();
  Reader r(read_all(path), name);
  const Header h = read_header(r, name);

  const std::size_t cells = static_cast<std::size_t>(h.map_h) * h.map_w;
  const std::size_t pixels = static_cast<std::size_t>(h.scene_h) * h.scene_w * h.scene_c;
  const std::size_t fixed = sizeof(double) + 3 + sizeof(double) + cells * sizeof(double) + 1 + pixels;

  SessionRecord s;
  s.session_id = h.session_id;
  s.fps = h.fps;
  s.mode = h.mode;
  s.frames.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(h.frame_count, 1u << 20)));
  for (std::uint64_t i = 0; i < h.frame_count; ++i) {
    const auto len = r.get<std::uint64_t>();
    if (len != fixed && len != fixed + cells * sizeof(double))
      throw FormatError("session file '" + name + "' frame " + std::to_string(i) +
                        " record size does not match the header dimensions");
    const std::size_t start = r.pos();
    FrameSample f;
    f.timestamp = r.get<double>();
    const auto kind = r.get<std::uint8_t>(), intention = r.get<std::uint8_t>(), distraction = r.get<std::uint8_t>();
    if (kind > 2 || intention > 3 || distraction > 2)
      throw FormatError("session file '" + name + "' frame " + std::to_string(i) + " has an invalid driver state");
    f.state = {static_cast<ConditionType>(kind), static_cast<Intention>(intention),
               static_cast<Distraction>(distraction)};
    f.dist_to_intersection = r.get<double>();
    f.gt_map = AttentionMap(h.map_h, h.map_w, r.get_doubles(cells));
    const bool has_webcam = r.get<std::uint8_t>() != 0;
    if (has_webcam != (len != fixed))
      throw FormatError("session file '" + name + "' frame " + std::to_string(i) +
                        " record size does not match the header dimensions");
    if (has_webcam) f.webcam_map = AttentionMap(h.map_h, h.map_w, r.get_doubles(cells));
    f.frame = SceneTensor(h.scene_h, h.scene_w, h.scene_c);
    const auto* px = reinterpret_cast<const std::uint8_t*>(r.take(pixels));
    for (std::size_t k = 0; k < pixels; ++k) f.frame.data[k] = byte_to_pixel(px[k]);
    if (r.pos() - start != len) throw FormatError("session file '" + name + "' has a corrupt frame record");
    f.mode = h.mode;
    s.frames.push_back(std::move(f));
  }
  if (h.has_ego) {
    std::vector<WorldPosition> ego;
    ego.reserve(s.frames.size());
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      const double x = r.get<double>();
      const double y = r.get<double>();
      ego.push_back({x, y});
    }
    s.ego_positions = std::move(ego);
  }
  if (r.remaining() != 0) throw FormatError("session file '" + name + "' has trailing bytes");
  return s;
}

std::uint64_t session_config_hash(const std::filesystem::path& path) {
  const std::string name = path.string();
  Reader r(read_all(path), name);
  return read_header(r, name).config_hash;
}

}  // namespace drivatt::pipeline
