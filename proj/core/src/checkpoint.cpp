#include "gsroad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gsroad/error.hpp"
#include "gsroad/io.hpp"

namespace gsroad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints are stored little-endian");

constexpr char kMagic[8] = {'G', 'S', 'R', 'D', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    out.insert(out.end(), p, p + v.size() * sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out.insert(out.end(), s.begin(), s.end());
  }
  void opt(const std::optional<double>& v) {
    pod<std::uint8_t>(v.has_value());
    pod<double>(v.value_or(0.0));
  }

  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  template <typename T>
  std::vector<T> vec() {
    const auto n = pod<std::uint64_t>();
    if (n > (size_ - pos_) / sizeof(T)) corrupt("array length exceeds file size");
    std::vector<T> v(n);
    std::memcpy(v.data(), data_ + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::optional<double> opt() {
    const bool has = pod<std::uint8_t>() != 0;
    const double v = pod<double>();
    return has ? std::optional<double>(v) : std::nullopt;
  }
  bool done() const { return pos_ == size_; }

  [[noreturn]] static void corrupt(const std::string& why) { throw Error(ErrorCode::CorruptCheckpoint, why); }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) corrupt("unexpected end of data");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_adam(Writer& w, const AdamState& s) {
  w.vec(s.m);
  w.vec(s.v);
}

AdamState read_adam(Reader& r) {
  AdamState s;
  s.m = r.vec<double>();
  s.v = r.vec<double>();
  return s;
}

void write_epoch(Writer& w, const EpochRecord& e) {
  w.pod<std::int32_t>(e.epoch);
  w.pod<std::uint64_t>(e.steps);
  w.pod<std::uint64_t>(e.skipped);
  w.pod(e.mean_parts.color);
  w.pod(e.mean_parts.semantic);
  w.pod(e.mean_parts.smooth);
  w.pod(e.mean_parts.elevation);
  w.pod(e.mean_total);
  w.opt(e.psnr);
  w.opt(e.miou);
  w.opt(e.elevation_rmse);
}

EpochRecord read_epoch(Reader& r) {
  EpochRecord e;
  e.epoch = r.pod<std::int32_t>();
  e.steps = r.pod<std::uint64_t>();
  e.skipped = r.pod<std::uint64_t>();
  e.mean_parts.color = r.pod<double>();
  e.mean_parts.semantic = r.pod<double>();
  e.mean_parts.smooth = r.pod<double>();
  e.mean_parts.elevation = r.pod<double>();
  e.mean_total = r.pod<double>();
  e.psnr = r.opt();
  e.miou = r.opt();
  e.elevation_rmse = r.opt();
  return e;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  for (char ch : kMagic) w.pod(ch);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(c.config);

  const SurfelScene& s = c.scene;
  w.pod<std::int32_t>(s.class_count);
  w.pod<std::uint8_t>(s.layout == Layout::Layout2 ? 2 : 1);
  w.pod(s.lattice.origin.x());
  w.pod(s.lattice.origin.y());
  w.pod(s.lattice.resolution);
  w.pod<std::int32_t>(s.lattice.rows);
  w.pod<std::int32_t>(s.lattice.cols);
  w.vec(s.lattice.vertex_index);
  w.vec(s.lattice.center_index);
  w.vec(s.road_mask);
  w.pod<std::uint64_t>(s.palette.size());
  for (const auto& p : s.palette) {
    w.pod<std::int32_t>(p.id);
    w.str(p.name);
    for (auto v : p.color) w.pod(v);
  }
  for (const auto* v : {&s.x, &s.y, &s.z, &s.log_scale, &s.opacity_logit, &s.quaternion, &s.color, &s.semantics}) {
    w.vec(*v);
  }

  w.pod<std::uint64_t>(c.exposures.size());
  for (const auto& e : c.exposures) {
    w.str(e.name);
    w.pod(e.a);
    w.pod(e.b);
  }

  const TrainState& t = c.state;
  w.pod(t.step);
  w.pod(t.total_steps);
  w.pod(t.z_factor);
  w.pod(t.initial_z_center);
  w.pod(t.initial_z_range);
  for (const auto* a : {&t.z, &t.log_scale, &t.opacity_logit, &t.quaternion, &t.color, &t.semantics, &t.exposure_a,
                        &t.exposure_b}) {
    write_adam(w, *a);
  }
  w.pod<std::uint64_t>(t.history.size());
  for (const auto& e : t.history) write_epoch(w, e);
  write_epoch(w, t.current);

  w.pod<std::uint64_t>(fnv1a(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t)) {
    Reader::corrupt("file too short");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) Reader::corrupt("bad magic header");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointVersion) {
    Reader::corrupt("unsupported version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) Reader::corrupt("checksum mismatch");

  Reader r(bytes.data(), body);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
  r.pod<std::uint32_t>();
  Checkpoint c;
  c.config = r.str();

  SurfelScene& s = c.scene;
  s.class_count = r.pod<std::int32_t>();
  const auto layout = r.pod<std::uint8_t>();
  if (layout != 1 && layout != 2) Reader::corrupt("bad layout tag");
  s.layout = layout == 2 ? Layout::Layout2 : Layout::Layout1;
  s.lattice.origin.x() = r.pod<double>();
  s.lattice.origin.y() = r.pod<double>();
  s.lattice.resolution = r.pod<double>();
  s.lattice.rows = r.pod<std::int32_t>();
  s.lattice.cols = r.pod<std::int32_t>();
  s.lattice.vertex_index = r.vec<std::int32_t>();
  s.lattice.center_index = r.vec<std::int32_t>();
  s.road_mask = r.vec<std::uint8_t>();
  const auto palette = r.pod<std::uint64_t>();
  if (palette > 256) Reader::corrupt("palette too large");
  for (std::uint64_t i = 0; i < palette; ++i) {
    ClassInfo p;
    p.id = r.pod<std::int32_t>();
    p.name = r.str();
    for (auto& v : p.color) v = r.pod<std::uint8_t>();
    s.palette.push_back(p);
  }
  for (auto* v : {&s.x, &s.y, &s.z, &s.log_scale, &s.opacity_logit, &s.quaternion, &s.color, &s.semantics}) {
    *v = r.vec<double>();
  }
  const std::size_t n = s.z.size();
  if (s.x.size() != n || s.y.size() != n || s.log_scale.size() != 2 * n || s.opacity_logit.size() != n ||
      s.quaternion.size() != 4 * n || s.color.size() != 3 * n ||
      s.semantics.size() != n * static_cast<std::size_t>(std::max(0, s.class_count))) {
    Reader::corrupt("inconsistent parameter array sizes");
  }

  const auto ncam = r.pod<std::uint64_t>();
  if (ncam > 1024) Reader::corrupt("camera count too large");
  for (std::uint64_t i = 0; i < ncam; ++i) {
    CameraExposure e;
    e.name = r.str();
    e.a = r.pod<double>();
    e.b = r.pod<double>();
    c.exposures.push_back(e);
  }

  TrainState& t = c.state;
  t.step = r.pod<std::uint64_t>();
  t.total_steps = r.pod<std::uint64_t>();
  t.z_factor = r.pod<double>();
  t.initial_z_center = r.pod<double>();
  t.initial_z_range = r.pod<double>();
  for (auto* a : {&t.z, &t.log_scale, &t.opacity_logit, &t.quaternion, &t.color, &t.semantics, &t.exposure_a,
                  &t.exposure_b}) {
    *a = read_adam(r);
  }
  const auto epochs = r.pod<std::uint64_t>();
  if (epochs > (1u << 20)) Reader::corrupt("history too long");
  for (std::uint64_t i = 0; i < epochs; ++i) t.history.push_back(read_epoch(r));
  t.current = read_epoch(r);
  if (!r.done()) Reader::corrupt("trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InputError, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::InputError, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::InputError, "checkpoint " + path.string() + " not found");
  return deserialize_checkpoint(read_bytes(path));
}

}  // namespace gsroad
