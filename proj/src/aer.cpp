#include "snnkit/aer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "snnkit/error.hpp"
#include "snnkit/rng.hpp"

namespace fs = std::filesystem;

namespace snnkit {

namespace {

void check_sensor(std::int64_t w, std::int64_t h) {
  if (w < 1 || h < 1) throw ContractError("sensor dimensions must be >= 1");
}

void check_event(const Event& e, std::int64_t w, std::int64_t h, std::size_t index) {
  if (e.x >= w || e.y >= h) {
    throw DataError("event " + std::to_string(index) + " out of sensor bounds (" +
                    std::to_string(e.x) + "," + std::to_string(e.y) + ") for " +
                    std::to_string(w) + "x" + std::to_string(h));
  }
  if (e.p > 1) {
    throw DataError("event " + std::to_string(index) + " has polarity " + std::to_string(e.p));
  }
}

}  // namespace

EventStream decode_events(const std::vector<std::uint8_t>& bytes, std::int64_t sensor_width,
                          std::int64_t sensor_height) {
  check_sensor(sensor_width, sensor_height);
  if (bytes.size() % kAerRecordSize != 0) {
    throw DataError("truncated record at byte offset " +
                    std::to_string(bytes.size() - bytes.size() % kAerRecordSize));
  }
  EventStream s;
  s.sensor_width = sensor_width;
  s.sensor_height = sensor_height;
  s.events.reserve(bytes.size() / kAerRecordSize);
  std::uint32_t prev_t = 0;
  for (std::size_t i = 0; i < bytes.size(); i += kAerRecordSize) {
    const std::uint8_t* r = bytes.data() + i;
    Event e;
    e.t = static_cast<std::uint32_t>(r[0]) | static_cast<std::uint32_t>(r[1]) << 8 |
          static_cast<std::uint32_t>(r[2]) << 16 | static_cast<std::uint32_t>(r[3]) << 24;
    e.x = static_cast<std::uint16_t>(r[4] | r[5] << 8);
    e.y = static_cast<std::uint16_t>(r[6] | r[7] << 8);
    e.p = r[8];
    const std::size_t index = i / kAerRecordSize;
    check_event(e, sensor_width, sensor_height, index);
    if (index > 0 && e.t < prev_t) {
      throw DataError("non-monotone timestamp at event " + std::to_string(index));
    }
    prev_t = e.t;
    s.events.push_back(e);
  }
  return s;
}

std::vector<std::uint8_t> encode_events(const EventStream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(stream.events.size() * kAerRecordSize);
  for (const Event& e : stream.events) {
    out.push_back(static_cast<std::uint8_t>(e.t & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.t >> 8 & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.t >> 16 & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.t >> 24 & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.x & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.x >> 8 & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.y & 0xff));
    out.push_back(static_cast<std::uint8_t>(e.y >> 8 & 0xff));
    out.push_back(e.p);
  }
  return out;
}

EventStream decode_events_csv(const std::string& text, std::int64_t sensor_width,
                              std::int64_t sensor_height) {
  check_sensor(sensor_width, sensor_height);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,p") {
    throw DataError("csv events must start with header t,x,y,p");
  }
  EventStream s;
  s.sensor_width = sensor_width;
  s.sensor_height = sensor_height;
  std::size_t index = 0;
  std::uint32_t prev_t = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    unsigned long long t, x, y, p;
    char c1, c2, c3;
    std::istringstream row(line);
    if (!(row >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw DataError("malformed csv event at row " + std::to_string(index));
    }
    Event e{static_cast<std::uint32_t>(t), static_cast<std::uint16_t>(x),
            static_cast<std::uint16_t>(y), static_cast<std::uint8_t>(p)};
    check_event(e, sensor_width, sensor_height, index);
    if (index > 0 && e.t < prev_t) {
      throw DataError("non-monotone timestamp at event " + std::to_string(index));
    }
    prev_t = e.t;
    s.events.push_back(e);
    ++index;
  }
  return s;
}

std::string encode_events_csv(const EventStream& stream) {
  std::ostringstream out;
  out << "t,x,y,p\n";
  for (const Event& e : stream.events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
  }
  return out.str();
}

EventStream read_event_file(const std::string& path, std::int64_t sensor_width,
                            std::int64_t sensor_height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open event file " + path);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
      return decode_events_csv(raw, sensor_width, sensor_height);
    }
    std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
    return decode_events(bytes, sensor_width, sensor_height);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_event_file(const std::string& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write event file " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    const std::string text = encode_events_csv(stream);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  } else {
    const auto bytes = encode_events(stream);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
}

FrameSequence bin_events(const EventStream& stream, std::int64_t t_steps, BinMode mode) {
  if (t_steps < 1) throw ContractError("bin_events requires T >= 1");
  check_sensor(stream.sensor_width, stream.sensor_height);
  const std::int64_t h = stream.sensor_height, w = stream.sensor_width;
  Tensor frames = Tensor::zeros({t_steps, 2, h, w});
  FrameSequence out;
  out.label = stream.label.value_or(-1);
  if (stream.events.empty()) {
    out.frames = frames;
    return out;
  }
  const std::int64_t t_min = stream.events.front().t;
  const std::int64_t t_max = stream.events.back().t;
  const std::int64_t span = t_max - t_min;
  Array& d = frames.raw();
  for (const Event& e : stream.events) {
    std::int64_t window = span == 0 ? 0 : (static_cast<std::int64_t>(e.t) - t_min) * t_steps / span;
    if (window >= t_steps) window = t_steps - 1;  // t == t_max lands in the last window
    const std::int64_t idx = ((window * 2 + e.p) * h + e.y) * w + e.x;
    if (mode == BinMode::kCount) {
      d[idx] += 1.0;
    } else {
      d[idx] = 1.0;
    }
  }
  out.frames = frames;
  return out;
}

Tensor pool_frames(const Tensor& frames, std::int64_t factor) {
  if (frames.rank() != 5) throw ContractError("pool_frames expects [T,N,2,H,W]");
  if (factor < 1) throw ContractError("pool factor must be >= 1");
  const std::int64_t t = frames.dim(0), n = frames.dim(1), c = frames.dim(2);
  const std::int64_t h = frames.dim(3), w = frames.dim(4);
  if (h % factor != 0 || w % factor != 0) {
    throw ContractError("pool factor " + std::to_string(factor) + " does not divide " +
                        std::to_string(h) + "x" + std::to_string(w));
  }
  const std::int64_t ho = h / factor, wo = w / factor;
  Tensor out = Tensor::zeros({t, n, c, ho, wo});
  const Array& src = frames.data();
  Array& dst = out.raw();
  const std::int64_t planes = t * n * c;
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* in_plane = src.data() + p * h * w;
    double* out_plane = dst.data() + p * ho * wo;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        double acc = 0;
        for (std::int64_t dy = 0; dy < factor; ++dy) {
          for (std::int64_t dx = 0; dx < factor; ++dx) {
            acc += in_plane[(oy * factor + dy) * w + ox * factor + dx];
          }
        }
        out_plane[oy * wo + ox] = acc >= 1.0 ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

namespace {

const char* const kGestureNames[kNumGestureClasses] = {
    "sweep_left",  "sweep_right",   "sweep_up",    "sweep_down",
    "rotate_cw",   "rotate_ccw",    "ring_expand", "ring_contract",
};

constexpr int kMicroSteps = 32;

// Occupancy grid of the moving shape at a given phase in [0,1].
void shape_at(int class_id, double phase, std::int64_t h, std::int64_t w, std::int64_t bar_width,
              std::vector<std::uint8_t>& grid) {
  std::fill(grid.begin(), grid.end(), 0);
  auto set_px = [&](std::int64_t x, std::int64_t y) {
    if (x >= 0 && x < w && y >= 0 && y < h) grid[y * w + x] = 1;
  };
  phase = std::clamp(phase, 0.0, 1.0);
  switch (class_id) {
    case 0: {  // sweep_left: vertical bar moving toward x = 0
      const std::int64_t xc = static_cast<std::int64_t>(std::lround((w - 1) * (1.0 - phase)));
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t k = 0; k < bar_width; ++k) set_px(xc + k, y);
      }
      break;
    }
    case 1: {  // sweep_right
      const std::int64_t xc = static_cast<std::int64_t>(std::lround((w - 1) * phase));
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t k = 0; k < bar_width; ++k) set_px(xc - k, y);
      }
      break;
    }
    case 2: {  // sweep_up: horizontal bar moving toward y = 0
      const std::int64_t yc = static_cast<std::int64_t>(std::lround((h - 1) * (1.0 - phase)));
      for (std::int64_t x = 0; x < w; ++x) {
        for (std::int64_t k = 0; k < bar_width; ++k) set_px(x, yc + k);
      }
      break;
    }
    case 3: {  // sweep_down
      const std::int64_t yc = static_cast<std::int64_t>(std::lround((h - 1) * phase));
      for (std::int64_t x = 0; x < w; ++x) {
        for (std::int64_t k = 0; k < bar_width; ++k) set_px(x, yc - k);
      }
      break;
    }
    case 4:
    case 5: {  // rotating radial bar
      const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
      const double radius = std::min(h, w) / 2.0 - 0.5;
      const double dir = class_id == 4 ? 1.0 : -1.0;
      const double theta = dir * 2.0 * std::acos(-1.0) * phase;
      for (double r = 0; r <= radius; r += 0.4) {
        set_px(static_cast<std::int64_t>(std::lround(cx + r * std::cos(theta))),
               static_cast<std::int64_t>(std::lround(cy + r * std::sin(theta))));
      }
      break;
    }
    case 6:
    case 7: {  // expanding / contracting ring
      const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
      const double radius = std::min(h, w) / 2.0 - 0.5;
      const double rho = (class_id == 6 ? phase : 1.0 - phase) * radius;
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          const double d = std::hypot(x - cx, y - cy);
          if (std::abs(d - rho) <= 0.75) grid[y * w + x] = 1;
        }
      }
      break;
    }
    default:
      throw ContractError("unknown gesture class " + std::to_string(class_id));
  }
}

}  // namespace

const char* gesture_class_name(int class_id) {
  if (class_id < 0 || class_id >= kNumGestureClasses) {
    throw ContractError("unknown gesture class " + std::to_string(class_id));
  }
  return kGestureNames[class_id];
}

EventStream synth_gesture(int class_id, std::uint64_t seed, std::int64_t height,
                          std::int64_t width, std::int64_t duration_us, double noise_rate) {
  if (class_id < 0 || class_id >= kNumGestureClasses) {
    throw ContractError("unknown gesture class " + std::to_string(class_id));
  }
  check_sensor(width, height);
  if (duration_us < 0) throw ContractError("duration must be non-negative");
  EventStream s;
  s.sensor_width = width;
  s.sensor_height = height;
  s.label = class_id;
  if (duration_us == 0) return s;

  Rng rng(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(class_id) + 1);
  const double speed = rng.uniform(0.9, 1.1);
  const double phase0 = rng.uniform(0.0, 0.12);
  const std::int64_t bar_width = 2 + static_cast<std::int64_t>(rng.below(2));

  std::vector<std::uint8_t> prev(height * width, 0), cur(height * width, 0);
  const double lambda = noise_rate * static_cast<double>(duration_us) / kMicroSteps;
  for (int m = 0; m < kMicroSteps; ++m) {
    const double phase = phase0 + speed * (static_cast<double>(m) / (kMicroSteps - 1)) * (1.0 - phase0);
    shape_at(class_id, phase, height, width, bar_width, cur);
    const auto t = static_cast<std::uint32_t>(m * duration_us / kMicroSteps);
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const std::uint8_t now = cur[y * width + x];
        const std::uint8_t before = prev[y * width + x];
        if (now == before) continue;
        s.events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                 static_cast<std::uint8_t>(now ? 1 : 0)});
      }
    }
    // seeded uniform noise, appended at the same micro-step timestamp
    std::int64_t noise_count = static_cast<std::int64_t>(lambda);
    if (rng.uniform01() < lambda - static_cast<double>(noise_count)) ++noise_count;
    for (std::int64_t k = 0; k < noise_count; ++k) {
      s.events.push_back(Event{t, static_cast<std::uint16_t>(rng.below(width)),
                               static_cast<std::uint16_t>(rng.below(height)),
                               static_cast<std::uint8_t>(rng.below(2))});
    }
    std::swap(prev, cur);
  }
  return s;
}

Tensor rate_encode(const Tensor& series, std::uint64_t seed) {
  const Array& d = series.data();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] < 0.0 || d[i] > 1.0) {
      throw ContractError("rate_encode values must lie in [0,1]");
    }
  }
  Rng rng(seed);
  Array out(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) out[i] = rng.bernoulli(d[i]) ? 1.0 : 0.0;
  return Tensor::from_array(series.shape(), std::move(out));
}

EventDataset load_event_dataset(const std::string& root, std::int64_t sensor_width,
                                std::int64_t sensor_height) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root + " is not a directory");
  EventDataset ds;
  ds.sensor_width = sensor_width;
  ds.sensor_height = sensor_height;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw DataError("dataset root " + root + " has no class directories");
  for (std::size_t ci = 0; ci < class_dirs.size(); ++ci) {
    ds.class_names.push_back(class_dirs[ci].filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[ci])) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension();
      if (ext == ".aer" || ext == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      EventStream s = read_event_file(f.string(), sensor_width, sensor_height);
      s.label = static_cast<int>(ci);
      ds.streams.push_back(std::move(s));
      ds.labels.push_back(static_cast<int>(ci));
    }
  }
  if (ds.streams.empty()) throw DataError("dataset root " + root + " holds no samples");
  return ds;
}

}  // namespace snnkit
