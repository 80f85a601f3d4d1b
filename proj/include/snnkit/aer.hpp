#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

// One DVS event: microsecond timestamp, pixel coordinates, polarity.
struct Event {
  std::uint32_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;  // 0 = OFF, 1 = ON
};

struct EventStream {
  std::int64_t sensor_width = 0;
  std::int64_t sensor_height = 0;
  std::vector<Event> events;  // sorted by t, all within sensor bounds
  std::optional<int> label;
};

// Canonical binary record: little-endian, 9 bytes per event —
// u32 timestamp (microseconds), u16 x, u16 y, u8 polarity (0 or 1).
constexpr std::size_t kAerRecordSize = 9;

// Parses the binary format. Truncated payloads, out-of-bounds coordinates,
// polarities outside {0,1} and non-monotone timestamps raise DataError with
// the offending byte offset or event index.
EventStream decode_events(const std::vector<std::uint8_t>& bytes, std::int64_t sensor_width,
                          std::int64_t sensor_height);
std::vector<std::uint8_t> encode_events(const EventStream& stream);

// CSV fallback: header "t,x,y,p", one event per row, decimal integers.
EventStream decode_events_csv(const std::string& text, std::int64_t sensor_width,
                              std::int64_t sensor_height);
std::string encode_events_csv(const EventStream& stream);

// File IO; format picked by extension (.aer binary, .csv fallback).
EventStream read_event_file(const std::string& path, std::int64_t sensor_width,
                            std::int64_t sensor_height);
void write_event_file(const std::string& path, const EventStream& stream);

enum class BinMode { kCount, kBinary };

// T-step polarity frames [T,2,H,W]: channel 0 collects polarity-0 events,
// channel 1 polarity-1.
struct FrameSequence {
  Tensor frames;
  int label = -1;
};

// Splits [t_min, t_max] into T equal windows (last window right-closed)
// and accumulates events per window/polarity/pixel. Count mode conserves
// the total event count exactly; binary mode clips cells to 1. An empty
// stream yields all-zero frames.
FrameSequence bin_events(const EventStream& stream, std::int64_t t_steps, BinMode mode);

// Non-overlapping block downsampling of frames [T,N,2,H,W]: a block is
// active when it holds at least one event. Not differentiated; this is
// input preprocessing.
Tensor pool_frames(const Tensor& frames, std::int64_t factor);

// Synthetic gesture archetypes, one per class id.
constexpr int kNumGestureClasses = 8;
const char* gesture_class_name(int class_id);

// Deterministic synthetic event stream for (class_id, seed): a moving
// shape emits ON events on its leading edge and OFF events on its trailing
// edge, plus uniform noise events at `noise_rate` expected events per
// microsecond over the whole sensor.
EventStream synth_gesture(int class_id, std::uint64_t seed, std::int64_t height,
                          std::int64_t width, std::int64_t duration_us, double noise_rate = 0.0);

// Bernoulli rate coding of a [T,D] series with values in [0,1].
Tensor rate_encode(const Tensor& series, std::uint64_t seed);

// Dataset directory layout: <root>/<class_name>/<sample>.aer (or .csv);
// class index = lexicographic order of class names.
struct EventDataset {
  std::vector<EventStream> streams;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::int64_t sensor_width = 0;
  std::int64_t sensor_height = 0;
};

EventDataset load_event_dataset(const std::string& root, std::int64_t sensor_width,
                                std::int64_t sensor_height);

}  // namespace snnkit
