#pragma once

// Time-tag event model and the GTAG binary stream format.
//
// Layout (all integers little-endian):
//   "GTAG" | u16 version | f64 quantum_ps | u8 channel_count | f64 duration_s
//   | u32 n_meta | n_meta x (u32 len, key bytes, u32 len, value bytes)
//   | events: {u8 channel, u64 tick} until end of file

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace geigerlab {

inline constexpr double kDefaultQuantumPs = 156.25;
inline constexpr std::uint16_t kGtagVersion = 1;
inline constexpr std::size_t kEventRecordBytes = 9;
inline constexpr unsigned kMaxChannels = 16;

struct TimeTag {
  std::uint8_t channel = 0;
  std::uint64_t tick = 0;

  friend bool operator==(const TimeTag &, const TimeTag &) = default;
};

struct StreamHeader {
  double quantum_ps = kDefaultQuantumPs;
  std::uint8_t channel_count = 1;
  double duration_s = 0.0;
  std::map<std::string, std::string> metadata;

  double quantum_s() const { return quantum_ps * 1e-12; }
  /// Largest tick t with t * quantum_s() <= duration_s.
  std::uint64_t max_tick() const;

  friend bool operator==(const StreamHeader &, const StreamHeader &) = default;
};

struct TagStream {
  StreamHeader header;
  std::vector<TimeTag> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  double duration_s() const { return header.duration_s; }
  double quantum_s() const { return header.quantum_s(); }
  double seconds(std::uint64_t tick) const { return static_cast<double>(tick) * quantum_s(); }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  /// Ticks of events on `channel` (all channels when channel < 0).
  std::vector<std::uint64_t> ticks(int channel = -1) const;

  friend bool operator==(const TagStream &, const TagStream &) = default;
};

/// Byte size of the encoded header alone.
std::size_t header_size(const StreamHeader &header);

/// Validates, then encodes. Returns bytes written. Nothing is written if validation fails.
std::size_t write_stream(const TagStream &stream, std::ostream &sink);
std::vector<std::uint8_t> encode_stream(const TagStream &stream);

/// Throws ParseError with the byte offset of the problem.
TagStream read_stream(std::istream &source);
TagStream decode_stream(std::span<const std::uint8_t> bytes);

void write_stream_file(const TagStream &stream, const std::string &path);
TagStream read_stream_file(const std::string &path);

/// One "channel,tick" row per event, with a header row.
void write_csv(const TagStream &stream, std::ostream &out);

/// Events with t_start <= t < t_end (t <= t_end when t_end is the full duration),
/// ticks rebased to the first tick at or after t_start.
TagStream slice(const TagStream &stream, double t_start, double t_end);

} // namespace geigerlab
