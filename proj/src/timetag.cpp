#include "geigerlab/timetag.hpp"

#include "geigerlab/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>

namespace geigerlab {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'A', 'G'};

class Encoder {
public:
  explicit Encoder(std::vector<std::uint8_t> &out) : out_(out) {}

  template <typename T> void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(std::begin(raw), std::end(raw));
    out_.insert(out_.end(), std::begin(raw), std::end(raw));
  }
  void put_string(const std::string &s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

private:
  std::vector<std::uint8_t> &out_;
};

class Decoder {
public:
  explicit Decoder(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  template <typename T> T get(const char *field) {
    if (remaining() < sizeof(T))
      throw ParseError(std::string("truncated ") + field, pos_);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(std::begin(raw), std::end(raw));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(const char *field) {
    const auto len = get<std::uint32_t>(field);
    if (remaining() < len)
      throw ParseError(std::string("truncated ") + field, pos_);
    std::string s(reinterpret_cast<const char *>(in_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  void expect_magic() {
    if (remaining() < sizeof(kMagic) || std::memcmp(in_.data(), kMagic, sizeof(kMagic)) != 0)
      throw ParseError("bad magic (expected \"GTAG\")", 0);
    pos_ += sizeof(kMagic);
  }

private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

} // namespace

std::uint64_t StreamHeader::max_tick() const {
  const double q = quantum_s();
  if (!(q > 0.0) || !(duration_s >= 0.0))
    return 0;
  auto t = static_cast<std::uint64_t>(std::floor(duration_s / q));
  while (t > 0 && static_cast<double>(t) * q > duration_s)
    --t;
  while (static_cast<double>(t + 1) * q <= duration_s)
    ++t;
  return t;
}

void TagStream::validate() const {
  if (!(header.quantum_ps > 0.0) || !std::isfinite(header.quantum_ps))
    throw ConfigError("header.quantum_ps", "must be positive and finite");
  if (!(header.duration_s >= 0.0) || !std::isfinite(header.duration_s))
    throw ConfigError("header.duration_s", "must be non-negative and finite");
  if (header.channel_count == 0 || header.channel_count > kMaxChannels)
    throw ConfigError("header.channel_count", "must be in 1..16");
  const std::uint64_t limit = header.max_tick();
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto &e = events[i];
    const std::string where = "events[" + std::to_string(i) + "]";
    if (e.channel >= header.channel_count)
      throw ConfigError(where + ".channel", "exceeds channel_count");
    if (e.tick < prev)
      throw ConfigError(where + ".tick", "ticks must be non-decreasing");
    if (e.tick > limit)
      throw ConfigError(where + ".tick", "beyond declared duration");
    prev = e.tick;
  }
}

std::vector<std::uint64_t> TagStream::ticks(int channel) const {
  std::vector<std::uint64_t> out;
  out.reserve(events.size());
  for (const auto &e : events)
    if (channel < 0 || e.channel == channel)
      out.push_back(e.tick);
  return out;
}

std::size_t header_size(const StreamHeader &header) {
  std::size_t n = sizeof(kMagic) + 2 + 8 + 1 + 8 + 4;
  for (const auto &[k, v] : header.metadata)
    n += 4 + k.size() + 4 + v.size();
  return n;
}

std::vector<std::uint8_t> encode_stream(const TagStream &stream) {
  stream.validate();
  std::vector<std::uint8_t> out;
  out.reserve(header_size(stream.header) + kEventRecordBytes * stream.events.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  Encoder enc(out);
  enc.put(kGtagVersion);
  enc.put(stream.header.quantum_ps);
  enc.put(stream.header.channel_count);
  enc.put(stream.header.duration_s);
  enc.put(static_cast<std::uint32_t>(stream.header.metadata.size()));
  for (const auto &[k, v] : stream.header.metadata) {
    enc.put_string(k);
    enc.put_string(v);
  }
  for (const auto &e : stream.events) {
    enc.put(e.channel);
    enc.put(e.tick);
  }
  return out;
}

std::size_t write_stream(const TagStream &stream, std::ostream &sink) {
  const auto bytes = encode_stream(stream);
  sink.write(reinterpret_cast<const char *>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!sink)
    throw Error("write_stream: sink write failed");
  return bytes.size();
}

TagStream decode_stream(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_magic();
  const std::size_t version_at = dec.offset();
  const auto version = dec.get<std::uint16_t>("version");
  if (version != kGtagVersion)
    throw ParseError("unsupported version " + std::to_string(version), version_at);

  TagStream s;
  const std::size_t quantum_at = dec.offset();
  s.header.quantum_ps = dec.get<double>("quantum_ps");
  if (!(s.header.quantum_ps > 0.0) || !std::isfinite(s.header.quantum_ps))
    throw ParseError("quantum must be positive", quantum_at);
  const std::size_t channels_at = dec.offset();
  s.header.channel_count = dec.get<std::uint8_t>("channel_count");
  if (s.header.channel_count == 0 || s.header.channel_count > kMaxChannels)
    throw ParseError("channel_count out of range", channels_at);
  s.header.duration_s = dec.get<double>("duration_s");
  const auto n_meta = dec.get<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto key = dec.get_string("metadata key");
    auto value = dec.get_string("metadata value");
    s.header.metadata.emplace(std::move(key), std::move(value));
  }

  const std::size_t tail = dec.remaining() % kEventRecordBytes;
  if (tail != 0)
    throw ParseError("truncated event record", bytes.size() - tail);
  const std::uint64_t limit = s.header.max_tick();
  s.events.reserve(dec.remaining() / kEventRecordBytes);
  std::uint64_t prev = 0;
  while (dec.remaining() > 0) {
    const std::size_t at = dec.offset();
    TimeTag e;
    e.channel = dec.get<std::uint8_t>("channel");
    e.tick = dec.get<std::uint64_t>("tick");
    if (e.channel >= s.header.channel_count)
      throw ParseError("channel exceeds channel_count", at);
    if (e.tick < prev)
      throw ParseError("non-monotone tick", at + 1);
    if (e.tick > limit)
      throw ParseError("tick beyond declared duration", at + 1);
    prev = e.tick;
    s.events.push_back(e);
  }
  return s;
}

TagStream read_stream(std::istream &source) {
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(source),
                                  std::istreambuf_iterator<char>()};
  return decode_stream(bytes);
}

void write_stream_file(const TagStream &stream, const std::string &path) {
  const auto bytes = encode_stream(stream);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TagStream read_stream_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path);
  return read_stream(in);
}

void write_csv(const TagStream &stream, std::ostream &out) {
  out << "channel,tick\n";
  for (const auto &e : stream.events)
    out << static_cast<unsigned>(e.channel) << ',' << e.tick << '\n';
}

TagStream slice(const TagStream &stream, double t_start, double t_end) {
  if (!(t_start >= 0.0) || !(t_end >= t_start) || t_end > stream.duration_s())
    throw Error("slice: require 0 <= t_start <= t_end <= duration");
  const double q = stream.quantum_s();
  const bool to_end = t_end == stream.duration_s();
  const auto &ev = stream.events;

  auto first = std::partition_point(ev.begin(), ev.end(), [&](const TimeTag &e) {
    return static_cast<double>(e.tick) * q < t_start;
  });
  // slicing up to the stream end keeps everything, so slice(s, 0, duration) == s
  auto last = to_end ? ev.end() : std::partition_point(first, ev.end(), [&](const TimeTag &e) {
    return static_cast<double>(e.tick) * q < t_end;
  });

  // smallest tick whose time is >= t_start
  auto offset = static_cast<std::uint64_t>(std::ceil(t_start / q));
  while (offset > 0 && static_cast<double>(offset - 1) * q >= t_start)
    --offset;
  while (static_cast<double>(offset) * q < t_start)
    ++offset;

  TagStream out;
  out.header = stream.header;
  out.header.duration_s = t_end - t_start;
  out.events.reserve(static_cast<std::size_t>(last - first));
  for (auto it = first; it != last; ++it)
    out.events.push_back({it->channel, it->tick - offset});
  return out;
}

} // namespace geigerlab
