#include "doctest.h"

#include "geigerlab/error.hpp"
#include "geigerlab/timetag.hpp"
#include "support.hpp"

#include <fstream>
#include <random>
#include <sstream>

using namespace geigerlab;

namespace {

TagStream sample_stream() {
  TagStream s;
  s.header.channel_count = 2;
  s.header.duration_s = 1e-3;
  s.header.metadata = {{"sample_id", "SLiK-1"}, {"note", "two channels"}};
  s.events = {{0, 0}, {1, 10}, {0, 10}, {1, 6'400'000}};
  return s;
}

} // namespace

TEST_CASE("default quantum is 156.25 ps") {
  StreamHeader h;
  CHECK(h.quantum_ps == 156.25);
  CHECK(h.quantum_s() == doctest::Approx(156.25e-12).epsilon(1e-15));
  h.duration_s = 1e-3;
  CHECK(h.max_tick() == 6'400'000);
}

TEST_CASE("encode/decode round trip is lossless") {
  const TagStream s = sample_stream();
  const auto bytes = encode_stream(s);
  CHECK(bytes.size() == header_size(s.header) + kEventRecordBytes * s.size());
  CHECK(decode_stream(bytes) == s);

  std::stringstream ss;
  CHECK(write_stream(s, ss) == bytes.size());
  CHECK(read_stream(ss) == s);
}

TEST_CASE("empty stream round trips") {
  TagStream s;
  s.header.duration_s = 0;
  CHECK(decode_stream(encode_stream(s)) == s);
}

TEST_CASE("random streams round trip") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    TagStream s;
    s.header.channel_count = static_cast<std::uint8_t>(1 + rng() % 4);
    s.header.quantum_ps = trial % 2 ? 156.25 : 1.0;
    s.header.duration_s = 1.0;
    std::uint64_t tick = 0;
    const auto n = rng() % 200;
    for (std::size_t i = 0; i < n; ++i) {
      tick += rng() % 1000;
      s.events.push_back({static_cast<std::uint8_t>(rng() % s.header.channel_count), tick});
    }
    s.header.metadata["trial"] = std::to_string(trial);
    CHECK(decode_stream(encode_stream(s)) == s);
  }
}

TEST_CASE("bad magic is reported at offset 0") {
  auto bytes = encode_stream(sample_stream());
  bytes[0] = 'X';
  try {
    decode_stream(bytes);
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.offset() == 0);
  }
}

TEST_CASE("trailing partial record is reported at its offset") {
  const TagStream s = sample_stream();
  auto bytes = encode_stream(s);
  bytes.resize(bytes.size() - 4);
  const std::size_t expected = header_size(s.header) + kEventRecordBytes * (s.size() - 1);
  try {
    decode_stream(bytes);
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.offset() == expected);
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("truncated header and unsupported version are parse errors") {
  auto bytes = encode_stream(sample_stream());
  std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + 7);
  CHECK_THROWS_AS(decode_stream(head), ParseError);
  bytes[4] = 9;
  try {
    decode_stream(bytes);
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("non-monotone ticks are rejected on read and write") {
  TagStream s = sample_stream();
  auto bytes = encode_stream(s);
  // overwrite the last tick (little-endian u64) with 0
  const std::size_t last = bytes.size() - 8;
  for (std::size_t i = 0; i < 8; ++i)
    bytes[last + i] = 0;
  CHECK_THROWS_AS(decode_stream(bytes), ParseError);

  s.events.back().tick = 1;
  std::stringstream ss;
  CHECK_THROWS_AS(write_stream(s, ss), ConfigError);
  CHECK(ss.str().empty());
}

TEST_CASE("validation names the offending field") {
  TagStream s = sample_stream();
  s.events[1].channel = 5;
  try {
    s.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.path().find("channel") != std::string::npos);
  }
  TagStream late = sample_stream();
  late.events.back().tick = late.header.max_tick() + 1;
  CHECK_THROWS_AS(late.validate(), ConfigError);
}

TEST_CASE("file write is atomic and readable") {
  const auto dir = support::temp_dir("timetag");
  const std::string path = (dir / "s.gtag").string();
  write_stream_file(sample_stream(), path);
  CHECK(read_stream_file(path) == sample_stream());
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS_AS(read_stream_file((dir / "missing.gtag").string()), Error);
}

TEST_CASE("csv export") {
  std::ostringstream out;
  write_csv(sample_stream(), out);
  CHECK(out.str() == "channel,tick\n0,0\n1,10\n0,10\n1,6400000\n");
}

TEST_CASE("slice selects a half-open window and rebases ticks") {
  TagStream s;
  s.header.duration_s = 1e-6;
  s.header.quantum_ps = 1000.0; // 1 ns ticks
  for (std::uint64_t t : {0, 100, 250, 500, 999, 1000})
    s.events.push_back({0, t});
  const TagStream mid = slice(s, 100e-9, 500e-9);
  REQUIRE(mid.size() == 2);
  CHECK(mid.events[0].tick == 0);
  CHECK(mid.events[1].tick == 150);
  CHECK(mid.duration_s() == doctest::Approx(400e-9));

  // the end of the stream is inclusive
  const TagStream tail = slice(s, 500e-9, 1e-6);
  CHECK(tail.size() == 3);
  CHECK(tail.events.back().tick == 500);
  CHECK_THROWS_AS(slice(s, 0.5e-6, 0.2e-6), Error);
  CHECK_THROWS_AS(slice(s, 0, 2e-6), Error);
}

TEST_CASE("slice agrees with a brute-force count and stays valid") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    TagStream s;
    s.header.duration_s = 1e-3;
    const auto ticks = support::poisson_ticks(1e6, s.header.duration_s, s.quantum_s(), rng());
    for (auto t : ticks)
      s.events.push_back({0, t});
    std::uniform_real_distribution<double> u(0, s.header.duration_s);
    double a = u(rng), b = u(rng);
    if (a > b)
      std::swap(a, b);
    if (trial % 10 == 0)
      b = s.header.duration_s;
    const TagStream cut = slice(s, a, b);
    std::size_t expected = 0;
    for (const auto &e : s.events) {
      const double t = static_cast<double>(e.tick) * s.quantum_s();
      if (t >= a && (b == s.header.duration_s ? t <= b : t < b))
        ++expected;
    }
    CHECK(cut.size() == expected);
    CHECK_NOTHROW(cut.validate());
  }
}
