#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "nfx/errors.hpp"
#include "nfx/manifest.hpp"
#include "nfx/nn/rng.hpp"
#include "nfx/wav.hpp"
#include "oracles.hpp"

using namespace nfx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nfx_test_" + std::to_string(nn::Rng(std::random_device{}()).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// hand-rolled writer so read_wav is checked against an independent encoder
void write_raw_wav(const std::string& path, std::uint16_t format, std::uint16_t channels,
                   std::uint32_t sr, std::uint16_t bits,
                   const std::vector<std::int32_t>& raw_or_bits) {
    std::ofstream out(path, std::ios::binary);
    const std::uint32_t bytes_per = bits / 8;
    const std::uint32_t data_size =
        static_cast<std::uint32_t>(raw_or_bits.size()) * bytes_per;
    auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    u32(16);
    u16(format);
    u16(channels);
    u32(sr);
    u32(sr * bytes_per * channels);
    u16(static_cast<std::uint16_t>(bytes_per * channels));
    u16(bits);
    out.write("data", 4);
    u32(data_size);
    for (std::int32_t v : raw_or_bits) out.write(reinterpret_cast<char*>(&v), bytes_per);
}

}  // namespace

TEST_CASE("pcm16 scaling and stereo downmix") {
    TempDir dir;
    write_raw_wav(dir.file("mono.wav"), 1, 1, 44100, 16, {16384});
    auto b = read_wav(dir.file("mono.wav"));
    CHECK(b.sample_rate == 44100);
    REQUIRE(b.size() == 1);
    CHECK(b.samples[0] == doctest::Approx(0.5));

    write_raw_wav(dir.file("st.wav"), 1, 2, 44100, 16, {-8192, 8192});
    auto s = read_wav(dir.file("st.wav"));
    REQUIRE(s.size() == 1);
    CHECK(s.samples[0] == doctest::Approx(0.0));
}

TEST_CASE("pcm24 scaling") {
    TempDir dir;
    write_raw_wav(dir.file("p24.wav"), 1, 1, 48000, 24, {4194304});  // 2^22 -> 0.5
    auto b = read_wav(dir.file("p24.wav"));
    REQUIRE(b.size() == 1);
    CHECK(b.samples[0] == doctest::Approx(0.5));
    write_raw_wav(dir.file("n24.wav"), 1, 1, 48000, 24, {static_cast<std::int32_t>(0xC00000)});
    CHECK(read_wav(dir.file("n24.wav")).samples[0] == doctest::Approx(-0.5));
}

TEST_CASE("float32 roundtrip is bit-exact; pcm16 clamps full scale") {
    TempDir dir;
    nn::Rng rng(101);
    AudioBuffer buf(oracles::random_vector(rng, 500, -1.2, 1.2), 48000);
    // keep values float-representable by a float32 write/read cycle
    write_wav(dir.file("f32.wav"), buf, WavFormat::float32);
    const auto back = read_wav(dir.file("f32.wav"));
    REQUIRE(back.size() == buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        CHECK(back.samples[i] == static_cast<double>(static_cast<float>(buf.samples[i])));
    // re-write: now bit-identical
    write_wav(dir.file("f32b.wav"), back, WavFormat::float32);
    const auto back2 = read_wav(dir.file("f32b.wav"));
    CHECK(back2.samples == back.samples);

    AudioBuffer fs(std::vector<double>{1.0, -1.0, 0.25}, 48000);
    write_wav(dir.file("p16.wav"), fs, WavFormat::pcm16);
    const auto p = read_wav(dir.file("p16.wav"));
    CHECK(p.samples[0] == doctest::Approx(32767.0 / 32768.0));
    CHECK(p.samples[1] == doctest::Approx(-1.0));
    CHECK(p.samples[2] == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("malformed and unsupported wavs raise the designated errors") {
    TempDir dir;
    {
        std::ofstream out(dir.file("junk.wav"), std::ios::binary);
        out << "not a riff file at all";
    }
    CHECK_THROWS_AS(read_wav(dir.file("junk.wav")), MalformedWav);

    write_raw_wav(dir.file("alaw.wav"), 6, 1, 8000, 16, {0});
    CHECK_THROWS_AS(read_wav(dir.file("alaw.wav")), UnsupportedFormat);

    write_raw_wav(dir.file("b8.wav"), 1, 1, 8000, 8, {0});
    CHECK_THROWS_AS(read_wav(dir.file("b8.wav")), UnsupportedFormat);

    // truncate a valid file inside the data chunk
    write_raw_wav(dir.file("ok.wav"), 1, 1, 8000, 16, {1, 2, 3, 4});
    fs::resize_file(dir.file("ok.wav"), fs::file_size(dir.file("ok.wav")) - 3);
    CHECK_THROWS_AS(read_wav(dir.file("ok.wav")), MalformedWav);

    CHECK_THROWS_AS(read_wav(dir.file("missing.wav")), IoError);
}

namespace {

void write_pair(const TempDir& dir, const std::string& in_name, const std::string& tg_name,
                int sr, std::size_t len) {
    AudioBuffer a(std::vector<double>(len, 0.25), sr);
    write_wav(dir.file(in_name), a, WavFormat::float32);
    write_wav(dir.file(tg_name), a, WavFormat::float32);
}

std::string manifest_json(int sr, const std::string& extra_entry = "") {
    return std::string("{\n"
                       "  \"sample_rate\": ") +
           std::to_string(sr) +
           ",\n"
           "  \"condition_names\": [\"gain\"],\n"
           "  \"condition_ranges\": [[0.0, 1.0]],\n"
           "  \"entries\": [\n"
           "    {\"input\": \"in0.wav\", \"target\": \"tg0.wav\", \"condition\": [0.5], "
           "\"split\": \"train\"}" +
           extra_entry +
           "\n  ]\n}\n";
}

}  // namespace

TEST_CASE("manifest loads, validates rates and lengths, rejects bad schema") {
    TempDir dir;
    write_pair(dir, "in0.wav", "tg0.wav", 48000, 4800);
    {
        std::ofstream out(dir.file("m.json"));
        out << manifest_json(48000);
    }
    const auto m = load_manifest(dir.file("m.json"));
    CHECK(m.sample_rate == 48000);
    CHECK(m.condition_names.size() == 1);
    CHECK(m.entries.size() == 1);

    {
        std::ofstream out(dir.file("bad_rate.json"));
        out << manifest_json(44100);
    }
    CHECK_THROWS_AS(load_manifest(dir.file("bad_rate.json")), SampleRateMismatch);

    // entry with a missing condition value
    {
        std::ofstream out(dir.file("bad_cond.json"));
        out << "{\"sample_rate\": 48000, \"condition_names\": [\"a\", \"b\"],"
               "\"condition_ranges\": [[0,1],[0,1]],"
               "\"entries\": [{\"input\": \"in0.wav\", \"target\": \"tg0.wav\","
               "\"condition\": [0.5], \"split\": \"train\"}]}";
    }
    CHECK_THROWS_AS(load_manifest(dir.file("bad_cond.json")), SchemaError);

    // length mismatch between input and target
    AudioBuffer longer(std::vector<double>(5000, 0.1), 48000);
    write_wav(dir.file("tg_long.wav"), longer, WavFormat::float32);
    {
        std::ofstream out(dir.file("bad_len.json"));
        out << "{\"sample_rate\": 48000, \"condition_names\": [\"gain\"],"
               "\"condition_ranges\": [[0,1]],"
               "\"entries\": [{\"input\": \"in0.wav\", \"target\": \"tg_long.wav\","
               "\"condition\": [0.5], \"split\": \"train\"}]}";
    }
    CHECK_THROWS_AS(load_manifest(dir.file("bad_len.json")), LengthMismatch);
}

TEST_CASE("normalize_condition endpoints, midpoint, fixed knobs, out of range") {
    DatasetManifest m;
    m.condition_names = {"gain", "tone"};
    m.condition_ranges = {{0.0, 10.0}, {3.0, 3.0}};
    auto c = normalize_condition(m, {0.0, 3.0});
    CHECK(c.values[0] == -1.0);
    CHECK(c.values[1] == 0.0);
    CHECK(normalize_condition(m, {10.0, 3.0}).values[0] == 1.0);
    CHECK(normalize_condition(m, {5.0, 3.0}).values[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(normalize_condition(m, {10.1, 3.0}), OutOfRange);
    CHECK_THROWS_AS(normalize_condition(m, {5.0}), ConditionDimMismatch);
    // monotone per coordinate
    double prev = -2.0;
    for (double raw : {0.0, 1.0, 2.5, 6.0, 9.0, 10.0}) {
        const double v = normalize_condition(m, {raw, 3.0}).values[0];
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("segment_dataset tiling, padding, skipping, and empty splits") {
    TempDir dir;
    AudioBuffer in(std::vector<double>(10), 48000);
    for (int i = 0; i < 10; ++i) in.samples[static_cast<std::size_t>(i)] = i + 1.0;
    write_wav(dir.file("in0.wav"), in, WavFormat::float32);
    write_wav(dir.file("tg0.wav"), in, WavFormat::float32);
    {
        std::ofstream out(dir.file("m.json"));
        out << manifest_json(48000);
    }
    const auto m = load_manifest(dir.file("m.json"));

    auto r = segment_dataset(m, Split::train, 5, 0, 5);
    CHECK(r.segments.size() == 2);
    CHECK(r.skipped_entries == 0);
    CHECK(r.segments[0].target.samples == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(r.segments[1].target.samples == std::vector<double>{6, 7, 8, 9, 10});
    CHECK(r.segments[0].input.samples == r.segments[0].target.samples);

    auto rc = segment_dataset(m, Split::train, 5, 3, 5);
    REQUIRE(rc.segments[0].input.size() == 8);
    CHECK(rc.segments[0].input.samples[0] == 0.0);
    CHECK(rc.segments[0].input.samples[1] == 0.0);
    CHECK(rc.segments[0].input.samples[2] == 0.0);
    CHECK(rc.segments[0].input.samples[3] == 1.0);
    CHECK(rc.segments[1].input.samples[0] == 3.0);  // context from earlier samples

    auto rs = segment_dataset(m, Split::train, 11, 0, 11);
    CHECK(rs.segments.empty());
    CHECK(rs.skipped_entries == 1);

    CHECK_THROWS_AS(segment_dataset(m, Split::test, 5, 0, 5), EmptySplit);
}

TEST_CASE("segment targets tile each entry exactly once at hop == segment_len") {
    TempDir dir;
    nn::Rng rng(55);
    AudioBuffer in(oracles::random_vector(rng, 1000), 48000);
    write_wav(dir.file("in0.wav"), in, WavFormat::float32);
    write_wav(dir.file("tg0.wav"), in, WavFormat::float32);
    {
        std::ofstream out(dir.file("m.json"));
        out << manifest_json(48000);
    }
    const auto m = load_manifest(dir.file("m.json"));
    const auto r = segment_dataset(m, Split::train, 64, 16, 64);
    const auto wav = read_wav(dir.file("tg0.wav"));
    std::size_t covered = 0;
    for (std::size_t s = 0; s < r.segments.size(); ++s) {
        const auto& seg = r.segments[s];
        for (std::size_t i = 0; i < 64; ++i)
            CHECK(seg.target.samples[i] == wav.samples[s * 64 + i]);
        covered += seg.target.size();
    }
    CHECK(covered == (1000 / 64) * 64);
}
