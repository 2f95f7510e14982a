#include "nfx/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "nfx/errors.hpp"

namespace nfx {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint32_t rd_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct WavLayout {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    std::size_t data_offset = 0;
    std::size_t data_size = 0;
};

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("failed reading " + path);
    return bytes;
}

WavLayout parse_layout(const std::vector<unsigned char>& b, const std::string& path) {
    if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
        std::memcmp(b.data() + 8, "WAVE", 4) != 0)
        throw MalformedWav(path + ": not a RIFF/WAVE file");

    WavLayout lay;
    bool have_fmt = false, have_data = false;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const char* id = reinterpret_cast<const char*>(b.data() + pos);
        const std::uint32_t chunk_size = rd_u32(b.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_size > b.size())
            throw MalformedWav(path + ": truncated chunk '" + std::string(id, 4) + "'");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw MalformedWav(path + ": fmt chunk too small");
            lay.format = rd_u16(b.data() + body);
            lay.channels = rd_u16(b.data() + body + 2);
            lay.sample_rate = rd_u32(b.data() + body + 4);
            lay.bits = rd_u16(b.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            lay.data_offset = body;
            lay.data_size = chunk_size;
            have_data = true;
        }
        pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }
    if (!have_fmt) throw MalformedWav(path + ": missing fmt chunk");
    if (!have_data) throw MalformedWav(path + ": missing data chunk");

    if (lay.format != kFormatPcm && lay.format != kFormatFloat)
        throw UnsupportedFormat(path + ": format code " + std::to_string(lay.format));
    if (lay.format == kFormatPcm && lay.bits != 16 && lay.bits != 24)
        throw UnsupportedFormat(path + ": PCM bit depth " + std::to_string(lay.bits));
    if (lay.format == kFormatFloat && lay.bits != 32)
        throw UnsupportedFormat(path + ": float bit depth " + std::to_string(lay.bits));
    if (lay.channels != 1 && lay.channels != 2)
        throw UnsupportedFormat(path + ": " + std::to_string(lay.channels) + " channels");
    if (lay.sample_rate == 0) throw MalformedWav(path + ": zero sample rate");
    return lay;
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
    const std::vector<unsigned char> bytes = read_file(path);
    const WavLayout lay = parse_layout(bytes, path);

    const std::size_t bytes_per_sample = lay.bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * lay.channels;
    if (frame_bytes == 0 || lay.data_size % frame_bytes != 0)
        throw MalformedWav(path + ": data size not a whole number of frames");
    const std::size_t frames = lay.data_size / frame_bytes;

    AudioBuffer buf(std::vector<double>(frames), static_cast<int>(lay.sample_rate));
    const unsigned char* p = bytes.data() + lay.data_offset;
    for (std::size_t f = 0; f < frames; ++f) {
        double mixed = 0.0;
        for (int ch = 0; ch < lay.channels; ++ch) {
            const unsigned char* s = p + f * frame_bytes + ch * bytes_per_sample;
            double v = 0.0;
            if (lay.format == kFormatFloat) {
                float fv;
                std::memcpy(&fv, s, 4);
                v = static_cast<double>(fv);
            } else if (lay.bits == 16) {
                const auto raw = static_cast<std::int16_t>(s[0] | (s[1] << 8));
                v = raw / 32768.0;
            } else {  // 24-bit
                std::int32_t raw = s[0] | (s[1] << 8) | (s[2] << 16);
                if (raw & 0x800000) raw |= 0xFF000000;
                v = raw / 8388608.0;
            }
            mixed += v;
        }
        buf.samples[f] = mixed / lay.channels;
    }
    return buf;
}

std::pair<int, std::size_t> wav_info(const std::string& path) {
    const std::vector<unsigned char> bytes = read_file(path);
    const WavLayout lay = parse_layout(bytes, path);
    const std::size_t frame_bytes = (lay.bits / 8) * lay.channels;
    return {static_cast<int>(lay.sample_rate), lay.data_size / frame_bytes};
}

void write_wav(const std::string& path, const AudioBuffer& buf, WavFormat format) {
    buf.validate();
    const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
    const std::uint16_t code = format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat;
    const std::uint32_t data_size = static_cast<std::uint32_t>(buf.size() * (bits / 8));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");

    auto w_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>((v >> 16) & 0xFF),
                              static_cast<unsigned char>((v >> 24) & 0xFF)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    auto w_u16 = [&](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF)};
        out.write(reinterpret_cast<char*>(b), 2);
    };

    out.write("RIFF", 4);
    w_u32(36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    w_u32(16);
    w_u16(code);
    w_u16(1);  // mono
    w_u32(static_cast<std::uint32_t>(buf.sample_rate));
    w_u32(static_cast<std::uint32_t>(buf.sample_rate) * (bits / 8));
    w_u16(bits / 8);
    w_u16(bits);
    out.write("data", 4);
    w_u32(data_size);

    if (format == WavFormat::pcm16) {
        for (double v : buf.samples) {
            double scaled = std::round(v * 32768.0);  // rounds half away from zero
            if (scaled > 32767.0) scaled = 32767.0;
            if (scaled < -32768.0) scaled = -32768.0;
            w_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
        }
    } else {
        for (double v : buf.samples) {
            const float fv = static_cast<float>(v);
            std::uint32_t raw;
            std::memcpy(&raw, &fv, 4);
            w_u32(raw);
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace nfx
