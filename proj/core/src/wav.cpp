#include "arbiter/wav.hpp"

#include <cstring>
#include <fstream>

#include "arbiter/errors.hpp"

namespace arbiter::wav {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    s.append(b, 4);
}

void put_u16(std::string& s, std::uint16_t v) {
    char b[2];
    std::memcpy(b, &v, 2);
    s.append(b, 2);
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

std::uint16_t get_u16(const char* p) {
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
}

} // namespace

std::vector<double> WavData::channel(int c) const {
    if (c < 0 || c >= channels) throw AudioError("WavData::channel: index out of range");
    std::vector<double> out(frames());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = samples[i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
    }
    return out;
}

void write(const std::string& path, const WavData& data) {
    if (data.channels <= 0) throw AudioError("wav::write: channels must be positive");
    if (data.samples.size() % static_cast<std::size_t>(data.channels) != 0) {
        throw AudioError("wav::write: sample count not divisible by channel count");
    }
    const auto sr = static_cast<std::uint32_t>(data.sample_rate);
    const auto nch = static_cast<std::uint16_t>(data.channels);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(data.samples.size() * 4);
    const std::uint16_t block_align = static_cast<std::uint16_t>(nch * 4);

    std::string buf;
    buf.reserve(58 + data_bytes);
    buf += "RIFF";
    put_u32(buf, 4 + 26 + 12 + (8 + data_bytes)); // WAVE + fmt(18) + fact + data
    buf += "WAVE";
    buf += "fmt ";
    put_u32(buf, 18);
    put_u16(buf, 3); // IEEE float
    put_u16(buf, nch);
    put_u32(buf, sr);
    put_u32(buf, sr * block_align);
    put_u16(buf, block_align);
    put_u16(buf, 32);
    put_u16(buf, 0); // cbSize
    buf += "fact";
    put_u32(buf, 4);
    put_u32(buf, static_cast<std::uint32_t>(data.frames()));
    buf += "data";
    put_u32(buf, data_bytes);

    std::vector<float> f32(data.samples.size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(data.samples[i]);
    buf.append(reinterpret_cast<const char*>(f32.data()), data_bytes);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw AudioError("wav::write: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw AudioError("wav::write: write failed for " + path);
}

WavData read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AudioError("wav::read: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 44 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0) {
        throw AudioError("wav::read: not a RIFF/WAVE file: " + path);
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const char* data_ptr = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const std::string id = buf.substr(pos, 4);
        const std::uint32_t len = get_u32(buf.data() + pos + 4);
        pos += 8;
        if (pos + len > buf.size()) throw AudioError("wav::read: truncated chunk in " + path);
        if (id == "fmt ") {
            if (len < 16) throw AudioError("wav::read: short fmt chunk");
            format = get_u16(buf.data() + pos);
            channels = get_u16(buf.data() + pos + 2);
            sample_rate = get_u32(buf.data() + pos + 4);
            bits = get_u16(buf.data() + pos + 14);
        } else if (id == "data") {
            data_ptr = buf.data() + pos;
            data_len = len;
        }
        pos += len + (len & 1); // chunks are word-aligned
    }

    if (!data_ptr) throw AudioError("wav::read: missing data chunk in " + path);
    if (channels == 0) throw AudioError("wav::read: missing fmt chunk in " + path);

    WavData out;
    out.sample_rate = static_cast<double>(sample_rate);
    out.channels = channels;

    if (format == 3 && bits == 32) {
        const std::size_t n = data_len / 4;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, data_ptr + i * 4, 4);
            out.samples[i] = static_cast<double>(f);
        }
    } else if (format == 1 && bits == 16) {
        const std::size_t n = data_len / 2;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::int16_t s;
            std::memcpy(&s, data_ptr + i * 2, 2);
            out.samples[i] = static_cast<double>(s) / 32768.0;
        }
    } else {
        throw AudioError("wav::read: unsupported format (need PCM16 or float32): " + path);
    }
    return out;
}

} // namespace arbiter::wav
