#include <cstring>
#include <fstream>
#include <iterator>

#include "neurasr/error.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::io {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>((v >> 8) & 0xFF);
}

}  // namespace

std::vector<std::int16_t> read_wav(const std::filesystem::path& path, int expected_rate_hz) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw SchemaError(where + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw SchemaError(where + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw SchemaError(where + ": short fmt chunk");
      const std::uint16_t format = read_u16(bytes.data() + body);
      const std::uint16_t channels = read_u16(bytes.data() + body + 2);
      const std::uint32_t rate = read_u32(bytes.data() + body + 4);
      const std::uint16_t bits = read_u16(bytes.data() + body + 14);
      if (format != 1 || bits != 16) throw SchemaError(where + ": expected PCM16");
      if (channels != 1) throw SchemaError(where + ": expected mono audio");
      if (static_cast<int>(rate) != expected_rate_hz) {
        throw SchemaError(where + ": sample rate " + std::to_string(rate) + ", expected " +
                          std::to_string(expected_rate_hz));
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw SchemaError(where + ": data chunk before fmt chunk");
      std::vector<std::int16_t> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
      }
      return samples;
    }
    pos = body + size + (size & 1U);
  }
  throw SchemaError(where + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples,
               int rate_hz) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(rate_hz));
  put_u32(out, static_cast<std::uint32_t>(rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (std::int16_t s : samples) put_u16(out, static_cast<std::uint16_t>(s));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace neurasr::io
