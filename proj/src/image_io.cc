#include "tileguide/image_io.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "tileguide/error.h"

namespace tileguide {

namespace {

bool ends_with(const std::string& s, const char* suffix) {
  std::size_t n = std::strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

static_assert(std::endian::native == std::endian::little, ".f64 I/O assumes a little-endian host");

// Next header token of a PNM file, skipping comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  return tok;
}

buffer read_pnm(std::ifstream& in, const std::string& path) {
  std::string magic = pnm_token(in);
  int channels = magic == "P5" ? 1 : magic == "P6" ? 3 : 0;
  if (!channels) throw error(error_kind::io, "'" + path + "' is not a binary PGM/PPM file");
  std::int64_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoll(pnm_token(in));
    h = std::stoll(pnm_token(in));
    maxval = std::stoll(pnm_token(in));
  } catch (const std::logic_error&) {
    throw error(error_kind::io, "'" + path + "' has a malformed header");
  }
  if (w < 1 || h < 1 || maxval != 255) throw error(error_kind::io, "'" + path + "' must be an 8-bit image");
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * channels));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw error(error_kind::io, "'" + path + "' is truncated");
  buffer b(channels == 1 ? std::vector<std::int64_t>{w, h} : std::vector<std::int64_t>{w, h, 3});
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double v = raw[static_cast<std::size_t>((y * w + x) * channels + c)] / 255.0;
        if (channels == 1) b.at({x, y}) = v;
        else b.at({x, y, c}) = v;
      }
    }
  }
  return b;
}

}  // namespace

buffer read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error(error_kind::io, "cannot read '" + path + "'");
  if (ends_with(path, ".pgm") || ends_with(path, ".ppm")) return read_pnm(in, path);
  if (!ends_with(path, ".f64")) throw error(error_kind::io, "unsupported image format '" + path + "'");
  std::uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof rank);
  if (!in || rank < 1 || rank > 3) throw error(error_kind::io, "'" + path + "' has an invalid rank");
  std::vector<std::int64_t> ext(rank);
  for (std::int64_t& e : ext) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    e = v;
    if (!in || v == 0) throw error(error_kind::io, "'" + path + "' has an invalid extent");
  }
  buffer b(ext);
  in.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(b.data.size() * sizeof(double)));
  if (!in) throw error(error_kind::io, "'" + path + "' is truncated");
  return b;
}

void write_image(const std::string& path, const buffer& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(error_kind::io, "cannot write '" + path + "'");
  if (ends_with(path, ".f64")) {
    std::uint32_t rank = static_cast<std::uint32_t>(b.extent.size());
    out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
    for (std::int64_t e : b.extent) {
      std::uint32_t v = static_cast<std::uint32_t>(e);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    out.write(reinterpret_cast<const char*>(b.data.data()), static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    return;
  }
  const bool gray = ends_with(path, ".pgm");
  if (!gray && !ends_with(path, ".ppm")) throw error(error_kind::io, "unsupported image format '" + path + "'");
  if (b.extent.size() < 2 || (gray && b.extent.size() != 2) || (!gray && (b.extent.size() != 3 || b.extent[2] != 3))) {
    throw error(error_kind::io, std::string("buffer shape does not fit a ") + (gray ? "PGM" : "PPM") + " image");
  }
  const std::int64_t w = b.extent[0], h = b.extent[1];
  const int channels = gray ? 1 : 3;
  out << (gray ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * channels));
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double v = gray ? b.at({x, y}) : b.at({x, y, c});
        raw[static_cast<std::size_t>((y * w + x) * channels + c)] =
            static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace tileguide
