#include "xsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "xsr/error.hpp"

namespace xsr {

Image::Image(int h, int w, double fill) : h_(h), w_(w) {
  require(h >= 0 && w >= 0, "Image: negative dimensions");
  px_.assign(static_cast<std::size_t>(h) * w, fill);
}

void require_same_shape(const Image& a, const Image& b, const char* who) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << who << ": shape mismatch " << a.h() << "x" << a.w() << " vs " << b.h() << "x" << b.w();
    fail_arg(msg.str());
  }
}

Image clamp01(Image img) {
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  require(y0 >= 0 && x0 >= 0 && y0 + h <= img.h() && x0 + w <= img.w(), "crop: window outside image");
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    std::copy_n(img.data() + static_cast<std::size_t>(y0 + y) * img.w() + x0, w,
                out.data() + static_cast<std::size_t>(y) * w);
  return out;
}

namespace {

inline std::uint16_t to_u16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

Image quantize16(Image img) {
  for (double& v : img.pixels()) v = to_u16(v) / 65535.0;
  return img;
}

void write_pgm16(const Image& img, const std::filesystem::path& path) {
  std::ostringstream head;
  head << "P5\n" << img.w() << " " << img.h() << "\n65535\n";
  std::string bytes = head.str();
  bytes.reserve(bytes.size() + 2 * img.size());
  for (double v : img.pixels()) {
    const std::uint16_t q = to_u16(v);
    bytes.push_back(static_cast<char>(q >> 8));
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  spill(path, {reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

Image read_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  if (next_token() != "P5") throw DataError(path.string() + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace after maxval
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw DataError(path.string() + ": bad PGM header");
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * bps;
  if (bytes.size() - std::min(pos, bytes.size()) != need) throw DataError(path.string() + ": PGM payload size mismatch");
  Image img(h, w);
  const unsigned char* p = bytes.data() + pos;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned v = bps == 2 ? (unsigned(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
    img[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_noop(png_structp) {}

struct PngReadCursor {
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes.data() + cur->pos, len);
  cur->pos += len;
}

void png_throw(png_structp, png_const_charp msg) { throw DataError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

std::vector<unsigned char> encode_png8(const Image& img) {
  require(img.h() > 0 && img.w() > 0, "encode_png8: empty image");
  std::vector<unsigned char> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.w()));
  try {
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, img.w(), img.h(), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < img.h(); ++y) {
      for (int x = 0; x < img.w(); ++x) row[x] = to_u8(img.at(y, x));
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png8(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw DataError("not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn);
  png_infop info = png_create_info_struct(png);
  PngReadCursor cur{bytes, 0};
  Image img;
  try {
    png_set_read_fn(png, &cur, png_read_from_span);
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8)
      throw DataError("only 8-bit grayscale PNG is supported");
    img = Image(h, w);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < w; ++x) img.at(y, x) = row[x] / 255.0;
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png8(const Image& img, const std::filesystem::path& path) { spill(path, encode_png8(img)); }

Image read_png8(const std::filesystem::path& path) { return decode_png8(slurp(path)); }

void write_image(const Image& img, const std::filesystem::path& path) {
  if (path.extension() == ".png")
    write_png8(img, path);
  else
    write_pgm16(img, path);
}

Image read_image(const std::filesystem::path& path) {
  return path.extension() == ".png" ? read_png8(path) : read_pgm(path);
}

}  // namespace xsr
