#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace xsr {

/// Single-channel raster, row-major, double precision.
class Image {
 public:
  Image() = default;
  Image(int h, int w, double fill = 0.0);

  int h() const { return h_; }
  int w() const { return w_; }
  int c() const { return 1; }
  std::size_t size() const { return px_.size(); }
  bool empty() const { return px_.empty(); }

  double& at(int y, int x) { return px_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int y, int x) const { return px_[static_cast<std::size_t>(y) * w_ + x]; }
  double& operator[](std::size_t i) { return px_[i]; }
  double operator[](std::size_t i) const { return px_[i]; }

  std::span<double> pixels() { return px_; }
  std::span<const double> pixels() const { return px_; }
  double* data() { return px_.data(); }
  const double* data() const { return px_.data(); }

  bool same_shape(const Image& o) const { return h_ == o.h_ && w_ == o.w_; }
  friend bool operator==(const Image&, const Image&) = default;

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<double> px_;
};

void require_same_shape(const Image& a, const Image& b, const char* who);

Image clamp01(Image img);
Image crop(const Image& img, int y0, int x0, int h, int w);

/// Snaps every pixel to the 16-bit grid k/65535 so PGM storage is lossless.
Image quantize16(Image img);

// P5 PGM, 16-bit big-endian samples, value = round(pixel * 65535).
void write_pgm16(const Image& img, const std::filesystem::path& path);
Image read_pgm(const std::filesystem::path& path);

// 8-bit grayscale PNG, value = round(pixel * 255).
std::vector<unsigned char> encode_png8(const Image& img);
Image decode_png8(std::span<const unsigned char> bytes);
void write_png8(const Image& img, const std::filesystem::path& path);
Image read_png8(const std::filesystem::path& path);

/// Writes PNG when the extension is .png, otherwise 16-bit PGM.
void write_image(const Image& img, const std::filesystem::path& path);
Image read_image(const std::filesystem::path& path);

}  // namespace xsr
