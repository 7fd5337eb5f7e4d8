#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace planefilter {

/// Row-major single-channel image with samples in [0, 1]. Pixel (x, y) has
/// its center at integer coordinates, origin at the top-left pixel.
class GrayImage {
 public:
  GrayImage() = default;
  /// Throws std::invalid_argument on a zero dimension.
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0;
  }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Bilinear sample. Coordinates outside the pixel-center hull are clamped
/// to it; `inside` (when given) reports whether clamping was needed.
double bilinear(const GrayImage& img, double x, double y,
                bool* inside = nullptr);

/// ITU-R BT.601 luma of an RGB triple in [0, 1].
inline double bt601_luma(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

/// Decodes PNG (8/16 bit, gray, gray+alpha, RGB, RGBA, palette) or binary and
/// ASCII PGM. Color is converted to BT.601 luma. Throws IoError when the file
/// cannot be read and ImageDecodeError on malformed content.
GrayImage load_image(const std::filesystem::path& path);

/// 16-bit grayscale PNG; samples are clamped to [0, 1] and quantized.
void save_png16(const std::filesystem::path& path, const GrayImage& img);
/// Binary 16-bit PGM (P5, maxval 65535).
void save_pgm16(const std::filesystem::path& path, const GrayImage& img);

}  // namespace planefilter
