#include "planefilter/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include <png.h>

#include "planefilter/errors.hpp"

namespace planefilter {

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("image data size mismatch");
  }
}

double bilinear(const GrayImage& img, double x, double y, bool* inside) {
  const double xmax = img.width() - 1.0;
  const double ymax = img.height() - 1.0;
  const bool in = x >= 0.0 && y >= 0.0 && x <= xmax && y <= ymax;
  if (inside) *inside = in;
  if (!in) {
    x = std::isfinite(x) ? std::clamp(x, 0.0, xmax) : 0.0;
    y = std::isfinite(y) ? std::clamp(y, 0.0, ymax) : 0.0;
  }
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::min(x0, std::max(img.width() - 2, 0));
  y0 = std::min(y0, std::max(img.height() - 2, 0));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  // Exact on the lattice: zero weights never touch a neighbor.
  const double top = fx == 0.0 ? img.at(x0, y0)
                               : (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  if (fy == 0.0) return top;
  const double bottom = fx == 0.0 ? img.at(x0, y1)
                                  : (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  return bytes;
}

// --- PNG ---------------------------------------------------------------

struct PngReadState {
  const std::string* bytes;
  std::size_t pos;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->bytes->data() + st->pos, n);
  st->pos += n;
}

[[noreturn]] void png_error_cb(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

GrayImage decode_png(const std::string& bytes, const std::string& name) {
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what,
                                           png_error_cb, png_warning_cb);
  if (!png) throw ImageDecodeError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageDecodeError("libpng init failed");
  }
  PngReadState st{&bytes, 0};
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageDecodeError(name + ": " + what);
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buf.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  const double scale = out_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      double c[4] = {0.0, 0.0, 0.0, 0.0};
      for (int k = 0; k < channels; ++k) {
        const std::size_t i = static_cast<std::size_t>(x) * channels + k;
        if (out_depth == 16) {
          const unsigned v = (rows[y][2 * i] << 8u) | rows[y][2 * i + 1];
          c[k] = v / scale;
        } else {
          c[k] = rows[y][i] / scale;
        }
      }
      // Alpha is ignored.
      img.at(static_cast<int>(x), static_cast<int>(y)) =
          channels >= 3 ? bt601_luma(c[0], c[1], c[2]) : c[0];
    }
  }
  return img;
}

// --- PGM ---------------------------------------------------------------

GrayImage decode_pgm(const std::string& bytes, const std::string& name) {
  const bool binary = bytes[1] == '5';
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ImageDecodeError(name + ": malformed PGM header");
    return std::stol(bytes.substr(start, pos - start));
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw ImageDecodeError(name + ": invalid PGM header values");
  }
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto& d = img.data();
  if (binary) {
    ++pos;  // single whitespace after maxval
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + n * bps) throw ImageDecodeError(name + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bps);
      const unsigned v = bps == 2 ? (p[0] << 8u) | p[1] : p[0];
      if (v > static_cast<unsigned>(maxval)) throw ImageDecodeError(name + ": sample exceeds maxval");
      d[i] = static_cast<double>(v) / maxval;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const long v = next_token();
      if (v > maxval) throw ImageDecodeError(name + ": sample exceeds maxval");
      d[i] = static_cast<double>(v) / maxval;
    }
  }
  return img;
}

std::uint16_t quantize16(double v) {
  const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string name = path.string();
  static const unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return decode_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
    return decode_pgm(bytes, name);
  }
  throw ImageDecodeError(name + ": unsupported image format");
}

void save_png16(const std::filesystem::path& path, const GrayImage& img) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(
      std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + path.string());
  std::string what;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what,
                                            png_error_cb, png_warning_cb);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  const int w = img.width();
  const int h = img.height();
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + what);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t v = quantize16(img.at(x, y));
      row[2 * x] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
      row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_pgm16(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  for (double v : img.data()) {
    const std::uint16_t q = quantize16(v);
    const char b[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    out.write(b, 2);
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace planefilter
