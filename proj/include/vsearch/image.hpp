#pragma once

// Image planes, decoding (binary PGM and 8-bit PNG), grayscale conversion and
// bilinear resampling.

#include <png.h>

#include <array>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "vsearch/core.hpp"

namespace vsearch {

using GrayImage = Grid<double>;

/// Three planes (R, G, B), each valued in [0, 255].
struct RgbImage {
  std::array<GrayImage, 3> channels;

  int rows() const { return channels[0].rows(); }
  int cols() const { return channels[0].cols(); }
};

/// Luma weights applied to (R, G, B).
inline constexpr std::array<double, 3> kLumaWeights{0.2125, 0.7154, 0.0721};

inline double luma(double r, double g, double b) {
  // Neutral pixels map back to themselves exactly.
  if (r == g && g == b) return r;
  return kLumaWeights[0] * r + kLumaWeights[1] * g + kLumaWeights[2] * b;
}

inline GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.rows(), img.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = luma(img.channels[0][i], img.channels[1][i], img.channels[2][i]);
  return out;
}

inline RgbImage gray_to_rgb(const GrayImage& g) { return RgbImage{{g, g, g}}; }

/// Decoded image: one plane for grayscale input, three for color input.
struct DecodedImage {
  std::vector<GrayImage> planes;

  bool is_color() const { return planes.size() == 3; }
  int rows() const { return planes.front().rows(); }
  int cols() const { return planes.front().cols(); }

  GrayImage gray() const {
    return is_color() ? to_gray(RgbImage{{planes[0], planes[1], planes[2]}}) : planes.front();
  }
  RgbImage rgb() const {
    return is_color() ? RgbImage{{planes[0], planes[1], planes[2]}} : gray_to_rgb(planes.front());
  }
};

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline DecodedImage decode_pgm(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) throw Error(name + ": malformed PGM header");
    return v;
  };
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width <= 0 || height <= 0) throw Error(name + ": invalid PGM dimensions");
  if (maxval <= 0 || maxval > 255) throw Error(name + ": unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (bytes.size() < pos + n) throw Error(name + ": truncated PGM payload");
  GrayImage img(static_cast<int>(height), static_cast<int>(width));
  for (std::size_t i = 0; i < n; ++i) img[i] = bytes[pos + i];
  return DecodedImage{{std::move(img)}};
}

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngSource {
  const std::vector<unsigned char>* bytes;
  std::size_t pos;
};

// libpng reports failures through longjmp; the message is parked here and
// turned into an exception once control is back in C++ frames.
struct PngErrorSlot {
  char message[256] = {0};
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->pos + len > src->bytes->size()) png_error(png, "truncated PNG stream");
  std::copy_n(src->bytes->data() + src->pos, len, out);
  src->pos += len;
}

inline void png_record_error(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<PngErrorSlot*>(png_get_error_ptr(png));
  std::snprintf(slot->message, sizeof slot->message, "%s", msg);
  png_longjmp(png, 1);
}
inline void png_silent_warning(png_structp, png_const_charp) {}

// Only trivially destructible locals live between setjmp and any longjmp.
inline bool png_read_header(png_structp png, png_infop info, int* bit_depth, int* color_type) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  *bit_depth = png_get_bit_depth(png, info);
  *color_type = png_get_color_type(png, info);
  if (*bit_depth == 8) {
    if (*color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (*color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
  }
  return true;
}

inline bool png_read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  return true;
}

inline DecodedImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  PngErrorSlot err;
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_record_error, png_silent_warning);
  if (!g.png) throw Error("libpng initialisation failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw Error("libpng initialisation failed");
  PngSource src{&bytes, 0};
  png_set_read_fn(g.png, &src, png_read_from_memory);

  int bit_depth = 0;
  int color_type = 0;
  if (!png_read_header(g.png, g.info, &bit_depth, &color_type))
    throw Error(name + ": " + err.message);
  if (bit_depth != 8) throw Error(name + ": unsupported bit depth " + std::to_string(bit_depth));

  const int width = static_cast<int>(png_get_image_width(g.png, g.info));
  const int height = static_cast<int>(png_get_image_height(g.png, g.info));
  const int channels = png_get_channels(g.png, g.info);
  const std::size_t stride = png_get_rowbytes(g.png, g.info);
  std::vector<unsigned char> raw(stride * height);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) rows[r] = raw.data() + r * stride;
  if (!png_read_rows(g.png, rows.data())) throw Error(name + ": " + err.message);

  DecodedImage out;
  out.planes.assign(channels == 1 ? 1 : 3, GrayImage(height, width));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (std::size_t ch = 0; ch < out.planes.size(); ++ch)
        out.planes[ch](r, c) = rows[r][c * channels + ch];
  return out;
}

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteGuard() {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline bool png_write_all(png_structp png, png_infop info, std::FILE* fp, int rows, int cols,
                          int channels, png_bytepp row_ptrs) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, cols, rows, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs);
  png_write_end(png, nullptr);
  return true;
}

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

inline DecodedImage load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  const std::string name = path.string();
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return detail::decode_pgm(bytes, name);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::decode_png(bytes, name);
  throw Error(name + ": unsupported image format (expected binary PGM or PNG)");
}

/// Grayscale plane in [0, 255]; color inputs go through the luma weights.
inline GrayImage load_image_gray(const std::filesystem::path& path) { return load_image(path).gray(); }

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  for (double v : img) out.put(static_cast<char>(detail::to_byte(v)));
  if (!out) throw Error("write failed: " + path.string());
}

/// Writes an 8-bit PNG: gray for one plane, RGB for three.
inline void save_png(const std::vector<GrayImage>& planes, const std::filesystem::path& path) {
  if (planes.size() != 1 && planes.size() != 3) throw Error("save_png expects 1 or 3 planes");
  const int rows = planes[0].rows();
  const int cols = planes[0].cols();
  const int ch = static_cast<int>(planes.size());
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols * ch);
  std::vector<png_bytep> row_ptrs(rows);
  for (int r = 0; r < rows; ++r) {
    row_ptrs[r] = raw.data() + static_cast<std::size_t>(r) * cols * ch;
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < ch; ++k) row_ptrs[r][c * ch + k] = detail::to_byte(planes[k](r, c));
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::PngErrorSlot err;
  detail::PngWriteGuard g;
  g.fp = std::fopen(path.string().c_str(), "wb");
  if (!g.fp) throw Error("cannot write " + path.string());
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_record_error,
                                  detail::png_silent_warning);
  if (!g.png) throw Error("libpng initialisation failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw Error("libpng initialisation failed");
  if (!detail::png_write_all(g.png, g.info, g.fp, rows, cols, ch, row_ptrs.data()))
    throw Error(path.string() + ": " + err.message);
}

/// Bilinear resampling with corner alignment: the corner samples of the
/// source land exactly on the corner samples of the result.
template <typename T>
Grid<T> resample_bilinear(const Grid<T>& src, int rows, int cols) {
  if (src.rows() == rows && src.cols() == cols) return src;
  Grid<T> out(rows, cols);
  auto coord = [](int i, int out_n, int in_n) {
    return out_n == 1 ? 0.0 : static_cast<double>(i) * (in_n - 1) / (out_n - 1);
  };
  for (int r = 0; r < rows; ++r) {
    const double sy = coord(r, rows, src.rows());
    const int y0 = std::min(static_cast<int>(sy), src.rows() - 1);
    const int y1 = std::min(y0 + 1, src.rows() - 1);
    const double fy = sy - y0;
    for (int c = 0; c < cols; ++c) {
      const double sx = coord(c, cols, src.cols());
      const int x0 = std::min(static_cast<int>(sx), src.cols() - 1);
      const int x1 = std::min(x0 + 1, src.cols() - 1);
      const double fx = sx - x0;
      const double top = src(y0, x0) * (1 - fx) + src(y0, x1) * fx;
      const double bottom = src(y1, x0) * (1 - fx) + src(y1, x1) * fx;
      out(r, c) = static_cast<T>(top * (1 - fy) + bottom * fy);
    }
  }
  return out;
}

}  // namespace vsearch
