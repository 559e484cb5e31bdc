#include "mdsyn/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace mdsyn {

ImageF to_gray(const ImageU8& image) {
  ImageF out(image.width(), image.height(), 1);
  const int c = image.channels();
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      float v;
      if (c >= 3) {
        v = 0.299f * image(x, y, 0) + 0.587f * image(x, y, 1) + 0.114f * image(x, y, 2);
      } else {
        v = image(x, y, 0);
      }
      out(x, y) = v / 255.0f;
    }
  }
  return out;
}

ImageF to_float(const ImageU8& image) {
  ImageF out(image.width(), image.height(), image.channels());
  for (std::size_t i = 0; i < image.size(); ++i) out.data()[i] = image.data()[i] / 255.0f;
  return out;
}

ImageU8 to_u8(const ImageF& image) {
  ImageU8 out(image.width(), image.height(), image.channels());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = std::nearbyint(image.data()[i] * 255.0f);
    out.data()[i] = static_cast<std::uint8_t>(v < 0.f ? 0.f : (v > 255.f ? 255.f : v));
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // big-endian samples for 16-bit
};

RawPng read_raw(const std::filesystem::path& path, bool want16) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::IoError, "not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  RawPng raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "corrupt PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (!want16 && depth == 16) png_set_strip_16(png);
  if (want16 && depth < 16) png_set_expand_16(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  std::vector<png_bytep> rows(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = raw.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_raw(const std::filesystem::path& path, int width, int height, int channels,
               int bit_depth, const std::uint8_t* bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
  int color = PNG_COLOR_TYPE_GRAY;
  if (channels == 2) color = PNG_COLOR_TYPE_GRAY_ALPHA;
  if (channels == 3) color = PNG_COLOR_TYPE_RGB;
  if (channels == 4) color = PNG_COLOR_TYPE_RGB_ALPHA;
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
  RawPng raw = read_raw(path, false);
  const int out_channels = (raw.channels == 2) ? 1 : (raw.channels == 4 ? 3 : raw.channels);
  ImageU8 out(raw.width, raw.height, out_channels);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::uint8_t* src = raw.bytes.data() + (static_cast<std::size_t>(y) * raw.width + x) * raw.channels;
      for (int c = 0; c < out_channels; ++c) out(x, y, c) = src[c];
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const ImageU8& image) {
  if (image.channels() > 4) throw Error(ErrorCode::InvalidArgument, "PNG supports at most 4 channels");
  write_raw(path, image.width(), image.height(), image.channels(), 8, image.data().data());
}

ImageU16 read_png16(const std::filesystem::path& path) {
  RawPng raw = read_raw(path, true);
  ImageU16 out(raw.width, raw.height, 1);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::uint8_t* src =
          raw.bytes.data() + ((static_cast<std::size_t>(y) * raw.width + x) * raw.channels) * 2;
      out(x, y) = static_cast<std::uint16_t>((src[0] << 8) | src[1]);
    }
  }
  return out;
}

void write_png16(const std::filesystem::path& path, const ImageU16& image) {
  if (image.channels() != 1) throw Error(ErrorCode::InvalidArgument, "16-bit PNG output is grayscale only");
  std::vector<std::uint8_t> bytes(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(image.data()[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(image.data()[i] & 0xff);
  }
  write_raw(path, image.width(), image.height(), 1, 16, bytes.data());
}

}  // namespace mdsyn
