#include "debris/common/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"

namespace debris {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  int color_type = 0;
  std::vector<std::uint8_t> samples;
};

void on_png_error(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// expand_to_rgb selects between colour decoding and raw index decoding.
Decoded decode(const fs::path& path, bool expand_to_rgb) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() ||
      png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw DecodeError(path.string() + " is not a PNG file");
  }

  std::string error_text;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text, on_png_error, on_png_warning);
  if (!png) throw DecodeError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  Decoded out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("cannot decode " + path.string() + ": " + error_text);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, static_cast<int>(sig.size()));
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  out.color_type = color_type;

  if (expand_to_rgb) {
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    // tRNS chunks would otherwise be expanded into an alpha channel.
  } else {
    if (!(color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_PALETTE) || bit_depth > 8) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw DecodeError(path.string() + " is not a single-channel 8-bit image");
    }
    if (bit_depth < 8) png_set_packing(png);
  }
  png_read_update_info(png, info);

  out.height = static_cast<int>(png_get_image_height(png, info));
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.samples.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = out.samples.data() + rowbytes * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  sink->insert(sink->end(), data, data + length);
}

void flush_noop(png_structp) {}

void encode(const fs::path& path, int height, int width, int color_type, const std::uint8_t* samples,
            int channels, const std::vector<PaletteEntry>* palette) {
  if (height <= 0 || width <= 0) throw ShapeError("cannot write an empty image to " + path.string());
  std::vector<std::uint8_t> buffer;
  std::string error_text;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_text, on_png_error, on_png_warning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_const_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode " + path.string() + ": " + error_text);
  }
  png_set_write_fn(png, &buffer, append_bytes, flush_noop);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (palette) {
    std::vector<png_color> colors;
    std::vector<png_byte> alpha;
    for (const auto& e : *palette) {
      colors.push_back({e.r, e.g, e.b});
      alpha.push_back(e.a);
    }
    png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
    png_set_tRNS(png, info, alpha.data(), static_cast<int>(alpha.size()), nullptr);
  }
  // Fixed compression settings keep the encoded bytes reproducible.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int r = 0; r < height; ++r) rows[r] = samples + stride * r;
  png_write_rows(png, const_cast<png_bytepp>(rows.data()), height);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_file_atomic(path, buffer);
}

}  // namespace

RgbImage read_png_rgb(const fs::path& path) {
  Decoded d = decode(path, true);
  if (d.channels != 3) throw DecodeError(path.string() + ": unexpected channel count after expansion");
  return RgbImage(d.height, d.width, std::move(d.samples));
}

Grid<std::uint8_t> read_png_channel(const fs::path& path) {
  Decoded d = decode(path, false);
  if (d.channels != 1) throw DecodeError(path.string() + " is not single-channel");
  return Grid<std::uint8_t>(d.height, d.width, std::move(d.samples));
}

void write_png_rgb(const fs::path& path, const RgbImage& image) {
  encode(path, image.height(), image.width(), PNG_COLOR_TYPE_RGB, image.bytes().data(), 3, nullptr);
}

void write_png_gray(const fs::path& path, const Grid<std::uint8_t>& values) {
  encode(path, values.rows(), values.cols(), PNG_COLOR_TYPE_GRAY, values.values().data(), 1, nullptr);
}

void write_png_indexed(const fs::path& path, const Grid<std::uint8_t>& indices,
                       const std::vector<PaletteEntry>& palette) {
  if (palette.empty() || palette.size() > 256) throw ShapeError("palette must hold 1..256 entries");
  for (auto v : indices.values())
    if (v >= palette.size()) throw ShapeError("index " + std::to_string(v) + " outside palette");
  encode(path, indices.rows(), indices.cols(), PNG_COLOR_TYPE_PALETTE, indices.values().data(), 1, &palette);
}

}  // namespace debris
