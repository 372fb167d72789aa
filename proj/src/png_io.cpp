#include "leanloc/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <string>

#include "leanloc/error.hpp"

namespace leanloc::png {

namespace {

void on_png_error(png_structp ptr, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(ptr));
  *message = msg;
  png_longjmp(ptr, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct WriteSink {
  std::vector<std::uint8_t>* out;
};

void sink_write(png_structp ptr, png_bytep data, png_size_t length) {
  auto* sink = static_cast<WriteSink*>(png_get_io_ptr(ptr));
  sink->out->insert(sink->out->end(), data, data + length);
}

void sink_flush(png_structp) {}

struct ReadSource {
  const std::vector<std::uint8_t>* in;
  std::size_t pos = 0;
};

void source_read(png_structp ptr, png_bytep data, png_size_t length) {
  auto* src = static_cast<ReadSource*>(png_get_io_ptr(ptr));
  if (src->pos + length > src->in->size()) png_error(ptr, "truncated PNG data");
  std::memcpy(data, src->in->data() + src->pos, length);
  src->pos += length;
}

// Rows are pre-packed big-endian as PNG requires.
std::vector<std::uint8_t> encode(int width, int height, int bit_depth, int color_type,
                                 const std::vector<std::uint8_t>& packed, std::size_t row_bytes) {
  std::vector<std::uint8_t> out;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  if (!png) fail(ErrorKind::Io, "png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::Io, "png: cannot create info struct");
  }
  WriteSink sink{&out};
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) rows[r] = const_cast<png_bytep>(packed.data() + r * row_bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "png encode: " + message);
  }
  png_set_write_fn(png, &sink, sink_write, sink_flush);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct Decoded {
  int width = 0, height = 0, bit_depth = 0;
  std::vector<std::uint8_t> packed;
};

Decoded decode(const std::vector<std::uint8_t>& bytes, int want_depth) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) fail(ErrorKind::Parse, "not a PNG file");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  if (!png) fail(ErrorKind::Io, "png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::Io, "png: cannot create info struct");
  }
  ReadSource src{&bytes};
  Decoded d;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Parse, "png decode: " + message);
  }
  png_set_read_fn(png, &src, source_read);
  png_read_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || d.bit_depth != want_depth || png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Parse, "expected a " + std::to_string(want_depth) + "-bit grayscale PNG");
  }
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  d.packed.resize(row_bytes * d.height);
  rows.resize(d.height);
  for (int r = 0; r < d.height; ++r) rows[r] = d.packed.data() + r * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

}  // namespace

std::vector<std::uint8_t> encode_gray8(const Image<std::uint8_t>& img) {
  return encode(img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, img.data, img.width);
}

std::vector<std::uint8_t> encode_gray16(const Image<std::uint16_t>& img) {
  std::vector<std::uint8_t> packed(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    packed[2 * i] = static_cast<std::uint8_t>(img.data[i] >> 8);
    packed[2 * i + 1] = static_cast<std::uint8_t>(img.data[i] & 0xff);
  }
  return encode(img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, packed, static_cast<std::size_t>(img.width) * 2);
}

std::vector<std::uint8_t> encode_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb) {
  return encode(width, height, 8, PNG_COLOR_TYPE_RGB, rgb, static_cast<std::size_t>(width) * 3);
}

Image<std::uint8_t> decode_gray8(const std::vector<std::uint8_t>& bytes) {
  Decoded d = decode(bytes, 8);
  Image<std::uint8_t> img(d.width, d.height);
  img.data = std::move(d.packed);
  return img;
}

Image<std::uint16_t> decode_gray16(const std::vector<std::uint8_t>& bytes) {
  const Decoded d = decode(bytes, 16);
  Image<std::uint16_t> img(d.width, d.height);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.data[i] = static_cast<std::uint16_t>((d.packed[2 * i] << 8) | d.packed[2 * i + 1]);
  return img;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace leanloc::png
