#include "vastree/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <csetjmp>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "vastree/tree_io.hpp"

namespace vastree::io {

static_assert(std::endian::native == std::endian::little, "f32 codec assumes a little-endian host");

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(std::string_view bytes, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + off, 4);
  return v;
}

void put_plane(std::string& out, const ImageGrid& img) {
  for (double v : img.data()) {
    const float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    out.append(b, 4);
  }
}

ImageGrid get_plane(std::string_view bytes, std::size_t off, int h, int w, Channel tag) {
  std::vector<double> data(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < data.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + off + 4 * i, 4);
    data[i] = f;
  }
  return ImageGrid(h, w, std::move(data), tag);
}

}  // namespace

std::string encode_f32(const ImageGrid& img) {
  std::string out;
  out.reserve(8 + 4 * img.size());
  put_u32(out, static_cast<std::uint32_t>(img.height()));
  put_u32(out, static_cast<std::uint32_t>(img.width()));
  put_plane(out, img);
  return out;
}

std::string encode_f32_stack(const std::vector<ImageGrid>& channels) {
  if (channels.empty()) throw ShapeError("empty channel stack");
  const int h = channels.front().height();
  const int w = channels.front().width();
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, static_cast<std::uint32_t>(channels.size()));
  for (const auto& c : channels) {
    if (c.height() != h || c.width() != w) throw ShapeError("channel shapes differ");
    put_plane(out, c);
  }
  return out;
}

ImageGrid decode_f32(std::string_view bytes) {
  if (bytes.size() < 8) throw ParseError("f32: truncated header");
  const std::uint32_t h = get_u32(bytes, 0);
  const std::uint32_t w = get_u32(bytes, 4);
  if (bytes.size() != 8 + 4ULL * h * w) throw ParseError("f32: payload size does not match H*W");
  return get_plane(bytes, 8, static_cast<int>(h), static_cast<int>(w), Channel::Intensity);
}

std::vector<ImageGrid> decode_f32_stack(std::string_view bytes) {
  if (bytes.size() < 12) throw ParseError("f32 stack: truncated header");
  const std::uint32_t h = get_u32(bytes, 0);
  const std::uint32_t w = get_u32(bytes, 4);
  const std::uint32_t c = get_u32(bytes, 8);
  if (bytes.size() != 12 + 4ULL * h * w * c)
    throw ParseError("f32 stack: payload size does not match H*W*C");
  static constexpr Channel order[] = {Channel::Intensity, Channel::Prompt,  Channel::PosX,
                                      Channel::PosY,      Channel::PosXSin, Channel::PosYSin};
  std::vector<ImageGrid> out;
  for (std::uint32_t k = 0; k < c; ++k)
    out.push_back(get_plane(bytes, 12 + 4ULL * h * w * k, static_cast<int>(h), static_cast<int>(w),
                            k < 6 ? order[k] : Channel::Intensity));
  return out;
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void png_noop_flush(png_structp) {}

void png_quiet(png_structp, png_const_charp) {}

struct ReadCursor {
  std::string_view bytes;
  std::size_t pos = 0;
};

void png_consume(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes.size()) png_error(png, "truncated stream");
  std::memcpy(data, cur->bytes.data() + cur->pos, len);
  cur->pos += len;
}

}  // namespace

std::string encode_png16(const ImageGrid& img) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_quiet);
  if (!png) throw Error("png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  std::vector<png_byte> rows(static_cast<std::size_t>(img.height()) * img.width() * 2);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      const double scaled = std::clamp(img(r, c) * 65535.0 / 1.5, 0.0, 65535.0);
      const auto v = static_cast<std::uint16_t>(std::lround(scaled));
      const std::size_t i = (static_cast<std::size_t>(r) * img.width() + c) * 2;
      rows[i] = static_cast<png_byte>(v >> 8);
      rows[i + 1] = static_cast<png_byte>(v & 0xFF);
    }
  // libpng reports errors by longjmp; no C++ objects are created past this point.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encode failed");
  }
  {
    png_set_write_fn(png, &out, png_append, png_noop_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int r = 0; r < img.height(); ++r)
      png_write_row(png, rows.data() + static_cast<std::size_t>(r) * img.width() * 2);
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageGrid decode_png16(std::string_view bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_quiet);
  if (!png) throw Error("png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};
  std::vector<png_byte> row;
  std::vector<double> pixels;
  int w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("png: decode failed");
  }
  {
    png_set_read_fn(png, &cursor, png_consume);
    png_read_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGBA || color == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth <= 8) png_set_expand_16(png);
    png_read_update_info(png, info);
    row.resize(png_get_rowbytes(png, info));
    pixels.resize(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
      png_read_row(png, row.data(), nullptr);
      for (int c = 0; c < w; ++c) {
        const unsigned v = (static_cast<unsigned>(row[2 * c]) << 8) | row[2 * c + 1];
        pixels[static_cast<std::size_t>(r) * w + c] = v * 1.5 / 65535.0;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return ImageGrid(h, w, std::move(pixels), Channel::Intensity);
}

void save_image(const std::filesystem::path& path, const ImageGrid& img) {
  if (path.extension() == ".f32") {
    write_file_atomic(path, encode_f32(img));
  } else if (path.extension() == ".png") {
    write_file_atomic(path, encode_png16(img));
  } else {
    throw ParameterError("unsupported image extension '" + path.extension().string() + "'");
  }
}

ImageGrid load_image(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  if (path.extension() == ".f32") return decode_f32(bytes);
  if (path.extension() == ".png") return decode_png16(bytes);
  throw ParameterError("unsupported image extension '" + path.extension().string() + "'");
}

}  // namespace vastree::io
