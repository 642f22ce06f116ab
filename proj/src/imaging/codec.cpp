#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <jpeglib.h>
#include <png.h>

#include "ecg/imaging.hpp"

namespace ecg::imaging {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> data) {
  return data.size() >= 8 && std::memcmp(data.data(), kPngSignature, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> data) {
  return data.size() >= 3 && data[0] == 0xFF && data[1] == 0xD8 && data[2] == 0xFF;
}

// Alpha blend over white, rounded to nearest.
std::uint8_t over_white(std::uint8_t c, std::uint8_t a) {
  const unsigned v = static_cast<unsigned>(c) * a + 255u * (255u - a);
  return static_cast<std::uint8_t>((v + 127u) / 255u);
}

// ---- PNG ------------------------------------------------------------------

struct PngReadSource {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->offset + count > src->data.size()) {
    png_error(png, "unexpected end of PNG stream");
  }
  std::memcpy(out, src->data.data() + src->offset, count);
  src->offset += count;
}

void png_silent_warning(png_structp, png_const_charp) {}

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

// Returns false on libpng error; `rgba` holds 4 bytes per pixel on success.
bool decode_png_rgba(std::span<const std::uint8_t> data, std::vector<std::uint8_t>& rgba, png_uint_32& width,
                     png_uint_32& height, std::string& err) {
  PngReadGuard guard;
  guard.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!guard.png) {
    err = "png_create_read_struct failed";
    return false;
  }
  guard.info = png_create_info_struct(guard.png);
  if (!guard.info) {
    err = "png_create_info_struct failed";
    return false;
  }
  PngReadSource source{data, 0};
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(guard.png))) {
    err = "malformed or truncated PNG stream";
    return false;
  }
  png_set_read_fn(guard.png, &source, png_read_from_span);
  png_read_info(guard.png, guard.info);

  width = png_get_image_width(guard.png, guard.info);
  height = png_get_image_height(guard.png, guard.info);
  const int color_type = png_get_color_type(guard.png, guard.info);
  const int bit_depth = png_get_bit_depth(guard.png, guard.info);

  if (bit_depth == 16) png_set_scale_16(guard.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(guard.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(guard.png);
  if (png_get_valid(guard.png, guard.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(guard.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(guard.png);
  }
  png_set_filler(guard.png, 0xFF, PNG_FILLER_AFTER);
  png_set_interlace_handling(guard.png);
  png_read_update_info(guard.png, guard.info);

  if (width == 0 || height == 0) {
    err = "zero-sized PNG";
    return false;
  }
  const std::size_t stride = png_get_rowbytes(guard.png, guard.info);
  if (stride != static_cast<std::size_t>(width) * 4) {
    err = "unexpected PNG row layout";
    return false;
  }
  rgba.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = rgba.data() + y * stride;
  png_read_image(guard.png, rows.data());
  png_read_end(guard.png, nullptr);
  return true;
}

// IHDR width/height sit at fixed offsets right after the signature.
bool png_header_has_zero_dimension(std::span<const std::uint8_t> data) {
  if (data.size() < 24) return false;
  auto be32 = [&](std::size_t at) {
    return (static_cast<std::uint32_t>(data[at]) << 24) | (static_cast<std::uint32_t>(data[at + 1]) << 16) |
           (static_cast<std::uint32_t>(data[at + 2]) << 8) | static_cast<std::uint32_t>(data[at + 3]);
  };
  return be32(16) == 0 || be32(20) == 0;
}

RasterImage load_png(std::span<const std::uint8_t> data) {
  if (png_header_has_zero_dimension(data)) throw Error(ErrorCode::kDimensionError, "zero-sized PNG");
  std::vector<std::uint8_t> rgba;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  std::string err;
  if (!decode_png_rgba(data, rgba, width, height, err)) {
    if (err == "zero-sized PNG") throw Error(ErrorCode::kDimensionError, err);
    throw Error(ErrorCode::kDecodeError, err);
  }
  std::vector<Rgb> pixels(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const std::uint8_t* p = rgba.data() + i * 4;
    pixels[i] = {over_white(p[0], p[3]), over_white(p[1], p[3]), over_white(p[2], p[3])};
  }
  return RasterImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

struct PngWriteSink {
  std::vector<std::uint8_t> bytes;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t count) {
  auto* sink = static_cast<PngWriteSink*>(png_get_io_ptr(png));
  sink->bytes.insert(sink->bytes.end(), data, data + count);
}

void png_flush_noop(png_structp) {}

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteGuard() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

// `rows` must already be packed for the requested colour type and bit depth.
std::vector<std::uint8_t> write_png(int width, int height, int color_type, int bit_depth,
                                    const std::vector<std::uint8_t>& packed, std::size_t stride) {
  PngWriteGuard guard;
  guard.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!guard.png) throw Error(ErrorCode::kIoError, "png_create_write_struct failed");
  guard.info = png_create_info_struct(guard.png);
  if (!guard.info) throw Error(ErrorCode::kIoError, "png_create_info_struct failed");

  PngWriteSink sink;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(y) * stride);
  }
  if (setjmp(png_jmpbuf(guard.png))) {
    throw Error(ErrorCode::kIoError, "PNG encoding failed");
  }
  png_set_write_fn(guard.png, &sink, png_write_to_vector, png_flush_noop);
  png_set_compression_level(guard.png, 6);
  png_set_IHDR(guard.png, guard.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(guard.png, guard.info);
  png_write_image(guard.png, rows.data());
  png_write_end(guard.png, nullptr);
  return std::move(sink.bytes);
}

// ---- JPEG -----------------------------------------------------------------

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

struct JpegDecompressGuard {
  jpeg_decompress_struct cinfo{};
  bool created = false;
  ~JpegDecompressGuard() {
    if (created) jpeg_destroy_decompress(&cinfo);
  }
};

bool decode_jpeg_rgb(std::span<const std::uint8_t> data, std::vector<std::uint8_t>& rgb, unsigned& width,
                     unsigned& height, std::string& err) {
  JpegDecompressGuard guard;
  JpegErrorManager jerr{};
  guard.cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  jerr.base.emit_message = jpeg_silent;
  if (setjmp(jerr.jump)) {
    err = jerr.message;
    return false;
  }
  jpeg_create_decompress(&guard.cinfo);
  guard.created = true;
  jpeg_mem_src(&guard.cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&guard.cinfo, TRUE);
  if (guard.cinfo.jpeg_color_space == JCS_CMYK || guard.cinfo.jpeg_color_space == JCS_YCCK) {
    err = "CMYK JPEG is not supported";
    return false;
  }
  guard.cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&guard.cinfo);
  width = guard.cinfo.output_width;
  height = guard.cinfo.output_height;
  if (width == 0 || height == 0 || guard.cinfo.output_components != 3) {
    err = "unexpected JPEG geometry";
    return false;
  }
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (guard.cinfo.output_scanline < guard.cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(guard.cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&guard.cinfo, &row, 1);
  }
  jpeg_finish_decompress(&guard.cinfo);
  return true;
}

RasterImage load_jpeg(std::span<const std::uint8_t> data) {
  std::vector<std::uint8_t> rgb;
  unsigned width = 0;
  unsigned height = 0;
  std::string err;
  if (!decode_jpeg_rgb(data, rgb, width, height, err)) {
    throw Error(ErrorCode::kDecodeError, err.empty() ? "malformed JPEG stream" : err);
  }
  std::vector<Rgb> pixels(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = {rgb[i * 3], rgb[i * 3 + 1], rgb[i * 3 + 2]};
  }
  return RasterImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

struct JpegCompressGuard {
  jpeg_compress_struct cinfo{};
  bool created = false;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  ~JpegCompressGuard() {
    if (created) jpeg_destroy_compress(&cinfo);
    std::free(buffer);
  }
};

}  // namespace

RasterImage load_image(std::span<const std::uint8_t> data) {
  if (is_png(data)) return load_png(data);
  if (is_jpeg(data)) return load_jpeg(data);
  throw Error(ErrorCode::kDecodeError, "unrecognised image format (expected PNG or JPEG)");
}

RasterImage load_image_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return load_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  std::vector<std::uint8_t> packed(stride * static_cast<std::size_t>(img.height()));
  std::size_t i = 0;
  for (const Rgb& px : img.pixels()) {
    packed[i++] = px.r;
    packed[i++] = px.g;
    packed[i++] = px.b;
  }
  return write_png(img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8, packed, stride);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  const std::size_t stride = static_cast<std::size_t>(img.width());
  std::vector<std::uint8_t> packed(img.pixels().begin(), img.pixels().end());
  return write_png(img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 8, packed, stride);
}

std::vector<std::uint8_t> encode_png(const BinaryImage& mask) {
  const std::size_t stride = (static_cast<std::size_t>(mask.width()) + 7) / 8;
  std::vector<std::uint8_t> packed(stride * static_cast<std::size_t>(mask.height()), 0);
  for (int y = 0; y < mask.height(); ++y) {
    auto row = mask.row(y);
    std::uint8_t* out = packed.data() + static_cast<std::size_t>(y) * stride;
    for (int x = 0; x < mask.width(); ++x) {
      // 1 = white in a 1-bit grayscale PNG.
      if (!is_ink(row[static_cast<std::size_t>(x)])) out[x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    }
  }
  return write_png(mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, packed, stride);
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality) {
  if (quality < 1 || quality > 100) throw Error(ErrorCode::kInvalidParams, "JPEG quality must be in [1, 100]");
  std::vector<std::uint8_t> rgb(img.size() * 3);
  std::size_t i = 0;
  for (const Rgb& px : img.pixels()) {
    rgb[i++] = px.r;
    rgb[i++] = px.g;
    rgb[i++] = px.b;
  }

  JpegCompressGuard guard;
  JpegErrorManager jerr{};
  guard.cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  jerr.base.emit_message = jpeg_silent;
  if (setjmp(jerr.jump)) {
    throw Error(ErrorCode::kIoError, std::string("JPEG encoding failed: ") + jerr.message);
  }
  jpeg_create_compress(&guard.cinfo);
  guard.created = true;
  jpeg_mem_dest(&guard.cinfo, &guard.buffer, &guard.size);
  guard.cinfo.image_width = static_cast<JDIMENSION>(img.width());
  guard.cinfo.image_height = static_cast<JDIMENSION>(img.height());
  guard.cinfo.input_components = 3;
  guard.cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&guard.cinfo);
  jpeg_set_quality(&guard.cinfo, quality, TRUE);
  jpeg_start_compress(&guard.cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  while (guard.cinfo.next_scanline < guard.cinfo.image_height) {
    JSAMPROW row = rgb.data() + guard.cinfo.next_scanline * stride;
    jpeg_write_scanlines(&guard.cinfo, &row, 1);
  }
  jpeg_finish_compress(&guard.cinfo);
  return {guard.buffer, guard.buffer + guard.size};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ecg::imaging
