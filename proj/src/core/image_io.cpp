#include "ami/core/image_io.hpp"

#include <png.h>

#include <zlib.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"

namespace ami {

ImageFormat sniff_image_format(std::span<const std::uint8_t> bytes) noexcept {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return ImageFormat::png;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return ImageFormat::jpeg;
  return ImageFormat::unknown;
}

namespace {

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw InputError(std::string("PNG decode failed: ") + image.message);
  image.format = PNG_FORMAT_RGBA;
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.bytes().data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw InputError("PNG decode failed: " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  // Declared before setjmp so longjmp does not skip a destructor.
  Raster out;
  std::vector<std::uint8_t> scanline;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw InputError(std::string("JPEG decode failed: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = Raster(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  scanline.resize(static_cast<std::size_t>(cinfo.output_width) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    const int y = static_cast<int>(cinfo.output_scanline);
    JSAMPROW row = scanline.data();
    jpeg_read_scanlines(&cinfo, &row, 1);
    for (int x = 0; x < out.width(); ++x) {
      const std::uint8_t* p = scanline.data() + static_cast<std::size_t>(x) * 3;
      out.set(x, y, {p[0], p[1], p[2], 255});
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
  switch (sniff_image_format(bytes)) {
    case ImageFormat::png: return decode_png(bytes);
    case ImageFormat::jpeg: return decode_jpeg(bytes);
    case ImageFormat::unknown: break;
  }
  throw InputError("unrecognized image format");
}

Raster read_image(const std::filesystem::path& path) {
  const auto bytes = fs::read_bytes(path);
  try {
    return decode_image(bytes);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

bool fully_opaque(std::span<const std::uint8_t> rgba) {
  for (std::size_t i = 3; i < rgba.size(); i += 4)
    if (rgba[i] != 255) return false;
  return true;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp message) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = message;
  png_longjmp(png, 1);
}

void write_png_body(png_structp png, png_infop info, const Raster& image) {
  const auto px = image.bytes();
  const bool opaque = fully_opaque(px);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               opaque ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_set_compression_level(png, 1);
  png_set_compression_strategy(png, Z_RLE);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
  for (int y = 0; y < image.height(); ++y) {
    const std::uint8_t* src = px.data() + static_cast<std::size_t>(y) * image.width() * 4;
    if (opaque) {
      for (int x = 0; x < image.width(); ++x) std::memcpy(row.data() + x * 3, src + x * 4, 3);
      png_write_row(png, row.data());
    } else {
      png_write_row(png, const_cast<std::uint8_t*>(src));
    }
  }
  png_write_end(png, nullptr);
}

}  // namespace

// Opaque images are written as RGB. SUB filtering with run-length deflate is
// several times faster than the library defaults on noisy camera frames and
// costs little in size.
std::vector<std::uint8_t> encode_png(const Raster& image) {
  std::vector<std::uint8_t> out;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
  if (!png) throw IoError("PNG encode failed: out of memory");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed: " + message);
  }
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  write_png_body(png, info, image);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const Raster& image, int quality) {
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width());
  cinfo.image_height = static_cast<JDIMENSION>(image.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<std::uint8_t> scanline(static_cast<std::size_t>(image.width()) * 3);
  while (cinfo.next_scanline < cinfo.image_height) {
    const int y = static_cast<int>(cinfo.next_scanline);
    for (int x = 0; x < image.width(); ++x) {
      const Rgba c = image.at(x, y);
      scanline[static_cast<std::size_t>(x) * 3] = c.r;
      scanline[static_cast<std::size_t>(x) * 3 + 1] = c.g;
      scanline[static_cast<std::size_t>(x) * 3 + 2] = c.b;
    }
    JSAMPROW row = scanline.data();
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  fs::atomic_write(path, encode_png(image), /*durable=*/false);
}

}  // namespace ami
