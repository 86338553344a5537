#include "advxfer/image_io.hpp"

#include <png.h>

#include <cstdio>
// jpeglib.h needs size_t and FILE declared first.
#include <jpeglib.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "advxfer/error.hpp"

namespace advxfer {
namespace {

bool has_png_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool has_jpeg_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* manager = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, manager->message);
  std::longjmp(manager->jump, 1);
}

Frame decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct info{};
  JpegErrorManager errors{};
  info.err = jpeg_std_error(&errors.base);
  errors.base.error_exit = jpeg_error_exit;
  Frame frame;
  if (setjmp(errors.jump)) {
    jpeg_destroy_decompress(&info);
    fail(ErrorKind::kIo, std::string("jpeg decode failed: ") + errors.message);
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  frame.width = static_cast<int>(info.output_width);
  frame.height = static_cast<int>(info.output_height);
  frame.pixels.resize(static_cast<std::size_t>(frame.width) * frame.height * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = &frame.pixels[static_cast<std::size_t>(info.output_scanline) * frame.width * 3];
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return frame;
}

}  // namespace

std::vector<std::uint8_t> encode_png(int width, int height, std::span<const std::uint8_t> rgb) {
  if (width < 1 || height < 1 || rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    fail(ErrorKind::kInvalidDimension, "png encode: pixel buffer does not match dimensions");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    fail(ErrorKind::kIo, std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    fail(ErrorKind::kIo, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  return encode_png(frame.width, frame.height, frame.pixels);
}

Frame decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorKind::kIo, std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Frame frame;
  frame.width = static_cast<int>(image.width);
  frame.height = static_cast<int>(image.height);
  frame.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, frame.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorKind::kIo, std::string("png decode failed: ") + image.message);
  }
  return frame;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Frame read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (has_png_signature(bytes)) return decode_png(bytes);
  if (has_jpeg_signature(bytes)) return decode_jpeg(bytes);
  fail(ErrorKind::kIo, path.string() + " is neither PNG nor JPEG");
}

void write_png(const std::filesystem::path& path, const Frame& frame) {
  write_file_bytes(path, encode_png(frame));
}

void write_patch_png(const std::filesystem::path& path, const Patch& patch) {
  const auto bytes = quantize(patch);
  write_file_bytes(path, encode_png(patch.width(), patch.height(), bytes));
}

Patch read_patch_png(const std::filesystem::path& path) {
  const Frame image = decode_png(read_file_bytes(path));
  std::vector<double> values(image.pixels.begin(), image.pixels.end());
  return Patch(image.width, image.height, std::move(values));
}

}  // namespace advxfer
