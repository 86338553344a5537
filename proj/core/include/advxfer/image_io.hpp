#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "advxfer/imaging.hpp"

namespace advxfer {

/// 8-bit RGB PNG, no alpha.
std::vector<std::uint8_t> encode_png(int width, int height, std::span<const std::uint8_t> rgb);
Frame decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Frame& frame);

/// Reads a PNG or JPEG (detected from the file signature) as 8-bit RGB.
Frame read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Frame& frame);

/// Patch export quantizes to 8 bits; import yields integral channel values.
void write_patch_png(const std::filesystem::path& path, const Patch& patch);
Patch read_patch_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace advxfer
