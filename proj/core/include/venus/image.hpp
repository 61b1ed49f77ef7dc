#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace venus {

/// 8-bit RGB, row-major, no padding.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  /// Throws DimensionError for non-positive sizes.
  ImageBuffer(int w, int h, std::uint8_t fill = 0);

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + c;
  }
  std::uint8_t at(int x, int y, int c) const { return data[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c) { return data[index(x, y, c)]; }

  /// Throws DimensionError when data.size() != width * height * 3.
  void validate() const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

using PngText = std::map<std::string, std::string>;

/// Decodes any PNG, expanding palette/gray/16-bit and dropping alpha so the
/// result is 8-bit RGB. Throws ProtocolError on undecodable input.
ImageBuffer decode_png(std::string_view bytes, PngText* text = nullptr);

/// Deterministic encoder: fixed compression settings, tEXt chunks written in
/// key order.
std::string encode_png(const ImageBuffer& image, const PngText& text = {});

bool looks_like_png(std::string_view bytes);
bool looks_like_jpeg(std::string_view bytes);

/// Throws IoError naming the path.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace venus
