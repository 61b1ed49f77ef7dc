#include "venus/image.hpp"

#include <png.h>
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <random>

#include "venus/error.hpp"

namespace venus {

ImageBuffer::ImageBuffer(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw DimensionError("image dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * h * 3, fill);
}

void ImageBuffer::validate() const {
  if (width < 1 || height < 1) throw DimensionError("image dimensions must be positive");
  if (data.size() != static_cast<std::size_t>(width) * height * 3) {
    throw DimensionError("image buffer size does not match width * height * 3");
  }
}

bool looks_like_png(std::string_view bytes) {
  return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

bool looks_like_jpeg(std::string_view bytes) {
  return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
         static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF;
}

namespace {

constexpr std::size_t kSignatureSize = 8;

std::uint32_t read_be32(std::string_view b, std::size_t pos) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3]));
}

void append_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

std::string text_chunk(const std::string& key, const std::string& value) {
  std::string body = "tEXt" + key;
  body.push_back('\0');
  body += value;
  std::string chunk;
  append_be32(chunk, static_cast<std::uint32_t>(body.size() - 4));
  chunk += body;
  append_be32(chunk, static_cast<std::uint32_t>(
                         crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
  return chunk;
}

// Walks the chunk list; tEXt chunks land in `text`.
void scan_chunks(std::string_view bytes, PngText& text) {
  std::size_t pos = kSignatureSize;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = read_be32(bytes, pos);
    if (pos + 12 + len > bytes.size()) break;
    const auto type = bytes.substr(pos + 4, 4);
    if (type == "tEXt") {
      const auto body = bytes.substr(pos + 8, len);
      const auto nul = body.find('\0');
      if (nul != std::string_view::npos) text[std::string(body.substr(0, nul))] = std::string(body.substr(nul + 1));
    }
    if (type == "IEND") break;
    pos += 12 + len;
  }
}

}  // namespace

ImageBuffer decode_png(std::string_view bytes, PngText* text) {
  if (!looks_like_png(bytes)) throw ProtocolError("not a PNG image");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ProtocolError("PNG decode failed: " + msg);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width < 1 || img.height < 1 || img.width > 1u << 15 || img.height > 1u << 15) {
    png_image_free(&img);
    throw ProtocolError("PNG dimensions out of range");
  }
  ImageBuffer out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ProtocolError("PNG decode failed: " + msg);
  }
  if (text) {
    text->clear();
    scan_chunks(bytes, *text);
  }
  return out;
}

std::string encode_png(const ImageBuffer& image, const PngText& text) {
  image.validate();
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data.data(), 0, nullptr)) {
    throw ProtocolError(std::string("PNG encode failed: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data.data(), 0, nullptr)) {
    throw ProtocolError(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  if (!text.empty()) {
    // Signature, then IHDR (4 length + 4 type + 13 data + 4 crc).
    const std::size_t after_ihdr = kSignatureSize + 25;
    std::string chunks;
    for (const auto& [k, v] : text) chunks += text_chunk(k, v);
    out.insert(after_ihdr, chunks);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing " + path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(rng() % 1000000000ULL);
  write_file(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

}  // namespace venus
