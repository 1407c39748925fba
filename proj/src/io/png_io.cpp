#include "io/png_io.hpp"

#include <png.h>

#include <cstring>
#include <vector>

#include "common/error.hpp"

namespace lidarsphere::png {
namespace {

void write_image(const std::filesystem::path& path, std::size_t w, std::size_t h, png_uint_32 format,
                 const void* buffer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (png_image_write_to_file(&image, path.c_str(), 0, buffer, 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + msg);
  }
}

struct Decoded {
  png_image image;
  std::vector<std::uint8_t> data;
};

Decoded decode(const std::filesystem::path& path, bool require_gray) {
  if (!std::filesystem::exists(path)) throw IoError("cannot open " + path.string());
  Decoded d;
  std::memset(&d.image, 0, sizeof d.image);
  d.image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&d.image, path.c_str()) == 0)
    throw DataError(path.string() + ": " + d.image.message);
  const png_uint_32 src = d.image.format;
  if (require_gray && ((src & PNG_FORMAT_FLAG_COLOR) || (src & PNG_FORMAT_FLAG_COLORMAP) || (src & PNG_FORMAT_FLAG_LINEAR))) {
    png_image_free(&d.image);
    throw DataError(path.string() + ": expected an 8-bit grayscale PNG");
  }
  d.image.format = require_gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  d.data.resize(PNG_IMAGE_SIZE(d.image));
  if (png_image_finish_read(&d.image, nullptr, d.data.data(), 0, nullptr) == 0) {
    const std::string msg = d.image.message;
    png_image_free(&d.image);
    throw DataError(path.string() + ": " + msg);
  }
  return d;
}

}  // namespace

void write_gray8(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
  write_image(path, img.width(), img.height(), PNG_FORMAT_GRAY, img.storage().data());
}

void write_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
  write_image(path, img.width(), img.height(), PNG_FORMAT_LINEAR_Y, img.storage().data());
}

void write_rgb8(const std::filesystem::path& path, const Image<Rgb>& img) {
  static_assert(sizeof(Rgb) == 3);
  write_image(path, img.width(), img.height(), PNG_FORMAT_RGB, img.storage().data());
}

Image<std::uint8_t> read_gray8(const std::filesystem::path& path) {
  Decoded d = decode(path, true);
  Image<std::uint8_t> img(d.image.height, d.image.width);
  std::memcpy(img.storage().data(), d.data.data(), img.size());
  return img;
}

Image<Rgb> read_rgb8(const std::filesystem::path& path) {
  Decoded d = decode(path, false);
  Image<Rgb> img(d.image.height, d.image.width);
  std::memcpy(img.storage().data(), d.data.data(), img.size() * 3);
  return img;
}

}  // namespace lidarsphere::png
