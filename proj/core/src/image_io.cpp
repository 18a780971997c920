#include <png.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hdrgs/dataset.hpp"
#include "hdrgs/error.hpp"

namespace hdrgs {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");

ImageU8 read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingFileError("missing image file: " + path.string());
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageDecodeError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  ImageU8 out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
  if (!png_image_finish_read(&image, nullptr, out.data().data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageDecodeError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

void write_png(const ImageU8& img, const std::filesystem::path& path) {
  if (img.channels() != 3) throw ShapeError("write_png: expected an RGB image");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data().data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

ImageF read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("missing PFM file: " + path.string());

  auto token = [&]() {
    std::string t;
    char ch;
    while (in.get(ch) && std::isspace(static_cast<unsigned char>(ch))) {
    }
    if (!in) return t;
    t.push_back(ch);
    while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    return t;
  };
  const std::string magic = token();
  if (magic != "PF") {
    throw ImageDecodeError("malformed PFM header in " + path.string() + " (expected color 'PF')");
  }
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw ImageDecodeError("malformed PFM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || scale == 0.0) {
    throw ImageDecodeError("malformed PFM header in " + path.string());
  }
  if (scale > 0.0) {
    throw ImageDecodeError("big-endian PFM is not supported: " + path.string());
  }
  // the single whitespace after the scale was consumed by token()

  ImageF out(w, h, 3);
  const std::size_t row = static_cast<std::size_t>(w) * 3;
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(&out.at(0, y, 0)),
            static_cast<std::streamsize>(row * sizeof(float)));
    if (!in) throw ImageDecodeError("truncated PFM payload in " + path.string());
  }
  return out;
}

void write_pfm(const ImageF& img, const std::filesystem::path& path) {
  if (img.channels() != 3) throw ShapeError("write_pfm: expected an RGB image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "PF\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(img.width()) * 3;
  for (int y = img.height() - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(&img.at(0, y, 0)),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hdrgs
