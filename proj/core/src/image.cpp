#include "hdrgs/image.hpp"

#include <algorithm>
#include <cmath>

namespace hdrgs {

ImageD to_unit(const ImageU8& img) {
  ImageD out(img.width(), img.height(), img.channels());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] / 255.0;
  return out;
}

ImageU8 quantize8(const ImageD& img) {
  ImageU8 out(img.width(), img.height(), img.channels());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(std::isnan(img[i]) ? 0.0 : img[i], 0.0, 1.0) * 255.0;
    // nearbyint honours the default round-to-nearest-even mode
    out[i] = static_cast<std::uint8_t>(std::nearbyint(v));
  }
  return out;
}

}  // namespace hdrgs
