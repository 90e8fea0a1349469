#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>

namespace darkside {

enum class ColorSpace { kRgb, kLab, kGray };
enum class Domain { kDay, kNight, kUnknown };

// Pixel value convention: kUnit is [0,1] storage, kModel is the [-1,1]
// range the networks consume.
enum class ValueRange { kUnit, kModel };

// A raster image: CHW float32 tensor on CPU plus the metadata the training
// pipeline tracks (color space, day/night domain, value range).
struct Image {
  torch::Tensor data;  // C x H x W, float32, contiguous
  ColorSpace color_space = ColorSpace::kRgb;
  Domain domain = Domain::kUnknown;
  ValueRange range = ValueRange::kUnit;

  int64_t channels() const { return data.size(0); }
  int64_t height() const { return data.size(1); }
  int64_t width() const { return data.size(2); }

  // Checks shape (C in {1,3}, H,W >= 1) and that every value lies in the
  // declared range. Throws ValidationError.
  void validate() const;
};

Image make_image(torch::Tensor chw, ColorSpace cs = ColorSpace::kRgb,
                 Domain domain = Domain::kUnknown, ValueRange range = ValueRange::kUnit);

// PNG/JPEG loading by file extension; 8-bit and 16-bit PNG, 8-bit JPEG.
// Returns a kUnit image, RGB or GRAY depending on the file.
Image read_image(const std::filesystem::path& path);

// Writes 8-bit PNG. Input must be kUnit; values are clamped and rounded.
// Byte output is deterministic for identical pixel content.
void write_png(const Image& img, const std::filesystem::path& path);

const char* to_string(Domain d);
Domain domain_from_string(const std::string& s);

}  // namespace darkside
