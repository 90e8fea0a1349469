#pragma once

#include <utility>

#include "darkside/image.hpp"
#include "darkside/rng.hpp"

namespace darkside {

// Contrast-limited adaptive histogram equalization settings. The clip limit
// is relative: the per-tile histogram is clipped at
// clip_limit * tile_pixels / bins and the clipped excess is redistributed
// uniformly over all bins.
struct ClaheConfig {
  int grid_rows = 8;
  int grid_cols = 8;
  double clip_limit = 1.0;
  int bins = 256;
};

// CLAHE photometric normalization. Grayscale images are equalized directly;
// color images are converted to LAB, the L channel is equalized, and the
// result converted back (chroma untouched). Tile mappings are blended
// bilinearly between the four neighboring tile centers; border pixels clamp
// to the outermost tiles. Throws DimensionError if the image has fewer
// pixels than one per tile in either direction.
Image clahe(const Image& img, const ClaheConfig& cfg = {});

// Color augmentation baseline: replace L with 100-L in LAB space, keep a/b.
Image lab_intensity_invert(const Image& img);

// Random downscale by a factor drawn uniformly from scale_range (area
// interpolation), then a uniform random crop to crop_hw. If the drawn scale
// would make the image smaller than the crop, the scale is clamped up to the
// smallest feasible one. Throws DimensionError when the original image is
// already smaller than the crop.
Image random_scale_crop(const Image& img, RngStream& rng, std::pair<double, double> scale_range,
                        std::pair<int64_t, int64_t> crop_hw);

// Downscale so the longest side equals target (area interpolation; bilinear
// when upscaling). No-op if target <= 0 or the image already matches.
Image resize_longest_side(const Image& img, int64_t target);

// Affine [0,1] <-> [-1,1] maps.
Image to_model_range(const Image& img);
Image from_model_range(const Image& img);

}  // namespace darkside
