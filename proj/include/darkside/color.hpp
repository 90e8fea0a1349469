#pragma once

#include <torch/torch.h>

namespace darkside {

// sRGB <-> CIELAB with D65 white point. Input/output tensors are 3xHxW
// float32; RGB in [0,1], L in [0,100], a/b unbounded. lab_to_rgb clamps the
// result into [0,1] (out-of-gamut values are clipped).
torch::Tensor rgb_to_lab(const torch::Tensor& rgb);
torch::Tensor lab_to_rgb(const torch::Tensor& lab);

// Rec.601 luma of an RGB or grayscale CHW tensor -> 1xHxW.
torch::Tensor luminance(const torch::Tensor& chw);

}  // namespace darkside
