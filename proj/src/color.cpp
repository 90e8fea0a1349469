#include "darkside/color.hpp"

#include <cmath>

#include "darkside/common.hpp"

namespace darkside {

namespace {

// D65 reference white
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

}  // namespace

torch::Tensor rgb_to_lab(const torch::Tensor& rgb) {
  if (rgb.dim() != 3 || rgb.size(0) != 3) throw ValidationError("rgb_to_lab: expected 3xHxW input");
  auto in = rgb.contiguous();
  auto out = torch::empty_like(in);
  auto src = in.accessor<float, 3>();
  auto dst = out.accessor<float, 3>();
  int64_t h = in.size(1), w = in.size(2);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double r = srgb_to_linear(src[0][y][x]);
      double g = srgb_to_linear(src[1][y][x]);
      double b = srgb_to_linear(src[2][y][x]);
      double X = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
      double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
      double Z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
      double fx = lab_f(X / kXn), fy = lab_f(Y / kYn), fz = lab_f(Z / kZn);
      dst[0][y][x] = static_cast<float>(116.0 * fy - 16.0);
      dst[1][y][x] = static_cast<float>(500.0 * (fx - fy));
      dst[2][y][x] = static_cast<float>(200.0 * (fy - fz));
    }
  }
  return out;
}

torch::Tensor lab_to_rgb(const torch::Tensor& lab) {
  if (lab.dim() != 3 || lab.size(0) != 3) throw ValidationError("lab_to_rgb: expected 3xHxW input");
  auto in = lab.contiguous();
  auto out = torch::empty_like(in);
  auto src = in.accessor<float, 3>();
  auto dst = out.accessor<float, 3>();
  int64_t h = in.size(1), w = in.size(2);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double L = src[0][y][x], a = src[1][y][x], b = src[2][y][x];
      double fy = (L + 16.0) / 116.0;
      double fx = fy + a / 500.0;
      double fz = fy - b / 200.0;
      double X = kXn * lab_f_inv(fx);
      double Y = kYn * lab_f_inv(fy);
      double Z = kZn * lab_f_inv(fz);
      double r = 3.2404542 * X - 1.5371385 * Y - 0.4985314 * Z;
      double g = -0.9692660 * X + 1.8760108 * Y + 0.0415560 * Z;
      double bl = 0.0556434 * X - 0.2040259 * Y + 1.0572252 * Z;
      dst[0][y][x] = static_cast<float>(std::clamp(linear_to_srgb(r), 0.0, 1.0));
      dst[1][y][x] = static_cast<float>(std::clamp(linear_to_srgb(g), 0.0, 1.0));
      dst[2][y][x] = static_cast<float>(std::clamp(linear_to_srgb(bl), 0.0, 1.0));
    }
  }
  return out;
}

torch::Tensor luminance(const torch::Tensor& chw) {
  if (chw.size(0) == 1) return chw;
  auto r = chw.index({0}), g = chw.index({1}), b = chw.index({2});
  return (0.299 * r + 0.587 * g + 0.114 * b).unsqueeze(0).to(chw.dtype());
}

}  // namespace darkside
