#include "darkside/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "darkside/color.hpp"
#include "darkside/common.hpp"

namespace F = torch::nn::functional;

namespace darkside {

namespace {

// Equalizes one channel with values in [0,1]. Returns a tensor of the same
// shape. This is the workhorse behind clahe(); tiles partition the image via
// integer boundaries r*H/R so non-divisible sizes get near-equal tiles.
torch::Tensor clahe_channel(const torch::Tensor& plane, const ClaheConfig& cfg) {
  const int64_t h = plane.size(0), w = plane.size(1);
  const int rows = cfg.grid_rows, cols = cfg.grid_cols;
  const int bins = cfg.bins;

  auto src = plane.contiguous();
  auto acc = src.accessor<float, 2>();

  auto row_start = [&](int r) { return static_cast<int64_t>(r) * h / rows; };
  auto col_start = [&](int c) { return static_cast<int64_t>(c) * w / cols; };

  // Per-tile clipped-histogram equalization mappings, one value per bin.
  // map[t][b] = (cdf(b) - h(b)/2) / tile_pixels, i.e. the midpoint CDF, so a
  // fully clipped (uniform) histogram maps each bin near its own value.
  std::vector<std::vector<double>> mapping(static_cast<size_t>(rows) * cols);
  for (int tr = 0; tr < rows; ++tr) {
    for (int tc = 0; tc < cols; ++tc) {
      int64_t y0 = row_start(tr), y1 = row_start(tr + 1);
      int64_t x0 = col_start(tc), x1 = col_start(tc + 1);
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      std::vector<double> hist(bins, 0.0);
      for (int64_t y = y0; y < y1; ++y)
        for (int64_t x = x0; x < x1; ++x) {
          int b = std::min(bins - 1, std::max(0, static_cast<int>(acc[y][x] * bins)));
          hist[b] += 1.0;
        }
      const double clip = cfg.clip_limit * n / bins;
      double excess = 0.0;
      for (auto& v : hist)
        if (v > clip) {
          excess += v - clip;
          v = clip;
        }
      const double add = excess / bins;
      for (auto& v : hist) v += add;
      auto& m = mapping[static_cast<size_t>(tr) * cols + tc];
      m.resize(bins);
      double cdf = 0.0;
      for (int b = 0; b < bins; ++b) {
        cdf += hist[b];
        m[b] = (cdf - 0.5 * hist[b]) / n;
      }
    }
  }

  // Tile center coordinates used for the bilinear blend.
  std::vector<double> cy(rows), cx(cols);
  for (int r = 0; r < rows; ++r) cy[r] = 0.5 * (row_start(r) + row_start(r + 1) - 1);
  for (int c = 0; c < cols; ++c) cx[c] = 0.5 * (col_start(c) + col_start(c + 1) - 1);

  auto out = torch::empty_like(src);
  auto dst = out.accessor<float, 2>();
  for (int64_t y = 0; y < h; ++y) {
    int r0 = 0;
    while (r0 + 1 < rows && cy[r0 + 1] <= y) ++r0;
    int r1 = std::min(r0 + 1, rows - 1);
    double wy = 0.0;
    if (y > cy[r0] && r1 != r0) wy = std::clamp((y - cy[r0]) / (cy[r1] - cy[r0]), 0.0, 1.0);
    if (y <= cy[0]) { r0 = r1 = 0; wy = 0.0; }
    for (int64_t x = 0; x < w; ++x) {
      int c0 = 0;
      while (c0 + 1 < cols && cx[c0 + 1] <= x) ++c0;
      int c1 = std::min(c0 + 1, cols - 1);
      double wx = 0.0;
      if (x > cx[c0] && c1 != c0) wx = std::clamp((x - cx[c0]) / (cx[c1] - cx[c0]), 0.0, 1.0);
      if (x <= cx[0]) { c0 = c1 = 0; wx = 0.0; }

      int b = std::min(bins - 1, std::max(0, static_cast<int>(acc[y][x] * bins)));
      double v00 = mapping[static_cast<size_t>(r0) * cols + c0][b];
      double v01 = mapping[static_cast<size_t>(r0) * cols + c1][b];
      double v10 = mapping[static_cast<size_t>(r1) * cols + c0][b];
      double v11 = mapping[static_cast<size_t>(r1) * cols + c1][b];
      double top = v00 + (v01 - v00) * wx;
      double bot = v10 + (v11 - v10) * wx;
      dst[y][x] = static_cast<float>(std::clamp(top + (bot - top) * wy, 0.0, 1.0));
    }
  }
  return out;
}

torch::Tensor resize_area(const torch::Tensor& chw, int64_t out_h, int64_t out_w) {
  auto in = chw.unsqueeze(0);
  torch::Tensor out;
  if (out_h <= chw.size(1) && out_w <= chw.size(2)) {
    out = F::interpolate(in, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{out_h, out_w})
                                 .mode(torch::kArea));
  } else {
    out = F::interpolate(in, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{out_h, out_w})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
  }
  return out.squeeze(0).contiguous();
}

}  // namespace

Image clahe(const Image& img, const ClaheConfig& cfg) {
  if (img.range != ValueRange::kUnit) throw ValidationError("clahe expects a [0,1] image");
  if (cfg.grid_rows < 1 || cfg.grid_cols < 1) throw ValidationError("clahe: grid dims must be >= 1");
  if (cfg.clip_limit <= 0.0) throw ValidationError("clahe: clip limit must be positive");
  if (img.height() < cfg.grid_rows || img.width() < cfg.grid_cols)
    throw DimensionError("clahe: image " + std::to_string(img.height()) + "x" +
                         std::to_string(img.width()) + " smaller than one pixel per tile for grid " +
                         std::to_string(cfg.grid_rows) + "x" + std::to_string(cfg.grid_cols));

  Image out = img;
  if (img.channels() == 1) {
    out.data = clahe_channel(img.data.squeeze(0), cfg).unsqueeze(0);
    return out;
  }
  // Color path: equalize L in LAB, keep chroma.
  auto lab = rgb_to_lab(img.data);
  auto l_unit = (lab.index({0}) / 100.0f).clamp(0.0f, 1.0f);
  lab.index_put_({0}, clahe_channel(l_unit.contiguous(), cfg) * 100.0f);
  out.data = lab_to_rgb(lab);
  return out;
}

Image lab_intensity_invert(const Image& img) {
  if (img.channels() != 3) throw ValidationError("lab_intensity_invert: RGB input required");
  if (img.range != ValueRange::kUnit)
    throw ValidationError("lab_intensity_invert expects a [0,1] image");
  auto lab = rgb_to_lab(img.data);
  lab.index_put_({0}, 100.0f - lab.index({0}));
  Image out = img;
  out.data = lab_to_rgb(lab);
  return out;
}

Image random_scale_crop(const Image& img, RngStream& rng, std::pair<double, double> scale_range,
                        std::pair<int64_t, int64_t> crop_hw) {
  auto [lo, hi] = scale_range;
  auto [crop_h, crop_w] = crop_hw;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
    throw ValidationError("random_scale_crop: scale range must satisfy 0 < lo <= hi <= 1");
  if (img.height() < crop_h || img.width() < crop_w)
    throw DimensionError("random_scale_crop: image " + std::to_string(img.height()) + "x" +
                         std::to_string(img.width()) + " smaller than required minimum " +
                         std::to_string(crop_h) + "x" + std::to_string(crop_w));

  double s = rng.uniform_real(lo, hi);
  // Clamp up to the smallest scale that still fits the crop (one draw only).
  double s_min = std::max(static_cast<double>(crop_h) / img.height(),
                          static_cast<double>(crop_w) / img.width());
  s = std::max(s, s_min);
  int64_t new_h = std::max(crop_h, static_cast<int64_t>(std::lround(img.height() * s)));
  int64_t new_w = std::max(crop_w, static_cast<int64_t>(std::lround(img.width() * s)));

  auto scaled = (new_h == img.height() && new_w == img.width())
                    ? img.data
                    : resize_area(img.data, new_h, new_w);
  int64_t oy = rng.uniform_int(0, new_h - crop_h);
  int64_t ox = rng.uniform_int(0, new_w - crop_w);
  Image out = img;
  out.data = scaled.narrow(1, oy, crop_h).narrow(2, ox, crop_w).contiguous().clamp(0.0, 1.0);
  return out;
}

Image resize_longest_side(const Image& img, int64_t target) {
  if (target <= 0) return img;
  int64_t longest = std::max(img.height(), img.width());
  if (longest == target) return img;
  double s = static_cast<double>(target) / longest;
  int64_t new_h = std::max<int64_t>(1, std::lround(img.height() * s));
  int64_t new_w = std::max<int64_t>(1, std::lround(img.width() * s));
  Image out = img;
  out.data = resize_area(img.data, new_h, new_w).clamp(0.0, 1.0);
  return out;
}

Image to_model_range(const Image& img) {
  if (img.range != ValueRange::kUnit) throw ValidationError("to_model_range expects a [0,1] image");
  Image out = img;
  out.data = img.data * 2.0f - 1.0f;
  out.range = ValueRange::kModel;
  return out;
}

Image from_model_range(const Image& img) {
  if (img.range != ValueRange::kModel)
    throw ValidationError("from_model_range expects a [-1,1] image");
  Image out = img;
  out.data = (img.data + 1.0f) * 0.5f;
  out.range = ValueRange::kUnit;
  return out;
}

}  // namespace darkside
