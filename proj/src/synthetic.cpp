#include <algorithm>
#include <cmath>
#include <vector>

#include "darkside/common.hpp"
#include "darkside/data.hpp"
#include "darkside/imaging.hpp"

namespace darkside {

namespace {

struct Vec3 {
  double r, g, b;
};

struct Poly {
  std::vector<std::pair<double, double>> pts;  // convex, counter-clockwise
  Vec3 color;
  double shade_dx, shade_dy, shade_amp;
};

bool inside_convex(const Poly& poly, double x, double y) {
  size_t n = poly.pts.size();
  for (size_t i = 0; i < n; ++i) {
    auto [x0, y0] = poly.pts[i];
    auto [x1, y1] = poly.pts[(i + 1) % n];
    if ((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0.0) return false;
  }
  return true;
}

// One scene canvas: gradient background, a handful of shaded convex polygons,
// and a faint texture noise shared by all views of the scene.
std::vector<double> render_canvas(int64_t size, RngStream& rng) {
  std::vector<double> canvas(3 * size * size);
  Vec3 top{rng.uniform_real(0.55, 0.9), rng.uniform_real(0.6, 0.95), rng.uniform_real(0.7, 1.0)};
  Vec3 bottom{rng.uniform_real(0.25, 0.55), rng.uniform_real(0.25, 0.5), rng.uniform_real(0.2, 0.45)};
  for (int64_t y = 0; y < size; ++y) {
    double t = static_cast<double>(y) / (size - 1);
    Vec3 c{top.r + (bottom.r - top.r) * t, top.g + (bottom.g - top.g) * t,
           top.b + (bottom.b - top.b) * t};
    for (int64_t x = 0; x < size; ++x) {
      canvas[(0 * size + y) * size + x] = c.r;
      canvas[(1 * size + y) * size + x] = c.g;
      canvas[(2 * size + y) * size + x] = c.b;
    }
  }

  int n_poly = static_cast<int>(rng.uniform_int(6, 12));
  for (int k = 0; k < n_poly; ++k) {
    Poly poly;
    double cx = rng.uniform_real(0.1, 0.9) * size;
    double cy = rng.uniform_real(0.15, 0.95) * size;
    double rad = rng.uniform_real(0.08, 0.28) * size;
    int verts = static_cast<int>(rng.uniform_int(3, 6));
    double phase = rng.uniform_real(0.0, 2.0 * M_PI);
    for (int v = 0; v < verts; ++v) {
      double ang = phase + 2.0 * M_PI * v / verts + rng.uniform_real(-0.25, 0.25);
      double rr = rad * rng.uniform_real(0.7, 1.0);
      poly.pts.emplace_back(cx + rr * std::cos(ang), cy + rr * std::sin(ang));
    }
    poly.color = {rng.uniform_real(0.15, 0.85), rng.uniform_real(0.15, 0.85),
                  rng.uniform_real(0.15, 0.85)};
    double sa = rng.uniform_real(0.0, 2.0 * M_PI);
    poly.shade_dx = std::cos(sa) / size;
    poly.shade_dy = std::sin(sa) / size;
    poly.shade_amp = rng.uniform_real(0.05, 0.25);

    double minx = size, maxx = 0, miny = size, maxy = 0;
    for (auto [px, py] : poly.pts) {
      minx = std::min(minx, px);
      maxx = std::max(maxx, px);
      miny = std::min(miny, py);
      maxy = std::max(maxy, py);
    }
    int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(minx));
    int64_t x1 = std::min<int64_t>(size - 1, static_cast<int64_t>(maxx) + 1);
    int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(miny));
    int64_t y1 = std::min<int64_t>(size - 1, static_cast<int64_t>(maxy) + 1);
    for (int64_t y = y0; y <= y1; ++y)
      for (int64_t x = x0; x <= x1; ++x) {
        if (!inside_convex(poly, x + 0.5, y + 0.5)) continue;
        double shade =
            1.0 + poly.shade_amp * ((x - cx) * poly.shade_dx + (y - cy) * poly.shade_dy) * 2.0;
        canvas[(0 * size + y) * size + x] = std::clamp(poly.color.r * shade, 0.0, 1.0);
        canvas[(1 * size + y) * size + x] = std::clamp(poly.color.g * shade, 0.0, 1.0);
        canvas[(2 * size + y) * size + x] = std::clamp(poly.color.b * shade, 0.0, 1.0);
      }
  }

  for (auto& v : canvas) v = std::clamp(v + rng.uniform_real(-0.015, 0.015), 0.0, 1.0);
  return canvas;
}

Image crop_view(const std::vector<double>& canvas, int64_t canvas_size, int64_t out_size,
                RngStream& rng) {
  double f = rng.uniform_real(0.55, 0.8);
  int64_t win = std::max<int64_t>(out_size, static_cast<int64_t>(std::lround(canvas_size * f)));
  int64_t oy = rng.uniform_int(0, canvas_size - win);
  int64_t ox = rng.uniform_int(0, canvas_size - win);
  auto t = torch::empty({3, win, win}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < win; ++y)
      for (int64_t x = 0; x < win; ++x)
        acc[c][y][x] = static_cast<float>(canvas[(c * canvas_size + oy + y) * canvas_size + ox + x]);
  Image img = make_image(t, ColorSpace::kRgb, Domain::kDay);
  return resize_longest_side(img, out_size);
}

}  // namespace

Image apply_night_transform(const Image& day, const NightTransform& t, RngStream& rng) {
  auto in = day.data.contiguous();
  int64_t h = in.size(1), w = in.size(2);
  auto out = torch::empty_like(in);
  auto src = in.accessor<float, 3>();
  auto dst = out.accessor<float, 3>();

  double exponent = 1.0 + t.gamma_strength;
  double gain = 1.0 - t.darken;
  // multiplicative chroma: dim red/green, leave blue, so the cast shifts blue
  double cr = 1.0 - 0.55 * t.chroma_shift;
  double cg = 1.0 - 0.30 * t.chroma_shift;
  double cb = 1.0;

  double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  double max_r2 = cx * cx + cy * cy;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double vig = 1.0;
      if (t.vignette > 0.0 && max_r2 > 0.0) {
        double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / max_r2;
        vig = 1.0 - t.vignette * r2;
      }
      double r = std::pow(std::max(0.0, (double)src[0][y][x]), exponent) * gain * cr * vig;
      double g = std::pow(std::max(0.0, (double)src[1][y][x]), exponent) * gain * cg * vig;
      double b = std::pow(std::max(0.0, (double)src[2][y][x]), exponent) * gain * cb * vig;
      dst[0][y][x] = static_cast<float>(r);
      dst[1][y][x] = static_cast<float>(g);
      dst[2][y][x] = static_cast<float>(b);
    }

  for (int s = 0; s < t.light_spots; ++s) {
    double sx = rng.uniform_real(0.05, 0.95) * w;
    double sy = rng.uniform_real(0.05, 0.95) * h;
    double sigma = rng.uniform_real(0.02, 0.07) * std::max(h, w);
    double amp = rng.uniform_real(0.35, 0.85);
    int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(sx - 4 * sigma));
    int64_t x1 = std::min<int64_t>(w - 1, static_cast<int64_t>(sx + 4 * sigma) + 1);
    int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(sy - 4 * sigma));
    int64_t y1 = std::min<int64_t>(h - 1, static_cast<int64_t>(sy + 4 * sigma) + 1);
    for (int64_t y = y0; y <= y1; ++y)
      for (int64_t x = x0; x <= x1; ++x) {
        double d2 = (x - sx) * (x - sx) + (y - sy) * (y - sy);
        double glow = amp * std::exp(-d2 / (2.0 * sigma * sigma));
        dst[0][y][x] += static_cast<float>(glow);
        dst[1][y][x] += static_cast<float>(glow * 0.92);
        dst[2][y][x] += static_cast<float>(glow * 0.70);
      }
  }

  Image night = day;
  night.data = out.clamp(0.0, 1.0);
  night.domain = Domain::kNight;
  return night;
}

RetrievalDataset make_synthetic_daynight(const SceneSpec& spec,
                                         const std::filesystem::path& out_dir) {
  if (spec.image_size < 32)
    throw ValidationError("synthetic dataset: image_size must be >= 32, got " +
                          std::to_string(spec.image_size));
  if (spec.n_scenes < 2) throw ValidationError("synthetic dataset: need at least 2 scenes");
  if (spec.views_per_scene < 1) throw ValidationError("synthetic dataset: views_per_scene must be >= 1");

  auto images_dir = out_dir / "images";
  std::filesystem::create_directories(images_dir);

  RetrievalDataset ds;
  RngStream master(spec.seed);
  int64_t canvas_size = 2 * spec.image_size;
  int n_val = static_cast<int>(std::lround(spec.n_scenes * spec.val_fraction));
  int first_val_scene = spec.n_scenes - n_val;

  for (int s = 0; s < spec.n_scenes; ++s) {
    RngStream scene_rng = master.child(static_cast<uint64_t>(s));
    auto canvas = render_canvas(canvas_size, scene_rng);

    std::vector<int32_t> day_ids;
    for (int v = 0; v < spec.views_per_scene; ++v) {
      Image day = crop_view(canvas, canvas_size, spec.image_size, scene_rng);
      RngStream night_rng = scene_rng.child(1000 + static_cast<uint64_t>(v));
      Image night = apply_night_transform(day, spec.night, night_rng);

      char name[64];
      std::snprintf(name, sizeof(name), "s%04d_v%d", s, v);
      for (auto* pair : {&day, &night}) {
        bool is_day = pair == &day;
        std::string id = std::string(name) + (is_day ? "_day" : "_night");
        std::string rel = "images/" + id + ".png";
        write_png(*pair, out_dir / rel);
        ImageRecord rec;
        rec.id = id;
        rec.path = rel;
        rec.resolved_path = out_dir / rel;
        rec.domain = is_day ? Domain::kDay : Domain::kNight;
        rec.cluster = s;
        ds.images.push_back(rec);
        if (is_day) day_ids.push_back(static_cast<int32_t>(ds.images.size() - 1));
      }
    }
    for (size_t i = 0; i < day_ids.size(); ++i)
      for (size_t j = i + 1; j < day_ids.size(); ++j)
        ds.positive_pairs.emplace_back(day_ids[i], day_ids[j]);

    auto& split = s < first_val_scene ? ds.train_indices : ds.val_indices;
    for (size_t i = ds.images.size() - 2 * spec.views_per_scene; i < ds.images.size(); ++i)
      split.push_back(static_cast<int32_t>(i));
  }

  ds.rebuild_lookup();
  write_manifest(ds, out_dir / "manifest.json");
  return ds;
}

}  // namespace darkside
