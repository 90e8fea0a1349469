#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <memory>
#include <vector>

#include "darkside/common.hpp"
#include "darkside/image.hpp"

namespace darkside {

void Image::validate() const {
  if (!data.defined() || data.dim() != 3) throw ValidationError("Image: expected CHW tensor");
  if (data.scalar_type() != torch::kFloat32) throw ValidationError("Image: expected float32 pixels");
  int64_t c = data.size(0), h = data.size(1), w = data.size(2);
  if (c != 1 && c != 3) throw ValidationError("Image: channel count must be 1 or 3, got " + std::to_string(c));
  if (h < 1 || w < 1) throw ValidationError("Image: degenerate spatial size");
  double lo = range == ValueRange::kUnit ? 0.0 : -1.0;
  double hi = 1.0;
  double mn = data.min().item<double>();
  double mx = data.max().item<double>();
  if (!std::isfinite(mn) || !std::isfinite(mx))
    throw ValidationError("Image: non-finite pixel values");
  constexpr double kEps = 1e-5;
  if (mn < lo - kEps || mx > hi + kEps)
    throw ValidationError("Image: pixel values outside declared range [" + std::to_string(lo) + "," +
                          std::to_string(hi) + "]");
}

Image make_image(torch::Tensor chw, ColorSpace cs, Domain domain, ValueRange range) {
  Image img;
  img.data = chw.to(torch::kFloat32).contiguous();
  img.color_space = cs;
  img.domain = domain;
  img.range = range;
  return img;
}

const char* to_string(Domain d) {
  switch (d) {
    case Domain::kDay: return "day";
    case Domain::kNight: return "night";
    default: return "unknown";
  }
}

Domain domain_from_string(const std::string& s) {
  if (s == "day") return Domain::kDay;
  if (s == "night") return Domain::kNight;
  if (s == "unknown") return Domain::kUnknown;
  throw ValidationError("unknown domain label '" + s + "' (expected day|night|unknown)");
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& path) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

Image from_interleaved(const std::vector<float>& buf, int64_t h, int64_t w, int64_t c) {
  auto t = torch::from_blob(const_cast<float*>(buf.data()), {h, w, c}, torch::kFloat32)
               .permute({2, 0, 1})
               .clone()
               .contiguous();
  return make_image(t, c == 1 ? ColorSpace::kGray : ColorSpace::kRgb);
}

Image read_png_file(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw ValidationError("cannot open image file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("failed to decode PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  int64_t c = channels >= 3 ? 3 : 1;
  std::vector<float> buf(static_cast<size_t>(w) * h * c);
  for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i)
    for (int64_t k = 0; k < c; ++k) buf[i * c + k] = raw[i * channels + k] / 255.0f;
  return from_interleaved(buf, h, w, c);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

Image read_jpeg_file(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw ValidationError("cannot open image file: " + path.string());
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ValidationError("failed to decode JPEG: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  jpeg_start_decompress(&cinfo);

  int64_t w = cinfo.output_width, h = cinfo.output_height, c = cinfo.output_components;
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * c);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = raw.data() + static_cast<size_t>(cinfo.output_scanline) * w * c;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  int64_t out_c = c >= 3 ? 3 : 1;
  std::vector<float> buf(static_cast<size_t>(w) * h * out_c);
  for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i)
    for (int64_t k = 0; k < out_c; ++k) buf[i * out_c + k] = raw[i * c + k] / 255.0f;
  return from_interleaved(buf, h, w, out_c);
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::string ext = lower_ext(path);
  if (ext == ".png") return read_png_file(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg_file(path);
  throw ValidationError("unsupported image extension '" + ext + "' for " + path.string());
}

void write_png(const Image& img, const std::filesystem::path& path) {
  if (img.range != ValueRange::kUnit) throw ValidationError("write_png expects a [0,1] image");
  auto chw = img.data.contiguous();
  int64_t c = chw.size(0), h = chw.size(1), w = chw.size(2);
  if (c != 1 && c != 3) throw ValidationError("write_png: channel count must be 1 or 3");

  auto hwc = chw.permute({1, 2, 0}).contiguous();
  const float* src = hwc.data_ptr<float>();
  std::vector<unsigned char> raw(static_cast<size_t>(h) * w * c);
  for (size_t i = 0; i < raw.size(); ++i) {
    float v = std::clamp(src[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw ValidationError("cannot open output file: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("failed to encode PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int64_t y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * w * c;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace darkside
