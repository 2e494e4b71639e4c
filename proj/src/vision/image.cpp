// SPDX-License-Identifier: Apache-2.0
#include "vprompt/vision/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "vprompt/autodiff/ops.hpp"
#include "vprompt/core/errors.hpp"

namespace vprompt::vision {

Image::Image(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {
  if (w <= 0 || h <= 0) throw ValidationError("image: size must be positive");
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<unsigned char>& bytes) {
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

struct Pnm {
  char kind = 0;  // '2', '3', '5', '6'
  int width = 0, height = 0;
  int maxval = 0;
  std::vector<int> samples;  // width * height * channels
};

Pnm parse_pnm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw IoError(path.string() + ": not a PNM or PNG image");
  Pnm pnm;
  pnm.kind = static_cast<char>(bytes[1]);
  if (pnm.kind != '2' && pnm.kind != '3' && pnm.kind != '5' && pnm.kind != '6') {
    throw IoError(path.string() + ": unsupported PNM variant P" + std::string(1, pnm.kind));
  }
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError(path.string() + ": malformed PNM header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1L << 24)) throw IoError(path.string() + ": PNM value too large");
    }
    return static_cast<int>(v);
  };
  pnm.width = next_int();
  pnm.height = next_int();
  pnm.maxval = next_int();
  if (pnm.width <= 0 || pnm.height <= 0 || pnm.maxval <= 0 || pnm.maxval > 65535) {
    throw IoError(path.string() + ": invalid PNM dimensions");
  }
  const int channels = (pnm.kind == '3' || pnm.kind == '6') ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(pnm.width) * pnm.height * channels;
  pnm.samples.resize(count);
  if (pnm.kind == '2' || pnm.kind == '3') {
    for (auto& s : pnm.samples) s = next_int();
  } else {
    ++pos;  // single whitespace after maxval
    const std::size_t bps = pnm.maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + count * bps) throw IoError(path.string() + ": truncated PNM data");
    for (std::size_t i = 0; i < count; ++i) {
      pnm.samples[i] = bps == 1 ? bytes[pos + i] : (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
    }
  }
  for (auto s : pnm.samples) {
    if (s > pnm.maxval) throw IoError(path.string() + ": PNM sample exceeds maxval");
  }
  return pnm;
}

Image load_png_rgb(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError(path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError(path.string() + ": " + png.message);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = buffer[i] / 255.0;
  return img;
}

// Raw sample values of a single-channel PNG (grey or palette index).
LabelMap load_png_indexed(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw IoError("cannot open image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": libpng initialisation failed");
  }
  bool failed = false;
  if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    png_init_io(png, file.get());
    png_read_png(png, info, PNG_TRANSFORM_PACKING, nullptr);
  }
  LabelMap map;
  if (!failed) {
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    map.width = static_cast<int>(png_get_image_width(png, info));
    map.height = static_cast<int>(png_get_image_height(png, info));
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw IoError(path.string() + ": label map PNG must be greyscale or palette");
    }
    png_bytepp rows = png_get_rows(png, info);
    map.labels.resize(static_cast<std::size_t>(map.width) * map.height);
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        const png_bytep row = rows[y];
        map.labels[static_cast<std::size_t>(y) * map.width + x] =
            depth == 16 ? (row[2 * x] << 8) | row[2 * x + 1] : row[x];
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (failed) throw IoError(path.string() + ": corrupt PNG");
  return map;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (is_png(bytes)) return load_png_rgb(path);
  Pnm pnm = parse_pnm(bytes, path);
  Image img(pnm.width, pnm.height);
  const bool grey = pnm.kind == '2' || pnm.kind == '5';
  const double inv = 1.0 / pnm.maxval;
  for (std::size_t p = 0; p < static_cast<std::size_t>(pnm.width) * pnm.height; ++p) {
    for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = (grey ? pnm.samples[p] : pnm.samples[p * 3 + c]) * inv;
  }
  return img;
}

void save_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.data) {
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)))));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

LabelMap load_label_map(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (is_png(bytes)) return load_png_indexed(path);
  Pnm pnm = parse_pnm(bytes, path);
  if (pnm.kind != '2' && pnm.kind != '5') throw IoError(path.string() + ": label map must be a PGM");
  return LabelMap{pnm.width, pnm.height, std::move(pnm.samples)};
}

void save_pgm(const LabelMap& map, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  const int maxval = std::max(1, *std::max_element(map.labels.begin(), map.labels.end()));
  if (maxval > 65535) throw ValidationError("save_pgm: label exceeds 16 bits");
  const bool wide = maxval > 255;
  os << "P5\n" << map.width << ' ' << map.height << '\n' << (wide ? 65535 : 255) << '\n';
  for (int v : map.labels) {
    if (v < 0) throw ValidationError("save_pgm: negative label");
    if (wide) os.put(static_cast<char>(v >> 8));
    os.put(static_cast<char>(v & 0xFF));
  }
}

Image to_image(const prompt::PromptImage& prompt_image) {
  Image img(prompt_image.width, prompt_image.height);
  img.data = prompt_image.data;
  return img;
}

ad::Tensor to_tensor(const Image& image) {
  return ad::Tensor({static_cast<std::size_t>(image.height), static_cast<std::size_t>(image.width), 3}, image.data);
}

ad::Tensor downsample(const ad::Tensor& image, int factor) {
  if (factor <= 0) throw ValidationError("downsample: factor must be >= 1, got " + std::to_string(factor));
  if (factor == 1) return image;
  return ad::avg_pool2d(image, static_cast<std::size_t>(factor));
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (width == image.width && height == image.height) return image;
  Image out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0, c) * (1 - wx) + image.at(x1, y0, c) * wx;
        const double bottom = image.at(x0, y1, c) * (1 - wx) + image.at(x1, y1, c) * wx;
        out.at(x, y, c) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

Image synthetic_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(width, height);
  for (int blob = 0; blob < 3; ++blob) {
    const double cx = u(rng) * width, cy = u(rng) * height;
    const double radius = (0.2 + 0.4 * u(rng)) * std::max(width, height);
    const double color[3] = {u(rng), u(rng), u(rng)};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double d = std::hypot(x - cx, y - cy) / radius;
        const double w = std::exp(-d * d);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) += w * color[c] / 3.0;
      }
    }
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace vprompt::vision
