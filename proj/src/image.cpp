#include "symcanon/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "symcanon/error.hpp"
#include "symcanon/rng.hpp"

namespace symcanon {

std::string glyph_name(GlyphClass c) {
  switch (c) {
    case GlyphClass::HorizontalBar: return "hbar";
    case GlyphClass::VerticalBar: return "vbar";
    case GlyphClass::Cross: return "cross";
    case GlyphClass::HollowSquare: return "square";
    case GlyphClass::Diagonal: return "diagonal";
  }
  return "?";
}

Tensor coord_grid(std::size_t height, std::size_t width) {
  require(height >= 1 && width >= 1, "coord_grid: height and width must be >= 1");
  auto axis = [](std::size_t i, std::size_t n) {
    return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  Tensor g = Tensor::matrix(height * width, 2);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      g(y * width + x, 0) = axis(y, height);
      g(y * width + x, 1) = axis(x, width);
    }
  }
  return g;
}

Image render_inr(const Network& net, std::size_t height, std::size_t width) {
  validate(net);
  require(net.input_dim() == 2 && net.output_dim() == 1,
          "render_inr: network must map 2 -> 1, got " + net.arch().str());
  Tensor out = forward(net, coord_grid(height, width));
  return Image{height, width, out.data()};
}

double image_mse(const Image& a, const Image& b) {
  require(a.pixels.size() == b.pixels.size() && !a.pixels.empty(), "image_mse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

std::vector<Image> parse_idx(const std::vector<std::uint8_t>& bytes) {
  auto be32 = [&](std::size_t off) {
    return (std::uint32_t{bytes[off]} << 24) | (std::uint32_t{bytes[off + 1]} << 16) |
           (std::uint32_t{bytes[off + 2]} << 8) | std::uint32_t{bytes[off + 3]};
  };
  require(bytes.size() >= 16, "idx: header truncated (" + std::to_string(bytes.size()) + " bytes)");
  const std::uint32_t magic = be32(0);
  require(magic == 0x00000803u, "idx: bad magic 0x" + [&] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", magic);
    return std::string(buf);
  }() + ", expected 0x00000803 (unsigned byte images)");
  const std::size_t count = be32(4), rows = be32(8), cols = be32(12);
  require(rows >= 1 && cols >= 1, "idx: zero image dimension");
  const std::size_t need = count * rows * cols;
  require(bytes.size() - 16 >= need, "idx: payload truncated, need " + std::to_string(need) +
                                         " bytes, have " + std::to_string(bytes.size() - 16));
  std::vector<Image> images(count);
  for (std::size_t n = 0; n < count; ++n) {
    Image& im = images[n];
    im.height = rows;
    im.width = cols;
    im.pixels.resize(rows * cols);
    for (std::size_t k = 0; k < rows * cols; ++k)
      im.pixels[k] = static_cast<double>(bytes[16 + n * rows * cols + k]) / 255.0;
  }
  return images;
}

std::vector<Image> load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

Image render_glyph(GlyphClass cls, std::size_t size, std::uint64_t seed) {
  require(size >= 8, "synth_glyphs: size must be >= 8");
  Pcg32 rng(seed);
  const double n = static_cast<double>(size);
  const double jitter = n / 8.0;
  const double cy = (n - 1.0) / 2.0 + rng.uniform(-jitter, jitter);
  const double cx = (n - 1.0) / 2.0 + rng.uniform(-jitter, jitter);
  const double thick = rng.uniform(1.0, std::max(1.5, n / 6.0));
  const double half = rng.uniform(n / 5.0, n / 3.0);

  Image im{size, size, std::vector<double>(size * size, 0.0)};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      double dist = 0.0;
      switch (cls) {
        case GlyphClass::HorizontalBar: dist = std::abs(dy); break;
        case GlyphClass::VerticalBar: dist = std::abs(dx); break;
        case GlyphClass::Cross: dist = std::min(std::abs(dy), std::abs(dx)); break;
        case GlyphClass::HollowSquare:
          dist = std::abs(std::max(std::abs(dx), std::abs(dy)) - half);
          break;
        case GlyphClass::Diagonal: dist = std::abs(dy - dx) / std::sqrt(2.0); break;
      }
      // Anti-aliased stroke: 1 inside, linear falloff over one pixel.
      im.pixels[y * size + x] = std::clamp(thick / 2.0 + 0.5 - dist, 0.0, 1.0);
    }
  }
  return im;
}

std::vector<LabeledImage> synth_glyphs(std::size_t n_per_class, std::size_t size,
                                       std::uint64_t seed) {
  require(size >= 8, "synth_glyphs: size must be >= 8");
  std::vector<LabeledImage> out;
  out.reserve(n_per_class * kGlyphClasses);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (int c = 0; c < kGlyphClasses; ++c) {
      const std::uint64_t s = mix_seed(seed, i * kGlyphClasses + static_cast<std::uint64_t>(c));
      out.push_back({render_glyph(static_cast<GlyphClass>(c), size, s), c});
    }
  }
  return out;
}

}  // namespace symcanon
