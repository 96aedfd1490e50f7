#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symcanon/network.hpp"
#include "symcanon/tensor.hpp"

namespace symcanon {

// Grayscale, row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  friend bool operator==(const Image&, const Image&) = default;
};

enum class GlyphClass : int { HorizontalBar = 0, VerticalBar, Cross, HollowSquare, Diagonal };
inline constexpr int kGlyphClasses = 5;
std::string glyph_name(GlyphClass c);

struct LabeledImage {
  Image image;
  int label = 0;
};

// Row-major (y, x) coordinates in [-1, 1]; a single-pixel axis maps to 0.
Tensor coord_grid(std::size_t height, std::size_t width);

// Raw network output at every grid point; no clamping.
Image render_inr(const Network& net, std::size_t height, std::size_t width);

double image_mse(const Image& a, const Image& b);

// IDX3 (big-endian magic 0x00000803, count, rows, cols, unsigned bytes).
std::vector<Image> load_idx(const std::string& path);
std::vector<Image> parse_idx(const std::vector<std::uint8_t>& bytes);

// n_per_class images of each glyph class, classes interleaved in label order.
std::vector<LabeledImage> synth_glyphs(std::size_t n_per_class, std::size_t size,
                                       std::uint64_t seed);
Image render_glyph(GlyphClass cls, std::size_t size, std::uint64_t seed);

}  // namespace symcanon
