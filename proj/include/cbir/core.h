// Shared image and vector primitives.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbir {

// Base class of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data is malformed, missing or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

// The caller asked for something that does not make sense
// (unknown names, out-of-range parameters).
class UsageError : public Error {
 public:
  using Error::Error;
};

// 8-bit interleaved RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0) {}

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(std::size_t(y) * width + x) * 3 + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return pixels[(std::size_t(y) * width + x) * 3 + c];
  }
  bool valid() const {
    return width > 0 && height > 0 && pixels.size() == std::size_t(width) * height * 3;
  }
};

// Single real-valued channel in [0,255], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

  double at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  double& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
};

// L = 0.299R + 0.587G + 0.114B, kept real-valued.
GrayImage to_grayscale(const RgbImage& img);

// Channel c (0=R, 1=G, 2=B) as a real image.
GrayImage channel(const RgbImage& img, int c);

struct Normalized {
  std::vector<double> values;
  bool zero = false;  // input was all-zero and is returned unchanged
};

// Divides by the Euclidean norm. Throws DataError on NaN/Inf entries.
Normalized l2_normalize(std::span<const double> v);

struct FeatureVector {
  int image_id = -1;
  std::string kind;
  std::vector<double> values;
  bool zero = false;
};

// Normalizes `raw` and wraps it.
FeatureVector make_feature(int image_id, std::string kind, std::span<const double> raw);

}  // namespace cbir
