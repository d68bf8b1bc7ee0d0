#include "cbir/image_io.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace cbir {
namespace {

constexpr std::array<const char*, 9> kExtensions = {
    ".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".pnm"};

RgbImage from_mat(const cv::Mat& decoded) {
  cv::Mat rgb;
  if (decoded.channels() == 1) {
    cv::cvtColor(decoded, rgb, cv::COLOR_GRAY2RGB);
  } else if (decoded.channels() == 4) {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
  }
  if (rgb.depth() != CV_8U) {
    cv::Mat tmp;
    rgb.convertTo(tmp, CV_8U, rgb.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    rgb = tmp;
  }
  RgbImage img(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    const std::uint8_t* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + std::size_t(rgb.cols) * 3, &img.pixels[std::size_t(y) * rgb.cols * 3]);
  }
  return img;
}

cv::Mat to_bgr_mat(const RgbImage& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

bool is_supported_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return std::find(kExtensions.begin(), kExtensions.end(), ext) != kExtensions.end();
}

RgbImage read_image(const std::filesystem::path& path) {
  cv::Mat decoded = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (decoded.empty()) throw DataError("cannot decode image: " + path.string());
  return from_mat(decoded);
}

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DataError("cannot decode image: empty buffer");
  std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
  cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (decoded.empty()) throw DataError("cannot decode image: unrecognized data");
  return from_mat(decoded);
}

void write_image(const std::filesystem::path& path, const RgbImage& img) {
  if (!img.valid()) throw UsageError("write_image: invalid image");
  if (!cv::imwrite(path.string(), to_bgr_mat(img))) {
    throw DataError("cannot write image: " + path.string());
  }
}

std::string encode_png(const RgbImage& img) {
  std::vector<std::uint8_t> buf;
  cv::imencode(".png", to_bgr_mat(img), buf);
  return std::string(buf.begin(), buf.end());
}

RgbImage fit_within(const RgbImage& img, int max_side) {
  const int longest = std::max(img.width, img.height);
  if (longest <= max_side) return img;
  const double s = double(max_side) / longest;
  const int w = std::max(1, int(img.width * s + 0.5));
  const int h = std::max(1, int(img.height * s + 0.5));
  cv::Mat src(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_AREA);
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = dst.ptr<std::uint8_t>(y);
    std::copy(row, row + std::size_t(w) * 3, &out.pixels[std::size_t(y) * w * 3]);
  }
  return out;
}

}  // namespace cbir
