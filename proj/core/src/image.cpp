#include "partshot/image.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "partshot/errors.hpp"

namespace partshot {
namespace {

Image from_bgr(const cv::Mat& bgr) {
  cv::Mat f;
  bgr.convertTo(f, CV_32FC3, 1.0 / 255.0);
  Image out(f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<cv::Vec3f>(y);
    for (int x = 0; x < f.cols; ++x) {
      out.at(0, y, x) = row[x][2];
      out.at(1, y, x) = row[x][1];
      out.at(2, y, x) = row[x][0];
    }
  }
  return out;
}

cv::Mat to_bgr_float(const Image& image) {
  cv::Mat f(image.height, image.width, CV_32FC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = f.ptr<cv::Vec3f>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x] = cv::Vec3f(image.at(2, y, x), image.at(1, y, x), image.at(0, y, x));
    }
  }
  return f;
}

}  // namespace

Image read_image(const std::filesystem::path& path, int side) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) return {};
  if (bgr.rows != side || bgr.cols != side) {
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(side, side), 0, 0, cv::INTER_AREA);
    bgr = resized;
  }
  return from_bgr(bgr);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  cv::Mat f = to_bgr_float(image);
  cv::Mat u8;
  f.convertTo(u8, CV_8UC3, 255.0);
  if (!cv::imwrite(path.string(), u8)) {
    throw StoreError("failed to write " + path.string());
  }
}

Image resize(const Image& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  cv::Mat src = to_bgr_float(image);
  cv::Mat dst;
  const bool shrinking = height < image.height && width < image.width;
  cv::resize(src, dst, cv::Size(width, height), 0, 0,
             shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const auto* row = dst.ptr<cv::Vec3f>(y);
    for (int x = 0; x < width; ++x) {
      out.at(0, y, x) = row[x][2];
      out.at(1, y, x) = row[x][1];
      out.at(2, y, x) = row[x][0];
    }
  }
  return out;
}

}  // namespace partshot
