#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace pdm {

// One [channels, height, width] grid of real values stored as a flat array,
// row-major within each channel: (c, y, x) lives at (c*height + y)*width + x.
// All pixel math runs through the Eigen array `data`.
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::ArrayXd data;

  ImageTensor() = default;

  ImageTensor(int c, int h, int w) : channels(c), height(h), width(w) {
    if (c < 1 || h < 1 || w < 1)
      throw std::invalid_argument("ImageTensor: dimensions must be positive");
    data = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(c) * h * w);
  }

  static ImageTensor filled(int c, int h, int w, double value) {
    ImageTensor img(c, h, w);
    img.data.setConstant(value);
    return img;
  }

  Eigen::Index size() const { return data.size(); }

  bool same_shape(const ImageTensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  Eigen::Index index_of(int c, int y, int x) const {
    return (static_cast<Eigen::Index>(c) * height + y) * width + x;
  }

  double operator()(int c, int y, int x) const { return data[index_of(c, y, x)]; }
  double& operator()(int c, int y, int x) { return data[index_of(c, y, x)]; }

  // Row-major matrix view of one channel, for block-wise spatial work.
  auto channel(int c) const {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data() + static_cast<Eigen::Index>(c) * height * width, height, width);
  }
};

inline void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* where) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(where) + ": operands have different shapes");
}

inline bool all_finite(const ImageTensor& img) { return img.data.isFinite().all(); }

}  // namespace pdm
