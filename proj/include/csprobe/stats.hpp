#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csprobe/error.hpp"

namespace csprobe {

/// Single-pass co-moment accumulator for the sample Pearson correlation.
template <typename Scalar>
class CorrelationAccumulator {
 public:
  void push(Scalar x, Scalar y) {
    ++n_;
    const Scalar inv = Scalar(1) / static_cast<Scalar>(n_);
    const Scalar dx = x - mean_x_;
    mean_x_ += dx * inv;
    const Scalar dy = y - mean_y_;
    mean_y_ += dy * inv;
    m2_x_ += dx * (x - mean_x_);
    m2_y_ += dy * (y - mean_y_);
    c_xy_ += dx * (y - mean_y_);
  }

  std::size_t count() const noexcept { return n_; }

  Scalar r() const {
    if (n_ < 2) throw Error(ErrorCode::InvalidInput, "correlation needs at least two samples");
    if (m2_x_ == Scalar(0) || m2_y_ == Scalar(0)) {
      throw Error(ErrorCode::UndefinedCorrelation, "correlation undefined for a constant series");
    }
    return std::clamp(c_xy_ / std::sqrt(m2_x_ * m2_y_), Scalar(-1), Scalar(1));
  }

 private:
  std::size_t n_ = 0;
  Scalar mean_x_ = 0;
  Scalar mean_y_ = 0;
  Scalar m2_x_ = 0;
  Scalar m2_y_ = 0;
  Scalar c_xy_ = 0;
};

template <typename Scalar>
Scalar pearson_r(std::span<const Scalar> xs, std::span<const Scalar> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::InvalidInput, "series lengths differ: " + std::to_string(xs.size()) +
                                             " vs " + std::to_string(ys.size()));
  }
  CorrelationAccumulator<Scalar> acc;
  for (std::size_t i = 0; i < xs.size(); ++i) acc.push(xs[i], ys[i]);
  return acc.r();
}

template <typename Scalar>
Scalar pearson_r(const std::vector<Scalar>& xs, const std::vector<Scalar>& ys) {
  return pearson_r(std::span<const Scalar>(xs), std::span<const Scalar>(ys));
}

}  // namespace csprobe
