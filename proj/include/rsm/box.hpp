#pragma once

#include <Eigen/Dense>

#include <vector>

namespace rsm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Axis-aligned box [lo, hi] in R^n.
class Box {
 public:
  Box() = default;
  /// Throws InvalidInput on size mismatch, empty dimension or lo > hi.
  Box(Vec lo, Vec hi);
  static Box point(const Vec& x) { return Box(x, x); }
  static Box from_intervals(const std::vector<Interval>& iv);

  int dim() const { return static_cast<int>(lo_.size()); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  Interval operator[](int i) const { return {lo_[i], hi_[i]}; }
  Vec center() const { return 0.5 * (lo_ + hi_); }
  Vec width() const { return hi_ - lo_; }
  std::vector<Interval> intervals() const;

  bool contains(const Vec& x, double tol = 0.0) const;
  /// True when `inner` lies inside this box.
  bool contains(const Box& inner) const;
  /// True when every coordinate satisfies lo < hi.
  bool has_interior() const;

 private:
  Vec lo_;
  Vec hi_;
};

/// Exact image of a box under x -> A x + b in interval arithmetic.
Box affine_image(const Mat& a, const Box& box, const Vec& b);

/// Minkowski sum of two boxes.
Box operator+(const Box& a, const Box& b);
Box operator+(const Box& a, const Vec& shift);

}  // namespace rsm
