#include "rsm/box.hpp"

#include "rsm/error.hpp"

namespace rsm {

Box::Box(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw InvalidInput("Box: lo/hi size mismatch");
  if (lo_.size() == 0) throw InvalidInput("Box: dimension must be at least 1");
  for (Eigen::Index i = 0; i < lo_.size(); ++i) {
    if (!(lo_[i] <= hi_[i])) throw InvalidInput("Box: lo > hi in coordinate " + std::to_string(i));
  }
}

Box Box::from_intervals(const std::vector<Interval>& iv) {
  Vec lo(iv.size()), hi(iv.size());
  for (std::size_t i = 0; i < iv.size(); ++i) {
    lo[i] = iv[i].lo;
    hi[i] = iv[i].hi;
  }
  return Box(std::move(lo), std::move(hi));
}

std::vector<Interval> Box::intervals() const {
  std::vector<Interval> out(lo_.size());
  for (Eigen::Index i = 0; i < lo_.size(); ++i) out[i] = {lo_[i], hi_[i]};
  return out;
}

bool Box::contains(const Vec& x, double tol) const {
  if (x.size() != lo_.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
  }
  return true;
}

bool Box::contains(const Box& inner) const {
  if (inner.dim() != dim()) return false;
  return (inner.lo_.array() >= lo_.array()).all() && (inner.hi_.array() <= hi_.array()).all();
}

bool Box::has_interior() const { return (hi_.array() > lo_.array()).all(); }

Box affine_image(const Mat& a, const Box& box, const Vec& b) {
  if (a.cols() != box.dim() || a.rows() != b.size()) throw InvalidInput("affine_image: dimension mismatch");
  const Vec c = box.center();
  const Vec r = 0.5 * box.width();
  const Vec oc = a * c + b;
  const Vec orad = a.cwiseAbs() * r;
  return Box(oc - orad, oc + orad);
}

Box operator+(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) throw InvalidInput("Box sum: dimension mismatch");
  return Box(a.lo() + b.lo(), a.hi() + b.hi());
}

Box operator+(const Box& a, const Vec& shift) {
  if (a.dim() != shift.size()) throw InvalidInput("Box shift: dimension mismatch");
  return Box(a.lo() + shift, a.hi() + shift);
}

}  // namespace rsm
