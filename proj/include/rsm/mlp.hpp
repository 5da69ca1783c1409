#pragma once

#include "rsm/box.hpp"
#include "rsm/rng.hpp"

#include <span>
#include <vector>

namespace rsm {

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
};

/// Feed-forward network: ReLU on every hidden layer, identity on the output.
class Mlp {
 public:
  Mlp() = default;
  /// Validates that layer sizes chain and all parameters are finite.
  explicit Mlp(std::vector<Layer> layers);

  /// He-initialised network with the given layer sizes (input first) and
  /// zero biases.
  static Mlp random(std::span<const int> sizes, Rng& rng);
  /// Network computing the constant c (one layer, zero weights).
  static Mlp constant(int input_dim, double c);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> sizes() const;
  std::size_t parameter_count() const;
  bool empty() const { return layers_.empty(); }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  bool operator==(const Mlp& other) const;

 private:
  std::vector<Layer> layers_;
};

/// Parameter-shaped container for gradients and optimiser moments.
struct MlpGradient {
  std::vector<Layer> layers;

  static MlpGradient zeros_like(const Mlp& net);
  MlpGradient& operator+=(const MlpGradient& other);
  MlpGradient& operator*=(double s);
  /// Flattened view: weights row-major, then bias, layer by layer.
  std::vector<double> flatten() const;
};

Vec forward(const Mlp& net, const Vec& x);
/// Forward pass for a scalar-output network.
double forward_scalar(const Mlp& net, const Vec& x);
/// Batched forward pass; inputs are the columns of `x`.
Mat forward_batch(const Mlp& net, const Mat& x);

/// Reverse-mode gradient of a scalar loss L(Y) where Y = forward_batch(net, x).
/// `d_out` holds dL/dY with the same shape as Y. ReLU'(0) is taken as 0.
MlpGradient backward(const Mlp& net, const Mat& x, const Mat& d_out);

/// Interval bound propagation. Sound: forward(net, x) lies in the result for
/// every x in `box`.
std::vector<Interval> ibp_forward(const Mlp& net, std::span<const Interval> box);
Box ibp_forward(const Mlp& net, const Box& box);

/// Product of the l1-induced operator norms (max absolute column sum) of the
/// weight matrices; a global l1 -> l1 Lipschitz bound.
double lipschitz_l1(const Mlp& net);
/// Max absolute column sum of a matrix.
double l1_operator_norm(const Mat& w);
/// Subgradient of lipschitz_l1 w.r.t. the weights. Ties in the column
/// maximum resolve to the first column. Bias entries are zero.
MlpGradient lipschitz_l1_gradient(const Mlp& net);

/// Reusable interval evaluator for a scalar-output network. Caches |W| and
/// scratch buffers, so it is cheap to call millions of times. Not thread safe.
class IntervalBounder {
 public:
  explicit IntervalBounder(const Mlp& net);
  Interval bound(const Vec& lo, const Vec& hi);
  /// Upper end of bound(lo, hi).
  double upper(const Vec& lo, const Vec& hi) { return bound(lo, hi).hi; }
  /// Upper bounds for a batch of boxes in centre/radius form, one per column.
  Eigen::RowVectorXd upper_batch(const Mat& center, const Mat& radius) const;

 private:
  const Mlp* net_;
  std::vector<Mat> abs_weight_;
  std::vector<Vec> center_;
  std::vector<Vec> radius_;
};

}  // namespace rsm
