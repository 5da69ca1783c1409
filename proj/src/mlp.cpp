#include "rsm/mlp.hpp"

#include "rsm/error.hpp"

#include <cmath>
#include <limits>

namespace rsm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_input(const Mlp& net, Eigen::Index n) {
  if (net.empty()) throw InvalidInput("Mlp: network has no layers");
  if (n != net.input_dim()) {
    throw InvalidInput("Mlp: input dimension " + std::to_string(n) + ", expected " +
                       std::to_string(net.input_dim()));
  }
}

}  // namespace

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.weight.rows() != layer.bias.size()) {
      throw InvalidInput("Mlp: layer " + std::to_string(l) + " bias size does not match weight rows");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw InvalidInput("Mlp: layer " + std::to_string(l) + " input does not chain with previous output");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw InvalidInput("Mlp: layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

Mlp Mlp::random(std::span<const int> sizes, Rng& rng) {
  if (sizes.size() < 2) throw InvalidInput("Mlp::random: need at least input and output size");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    if (in < 1 || out < 1) throw InvalidInput("Mlp::random: layer sizes must be positive");
    const double stddev = std::sqrt(2.0 / in);
    Layer layer{Mat(out, in), Vec::Zero(out)};
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.weight(i, j) = stddev * rng.normal();
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::constant(int input_dim, double c) {
  return Mlp({Layer{Mat::Zero(1, input_dim), Vec::Constant(1, c)}});
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers_.empty()) return s;
  s.push_back(input_dim());
  for (const Layer& layer : layers_) s.push_back(static_cast<int>(layer.weight.rows()));
  return s;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& a = layers_[l];
    const Layer& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

MlpGradient MlpGradient::zeros_like(const Mlp& net) {
  MlpGradient g;
  for (const Layer& layer : net.layers()) {
    g.layers.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()), Vec::Zero(layer.bias.size())});
  }
  return g;
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

MlpGradient& MlpGradient::operator*=(double s) {
  for (Layer& layer : layers) {
    layer.weight *= s;
    layer.bias *= s;
  }
  return *this;
}

std::vector<double> MlpGradient::flatten() const {
  std::vector<double> out;
  for (const Layer& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) out.push_back(layer.weight(i, j));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out.push_back(layer.bias[i]);
  }
  return out;
}

Vec forward(const Mlp& net, const Vec& x) {
  check_input(net, x.size());
  Vec h = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Vec z = layers[l].weight * h + layers[l].bias;
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

double forward_scalar(const Mlp& net, const Vec& x) { return forward(net, x)[0]; }

Mat forward_batch(const Mlp& net, const Mat& x) {
  check_input(net, x.rows());
  Mat h = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mat z = layers[l].weight * h;
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

MlpGradient backward(const Mlp& net, const Mat& x, const Mat& d_out) {
  check_input(net, x.rows());
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  // activations[l] is the input of layer l
  std::vector<Mat> activations;
  activations.reserve(depth);
  activations.push_back(x);
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    Mat z = layers[l].weight * activations.back();
    z.colwise() += layers[l].bias;
    activations.push_back(z.cwiseMax(0.0));
  }
  if (d_out.rows() != net.output_dim() || d_out.cols() != x.cols()) {
    throw InvalidInput("backward: output gradient has wrong shape");
  }

  MlpGradient grad = MlpGradient::zeros_like(net);
  Mat delta = d_out;
  for (std::size_t l = depth; l-- > 0;) {
    grad.layers[l].weight.noalias() = delta * activations[l].transpose();
    grad.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Mat prev = layers[l].weight.transpose() * delta;
    // ReLU mask: a strictly positive activation means a positive pre-activation
    prev = (activations[l].array() > 0.0).select(prev, 0.0);
    delta = std::move(prev);
  }
  return grad;
}

std::vector<Interval> ibp_forward(const Mlp& net, std::span<const Interval> box) {
  check_input(net, static_cast<Eigen::Index>(box.size()));
  Vec lo(box.size()), hi(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!(box[i].lo <= box[i].hi)) throw InvalidInput("ibp_forward: interval with lo > hi");
    lo[i] = box[i].lo;
    hi[i] = box[i].hi;
  }
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Mat& w = layers[l].weight;
    const Mat aw = w.cwiseAbs();
    const Vec c = 0.5 * (lo + hi);
    const Vec r = 0.5 * (hi - lo);
    const Vec oc = w * c + layers[l].bias;
    // outward rounding: bound on the floating error of both dot products
    const double gamma = static_cast<double>(w.cols() + 2) * kEps;
    const Vec orad = aw * r + gamma * (aw * (c.cwiseAbs() + r) + layers[l].bias.cwiseAbs());
    lo = oc - orad;
    hi = oc + orad;
    if (l + 1 < layers.size()) {
      lo = lo.cwiseMax(0.0);
      hi = hi.cwiseMax(0.0);
    }
  }
  std::vector<Interval> out(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) out[i] = {lo[i], hi[i]};
  return out;
}

Box ibp_forward(const Mlp& net, const Box& box) {
  const auto iv = box.intervals();
  return Box::from_intervals(ibp_forward(net, std::span<const Interval>(iv)));
}

double l1_operator_norm(const Mat& w) {
  if (w.size() == 0) return 0.0;
  return w.cwiseAbs().colwise().sum().maxCoeff();
}

double lipschitz_l1(const Mlp& net) {
  double l = 1.0;
  for (const Layer& layer : net.layers()) l *= l1_operator_norm(layer.weight);
  return l;
}

MlpGradient lipschitz_l1_gradient(const Mlp& net) {
  MlpGradient grad = MlpGradient::zeros_like(net);
  const auto& layers = net.layers();
  std::vector<double> norms;
  std::vector<Eigen::Index> argmax;
  for (const Layer& layer : layers) {
    Eigen::Index col = 0;
    const double n = layer.weight.cwiseAbs().colwise().sum().maxCoeff(&col);
    norms.push_back(n);
    argmax.push_back(col);
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    double others = 1.0;
    for (std::size_t k = 0; k < layers.size(); ++k)
      if (k != l) others *= norms[k];
    const auto column = layers[l].weight.col(argmax[l]);
    grad.layers[l].weight.col(argmax[l]) = others * column.array().sign().matrix();
  }
  return grad;
}

IntervalBounder::IntervalBounder(const Mlp& net) : net_(&net) {
  if (net.output_dim() != 1) throw InvalidInput("IntervalBounder: network must have scalar output");
  for (const Layer& layer : net.layers()) {
    abs_weight_.push_back(layer.weight.cwiseAbs());
    center_.emplace_back(layer.weight.rows());
    radius_.emplace_back(layer.weight.rows());
  }
}

Interval IntervalBounder::bound(const Vec& lo, const Vec& hi) {
  check_input(*net_, lo.size());
  const auto& layers = net_->layers();
  const std::size_t depth = layers.size();
  Vec c = 0.5 * (lo + hi);
  Vec r = 0.5 * (hi - lo);
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = layers[l];
    const double gamma = static_cast<double>(layer.weight.cols() + 2) * kEps;
    Vec& oc = center_[l];
    Vec& orad = radius_[l];
    oc.noalias() = layer.weight * c;
    oc += layer.bias;
    orad.noalias() = abs_weight_[l] * ((1.0 + gamma) * r + gamma * c.cwiseAbs());
    orad += gamma * layer.bias.cwiseAbs();
    if (l + 1 < depth) {
      // ReLU on [oc - orad, oc + orad] in centre/radius form
      const auto lo_a = (oc - orad).cwiseMax(0.0);
      const auto hi_a = (oc + orad).cwiseMax(0.0);
      c = 0.5 * (lo_a + hi_a);
      r = 0.5 * (hi_a - lo_a);
    } else {
      return {oc[0] - orad[0], oc[0] + orad[0]};
    }
  }
  return {};
}

Eigen::RowVectorXd IntervalBounder::upper_batch(const Mat& center, const Mat& radius) const {
  check_input(*net_, center.rows());
  const auto& layers = net_->layers();
  const std::size_t depth = layers.size();
  Mat c = center;
  Mat r = radius;
  Mat oc, orad;
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = layers[l];
    const double gamma = static_cast<double>(layer.weight.cols() + 2) * kEps;
    oc.noalias() = layer.weight * c;
    oc.colwise() += layer.bias;
    orad.noalias() = abs_weight_[l] * ((1.0 + gamma) * r + gamma * c.cwiseAbs());
    orad.colwise() += gamma * layer.bias.cwiseAbs();
    if (l + 1 < depth) {
      const Mat lo_a = (oc - orad).cwiseMax(0.0);
      const Mat hi_a = (oc + orad).cwiseMax(0.0);
      c = 0.5 * (lo_a + hi_a);
      r = 0.5 * (hi_a - lo_a);
    }
  }
  return (oc + orad).row(0);
}

}  // namespace rsm
