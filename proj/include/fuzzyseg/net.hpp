#ifndef FUZZYSEG_NET_HPP
#define FUZZYSEG_NET_HPP

#include "fuzzyseg/field.hpp"
#include "fuzzyseg/losses.hpp"
#include "fuzzyseg/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

namespace fuzzyseg {

enum class ModelKind { LogitField, ConvStack };

/// Parameterization of the membership field f(y; theta).
///
/// `logit_field` holds one free logit per pixel and class (the image size is
/// part of the model). `conv_stack` is `layers` 3x3 same-padded convolutions
/// with ReLU, `channels` wide, followed by a 1x1 projection to `classes` logits.
struct ModelSpec {
  ModelKind kind = ModelKind::ConvStack;
  int layers = 4;
  int channels = 16;
  int classes = 3;
  Index height = 0;  ///< logit_field only
  Index width = 0;   ///< logit_field only
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw usage_error("model needs at least 2 classes");
    if (kind == ModelKind::ConvStack && (layers < 1 || channels < 1))
      throw usage_error("conv_stack needs layers >= 1 and channels >= 1");
    if (kind == ModelKind::LogitField && (height < 1 || width < 1))
      throw usage_error("logit_field needs the image height and width");
  }

  /// logit_field: H*W*C. conv_stack: (9*1*K + K) + (L-1)(9*K*K + K) + (K*C + C).
  Index parameter_count() const {
    if (kind == ModelKind::LogitField) return height * width * classes;
    const Index k = channels;
    return (9 * k + k) + (layers - 1) * (9 * k * k + k) + (k * classes + classes);
  }
};

struct TensorShape {
  std::string name;
  std::vector<Index> dims;
  Index offset = 0;
  Index size = 0;
};

/// Flat parameter vector plus the table describing how it splits into tensors.
template <typename Scalar = double>
struct ParamSet {
  Vector<Scalar> values;
  std::vector<TensorShape> shapes;

  Index size() const { return values.size(); }
};

inline std::vector<TensorShape> parameter_shapes(const ModelSpec& spec) {
  spec.validate();
  std::vector<TensorShape> shapes;
  Index offset = 0;
  auto add = [&](std::string name, std::vector<Index> dims) {
    Index n = 1;
    for (Index d : dims) n *= d;
    shapes.push_back({std::move(name), std::move(dims), offset, n});
    offset += n;
  };
  if (spec.kind == ModelKind::LogitField) {
    add("logits", {spec.height, spec.width, spec.classes});
    return shapes;
  }
  Index in = 1;
  for (int l = 0; l < spec.layers; ++l) {
    add("conv" + std::to_string(l) + ".weight", {9 * in, spec.channels});
    add("conv" + std::to_string(l) + ".bias", {spec.channels});
    in = spec.channels;
  }
  add("head.weight", {in, spec.classes});
  add("head.bias", {spec.classes});
  return shapes;
}

/// Deterministic initialization: uniform weights with bound sqrt(6 / fan_in)
/// (sqrt(3 / fan_in) for the head), uniform biases with bound 1 / sqrt(fan_in),
/// logits uniform in [-0.5, 0.5].
///
/// Nonzero biases matter: with zero biases and non-negative inputs the stack is
/// positively homogeneous and training stalls at uniform memberships.
template <typename Scalar = double>
ParamSet<Scalar> init_params(const ModelSpec& spec) {
  ParamSet<Scalar> p;
  p.shapes = parameter_shapes(spec);
  p.values = Vector<Scalar>::Zero(spec.parameter_count());
  CounterRng rng(spec.seed, 0x6E6574);
  double fan_in = 1.0;
  for (const TensorShape& t : p.shapes) {
    double bound = 0.5;
    if (spec.kind == ModelKind::ConvStack) {
      if (t.dims.size() == 1) {
        bound = 1.0 / std::sqrt(fan_in);
      } else {
        fan_in = static_cast<double>(t.dims[0]);
        bound = std::sqrt((t.name == "head.weight" ? 3.0 : 6.0) / fan_in);
      }
    }
    for (Index i = 0; i < t.size; ++i) p.values(t.offset + i) = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  return p;
}

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
std::uint64_t fingerprint(const Vector<Scalar>& v) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()) * sizeof(Scalar); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Gathers each pixel's 3x3 neighborhood (zero outside the image): N x 9*C.
template <typename Scalar>
RowMatrix<Scalar> im2col(const RowMatrix<Scalar>& act, Index height, Index width) {
  const Index cin = act.cols();
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(act.rows(), 9 * cin);
  for (Index r = 0; r < height; ++r)
    for (Index c = 0; c < width; ++c) {
      const Index j = r * width + c;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= height || cc < 0 || cc >= width) continue;
          const Index tap = (dr + 1) * 3 + (dc + 1);
          cols.row(j).segment(tap * cin, cin) = act.row(rr * width + cc);
        }
    }
  return cols;
}

/// Adjoint of im2col.
template <typename Scalar>
RowMatrix<Scalar> col2im(const RowMatrix<Scalar>& dcols, Index height, Index width, Index cin) {
  RowMatrix<Scalar> act = RowMatrix<Scalar>::Zero(dcols.rows(), cin);
  for (Index r = 0; r < height; ++r)
    for (Index c = 0; c < width; ++c) {
      const Index j = r * width + c;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= height || cc < 0 || cc >= width) continue;
          const Index tap = (dr + 1) * 3 + (dc + 1);
          act.row(rr * width + cc) += dcols.row(j).segment(tap * cin, cin);
        }
    }
  return act;
}

template <typename Scalar>
Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> tensor(
    const ParamSet<Scalar>& p, std::size_t index) {
  const TensorShape& t = p.shapes[index];
  const Index rows = t.dims[0];
  const Index cols = t.dims.size() > 1 ? t.size / rows : 1;
  return {p.values.data() + t.offset, t.dims.size() > 1 ? rows : 1, t.dims.size() > 1 ? cols : rows};
}

}  // namespace detail

/// Intermediate values recorded by forward() for backward().
namespace detail {

/// Same-padded 3x3 convolution as nine shifted products, without an im2col buffer.
template <typename Scalar>
RowMatrix<Scalar> conv3x3(const RowMatrix<Scalar>& act, const Eigen::Map<const RowMatrix<Scalar>>& weight,
                          const Eigen::Map<const RowMatrix<Scalar>>& bias, Index height, Index width) {
  const Index cin = act.cols(), k = weight.cols();
  RowMatrix<Scalar> out(act.rows(), k);
  out.rowwise() = bias.row(0);
  RowMatrix<Scalar> prod(act.rows(), k);
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      const Index tap = (dr + 1) * 3 + (dc + 1);
      prod.noalias() = act * weight.middleRows(tap * cin, cin);
      const Index c0 = std::max<Index>(0, -dc), c1 = std::min<Index>(width, width - dc);
      for (Index r = std::max<Index>(0, -dr); r < std::min<Index>(height, height - dr); ++r)
        out.middleRows(r * width + c0, c1 - c0) += prod.middleRows((r + dr) * width + c0 + dc, c1 - c0);
    }
  return out;
}

}  // namespace detail

template <typename Scalar = double>
struct ForwardCache {
  Index height = 0;
  Index width = 0;
  std::uint64_t param_fingerprint = 0;
  std::vector<detail::RowMatrix<Scalar>> columns;         ///< im2col input of each conv layer
  std::vector<detail::RowMatrix<Scalar>> preactivations;  ///< conv output before ReLU
  detail::RowMatrix<Scalar> last_hidden;                  ///< input of the 1x1 head

  /// Per-layer sign pattern of the pre-activations (which ReLUs are open).
  std::vector<std::vector<bool>> active_pattern() const {
    std::vector<std::vector<bool>> out;
    for (const auto& z : preactivations) {
      std::vector<bool> layer(static_cast<std::size_t>(z.size()));
      for (Index i = 0; i < z.size(); ++i) layer[static_cast<std::size_t>(i)] = z.data()[i] > Scalar(0);
      out.push_back(std::move(layer));
    }
    return out;
  }
};

template <typename Scalar = double>
struct ForwardResult {
  LogitField<Scalar> logits;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
ForwardResult<Scalar> forward(const ModelSpec& spec, const ParamSet<Scalar>& params, const ScalarImage<Scalar>& img) {
  spec.validate();
  if (params.size() != spec.parameter_count()) throw usage_error("parameter vector does not match model spec");
  ForwardResult<Scalar> out;
  out.cache.height = img.height();
  out.cache.width = img.width();
  out.cache.param_fingerprint = detail::fingerprint(params.values);
  out.logits.height = img.height();
  out.logits.width = img.width();
  const Index n = img.size();

  if (spec.kind == ModelKind::LogitField) {
    if (img.height() != spec.height || img.width() != spec.width)
      throw usage_error("image shape does not match logit_field model");
    out.logits.values = Eigen::Map<const ChannelArray<Scalar>>(params.values.data(), n, spec.classes);
    return out;
  }

  if (img.height() < 3 || img.width() < 3) throw usage_error("conv_stack needs images of at least 3x3");
  detail::RowMatrix<Scalar> act = Eigen::Map<const detail::RowMatrix<Scalar>>(img.pixels().data(), n, 1);
  for (int l = 0; l < spec.layers; ++l) {
    const auto weight = detail::tensor(params, 2 * static_cast<std::size_t>(l));
    const auto bias = detail::tensor(params, 2 * static_cast<std::size_t>(l) + 1);
    detail::RowMatrix<Scalar> cols = detail::im2col(act, img.height(), img.width());
    detail::RowMatrix<Scalar> z = detail::conv3x3(act, weight, bias, img.height(), img.width());
    act = z.cwiseMax(Scalar(0));
    out.cache.columns.push_back(std::move(cols));
    out.cache.preactivations.push_back(std::move(z));
  }
  const auto head_w = detail::tensor(params, 2 * static_cast<std::size_t>(spec.layers));
  const auto head_b = detail::tensor(params, 2 * static_cast<std::size_t>(spec.layers) + 1);
  detail::RowMatrix<Scalar> logits = act * head_w;
  logits.rowwise() += head_b.row(0);
  out.logits.values = logits.array();
  out.cache.last_hidden = std::move(act);
  return out;
}


/// Logits only: the inference path. Keeps no intermediate state.
template <typename Scalar>
LogitField<Scalar> forward_logits(const ModelSpec& spec, const ParamSet<Scalar>& params,
                                  const ScalarImage<Scalar>& img) {
  if (spec.kind == ModelKind::LogitField) return forward(spec, params, img).logits;
  spec.validate();
  if (params.size() != spec.parameter_count()) throw usage_error("parameter vector does not match model spec");
  if (img.height() < 3 || img.width() < 3) throw usage_error("conv_stack needs images of at least 3x3");
  const Index n = img.size();
  detail::RowMatrix<Scalar> act = Eigen::Map<const detail::RowMatrix<Scalar>>(img.pixels().data(), n, 1);
  for (int l = 0; l < spec.layers; ++l) {
    const auto li = 2 * static_cast<std::size_t>(l);
    act = detail::conv3x3(act, detail::tensor(params, li), detail::tensor(params, li + 1), img.height(), img.width())
              .cwiseMax(Scalar(0));
  }
  const auto head = 2 * static_cast<std::size_t>(spec.layers);
  detail::RowMatrix<Scalar> logits = act * detail::tensor(params, head);
  logits.rowwise() += detail::tensor(params, head + 1).row(0);
  LogitField<Scalar> out;
  out.height = img.height();
  out.width = img.width();
  out.values = logits.array();
  return out;
}

/// Gradient of the scalar loss with respect to every parameter, given dL/dlogits.
template <typename Scalar>
Vector<Scalar> backward(const ModelSpec& spec, const ParamSet<Scalar>& params, const ForwardCache<Scalar>& cache,
                        const ChannelArray<Scalar>& grad_logits) {
  if (cache.param_fingerprint != detail::fingerprint(params.values))
    throw usage_error("stale forward cache: parameters changed since forward()");
  const Index n = cache.height * cache.width;
  if (grad_logits.rows() != n || grad_logits.cols() != spec.classes)
    throw usage_error("logit gradient shape mismatch");
  Vector<Scalar> grad = Vector<Scalar>::Zero(params.size());
  if (spec.kind == ModelKind::LogitField) {
    Eigen::Map<ChannelArray<Scalar>>(grad.data(), n, spec.classes) = grad_logits;
    return grad;
  }

  auto slot = [&](std::size_t index) {
    const TensorShape& t = params.shapes[index];
    return Eigen::Map<detail::RowMatrix<Scalar>>(grad.data() + t.offset, t.dims.size() > 1 ? t.dims[0] : 1,
                                                 t.dims.size() > 1 ? t.size / t.dims[0] : t.dims[0]);
  };

  const detail::RowMatrix<Scalar> dlogits = grad_logits.matrix();
  const auto head = 2 * static_cast<std::size_t>(spec.layers);
  slot(head).noalias() = cache.last_hidden.transpose() * dlogits;
  slot(head + 1) = dlogits.colwise().sum();
  detail::RowMatrix<Scalar> dact = dlogits * detail::tensor(params, head).transpose();

  for (int l = spec.layers - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const detail::RowMatrix<Scalar> dz =
        (cache.preactivations[li].array() > Scalar(0)).select(dact, detail::RowMatrix<Scalar>::Zero(n, dact.cols()));
    slot(2 * li).noalias() = cache.columns[li].transpose() * dz;
    slot(2 * li + 1) = dz.colwise().sum();
    if (l == 0) break;
    const detail::RowMatrix<Scalar> dcols = dz * detail::tensor(params, 2 * li).transpose();
    dact = detail::col2im(dcols, cache.height, cache.width, cache.preactivations[li - 1].cols());
  }
  return grad;
}

enum class OptimMethod { Sgd, Adam };

struct OptimizerConfig {
  OptimMethod method = OptimMethod::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int steps = 100;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw usage_error("learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw usage_error("adam betas in [0,1)");
    if (steps < 0) throw usage_error("steps must be >= 0");
  }
};

/// SGD or bias-corrected Adam. Owns its moment estimates.
template <typename Scalar = double>
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, Index parameters)
      : cfg_(cfg), m_(Vector<Scalar>::Zero(parameters)), v_(Vector<Scalar>::Zero(parameters)) {
    cfg_.validate();
  }

  void step(Vector<Scalar>& params, const Vector<Scalar>& grad) {
    if (grad.size() != params.size() || params.size() != m_.size()) throw usage_error("optimizer size mismatch");
    const auto lr = static_cast<Scalar>(cfg_.learning_rate);
    if (cfg_.method == OptimMethod::Sgd) {
      params -= lr * grad;
      return;
    }
    ++t_;
    const auto b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + static_cast<Scalar>(cfg_.epsilon));
  }

  long steps_taken() const { return t_; }

 private:
  OptimizerConfig cfg_;
  Vector<Scalar> m_;
  Vector<Scalar> v_;
  long t_ = 0;
};

}  // namespace fuzzyseg

#endif  // FUZZYSEG_NET_HPP
