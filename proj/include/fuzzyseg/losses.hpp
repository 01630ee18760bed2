#ifndef FUZZYSEG_LOSSES_HPP
#define FUZZYSEG_LOSSES_HPP

#include "fuzzyseg/clustering.hpp"
#include "fuzzyseg/field.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace fuzzyseg {

/// Pre-softmax network output, laid out like MembershipField.
template <typename Scalar = double>
struct LogitField {
  Index height = 0;
  Index width = 0;
  ChannelArray<Scalar> values;

  Index pixels() const { return values.rows(); }
  Index classes() const { return values.cols(); }
};

enum class MeansMode { Detached, Differentiated };

struct LossConfig {
  double q = 2.0;
  double beta = 0.0;
  double alpha = 0.0;   ///< weight of the supervised term in semi-supervised losses
  double lambda = 0.0;  ///< total-variation weight for the Mumford-Shah loss
  MeansMode means_mode = MeansMode::Detached;
  Neighborhood neighborhood;

  void validate() const {
    if (!(q >= 1.0)) throw usage_error("loss q must be >= 1");
    if (!(beta >= 0.0) || !(alpha >= 0.0) || !(lambda >= 0.0)) throw usage_error("loss weights must be >= 0");
  }
};

template <typename Scalar = double>
struct LossValueGrad {
  Scalar value = 0;
  ChannelArray<Scalar> grad_logits;
  Scalar unsupervised = 0;  ///< intensity-driven part of value
  Scalar supervised = 0;    ///< label-driven part of value (before alpha)
};

inline constexpr double kTvSmoothing = 1e-8;
inline constexpr double kDiceEpsilon = 1e-8;
inline constexpr double kCeClamp = 1e-12;

/// Per-pixel softmax with max subtraction.
template <typename Scalar>
MembershipField<Scalar> softmax(const LogitField<Scalar>& logits) {
  ChannelArray<Scalar> f(logits.pixels(), logits.classes());
  for (Index j = 0; j < f.rows(); ++j) {
    const Scalar top = logits.values.row(j).maxCoeff();
    f.row(j) = (logits.values.row(j) - top).exp();
    f.row(j) /= f.row(j).sum();
  }
  return MembershipField<Scalar>(logits.height, logits.width, std::move(f));
}

/// Fuzzy-weighted class means of a softmax field (same rule as means_update).
template <typename Scalar>
ClassMeans<Scalar> soft_class_means(const ScalarImage<Scalar>& img, const MembershipField<Scalar>& f, double q) {
  return means_update(img, f, q);
}

namespace detail {

/// Pulls dL/df back through the softmax: dL/dz_jk = f_jk (g_jk - sum_m f_jm g_jm).
template <typename Scalar>
ChannelArray<Scalar> softmax_backward(const MembershipField<Scalar>& f, const ChannelArray<Scalar>& grad_f) {
  const auto& v = f.values();
  ChannelArray<Scalar> out(v.rows(), v.cols());
  for (Index j = 0; j < v.rows(); ++j) {
    const Scalar dot = (v.row(j) * grad_f.row(j)).sum();
    out.row(j) = v.row(j) * (grad_f.row(j) - dot);
  }
  return out;
}

template <typename Scalar>
void require_logits(const LogitField<Scalar>& logits, Index height, Index width) {
  if (logits.height != height || logits.width != width || logits.pixels() != height * width)
    throw usage_error("logit field shape mismatch");
  if (logits.classes() < 2) throw usage_error("logit field needs at least 2 classes");
}

template <typename Scalar>
void require_truth(const LogitField<Scalar>& logits, const GroundTruth<Scalar>& g) {
  require_logits(logits, g.height(), g.width());
  if (g.classes() != logits.classes()) throw usage_error("ground truth class count mismatch");
}

/// Intensity term sum_jk P_jk (y_j - v_k)^2 with P = f^q and v the P-weighted
/// means. Adds dL/dP into grad_p. In differentiated mode the dependence of v
/// on P is included.
template <typename Scalar>
Scalar intensity_term(const ScalarImage<Scalar>& img, const ChannelArray<Scalar>& p, MeansMode mode,
                      ChannelArray<Scalar>& grad_p) {
  const Index n = p.rows();
  const Index c = p.cols();
  std::vector<long double> num(static_cast<std::size_t>(c), 0), den(static_cast<std::size_t>(c), 0);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < c; ++k) {
      num[static_cast<std::size_t>(k)] += static_cast<long double>(p(j, k) * img[j]);
      den[static_cast<std::size_t>(k)] += p(j, k);
    }
  ClassMeans<Scalar> v(c);
  Vector<Scalar> mass(c);
  for (Index k = 0; k < c; ++k) {
    long double m = den[static_cast<std::size_t>(k)];
    if (m < 1e-12L) m += 1e-12L;
    mass(k) = static_cast<Scalar>(m);
    v(k) = static_cast<Scalar>(num[static_cast<std::size_t>(k)] / m);
  }
  long double value = 0;
  Vector<Scalar> dv = Vector<Scalar>::Zero(c);  // dL/dv_k
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < c; ++k) {
      const Scalar d = img[j] - v(k);
      value += static_cast<long double>(p(j, k) * d * d);
      grad_p(j, k) += d * d;
      dv(k) -= Scalar(2) * p(j, k) * d;
    }
  if (mode == MeansMode::Differentiated) {
    // dv_k/dP_jk = (y_j - v_k) / mass_k
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < c; ++k) grad_p(j, k) += dv(k) * (img[j] - v(k)) / mass(k);
  }
  return static_cast<Scalar>(value);
}

/// Converts dL/dP (P = f^q) into dL/df.
template <typename Scalar>
ChannelArray<Scalar> chain_power(const ChannelArray<Scalar>& f, const ChannelArray<Scalar>& grad_p, double q) {
  if (q == 1.0) return grad_p;
  if (q == 2.0) return grad_p * Scalar(2) * f;
  return grad_p * static_cast<Scalar>(q) * f.pow(static_cast<Scalar>(q - 1.0));
}

}  // namespace detail

/// Unsupervised RFCM loss on softmax memberships:
/// sum f^q (y - v)^2 + beta * sum f^q * (neighbor disagreement).
template <typename Scalar>
LossValueGrad<Scalar> loss_rfcm(const ScalarImage<Scalar>& img, const LogitField<Scalar>& logits,
                                const LossConfig& cfg) {
  cfg.validate();
  detail::require_logits(logits, img.height(), img.width());
  const MembershipField<Scalar> f = softmax(logits);
  const ChannelArray<Scalar> p = detail::powered(f.values(), cfg.q);
  ChannelArray<Scalar> grad_p = ChannelArray<Scalar>::Zero(p.rows(), p.cols());

  const Scalar data = detail::intensity_term(img, p, cfg.means_mode, grad_p);
  Scalar spatial = 0;
  if (cfg.beta != 0.0) {
    const ChannelArray<Scalar> dis = detail::disagreement(p, img.height(), img.width(), cfg.neighborhood);
    long double sum = 0;
    for (Index j = 0; j < p.rows(); ++j)
      for (Index k = 0; k < p.cols(); ++k) sum += static_cast<long double>(p(j, k) * dis(j, k));
    spatial = static_cast<Scalar>(sum);
    // The neighborhood is symmetric, so each pixel's P appears once as center and once as neighbor.
    grad_p += Scalar(2 * cfg.beta) * dis;
  }

  LossValueGrad<Scalar> out;
  out.value = data + static_cast<Scalar>(cfg.beta) * spatial;
  out.unsupervised = out.value;
  out.grad_logits = detail::softmax_backward(f, detail::chain_power(f.values(), grad_p, cfg.q));
  return out;
}

/// Supervised FCM-label loss with unit class means: sum f^q (g - 1)^2.
template <typename Scalar>
LossValueGrad<Scalar> loss_fcm_label(const LogitField<Scalar>& logits, const GroundTruth<Scalar>& g, double q) {
  detail::require_truth(logits, g);
  if (!(q >= 1.0)) throw usage_error("loss q must be >= 1");
  const MembershipField<Scalar> f = softmax(logits);
  const ChannelArray<Scalar> p = detail::powered(f.values(), q);
  const ChannelArray<Scalar> miss = (g.values() - Scalar(1)).square();
  long double sum = 0;
  for (Index j = 0; j < p.rows(); ++j)
    for (Index k = 0; k < p.cols(); ++k) sum += static_cast<long double>(p(j, k) * miss(j, k));
  LossValueGrad<Scalar> out;
  out.value = static_cast<Scalar>(sum);
  out.supervised = out.value;
  out.grad_logits = detail::softmax_backward(f, detail::chain_power(f.values(), miss, q));
  return out;
}

template <typename Scalar>
LossValueGrad<Scalar> loss_semi_rfcm(const ScalarImage<Scalar>& img, const LogitField<Scalar>& logits,
                                     const GroundTruth<Scalar>& g, const LossConfig& cfg) {
  LossValueGrad<Scalar> out = loss_rfcm(img, logits, cfg);
  const LossValueGrad<Scalar> label = loss_fcm_label(logits, g, cfg.q);
  const auto alpha = static_cast<Scalar>(cfg.alpha);
  out.value = out.value + alpha * label.value;
  out.grad_logits += alpha * label.grad_logits;
  out.supervised = label.value;
  return out;
}

/// Mean cross-entropy over pixels, probabilities clamped below at 1e-12.
template <typename Scalar>
LossValueGrad<Scalar> loss_ce(const LogitField<Scalar>& logits, const GroundTruth<Scalar>& g) {
  detail::require_truth(logits, g);
  const MembershipField<Scalar> f = softmax(logits);
  const auto n = static_cast<Scalar>(logits.pixels());
  const auto& fv = f.values();
  ChannelArray<Scalar> grad_f = ChannelArray<Scalar>::Zero(fv.rows(), fv.cols());
  long double sum = 0;
  for (Index j = 0; j < fv.rows(); ++j)
    for (Index k = 0; k < fv.cols(); ++k) {
      const Scalar gk = g.values()(j, k);
      if (gk == Scalar(0)) continue;
      const bool clamped = fv(j, k) < Scalar(kCeClamp);
      sum -= static_cast<long double>(gk * std::log(clamped ? Scalar(kCeClamp) : fv(j, k)));
      if (!clamped) grad_f(j, k) = -gk / (n * fv(j, k));
    }
  LossValueGrad<Scalar> out;
  out.value = static_cast<Scalar>(sum / static_cast<long double>(n));
  out.supervised = out.value;
  out.grad_logits = detail::softmax_backward(f, grad_f);
  return out;
}

/// Mumford-Shah loss: sum z (y - c)^2 + lambda * sum |forward difference of z|.
///
/// Differences are taken along both axes and only where the forward neighbor
/// exists; |d| is smoothed as sqrt(d^2 + eps^2).
template <typename Scalar>
LossValueGrad<Scalar> loss_ms(const ScalarImage<Scalar>& img, const LogitField<Scalar>& logits,
                              const LossConfig& cfg) {
  cfg.validate();
  detail::require_logits(logits, img.height(), img.width());
  const MembershipField<Scalar> z = softmax(logits);
  const auto& zv = z.values();
  ChannelArray<Scalar> grad_z = ChannelArray<Scalar>::Zero(zv.rows(), zv.cols());
  const Scalar data = detail::intensity_term(img, zv, cfg.means_mode, grad_z);

  Scalar tv = 0;
  if (cfg.lambda != 0.0) {
    const Index h = img.height(), w = img.width(), c = zv.cols();
    const auto eps2 = static_cast<Scalar>(kTvSmoothing * kTvSmoothing);
    const auto lambda = static_cast<Scalar>(cfg.lambda);
    long double sum = 0;
    auto edge = [&](Index a, Index b, Index k) {
      const Scalar d = zv(b, k) - zv(a, k);
      const Scalar t = std::sqrt(d * d + eps2);
      sum += t;
      grad_z(b, k) += lambda * d / t;
      grad_z(a, k) -= lambda * d / t;
    };
    for (Index r = 0; r < h; ++r)
      for (Index col = 0; col < w; ++col) {
        const Index j = r * w + col;
        for (Index k = 0; k < c; ++k) {
          if (col + 1 < w) edge(j, j + 1, k);
          if (r + 1 < h) edge(j, j + w, k);
        }
      }
    tv = static_cast<Scalar>(sum);
  }

  LossValueGrad<Scalar> out;
  out.value = data + static_cast<Scalar>(cfg.lambda) * tv;
  out.unsupervised = out.value;
  out.grad_logits = detail::softmax_backward(z, grad_z);
  return out;
}

template <typename Scalar>
LossValueGrad<Scalar> loss_semi_ms(const ScalarImage<Scalar>& img, const LogitField<Scalar>& logits,
                                   const GroundTruth<Scalar>& g, const LossConfig& cfg) {
  LossValueGrad<Scalar> out = loss_ms(img, logits, cfg);
  const LossValueGrad<Scalar> ce = loss_ce(logits, g);
  const auto alpha = static_cast<Scalar>(cfg.alpha);
  out.value = out.value + alpha * ce.value;
  out.grad_logits += alpha * ce.grad_logits;
  out.supervised = ce.value;
  return out;
}

/// Soft Dice loss: 1 - mean_k 2 sum(f_k g_k) / (sum f_k + sum g_k + eps).
template <typename Scalar>
LossValueGrad<Scalar> loss_dice(const LogitField<Scalar>& logits, const GroundTruth<Scalar>& g) {
  detail::require_truth(logits, g);
  const MembershipField<Scalar> f = softmax(logits);
  const auto& fv = f.values();
  const auto& gv = g.values();
  const Index c = fv.cols();
  ChannelArray<Scalar> grad_f(fv.rows(), c);
  Scalar mean_dice = 0;
  for (Index k = 0; k < c; ++k) {
    const Scalar inter = (fv.col(k) * gv.col(k)).sum();
    const Scalar denom = fv.col(k).sum() + gv.col(k).sum() + Scalar(kDiceEpsilon);
    mean_dice += Scalar(2) * inter / denom;
    grad_f.col(k) = -(Scalar(2) * gv.col(k) / denom - Scalar(2) * inter / (denom * denom)) / Scalar(c);
  }
  LossValueGrad<Scalar> out;
  out.value = Scalar(1) - mean_dice / Scalar(c);
  out.supervised = out.value;
  out.grad_logits = detail::softmax_backward(f, grad_f);
  return out;
}

enum class LossKind { Rfcm, FcmLabel, SemiRfcm, Ms, SemiMs, Dice, Ce };

inline constexpr LossKind kAllLosses[] = {LossKind::Rfcm, LossKind::FcmLabel, LossKind::SemiRfcm, LossKind::Ms,
                                          LossKind::SemiMs, LossKind::Dice,    LossKind::Ce};

inline std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::Rfcm: return "rfcm";
    case LossKind::FcmLabel: return "fcm_label";
    case LossKind::SemiRfcm: return "semi_rfcm";
    case LossKind::Ms: return "ms";
    case LossKind::SemiMs: return "semi_ms";
    case LossKind::Dice: return "dice";
    case LossKind::Ce: return "ce";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : kAllLosses)
    if (loss_name(k) == name) return k;
  throw usage_error("unknown loss '" + std::string(name) + "'");
}

inline bool needs_truth(LossKind kind) { return kind != LossKind::Rfcm && kind != LossKind::Ms; }
inline bool needs_image(LossKind kind) {
  return kind == LossKind::Rfcm || kind == LossKind::SemiRfcm || kind == LossKind::Ms || kind == LossKind::SemiMs;
}

/// Dispatches on `kind`; `truth` must be present for losses with a supervised term.
template <typename Scalar>
LossValueGrad<Scalar> evaluate_loss(LossKind kind, const ScalarImage<Scalar>& img, const LogitField<Scalar>& logits,
                                    const GroundTruth<Scalar>* truth, const LossConfig& cfg) {
  if (needs_truth(kind) && truth == nullptr)
    throw usage_error("loss '" + std::string(loss_name(kind)) + "' needs ground truth");
  switch (kind) {
    case LossKind::Rfcm: return loss_rfcm(img, logits, cfg);
    case LossKind::FcmLabel: return loss_fcm_label(logits, *truth, cfg.q);
    case LossKind::SemiRfcm: return loss_semi_rfcm(img, logits, *truth, cfg);
    case LossKind::Ms: return loss_ms(img, logits, cfg);
    case LossKind::SemiMs: return loss_semi_ms(img, logits, *truth, cfg);
    case LossKind::Dice: return loss_dice(logits, *truth);
    case LossKind::Ce: return loss_ce(logits, *truth);
  }
  throw usage_error("unknown loss");
}

enum class ThresholdMode { LesionSpect, BoneSpect, BoneCt };

inline double threshold_value(double image_max, ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::LesionSpect: return 0.42 * image_max;
    case ThresholdMode::BoneSpect: return 0.02 * image_max;
    case ThresholdMode::BoneCt: return 400.0;
  }
  return 0.0;
}

/// Binary segmentation: foreground (1) iff value >= threshold.
template <typename Scalar>
LabelMap fixed_threshold(const ScalarImage<Scalar>& img, ThresholdMode mode) {
  if (img.size() == 0) throw usage_error("empty image");
  const double t = threshold_value(static_cast<double>(img.pixels().maxCoeff()), mode);
  LabelArray labels = (img.pixels().template cast<double>() >= t).template cast<int>();
  return LabelMap(std::move(labels), 2);
}

}  // namespace fuzzyseg

#endif  // FUZZYSEG_LOSSES_HPP
