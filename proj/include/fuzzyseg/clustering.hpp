#ifndef FUZZYSEG_CLUSTERING_HPP
#define FUZZYSEG_CLUSTERING_HPP

#include "fuzzyseg/field.hpp"
#include "fuzzyseg/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace fuzzyseg {

enum class InitMode { Quantile, Provided };

struct FcmConfig {
  int classes = 3;
  double q = 2.0;     ///< fuzzy exponent, >= 1
  double beta = 0.0;  ///< spatial weight; 0 gives plain FCM
  double tol = 1e-4;  ///< stop when max |delta u| falls below this
  int max_iter = 100;
  InitMode init = InitMode::Quantile;
  std::vector<double> means;  ///< used when init == Provided
  std::uint64_t seed = 0;
  Neighborhood neighborhood;

  void validate() const {
    if (classes < 2) throw usage_error("clustering needs at least 2 classes");
    if (!(q >= 1.0)) throw usage_error("fuzzy exponent q must be >= 1");
    if (!(beta >= 0.0)) throw usage_error("beta must be >= 0");
    if (!(tol > 0.0)) throw usage_error("tol must be > 0");
    if (max_iter < 1) throw usage_error("max_iter must be >= 1");
    if (init == InitMode::Provided && means.size() != static_cast<std::size_t>(classes))
      throw usage_error("provided means must have one entry per class");
  }
};

template <typename Scalar = double>
struct FcmState {
  MembershipField<Scalar> memberships;
  ClassMeans<Scalar> means;
  int iter = 0;
  bool converged = false;
  std::vector<double> objective_history;
};

/// Initial centroids at the (k + 0.5) / C quantiles of the intensity distribution.
///
/// When heavy ties make those quantiles coincide (e.g. a flat background), the
/// quantiles are taken over the distinct intensity values instead.
template <typename Scalar>
ClassMeans<Scalar> init_means(const ScalarImage<Scalar>& img, const FcmConfig& cfg) {
  cfg.validate();
  const int c = cfg.classes;
  ClassMeans<Scalar> means(c);
  if (cfg.init == InitMode::Provided) {
    for (int k = 0; k < c; ++k) means(k) = static_cast<Scalar>(cfg.means[static_cast<std::size_t>(k)]);
    return means;
  }
  detail::require_distinct(img, "cannot initialize means on a constant image");
  std::vector<Scalar> sorted(img.pixels().data(), img.pixels().data() + img.size());
  std::sort(sorted.begin(), sorted.end());

  auto quantiles = [&](const std::vector<Scalar>& values) {
    const double last = static_cast<double>(values.size() - 1);
    for (int k = 0; k < c; ++k) {
      const double pos = (k + 0.5) / c * last;
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, values.size() - 1);
      const double t = pos - static_cast<double>(lo);
      means(k) = static_cast<Scalar>((1.0 - t) * values[lo] + t * values[hi]);
    }
    for (int k = 1; k < c; ++k)
      if (!(means(k) > means(k - 1))) return false;
    return true;
  };
  if (quantiles(sorted)) return means;
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() < static_cast<std::size_t>(c) || !quantiles(sorted))
    throw numerical_error("fewer distinct intensities than classes");
  return means;
}

namespace detail {

template <typename Scalar>
void require_same_shape(const ScalarImage<Scalar>& img, const MembershipField<Scalar>& f) {
  if (img.height() != f.height() || img.width() != f.width()) throw usage_error("image and membership shapes differ");
}

/// For each pixel j and class k: sum over neighbors l of sum_{m != k} f_lm^q.
template <typename Scalar>
ChannelArray<Scalar> disagreement(const ChannelArray<Scalar>& powered, Index height, Index width,
                                  const Neighborhood& nb) {
  const Index c = powered.cols();
  const Vector<Scalar> totals = powered.rowwise().sum().matrix();
  ChannelArray<Scalar> out = ChannelArray<Scalar>::Zero(powered.rows(), c);
  for (Index r = 0; r < height; ++r)
    for (Index col = 0; col < width; ++col) {
      const Index j = r * width + col;
      nb.for_each(height, width, r, col, [&](Index l) {
        for (Index k = 0; k < c; ++k) out(j, k) += totals(l) - powered(l, k);
      });
    }
  return out;
}

template <typename Scalar>
ChannelArray<Scalar> powered(const ChannelArray<Scalar>& f, double q) {
  if (q == 1.0) return f;
  if (q == 2.0) return f.square();
  return f.pow(static_cast<Scalar>(q));
}

}  // namespace detail

/// sum_j sum_k f_jk^q (y_j - v_k)^2
template <typename Scalar>
Scalar fcm_objective(const ScalarImage<Scalar>& img, const MembershipField<Scalar>& f, const ClassMeans<Scalar>& v,
                     double q) {
  detail::require_same_shape(img, f);
  if (v.size() != f.classes()) throw usage_error("means and membership class counts differ");
  const ChannelArray<Scalar> p = detail::powered(f.values(), q);
  long double sum = 0;
  for (Index j = 0; j < f.pixels(); ++j)
    for (Index k = 0; k < f.classes(); ++k) {
      const Scalar d = img[j] - v(k);
      sum += static_cast<long double>(p(j, k) * d * d);
    }
  return static_cast<Scalar>(sum);
}

/// sum_j sum_k f_jk^q sum_{l in N_j} sum_{m != k} f_lm^q, without the beta factor.
template <typename Scalar>
Scalar spatial_penalty(const MembershipField<Scalar>& f, double q, const Neighborhood& nb = {}) {
  const ChannelArray<Scalar> p = detail::powered(f.values(), q);
  const ChannelArray<Scalar> dis = detail::disagreement(p, f.height(), f.width(), nb);
  long double sum = 0;
  for (Index j = 0; j < f.pixels(); ++j)
    for (Index k = 0; k < f.classes(); ++k) sum += static_cast<long double>(p(j, k) * dis(j, k));
  return static_cast<Scalar>(sum);
}

template <typename Scalar>
Scalar rfcm_objective(const ScalarImage<Scalar>& img, const MembershipField<Scalar>& f, const ClassMeans<Scalar>& v,
                      const FcmConfig& cfg) {
  const Scalar data = fcm_objective(img, f, v, cfg.q);
  if (cfg.beta == 0.0) return data;
  return data + static_cast<Scalar>(cfg.beta) * spatial_penalty(f, cfg.q, cfg.neighborhood);
}

namespace detail {

template <typename Scalar>
MembershipField<Scalar> update_memberships(const ScalarImage<Scalar>& img, const ClassMeans<Scalar>& v,
                                           const MembershipField<Scalar>* prev, const FcmConfig& cfg) {
  const Index n = img.size();
  const Index c = v.size();
  ChannelArray<Scalar> dist(n, c);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < c; ++k) {
      const Scalar d = img[j] - v(k);
      dist(j, k) = d * d;
    }
  if (prev != nullptr) {
    require_same_shape(img, *prev);
    const ChannelArray<Scalar> p = powered(prev->values(), cfg.q);
    dist += Scalar(2 * cfg.beta) * disagreement(p, img.height(), img.width(), cfg.neighborhood);
  }

  ChannelArray<Scalar> u = ChannelArray<Scalar>::Zero(n, c);
  const bool hard = cfg.q == 1.0;
  const Scalar exponent = hard ? Scalar(0) : static_cast<Scalar>(1.0 / (cfg.q - 1.0));
  for (Index j = 0; j < n; ++j) {
    Index best = 0;
    for (Index k = 1; k < c; ++k)
      if (dist(j, k) < dist(j, best)) best = k;
    const Scalar dmin = dist(j, best);
    if (hard || dmin == Scalar(0)) {
      u(j, best) = Scalar(1);
      continue;
    }
    // u_jk = D_jk^(-1/(q-1)) / sum_i D_ji^(-1/(q-1)), scaled by the smallest distance.
    Scalar total = 0;
    for (Index k = 0; k < c; ++k) {
      u(j, k) = std::pow(dmin / dist(j, k), exponent);
      total += u(j, k);
    }
    u.row(j) /= total;
  }
  return MembershipField<Scalar>(img.height(), img.width(), std::move(u));
}

}  // namespace detail

/// One membership sweep. With beta = 0 (or no previous field) this is the plain
/// FCM update; q = 1 assigns each pixel wholly to its nearest class.
template <typename Scalar>
MembershipField<Scalar> membership_update(const ScalarImage<Scalar>& img, const ClassMeans<Scalar>& v,
                                          const MembershipField<Scalar>& f_prev, const FcmConfig& cfg) {
  return detail::update_memberships(img, v, &f_prev, cfg);
}

/// Fuzzy-weighted class means. A class whose mass sum_j f_jk^q is below 1e-12
/// keeps its entry from `previous` (when given).
template <typename Scalar>
ClassMeans<Scalar> means_update(const ScalarImage<Scalar>& img, const MembershipField<Scalar>& f, double q,
                                const ClassMeans<Scalar>* previous = nullptr) {
  detail::require_same_shape(img, f);
  const ChannelArray<Scalar> p = detail::powered(f.values(), q);
  const Index c = f.classes();
  std::vector<long double> num(static_cast<std::size_t>(c), 0), den(static_cast<std::size_t>(c), 0);
  for (Index j = 0; j < f.pixels(); ++j)
    for (Index k = 0; k < c; ++k) {
      num[static_cast<std::size_t>(k)] += static_cast<long double>(p(j, k) * img[j]);
      den[static_cast<std::size_t>(k)] += p(j, k);
    }
  ClassMeans<Scalar> v(c);
  for (Index k = 0; k < c; ++k) {
    const long double mass = den[static_cast<std::size_t>(k)];
    if (mass < 1e-12L && previous != nullptr)
      v(k) = (*previous)(k);
    else
      v(k) = static_cast<Scalar>(num[static_cast<std::size_t>(k)] / (mass < 1e-12L ? mass + 1e-12L : mass));
  }
  return v;
}

namespace detail {

template <typename Scalar>
FcmState<Scalar> solve(const ScalarImage<Scalar>& img, const FcmConfig& cfg, bool spatial) {
  cfg.validate();
  detail::require_distinct(img, "cannot cluster a constant image");
  const Index c = cfg.classes;
  FcmState<Scalar> state;
  state.means = init_means(img, cfg);
  MembershipField<Scalar> f(img.height(), img.width(),
                            ChannelArray<Scalar>::Constant(img.size(), c, Scalar(1) / Scalar(c)));
  for (int it = 1; it <= cfg.max_iter; ++it) {
    MembershipField<Scalar> next = update_memberships(img, state.means, spatial ? &f : nullptr, cfg);
    state.means = means_update(img, next, cfg.q, &state.means);
    state.objective_history.push_back(
        static_cast<double>(spatial ? rfcm_objective(img, next, state.means, cfg)
                                    : fcm_objective(img, next, state.means, cfg.q)));
    const Scalar change = (next.values() - f.values()).abs().maxCoeff();
    f = std::move(next);
    state.iter = it;
    if (!std::isfinite(state.objective_history.back())) throw numerical_error("clustering objective diverged");
    if (change < cfg.tol) {
      state.converged = true;
      break;
    }
  }
  state.memberships = std::move(f);
  return state;
}

}  // namespace detail

/// Plain FCM by alternating membership and mean updates. `cfg.beta` is ignored.
template <typename Scalar>
FcmState<Scalar> run_fcm(const ScalarImage<Scalar>& img, const FcmConfig& cfg) {
  return detail::solve(img, cfg, false);
}

/// RFCM: FCM with the neighborhood disagreement penalty weighted by `cfg.beta`.
/// The first sweep uses a uniform previous membership field.
template <typename Scalar>
FcmState<Scalar> run_rfcm(const ScalarImage<Scalar>& img, const FcmConfig& cfg) {
  return detail::solve(img, cfg, true);
}

}  // namespace fuzzyseg

#endif  // FUZZYSEG_CLUSTERING_HPP
