#pragma once

// Diagonal-covariance Gaussian mixture fitted by expectation-maximization.
//
// Points are the rows of an n x d matrix. Initialization is seeded
// farthest-point selection over a canonical (lexicographic) ordering of the
// points, so the fit does not depend on input order beyond floating-point
// summation order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "csprobe/embedding.hpp"
#include "csprobe/error.hpp"

namespace csprobe {

struct GmmOptions {
  std::size_t n_components = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 200;
  /// Stop when |delta log-likelihood| <= tol * max(1, |previous log-likelihood|).
  double tol = 1e-6;
  double variance_floor = 1e-6;
  /// Independent initializations; the highest final log-likelihood wins.
  std::size_t restarts = 1;
};

template <typename Scalar>
struct MixtureModel {
  Vector<Scalar> weights;    // K
  Matrix<Scalar> means;      // K x d
  Matrix<Scalar> variances;  // K x d, every entry >= the variance floor
  Scalar log_likelihood = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  /// Log-likelihood after initialization and after every EM iteration.
  std::vector<Scalar> log_likelihood_trace;

  std::size_t n_components() const { return static_cast<std::size_t>(weights.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }
};

template <typename Scalar>
struct HardAssignment {
  std::vector<std::size_t> labels;
  Matrix<Scalar> responsibilities;  // n x K
};

/// Stable 64-bit seed derived from a base seed and a string key (FNV-1a then splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Rows of `vectors` stacked into an n x d matrix.
template <typename Scalar>
Matrix<Scalar> stack_rows(const std::vector<Vector<Scalar>>& vectors) {
  if (vectors.empty()) return Matrix<Scalar>(0, 0);
  const Eigen::Index d = vectors.front().size();
  Matrix<Scalar> out(static_cast<Eigen::Index>(vectors.size()), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "ragged point list");
    out.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  }
  return out;
}

namespace detail {

// n x K matrix of log(weight_k) + log N(x_i; mean_k, diag var_k).
template <typename Scalar, typename Derived>
Matrix<Scalar> weighted_log_densities(const MixtureModel<Scalar>& model,
                                      const Eigen::MatrixBase<Derived>& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const Eigen::Index k = model.means.rows();
  const Scalar log_2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  Matrix<Scalar> out(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto var = model.variances.row(c).array();
    const Scalar log_norm =
        Scalar(-0.5) * (static_cast<Scalar>(d) * log_2pi + var.log().sum());
    const Scalar log_w = std::log(model.weights(c));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar maha =
          ((points.row(i) - model.means.row(c)).array().square() / var).sum();
      out(i, c) = log_w + log_norm - Scalar(0.5) * maha;
    }
  }
  return out;
}

template <typename Scalar>
Scalar row_logsumexp(const Matrix<Scalar>& logp, Eigen::Index i) {
  const Scalar m = logp.row(i).maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((logp.row(i).array() - m).exp().sum());
}

// Fills `resp` with posteriors and returns the total log-likelihood.
template <typename Scalar, typename Derived>
Scalar expectation(const MixtureModel<Scalar>& model, const Eigen::MatrixBase<Derived>& points,
                   Matrix<Scalar>& resp) {
  const Matrix<Scalar> logp = weighted_log_densities(model, points);
  resp.resize(logp.rows(), logp.cols());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const Scalar lse = row_logsumexp(logp, i);
    resp.row(i) = (logp.row(i).array() - lse).exp();
    total += lse;
  }
  return total;
}

template <typename Scalar, typename Derived>
void maximization(MixtureModel<Scalar>& model, const Eigen::MatrixBase<Derived>& points,
                  const Matrix<Scalar>& resp, Scalar floor) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = resp.cols();
  const Vector<Scalar> mass = resp.colwise().sum().transpose();
  const Scalar dead = Scalar(10) * std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(n);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (mass(c) <= dead) continue;  // collapsed component keeps its parameters
    const Vector<Scalar> mean = (resp.col(c).transpose() * points).transpose() / mass(c);
    Vector<Scalar> var = Vector<Scalar>::Zero(points.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      var += resp(i, c) * (points.row(i).transpose() - mean).array().square().matrix();
    }
    var /= mass(c);
    model.means.row(c) = mean.transpose();
    model.variances.row(c) = var.array().max(floor).transpose();
  }
  const Scalar total = mass.sum();
  for (Eigen::Index c = 0; c < k; ++c) {
    model.weights(c) = mass(c) <= dead ? Scalar(0) : mass(c) / total;
  }
}

template <typename Derived>
std::vector<std::size_t> canonical_order(const Eigen::MatrixBase<Derived>& points) {
  std::vector<std::size_t> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = points.row(static_cast<Eigen::Index>(a));
    const auto rb = points.row(static_cast<Eigen::Index>(b));
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

template <typename Scalar, typename Derived>
MixtureModel<Scalar> initialize(const Eigen::MatrixBase<Derived>& points,
                                const std::vector<std::size_t>& order, std::size_t start,
                                const GmmOptions& opt) {
  const auto k = static_cast<Eigen::Index>(opt.n_components);
  const Eigen::Index d = points.cols();
  MixtureModel<Scalar> model;
  model.weights = Vector<Scalar>::Constant(k, Scalar(1) / static_cast<Scalar>(k));
  model.means.resize(k, d);

  std::vector<bool> chosen(order.size(), false);
  std::vector<Scalar> nearest(order.size(), std::numeric_limits<Scalar>::infinity());
  std::size_t pick = start;  // position in canonical order
  for (Eigen::Index c = 0; c < k; ++c) {
    chosen[pick] = true;
    const auto row = points.row(static_cast<Eigen::Index>(order[pick]));
    model.means.row(c) = row;
    for (std::size_t j = 0; j < order.size(); ++j) {
      const Scalar dist =
          (points.row(static_cast<Eigen::Index>(order[j])) - row).squaredNorm();
      nearest[j] = std::min(nearest[j], dist);
    }
    Scalar best = -1;
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (!chosen[j] && nearest[j] > best) {
        best = nearest[j];
        pick = j;
      }
    }
  }

  const Vector<Scalar> centroid = points.colwise().mean().transpose();
  Vector<Scalar> spread = Vector<Scalar>::Zero(d);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    spread += (points.row(i).transpose() - centroid).array().square().matrix();
  }
  spread /= static_cast<Scalar>(points.rows());
  spread = spread.array().max(static_cast<Scalar>(opt.variance_floor));
  model.variances = spread.transpose().replicate(k, 1);
  return model;
}

}  // namespace detail

/// Sum over points of log sum_c weight_c N(x; mean_c, diag var_c).
template <typename Scalar, typename Derived>
Scalar log_likelihood(const MixtureModel<Scalar>& model,
                      const Eigen::MatrixBase<Derived>& points) {
  if (points.rows() > 0 && static_cast<std::size_t>(points.cols()) != model.dim()) {
    throw Error(ErrorCode::InvalidInput, "point dimension does not match the model");
  }
  const Matrix<Scalar> logp = detail::weighted_log_densities(model, points);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) total += detail::row_logsumexp(logp, i);
  return total;
}

/// Posterior responsibilities and argmax labels (ties go to the lower index).
template <typename Scalar, typename Derived>
HardAssignment<Scalar> assign(const MixtureModel<Scalar>& model,
                              const Eigen::MatrixBase<Derived>& points) {
  HardAssignment<Scalar> out;
  if (points.rows() == 0) {
    out.responsibilities.resize(0, static_cast<Eigen::Index>(model.n_components()));
    return out;
  }
  if (static_cast<std::size_t>(points.cols()) != model.dim()) {
    throw Error(ErrorCode::InvalidInput, "point dimension does not match the model");
  }
  detail::expectation(model, points, out.responsibilities);
  out.labels.resize(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < out.responsibilities.cols(); ++c) {
      if (out.responsibilities(i, c) > out.responsibilities(i, best)) best = c;
    }
    out.labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

template <typename Derived>
MixtureModel<typename Derived::Scalar> fit_gmm(const Eigen::MatrixBase<Derived>& points,
                                               const GmmOptions& opt) {
  using Scalar = typename Derived::Scalar;
  if (opt.n_components == 0) throw Error(ErrorCode::InvalidInput, "n_components must be positive");
  if (opt.max_iter == 0) throw Error(ErrorCode::InvalidInput, "max_iter must be positive");
  if (!(opt.tol > 0)) throw Error(ErrorCode::InvalidInput, "tol must be positive");
  if (!(opt.variance_floor > 0)) {
    throw Error(ErrorCode::InvalidInput, "variance floor must be positive");
  }
  if (static_cast<std::size_t>(points.rows()) < opt.n_components) {
    throw Error(ErrorCode::InsufficientPoints,
                std::to_string(points.rows()) + " points for " +
                    std::to_string(opt.n_components) + " components");
  }
  if (points.cols() == 0) throw Error(ErrorCode::InvalidInput, "points have zero dimension");
  if (!points.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite point coordinate");

  const auto order = detail::canonical_order(points);
  const auto floor = static_cast<Scalar>(opt.variance_floor);
  std::mt19937_64 rng(opt.seed);

  MixtureModel<Scalar> best;
  bool have_best = false;
  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(opt.restarts, 1); ++attempt) {
    const std::size_t start = static_cast<std::size_t>(rng() % order.size());
    MixtureModel<Scalar> model = detail::initialize<Scalar>(points, order, start, opt);
    model.seed = opt.seed;

    Matrix<Scalar> resp;
    Scalar ll = detail::expectation(model, points, resp);
    model.log_likelihood_trace.push_back(ll);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
      detail::maximization(model, points, resp, floor);
      const Scalar next = detail::expectation(model, points, resp);
      model.log_likelihood_trace.push_back(next);
      model.iterations = it;
      const Scalar delta = std::abs(next - ll);
      const Scalar scale = std::max(Scalar(1), std::abs(ll));
      ll = next;
      if (delta <= static_cast<Scalar>(opt.tol) * scale) break;
    }
    model.log_likelihood = ll;
    if (!have_best || model.log_likelihood > best.log_likelihood) {
      best = std::move(model);
      have_best = true;
    }
  }
  return best;
}

}  // namespace csprobe
