#pragma once

// Karhunen-Loeve (PCA) reduction fitted on training descriptors, followed by
// a linear discriminant classifier: Gaussian class models sharing the pooled
// within-class covariance, uniform priors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pptex/error.hpp"

namespace pptex {

struct KLOptions {
  double variance_fraction = 0.99;  // retained share of total variance
  double eigen_floor = 1e-10;       // eigenvalues below floor * largest are dropped
};

struct KLTransform {
  Eigen::VectorXd mean;                // D
  Eigen::MatrixXd basis;               // d x D, orthonormal rows
  Eigen::VectorXd explained_variance;  // d, nonincreasing

  std::size_t input_dim() const noexcept { return std::size_t(mean.size()); }
  std::size_t retained() const noexcept { return std::size_t(basis.rows()); }
};

namespace detail {

// Modified Gram-Schmidt over rows, run twice; rows stay in order.
inline void orthonormalize_rows(Eigen::MatrixXd& rows) {
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) rows.row(i) -= rows.row(i).dot(rows.row(j)) * rows.row(j);
      const double norm = rows.row(i).norm();
      if (!(norm > 0.0)) throw NumericError("kl_fit: degenerate basis vector");
      rows.row(i) /= norm;
    }
}

// Sign convention: the largest-magnitude entry of each row is positive.
inline void canonicalize_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index arg = 0;
    rows.row(i).cwiseAbs().maxCoeff(&arg);
    if (rows(i, arg) < 0.0) rows.row(i) *= -1.0;
  }
}

}  // namespace detail

/// Fits the KL basis on the rows of `train` (n x D). The retained dimension
/// is the smallest count reaching `variance_fraction` of the total variance,
/// capped at n - class_count and at D.
inline KLTransform kl_fit(const Eigen::MatrixXd& train, std::size_t class_count = 1,
                          const KLOptions& options = {}) {
  const Eigen::Index n = train.rows(), D = train.cols();
  if (n < 2) throw InputError("kl_fit: need at least 2 training rows, got " + std::to_string(n));
  if (D < 1) throw InputError("kl_fit: empty feature dimension");
  if (class_count < 1 || Eigen::Index(class_count) >= n)
    throw InputError("kl_fit: class count must be in [1, n)");

  KLTransform t;
  t.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - t.mean.transpose();
  const double denom = double(n - 1);

  // Eigenpairs in decreasing order; vectors as columns in D-space.
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  if (n <= D) {
    // Same nonzero spectrum as the covariance, from the smaller Gram matrix.
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericError("kl_fit: eigensolver failed");
    values = es.eigenvalues().reverse();
    vectors = centered.transpose() * es.eigenvectors().rowwise().reverse();
  } else {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("kl_fit: eigensolver failed");
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
  }
  values = values.cwiseMax(0.0);

  const double largest = values.size() > 0 ? values(0) : 0.0;
  if (!(largest > 0.0)) throw InputError("kl_fit: training data has zero variance");
  const double total = values.sum();

  Eigen::Index usable = 0;
  while (usable < values.size() && values(usable) >= options.eigen_floor * largest) ++usable;
  const Eigen::Index cap = std::min<Eigen::Index>({usable, n - Eigen::Index(class_count), D});

  Eigen::Index d = 0;
  double acc = 0.0;
  while (d < cap) {
    acc += values(d++);
    if (acc >= options.variance_fraction * total) break;
  }

  t.explained_variance = values.head(d);
  t.basis = vectors.leftCols(d).transpose();
  detail::orthonormalize_rows(t.basis);
  detail::canonicalize_signs(t.basis);
  return t;
}

inline Eigen::VectorXd kl_apply(const KLTransform& t, std::span<const double> x) {
  detail::require(x.size() == t.input_dim(), "kl_apply: expected length " +
                                                  std::to_string(t.input_dim()) + ", got " +
                                                  std::to_string(x.size()));
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), Eigen::Index(x.size()));
  return t.basis * (v - t.mean);
}

/// Projects every row of X (n x D) to an n x d matrix.
inline Eigen::MatrixXd kl_apply_rows(const KLTransform& t, const Eigen::MatrixXd& X) {
  detail::require(std::size_t(X.cols()) == t.input_dim(), "kl_apply_rows: column mismatch");
  return (X.rowwise() - t.mean.transpose()) * t.basis.transpose();
}

struct LDAModel {
  std::vector<std::string> classes;  // sorted; tie-break order
  Eigen::MatrixXd class_means;       // c x d
  Eigen::MatrixXd covariance_factor; // lower Cholesky factor of Sigma_w + ridge I
  double ridge = 0.0;

  std::size_t dim() const noexcept { return std::size_t(class_means.cols()); }
};

/// Fits per-class means and the pooled within-class covariance (denominator
/// n - c), regularized by 1e-6 * trace / d on the diagonal.
inline LDAModel lda_fit(const Eigen::MatrixXd& features, const std::vector<std::string>& labels) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (std::size_t(n) != labels.size())
    throw InputError("lda_fit: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  if (d < 1) throw InputError("lda_fit: empty feature dimension");

  std::map<std::string, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) members[labels[std::size_t(i)]].push_back(i);
  for (const auto& [label, rows] : members)
    if (rows.size() < 2)
      throw InputError("lda_fit: class '" + label + "' has fewer than 2 samples");

  LDAModel m;
  const Eigen::Index c = Eigen::Index(members.size());
  m.class_means.resize(c, d);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index ci = 0;
  for (const auto& [label, rows] : members) {
    m.classes.push_back(label);
    Eigen::MatrixXd block(Eigen::Index(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) block.row(Eigen::Index(r)) = features.row(rows[r]);
    const Eigen::RowVectorXd mu = block.colwise().mean();
    m.class_means.row(ci++) = mu;
    block.rowwise() -= mu;
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  }
  Eigen::MatrixXd pooled = scatter.selfadjointView<Eigen::Lower>();
  pooled /= double(n - c);

  m.ridge = 1e-6 * pooled.trace() / double(d);
  pooled.diagonal().array() += m.ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(pooled);
  if (llt.info() != Eigen::Success)
    throw NumericError("lda_fit: regularized pooled covariance is not positive definite");
  m.covariance_factor = llt.matrixL();
  return m;
}

/// Discriminant score per class: -(x - mu_c)^T S^{-1} (x - mu_c).
inline Eigen::VectorXd lda_scores(const LDAModel& m, std::span<const double> x) {
  detail::require(x.size() == m.dim(), "lda_predict: expected length " + std::to_string(m.dim()) +
                                           ", got " + std::to_string(x.size()));
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), Eigen::Index(x.size()));
  const auto L = m.covariance_factor.triangularView<Eigen::Lower>();
  Eigen::VectorXd scores(m.class_means.rows());
  for (Eigen::Index c = 0; c < m.class_means.rows(); ++c) {
    const Eigen::VectorXd z = L.solve(v - m.class_means.row(c).transpose());
    scores(c) = -z.squaredNorm();
  }
  return scores;
}

/// Index into m.classes of the best-scoring class; first class wins ties.
inline std::size_t lda_predict_index(const LDAModel& m, std::span<const double> x) {
  const Eigen::VectorXd s = lda_scores(m, x);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < s.size(); ++c)
    if (s(c) > s(best)) best = c;
  return std::size_t(best);
}

inline const std::string& lda_predict(const LDAModel& m, std::span<const double> x) {
  return m.classes[lda_predict_index(m, x)];
}

/// KL reduction and LDA fitted together on one training set.
struct PipelineModel {
  KLTransform kl;
  LDAModel lda;
};

inline std::size_t distinct_count(const std::vector<std::string>& labels) {
  std::vector<std::string> s = labels;
  std::sort(s.begin(), s.end());
  return std::size_t(std::unique(s.begin(), s.end()) - s.begin());
}

inline PipelineModel fit_pipeline(const Eigen::MatrixXd& train, const std::vector<std::string>& labels,
                                  const KLOptions& options = {}) {
  PipelineModel p;
  p.kl = kl_fit(train, distinct_count(labels), options);
  p.lda = lda_fit(kl_apply_rows(p.kl, train), labels);
  return p;
}

inline const std::string& predict(const PipelineModel& p, std::span<const double> descriptor) {
  const Eigen::VectorXd z = kl_apply(p.kl, descriptor);
  return lda_predict(p.lda, std::span<const double>(z.data(), std::size_t(z.size())));
}

}  // namespace pptex
