#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eptest/errors.hpp"

namespace eptest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Response y (length n) and design X (n x p) with standardization metadata.
///
/// After standardize(), every column of X has mean 0 and squared norm n, and
/// y has mean 0 and squared norm n (population standard deviation 1).
struct RegressionData {
  Vector y;
  Matrix X;
  bool standardized = false;
  Vector columnMeans;
  Vector columnScales;
  double responseMean = 0.0;
  double responseScale = 1.0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

inline void validate(const RegressionData& data) {
  if (data.y.size() != data.X.rows()) {
    throw DomainError("response length " + std::to_string(data.y.size()) + " does not match design rows " +
                      std::to_string(data.X.rows()));
  }
  if (data.n() < 2) throw DomainError("need at least 2 observations");
  if (data.p() < 1) throw DomainError("need at least 1 covariate");
  if (!data.y.allFinite() || !data.X.allFinite()) throw DomainError("data contain non-finite entries");
}

inline RegressionData make_data(Vector y, Matrix X) {
  RegressionData data;
  data.y = std::move(y);
  data.X = std::move(X);
  data.columnMeans = Vector::Zero(data.X.cols());
  data.columnScales = Vector::Ones(data.X.cols());
  validate(data);
  return data;
}

/// Centers y and the columns of X, then scales each column to squared norm n
/// and y to unit population standard deviation.
inline RegressionData standardize(const RegressionData& in) {
  validate(in);
  RegressionData out = in;
  const double n = static_cast<double>(in.n());
  out.columnMeans = in.X.colwise().mean().transpose();
  out.X.rowwise() -= out.columnMeans.transpose();
  out.columnScales.resize(in.p());
  for (Eigen::Index j = 0; j < in.p(); ++j) {
    const double scale = std::sqrt(out.X.col(j).squaredNorm() / n);
    if (!(scale > 0.0)) throw DegenerateInputError("column " + std::to_string(j) + " has zero variance");
    out.columnScales(j) = scale;
    out.X.col(j) /= scale;
  }
  out.responseMean = in.y.mean();
  out.y.array() -= out.responseMean;
  out.responseScale = std::sqrt(out.y.squaredNorm() / n);
  if (!(out.responseScale > 0.0)) throw DegenerateInputError("response has zero variance");
  out.y /= out.responseScale;
  out.standardized = true;
  return out;
}

/// Subtracts per-group means from y and every column of X.
inline RegressionData remove_group_means(const RegressionData& in, const std::vector<std::string>& groups) {
  validate(in);
  if (static_cast<Eigen::Index>(groups.size()) != in.n()) {
    throw DomainError("group labels must have one entry per observation");
  }
  std::map<std::string, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < in.n(); ++i) members[groups[static_cast<std::size_t>(i)]].push_back(i);
  RegressionData out = in;
  for (const auto& [label, rows] : members) {
    const double size = static_cast<double>(rows.size());
    double ymean = 0.0;
    Eigen::RowVectorXd xmean = Eigen::RowVectorXd::Zero(in.p());
    for (auto i : rows) {
      ymean += in.y(i);
      xmean += in.X.row(i);
    }
    ymean /= size;
    xmean /= size;
    for (auto i : rows) {
      out.y(i) -= ymean;
      out.X.row(i) -= xmean;
    }
  }
  return out;
}

/// Largest relative deviation of a squared column norm from n.
inline double column_norm_deviation(const Matrix& X) {
  const double n = static_cast<double>(X.rows());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    worst = std::max(worst, std::abs(X.col(j).squaredNorm() - n) / n);
  }
  return worst;
}

}  // namespace eptest
