#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace ccax {

/// Dense n x m matrix of sample feature vectors, one sample per row.
///
/// Immutable after construction. The constructor enforces rows >= 1,
/// cols >= 1, finite entries, and (when given) one unique id per row.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Eigen::MatrixXd values, std::vector<std::string> ids = {});

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }

  bool has_ids() const { return !ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  /// Row identifier; the decimal row index when no ids were supplied.
  std::string id(Eigen::Index row) const;

  FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_ && a.ids_ == b.ids_;
  }

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> ids_;
};

}  // namespace ccax
