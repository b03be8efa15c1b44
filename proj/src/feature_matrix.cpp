#include "ccax/feature_matrix.hpp"

#include "ccax/error.hpp"

#include <cmath>
#include <unordered_set>

namespace ccax {

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values, std::vector<std::string> ids)
    : values_(std::move(values)), ids_(std::move(ids)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw DimensionError("feature matrix must have at least one row and one column, got " +
                         std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
  }
  if (!values_.allFinite()) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        if (!std::isfinite(values_(i, j))) {
          throw FormatError("non-finite value at row " + std::to_string(i) + ", column " +
                            std::to_string(j));
        }
      }
    }
  }
  if (!ids_.empty()) {
    if (static_cast<Eigen::Index>(ids_.size()) != values_.rows()) {
      throw DimensionError("expected " + std::to_string(values_.rows()) + " row ids, got " +
                           std::to_string(ids_.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : ids_) {
      if (!seen.insert(id).second) throw FormatError("duplicate row id '" + id + "'");
    }
  }
}

std::string FeatureMatrix::id(Eigen::Index row) const {
  if (row < 0 || row >= rows()) throw DimensionError("row index out of range");
  return ids_.empty() ? std::to_string(row) : ids_[static_cast<std::size_t>(row)];
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), cols());
  std::vector<std::string> out_ids;
  if (has_ids()) out_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    if (r >= this->rows()) throw DimensionError("row index " + std::to_string(r) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = values_.row(r);
    if (has_ids()) out_ids.push_back(ids_[rows[i]]);
  }
  return FeatureMatrix(std::move(out), std::move(out_ids));
}

}  // namespace ccax
