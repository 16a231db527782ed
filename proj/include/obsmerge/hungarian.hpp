#pragma once

#include <cstddef>
#include <vector>

namespace obsmerge {

/// Dense row-major cost matrix. Entries are finite or +infinity; +infinity
/// marks a forbidden pairing.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct AssignedPair {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const AssignedPair&, const AssignedPair&) = default;
};

/// Minimum-cost assignment of min(rows, cols) pairs. The objective is
/// lexicographic: first the number of +infinity pairs, then the sum of the
/// finite costs, so a forbidden pair is used only when no complete matching
/// avoids it. Pairs that land on +infinity are dropped from the result, which
/// is sorted by row.
std::vector<AssignedPair> hungarian_solve(const CostMatrix& cost);

/// Sum of the finite costs of `pairs`, accumulated in the given order.
double assignment_cost(const CostMatrix& cost, const std::vector<AssignedPair>& pairs);

}  // namespace obsmerge
