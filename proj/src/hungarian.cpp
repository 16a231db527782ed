#include "obsmerge/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

// Costs in the ordered group Z x R: the integer part counts forbidden
// (+infinity) pairs, the real part carries finite costs. The shortest
// augmenting path solver below only needs +, - and <, so it runs unchanged
// on this type and never mixes the sentinel into floating-point sums.
struct LexCost {
  std::int64_t forbidden = 0;
  double value = 0.0;

  friend LexCost operator+(LexCost a, LexCost b) { return {a.forbidden + b.forbidden, a.value + b.value}; }
  friend LexCost operator-(LexCost a, LexCost b) { return {a.forbidden - b.forbidden, a.value - b.value}; }
  friend bool operator<(LexCost a, LexCost b) {
    if (a.forbidden != b.forbidden) return a.forbidden < b.forbidden;
    return a.value < b.value;
  }
};

LexCost lex(double c) { return std::isinf(c) ? LexCost{1, 0.0} : LexCost{0, c}; }

// Shortest augmenting path Hungarian method for rows <= cols, O(rows^2 cols).
// Returns the column assigned to every row.
std::vector<std::size_t> solve_wide(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const LexCost unreachable{std::int64_t{1} << 40, 0.0};

  // Index 0 is the virtual column of the augmenting path; rows and columns
  // are 1-based inside.
  std::vector<LexCost> row_pot(n + 1), col_pot(m + 1);
  std::vector<std::size_t> col_owner(m + 1, 0), way(m + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    col_owner[0] = i;
    std::size_t j0 = 0;
    std::vector<LexCost> min_slack(m + 1, unreachable);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = col_owner[j0];
      LexCost delta = unreachable;
      std::size_t j1 = kNone;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const LexCost cur = lex(cost(i0 - 1, j - 1)) - row_pot[i0] - col_pot[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (j1 == kNone || min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          row_pot[col_owner[j]] = row_pot[col_owner[j]] + delta;
          col_pot[j] = col_pot[j] - delta;
        } else {
          min_slack[j] = min_slack[j] - delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> row_to_col(n, kNone);
  for (std::size_t j = 1; j <= m; ++j) {
    if (col_owner[j] != 0) row_to_col[col_owner[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::MalformedInput, "cost matrix data does not match its shape");
  }
}

std::vector<AssignedPair> hungarian_solve(const CostMatrix& cost) {
  std::vector<AssignedPair> pairs;
  if (cost.rows() == 0 || cost.cols() == 0) return pairs;

  if (cost.rows() <= cost.cols()) {
    const auto row_to_col = solve_wide(cost);
    for (std::size_t r = 0; r < row_to_col.size(); ++r) pairs.push_back({r, row_to_col[r]});
  } else {
    CostMatrix transposed(cost.cols(), cost.rows());
    for (std::size_t r = 0; r < cost.rows(); ++r) {
      for (std::size_t c = 0; c < cost.cols(); ++c) transposed(c, r) = cost(r, c);
    }
    const auto col_to_row = solve_wide(transposed);
    for (std::size_t c = 0; c < col_to_row.size(); ++c) pairs.push_back({col_to_row[c], c});
    std::sort(pairs.begin(), pairs.end(),
              [](const AssignedPair& a, const AssignedPair& b) { return a.row < b.row; });
  }

  std::erase_if(pairs, [&](const AssignedPair& p) { return std::isinf(cost(p.row, p.col)); });
  return pairs;
}

double assignment_cost(const CostMatrix& cost, const std::vector<AssignedPair>& pairs) {
  double total = 0.0;
  for (const auto& p : pairs) {
    const double c = cost(p.row, p.col);
    if (!std::isinf(c)) total += c;
  }
  return total;
}

}  // namespace obsmerge
