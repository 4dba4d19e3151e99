#include "crm/lp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/SparseLU>

#include "crm/errors.hpp"

namespace crm {

void LinearProgram::validate() const {
  const Eigen::Index n = constraints.cols();
  const Eigen::Index m = constraints.rows();
  if (objective.size() != n || lower.size() != n || upper.size() != n) {
    throw InputError("LP column data sizes disagree");
  }
  if (rhs.size() != m || static_cast<Eigen::Index>(senses.size()) != m) {
    throw InputError("LP row data sizes disagree");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lower(j) > upper(j)) throw InputError("LP column has lower bound above upper bound");
    if (lower(j) == kInf || upper(j) == -kInf) throw InputError("LP bound is infinite on the wrong side");
  }
}

Eigen::Index LpBuilder::add_column(double cost, double lower, double upper) {
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return static_cast<Eigen::Index>(cost_.size()) - 1;
}

void LpBuilder::add_row(const std::vector<std::pair<Eigen::Index, double>>& terms, Sense sense,
                        double rhs) {
  const auto row = static_cast<Eigen::Index>(senses_.size());
  for (const auto& [col, val] : terms) {
    if (val != 0.0) entries_.emplace_back(row, col, val);
  }
  senses_.push_back(sense);
  rhs_.push_back(rhs);
}

LinearProgram LpBuilder::build() const {
  LinearProgram lp;
  const auto n = columns();
  lp.objective = Eigen::Map<const Eigen::VectorXd>(cost_.data(), n);
  lp.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  lp.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  lp.rhs = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), rows());
  lp.senses = senses_;
  lp.constraints.resize(rows(), n);
  lp.constraints.setFromTriplets(entries_.begin(), entries_.end());
  return lp;
}

namespace {

struct SparseCol {
  std::vector<int> rows;
  std::vector<double> vals;
};

// min cost'z  s.t.  A z = b (b >= 0), z >= 0.
struct StandardForm {
  int m = 0;
  int original_rows = 0;
  std::vector<SparseCol> cols;
  std::vector<double> cost;
  std::vector<double> b;
  std::vector<char> artificial;
  std::vector<double> row_sign;
  std::vector<int> initial_basis;
  struct Piece {
    int col;
    double sign;
  };
  std::vector<std::vector<Piece>> pieces;  // per original column
  Eigen::VectorXd shift;
  double offset = 0.0;
};

StandardForm standardize(const LinearProgram& lp) {
  StandardForm sf;
  const Eigen::Index n = lp.cols();
  const auto m0 = static_cast<int>(lp.rows());
  sf.original_rows = m0;
  sf.pieces.resize(static_cast<std::size_t>(n));
  sf.shift = Eigen::VectorXd::Zero(n);

  std::vector<double> rhs(lp.rhs.data(), lp.rhs.data() + m0);
  std::vector<Sense> senses = lp.senses;
  struct BoundRow {
    int col;
    double cap;
  };
  std::vector<BoundRow> bound_rows;

  auto new_col = [&](double cost) {
    sf.cols.emplace_back();
    sf.cost.push_back(cost);
    sf.artificial.push_back(0);
    return static_cast<int>(sf.cols.size()) - 1;
  };

  for (Eigen::Index j = 0; j < n; ++j) {
    const double l = lp.lower(j);
    const double u = lp.upper(j);
    const double c = lp.objective(j);
    auto& pcs = sf.pieces[static_cast<std::size_t>(j)];
    if (l > -kInf) {
      sf.shift(j) = l;
      pcs.push_back({new_col(c), 1.0});
      if (u < kInf) bound_rows.push_back({pcs.back().col, u - l});
    } else if (u < kInf) {
      sf.shift(j) = u;
      pcs.push_back({new_col(-c), -1.0});
    } else {
      pcs.push_back({new_col(c), 1.0});
      pcs.push_back({new_col(-c), -1.0});
    }
    sf.offset += c * sf.shift(j);
    for (Eigen::SparseMatrix<double>::InnerIterator it(lp.constraints, j); it; ++it) {
      const int r = static_cast<int>(it.row());
      rhs[static_cast<std::size_t>(r)] -= it.value() * sf.shift(j);
      for (const auto& pc : pcs) {
        sf.cols[static_cast<std::size_t>(pc.col)].rows.push_back(r);
        sf.cols[static_cast<std::size_t>(pc.col)].vals.push_back(it.value() * pc.sign);
      }
    }
  }
  for (const auto& br : bound_rows) {
    const int r = static_cast<int>(rhs.size());
    rhs.push_back(br.cap);
    senses.push_back(Sense::LessEqual);
    sf.cols[static_cast<std::size_t>(br.col)].rows.push_back(r);
    sf.cols[static_cast<std::size_t>(br.col)].vals.push_back(1.0);
  }
  sf.m = static_cast<int>(rhs.size());
  const auto m = static_cast<std::size_t>(sf.m);

  std::vector<int> slack_of_row(m, -1);
  for (std::size_t r = 0; r < m; ++r) {
    if (senses[r] == Sense::Equal) continue;
    const int s = new_col(0.0);
    sf.cols[static_cast<std::size_t>(s)].rows.push_back(static_cast<int>(r));
    sf.cols[static_cast<std::size_t>(s)].vals.push_back(senses[r] == Sense::LessEqual ? 1.0 : -1.0);
    slack_of_row[r] = s;
  }

  sf.row_sign.assign(m, 1.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (rhs[r] < 0.0 || (rhs[r] == 0.0 && senses[r] == Sense::GreaterEqual)) sf.row_sign[r] = -1.0;
  }
  for (auto& col : sf.cols) {
    for (std::size_t k = 0; k < col.rows.size(); ++k) {
      col.vals[k] *= sf.row_sign[static_cast<std::size_t>(col.rows[k])];
    }
  }
  sf.b.resize(m);
  for (std::size_t r = 0; r < m; ++r) sf.b[r] = rhs[r] * sf.row_sign[r];

  sf.initial_basis.resize(m);
  for (std::size_t r = 0; r < m; ++r) {
    const int s = slack_of_row[r];
    if (s >= 0 && sf.cols[static_cast<std::size_t>(s)].vals[0] > 0.0) {
      sf.initial_basis[r] = s;
    } else {
      const int a = new_col(0.0);
      sf.artificial[static_cast<std::size_t>(a)] = 1;
      sf.cols[static_cast<std::size_t>(a)].rows.push_back(static_cast<int>(r));
      sf.cols[static_cast<std::size_t>(a)].vals.push_back(1.0);
      sf.initial_basis[r] = a;
    }
  }
  return sf;
}

// Basis factorization by triangularization. Column singletons are peeled off
// first (an upper triangular block), then row singletons (a lower triangular
// block); only the remaining bump is LU-factored densely. With rows ordered
// [column-singleton rows, bump rows, row-singleton rows] and columns likewise,
// B = [[U, X, X], [0, K, X], [0, 0, L]].
class BasisFactor {
 public:
  bool factor(const std::vector<SparseCol>& cols, const std::vector<int>& basis, int m) {
    cols_ = &cols;
    basis_ = &basis;
    const auto mm = static_cast<std::size_t>(m);
    constexpr double kPivotTol = 1e-9;

    std::vector<std::vector<int>> row_positions(mm);
    std::vector<int> col_count(mm, 0);
    for (std::size_t p = 0; p < mm; ++p) {
      const auto& col = column(p);
      col_count[p] = static_cast<int>(col.rows.size());
      for (int r : col.rows) row_positions[static_cast<std::size_t>(r)].push_back(static_cast<int>(p));
    }
    std::vector<char> row_active(mm, 1), col_active(mm, 1);
    upper_.clear();
    lower_.clear();

    // Column singletons.
    std::vector<int> stack;
    for (std::size_t p = 0; p < mm; ++p) {
      if (col_count[p] == 1) stack.push_back(static_cast<int>(p));
    }
    while (!stack.empty()) {
      const auto p = static_cast<std::size_t>(stack.back());
      stack.pop_back();
      if (!col_active[p] || col_count[p] != 1) continue;
      const auto& col = column(p);
      int row = -1;
      double val = 0.0;
      for (std::size_t e = 0; e < col.rows.size(); ++e) {
        if (row_active[static_cast<std::size_t>(col.rows[e])]) {
          row = col.rows[e];
          val = col.vals[e];
          break;
        }
      }
      if (row < 0 || std::abs(val) <= kPivotTol) continue;
      upper_.push_back({static_cast<int>(p), row, val});
      col_active[p] = 0;
      row_active[static_cast<std::size_t>(row)] = 0;
      for (int q : row_positions[static_cast<std::size_t>(row)]) {
        const auto qq = static_cast<std::size_t>(q);
        if (col_active[qq] && --col_count[qq] == 1) stack.push_back(q);
      }
    }

    // Row singletons among what is left.
    std::vector<int> row_count(mm, 0);
    for (std::size_t r = 0; r < mm; ++r) {
      if (!row_active[r]) continue;
      for (int q : row_positions[r]) row_count[r] += col_active[static_cast<std::size_t>(q)];
      if (row_count[r] == 1) stack.push_back(static_cast<int>(r));
    }
    while (!stack.empty()) {
      const auto r = static_cast<std::size_t>(stack.back());
      stack.pop_back();
      if (!row_active[r] || row_count[r] != 1) continue;
      int pos = -1;
      for (int q : row_positions[r]) {
        if (col_active[static_cast<std::size_t>(q)]) {
          pos = q;
          break;
        }
      }
      if (pos < 0) continue;
      const auto& col = column(static_cast<std::size_t>(pos));
      double val = 0.0;
      for (std::size_t e = 0; e < col.rows.size(); ++e) {
        if (static_cast<std::size_t>(col.rows[e]) == r) val += col.vals[e];
      }
      if (std::abs(val) <= kPivotTol) continue;
      lower_.push_back({pos, static_cast<int>(r), val});
      col_active[static_cast<std::size_t>(pos)] = 0;
      row_active[r] = 0;
      for (int rr : col.rows) {
        const auto ur = static_cast<std::size_t>(rr);
        if (row_active[ur] && --row_count[ur] == 1) stack.push_back(rr);
      }
    }

    kernel_pos_.clear();
    kernel_rows_.clear();
    row_kidx_.assign(mm, -1);
    for (std::size_t p = 0; p < mm; ++p) {
      if (col_active[p]) kernel_pos_.push_back(static_cast<int>(p));
    }
    for (std::size_t r = 0; r < mm; ++r) {
      if (row_active[r]) {
        row_kidx_[r] = static_cast<int>(kernel_rows_.size());
        kernel_rows_.push_back(static_cast<int>(r));
      }
    }
    const auto k = static_cast<Eigen::Index>(kernel_pos_.size());
    if (k != static_cast<Eigen::Index>(kernel_rows_.size())) return false;
    if (k == 0) return true;
    std::vector<Eigen::Triplet<double>> entries;
    double scale = 1.0;
    for (Eigen::Index q = 0; q < k; ++q) {
      const auto& col = column(static_cast<std::size_t>(kernel_pos_[q]));
      for (std::size_t e = 0; e < col.rows.size(); ++e) {
        const int kr = row_kidx_[static_cast<std::size_t>(col.rows[e])];
        if (kr >= 0) {
          entries.emplace_back(kr, q, col.vals[e]);
          scale = std::max(scale, std::abs(col.vals[e]));
        }
      }
    }
    sparse_ = k > kDenseKernelLimit;
    if (!sparse_) {
      Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(k, k);
      for (const auto& t : entries) kernel(t.row(), t.col()) += t.value();
      dense_lu_.compute(kernel);
      const Eigen::VectorXd diag = dense_lu_.matrixLU().diagonal().cwiseAbs();
      return diag.minCoeff() > 1e-11 * scale;
    }
    Eigen::SparseMatrix<double> kernel(k, k);
    kernel.setFromTriplets(entries.begin(), entries.end());
    sparse_lu_.compute(kernel);
    if (sparse_lu_.info() != Eigen::Success) return false;
    const double log_det = sparse_lu_.logAbsDeterminant();
    return std::isfinite(log_det);
  }

  // Solves B w = a; a is indexed by row, w by basis position.
  void ftran(const std::vector<double>& a, std::vector<double>& w) const {
    w.assign(a.size(), 0.0);
    std::vector<double> rhs(a);
    auto eliminate = [&](std::size_t p, double value) {
      if (value == 0.0) return;
      const auto& col = column(p);
      for (std::size_t e = 0; e < col.rows.size(); ++e) rhs[static_cast<std::size_t>(col.rows[e])] -= col.vals[e] * value;
    };
    for (const Pivot& pv : lower_) {
      const double value = rhs[static_cast<std::size_t>(pv.row)] / pv.value;
      w[static_cast<std::size_t>(pv.pos)] = value;
      eliminate(static_cast<std::size_t>(pv.pos), value);
    }
    const auto k = static_cast<Eigen::Index>(kernel_pos_.size());
    if (k > 0) {
      Eigen::VectorXd rk(k);
      for (Eigen::Index i = 0; i < k; ++i) rk(i) = rhs[static_cast<std::size_t>(kernel_rows_[i])];
      const Eigen::VectorXd wk = sparse_ ? Eigen::VectorXd(sparse_lu_.solve(rk)) : Eigen::VectorXd(dense_lu_.solve(rk));
      for (Eigen::Index q = 0; q < k; ++q) {
        const auto p = static_cast<std::size_t>(kernel_pos_[q]);
        w[p] = wk(q);
        eliminate(p, wk(q));
      }
    }
    for (auto it = upper_.rbegin(); it != upper_.rend(); ++it) {
      const double value = rhs[static_cast<std::size_t>(it->row)] / it->value;
      w[static_cast<std::size_t>(it->pos)] = value;
      eliminate(static_cast<std::size_t>(it->pos), value);
    }
  }

  // Solves B' y = c; c is indexed by basis position, y by row.
  void btran(const std::vector<double>& c, std::vector<double>& y) const {
    y.assign(c.size(), 0.0);
    // Dot of column p with y, leaving out its pivot row.
    auto off_pivot = [&](std::size_t p, int pivot_row) {
      const auto& col = column(p);
      double s = 0.0;
      for (std::size_t e = 0; e < col.rows.size(); ++e) {
        if (col.rows[e] != pivot_row) s += col.vals[e] * y[static_cast<std::size_t>(col.rows[e])];
      }
      return s;
    };
    for (const Pivot& pv : upper_) {
      const auto p = static_cast<std::size_t>(pv.pos);
      y[static_cast<std::size_t>(pv.row)] = (c[p] - off_pivot(p, pv.row)) / pv.value;
    }
    const auto k = static_cast<Eigen::Index>(kernel_pos_.size());
    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (Eigen::Index q = 0; q < k; ++q) {
        const auto p = static_cast<std::size_t>(kernel_pos_[q]);
        const auto& col = column(p);
        double v = c[p];
        for (std::size_t e = 0; e < col.rows.size(); ++e) {
          if (row_kidx_[static_cast<std::size_t>(col.rows[e])] < 0) v -= col.vals[e] * y[static_cast<std::size_t>(col.rows[e])];
        }
        rhs(q) = v;
      }
      const Eigen::VectorXd yk = sparse_ ? Eigen::VectorXd(sparse_lu_.transpose().solve(rhs))
                                         : Eigen::VectorXd(dense_lu_.transpose().solve(rhs));
      for (Eigen::Index i = 0; i < k; ++i) y[static_cast<std::size_t>(kernel_rows_[i])] = yk(i);
    }
    for (auto it = lower_.rbegin(); it != lower_.rend(); ++it) {
      const auto p = static_cast<std::size_t>(it->pos);
      y[static_cast<std::size_t>(it->row)] = (c[p] - off_pivot(p, it->row)) / it->value;
    }
  }

 private:
  struct Pivot {
    int pos;
    int row;
    double value;
  };
  const SparseCol& column(std::size_t p) const {
    return (*cols_)[static_cast<std::size_t>((*basis_)[p])];
  }

  const std::vector<SparseCol>* cols_ = nullptr;
  const std::vector<int>* basis_ = nullptr;
  std::vector<Pivot> upper_;
  std::vector<Pivot> lower_;
  std::vector<int> kernel_pos_;
  std::vector<int> kernel_rows_;
  std::vector<int> row_kidx_;
  static constexpr Eigen::Index kDenseKernelLimit = 200;
  bool sparse_ = false;
  Eigen::PartialPivLU<Eigen::MatrixXd> dense_lu_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> sparse_lu_;
};

enum class PhaseResult { Optimal, Unbounded, IterLimit, Singular };

class Simplex {
 public:
  Simplex(StandardForm& sf, const SolverConfig& cfg) : sf_(sf), cfg_(cfg) {
    basis_ = sf.initial_basis;
    in_basis_.assign(sf.cols.size(), -1);
    for (std::size_t p = 0; p < basis_.size(); ++p) in_basis_[static_cast<std::size_t>(basis_[p])] = static_cast<int>(p);
    if (!cfg.trace_path.empty()) trace_.open(cfg.trace_path, std::ios::app);
  }

  PhaseResult run(const std::vector<double>& cost, bool phase_one) {
    const auto mm = static_cast<std::size_t>(sf_.m);
    const auto ncols = sf_.cols.size();
    std::vector<double> cb(mm);
    std::vector<double> y;
    std::vector<double> w;
    std::vector<double> column(mm);
    int degenerate_run = 0;
    bool bland = false;
    for (;;) {
      if (iterations_ >= cfg_.max_iters) return PhaseResult::IterLimit;
      if (!refresh(cost, cb, y)) return PhaseResult::Singular;

      // Pricing. A reduced cost only counts when it is negative relative to the
      // magnitude of the terms it was computed from.
      int entering = -1;
      double best = 0.0;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (in_basis_[j] >= 0) continue;
        if (!phase_one && sf_.artificial[j]) continue;
        const auto& col = sf_.cols[j];
        double d = cost[j];
        double mag = std::abs(cost[j]);
        for (std::size_t e = 0; e < col.rows.size(); ++e) {
          const double t = y[static_cast<std::size_t>(col.rows[e])] * col.vals[e];
          d -= t;
          mag += std::abs(t);
        }
        if (d >= -cfg_.feas_tol * std::max(1.0, mag)) continue;
        if (entering < 0 || d < best) {
          entering = static_cast<int>(j);
          best = d;
          if (bland) break;
        }
      }
      if (entering < 0) return PhaseResult::Optimal;

      std::fill(column.begin(), column.end(), 0.0);
      const auto& ecol = sf_.cols[static_cast<std::size_t>(entering)];
      for (std::size_t e = 0; e < ecol.rows.size(); ++e) column[static_cast<std::size_t>(ecol.rows[e])] = ecol.vals[e];
      factor_.ftran(column, w);

      // Ratio test (Harris): the bound on the step is relaxed by feas_tol, then
      // the largest pivot within it is chosen (lowest basis index under Bland).
      double wmax = 0.0;
      for (std::size_t p = 0; p < mm; ++p) wmax = std::max(wmax, std::abs(w[p]));
      const double pivot_tol = 1e-9 * std::max(1.0, wmax);
      int leave = -1;
      double ratio = kInf;
      for (std::size_t p = 0; p < mm; ++p) {
        const bool stuck_artificial = !phase_one && sf_.artificial[static_cast<std::size_t>(basis_[p])];
        if (stuck_artificial && std::abs(w[p]) > pivot_tol) {
          // A redundant-row artificial must stay at zero.
          if (leave < 0 || ratio > 0.0 || std::abs(w[p]) > std::abs(w[static_cast<std::size_t>(leave)])) {
            leave = static_cast<int>(p);
            ratio = 0.0;
          }
        }
      }
      if (leave < 0) {
        double bound = kInf;
        for (std::size_t p = 0; p < mm; ++p) {
          if (w[p] <= pivot_tol) continue;
          bound = std::min(bound, (std::max(0.0, xb_[p]) + cfg_.feas_tol) / w[p]);
        }
        if (!std::isfinite(bound)) return PhaseResult::Unbounded;
        for (std::size_t p = 0; p < mm; ++p) {
          if (w[p] <= pivot_tol) continue;
          const double r = std::max(0.0, xb_[p]) / w[p];
          if (r > bound) continue;
          bool take = leave < 0;
          if (!take) {
            const auto lp = static_cast<std::size_t>(leave);
            take = bland ? basis_[p] < basis_[lp] : w[p] > w[lp];
          }
          if (take) {
            leave = static_cast<int>(p);
            ratio = r;
          }
        }
      }

      if (ratio <= 1e-12) {
        if (++degenerate_run > 30) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      const auto lp = static_cast<std::size_t>(leave);
      in_basis_[static_cast<std::size_t>(basis_[lp])] = -1;
      basis_[lp] = entering;
      in_basis_[static_cast<std::size_t>(entering)] = leave;
      ++iterations_;
      if (trace_.is_open()) {
        trace_ << "lp," << iterations_ << ',' << (phase_one ? 1 : 2) << ',' << entering << ','
               << ratio << ',' << (bland ? "bland" : "dantzig") << '\n';
      }
    }
  }

  // Refactor, recompute primal values and duals for `cost`.
  bool refresh(const std::vector<double>& cost, std::vector<double>& cb, std::vector<double>& y) {
    if (!factor_.factor(sf_.cols, basis_, sf_.m)) return false;
    factor_.ftran(sf_.b, xb_);
    for (std::size_t p = 0; p < basis_.size(); ++p) cb[p] = cost[static_cast<std::size_t>(basis_[p])];
    factor_.btran(cb, y);
    return true;
  }

  // Pivot basic artificials out where some real column can replace them.
  void evict_artificials() {
    const auto mm = static_cast<std::size_t>(sf_.m);
    std::vector<double> unit(mm);
    std::vector<double> rho;
    for (std::size_t p = 0; p < mm; ++p) {
      if (!sf_.artificial[static_cast<std::size_t>(basis_[p])]) continue;
      if (!factor_.factor(sf_.cols, basis_, sf_.m)) return;
      std::vector<double> cb(mm, 0.0);
      cb[p] = 1.0;
      factor_.btran(cb, rho);  // row p of B^{-1}
      int best = -1;
      double best_abs = 1e-7;
      for (std::size_t j = 0; j < sf_.cols.size(); ++j) {
        if (in_basis_[j] >= 0 || sf_.artificial[j]) continue;
        const auto& col = sf_.cols[j];
        double a = 0.0;
        for (std::size_t e = 0; e < col.rows.size(); ++e) a += rho[static_cast<std::size_t>(col.rows[e])] * col.vals[e];
        if (std::abs(a) > best_abs) {
          best_abs = std::abs(a);
          best = static_cast<int>(j);
        }
      }
      if (best < 0) continue;
      in_basis_[static_cast<std::size_t>(basis_[p])] = -1;
      basis_[p] = best;
      in_basis_[static_cast<std::size_t>(best)] = static_cast<int>(p);
    }
  }

  const std::vector<int>& basis() const { return basis_; }
  const std::vector<double>& xb() const { return xb_; }
  long iterations() const { return iterations_; }

 private:
  StandardForm& sf_;
  const SolverConfig& cfg_;
  std::vector<int> basis_;
  std::vector<int> in_basis_;
  std::vector<double> xb_;
  BasisFactor factor_;
  long iterations_ = 0;
  std::ofstream trace_;
};

}  // namespace

LpResult solve_linear_program(const LinearProgram& lp, const SolverConfig& cfg) {
  lp.validate();
  cfg.validate();
  StandardForm sf = standardize(lp);
  const auto ncols = sf.cols.size();
  const auto mm = static_cast<std::size_t>(sf.m);
  LpResult result;
  Simplex simplex(sf, cfg);

  const bool any_artificial = std::any_of(sf.artificial.begin(), sf.artificial.end(),
                                          [](char a) { return a != 0; });
  if (any_artificial) {
    std::vector<double> phase_cost(ncols, 0.0);
    for (std::size_t j = 0; j < ncols; ++j) phase_cost[j] = sf.artificial[j] ? 1.0 : 0.0;
    const PhaseResult r = simplex.run(phase_cost, true);
    result.iterations = simplex.iterations();
    if (r == PhaseResult::IterLimit) {
      result.status = SolveStatus::IterLimit;
      return result;
    }
    if (r == PhaseResult::Singular) throw SolverError("LP basis became singular in phase one");
    double infeasibility = 0.0;
    for (std::size_t p = 0; p < mm; ++p) {
      if (sf.artificial[static_cast<std::size_t>(simplex.basis()[p])]) infeasibility += std::max(0.0, simplex.xb()[p]);
    }
    const double bscale = 1.0 + *std::max_element(sf.b.begin(), sf.b.end(), [](double a, double b) {
      return std::abs(a) < std::abs(b);
    });
    if (infeasibility > cfg.feas_tol * std::max(1.0, std::abs(bscale))) {
      result.status = SolveStatus::Infeasible;
      return result;
    }
    simplex.evict_artificials();
  }

  const PhaseResult r = simplex.run(sf.cost, false);
  result.iterations = simplex.iterations();
  if (r == PhaseResult::IterLimit) {
    result.status = SolveStatus::IterLimit;
    return result;
  }
  if (r == PhaseResult::Unbounded) {
    result.status = SolveStatus::Unbounded;
    return result;
  }
  if (r == PhaseResult::Singular) throw SolverError("LP basis became singular");

  // Recover z, x and duals.
  std::vector<double> z(ncols, 0.0);
  for (std::size_t p = 0; p < mm; ++p) z[static_cast<std::size_t>(simplex.basis()[p])] = std::max(0.0, simplex.xb()[p]);
  const Eigen::Index n = lp.cols();
  result.x = sf.shift;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (const auto& pc : sf.pieces[static_cast<std::size_t>(j)]) result.x(j) += pc.sign * z[static_cast<std::size_t>(pc.col)];
    result.x(j) = std::clamp(result.x(j), lp.lower(j), lp.upper(j));
  }
  result.objective = lp.objective.dot(result.x) + lp.objective_offset;

  // Duals of the standardized rows, mapped back to the original rows.
  BasisFactor factor;
  factor.factor(sf.cols, simplex.basis(), sf.m);
  std::vector<double> cb(mm);
  for (std::size_t p = 0; p < mm; ++p) cb[p] = sf.cost[static_cast<std::size_t>(simplex.basis()[p])];
  std::vector<double> y;
  factor.btran(cb, y);
  result.duals.resize(lp.rows());
  for (int i = 0; i < sf.original_rows; ++i) {
    result.duals(i) = y[static_cast<std::size_t>(i)] * sf.row_sign[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd reduced = lp.objective - lp.constraints.transpose() * result.duals;
  double dual = lp.rhs.dot(result.duals) + lp.objective_offset;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double rc = reduced(j);
    if (rc > 0.0) {
      dual += lp.lower(j) > -kInf ? rc * lp.lower(j) : (rc > 1e-7 ? -kInf : 0.0);
    } else if (rc < 0.0) {
      dual += lp.upper(j) < kInf ? rc * lp.upper(j) : (rc < -1e-7 ? -kInf : 0.0);
    }
  }
  result.dual_objective = dual;
  result.status = SolveStatus::Optimal;
  return result;
}

}  // namespace crm
