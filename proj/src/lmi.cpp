#include "consensus_kit/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace consensus_kit::lmi {

BlockLayout::BlockLayout(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  for (int s : sizes_) {
    offsets_.push_back(total_);
    total_ += s;
  }
}

void Block::place(const BlockLayout& layout, int row, int col, int variable, const Matrix& coef_left,
                  const Matrix& coef_right) {
  if (constant.size() == 0) constant = Matrix::Zero(layout.total(), layout.total());
  if (coef_left.rows() != layout.size(row) || coef_right.cols() != layout.size(col)) {
    throw DimensionMismatch("Block::place: coefficient shape does not fit sub-block (" +
                            std::to_string(row) + "," + std::to_string(col) + ") of " + label);
  }
  Term t;
  t.variable = variable;
  t.left = Matrix::Zero(layout.total(), coef_left.cols());
  t.left.middleRows(layout.offset(row), layout.size(row)) = coef_left;
  t.right = Matrix::Zero(coef_right.rows(), layout.total());
  t.right.middleCols(layout.offset(col), layout.size(col)) = coef_right;
  t.mirror = row != col;
  terms.push_back(std::move(t));
}

void Block::place_constant(const BlockLayout& layout, int row, int col, const Matrix& value) {
  if (constant.size() == 0) constant = Matrix::Zero(layout.total(), layout.total());
  constant.block(layout.offset(row), layout.offset(col), layout.size(row), layout.size(col)) += value;
  if (row != col) {
    constant.block(layout.offset(col), layout.offset(row), layout.size(col), layout.size(row)) +=
        value.transpose();
  }
}

int Problem::add_variable(std::string name, int rows, int cols, bool symmetric) {
  if (rows < 1 || cols < 1 || (symmetric && rows != cols)) {
    throw DimensionMismatch("variable " + name + " has an invalid shape");
  }
  variables_.push_back({std::move(name), rows, cols, symmetric});
  return static_cast<int>(variables_.size()) - 1;
}

Block& Problem::add_block(std::string label, int size) {
  Block b;
  b.label = std::move(label);
  b.constant = Matrix::Zero(size, size);
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

double Problem::margin(int block) const { return 1e-7 * (1.0 + blocks_.at(block).constant.norm()); }

void Problem::validate() const {
  for (const auto& b : blocks_) {
    if (b.constant.rows() != b.constant.cols()) {
      throw DimensionMismatch("block " + b.label + " constant is not square");
    }
    if ((b.constant - b.constant.transpose()).norm() > 1e-12 * (1.0 + b.constant.norm())) {
      throw DimensionMismatch("block " + b.label + " constant is not symmetric");
    }
    for (const auto& t : b.terms) {
      if (t.variable < 0 || t.variable >= static_cast<int>(variables_.size())) {
        throw DimensionMismatch("block " + b.label + " references an unknown variable");
      }
      const auto& v = variables_[t.variable];
      if (t.left.rows() != b.size() || t.left.cols() != v.rows || t.right.rows() != v.cols ||
          t.right.cols() != b.size()) {
        throw DimensionMismatch("block " + b.label + ": term for " + v.name + " has inconsistent shape");
      }
      if (!t.mirror && !v.symmetric) {
        throw DimensionMismatch("block " + b.label + ": unmirrored term on non-symmetric " + v.name);
      }
    }
  }
}

namespace {

// Decision vector layout: symmetric variables contribute their upper
// triangle, others every entry (column-major).
struct Packing {
  std::vector<int> offset;
  int total = 0;

  explicit Packing(const std::vector<Variable>& vars) {
    for (const auto& v : vars) {
      offset.push_back(total);
      total += v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
    }
  }
};

Matrix basis_matrix(const Variable& v, int k) {
  Matrix b = Matrix::Zero(v.rows, v.cols);
  if (!v.symmetric) {
    b(k % v.rows, k / v.rows) = 1.0;
    return b;
  }
  for (int j = 0; j < v.cols; ++j) {
    for (int i = 0; i <= j; ++i) {
      if (k-- == 0) {
        b(i, j) = 1.0;
        b(j, i) = 1.0;
        return b;
      }
    }
  }
  return b;
}

Vector pack(const std::vector<Variable>& vars, const Packing& packing, const Assignment& a) {
  Vector x(packing.total);
  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    const auto& v = vars[vi];
    int at = packing.offset[vi];
    if (v.symmetric) {
      for (int j = 0; j < v.cols; ++j) {
        for (int i = 0; i <= j; ++i) x(at++) = 0.5 * (a[vi](i, j) + a[vi](j, i));
      }
    } else {
      for (int j = 0; j < v.cols; ++j) {
        for (int i = 0; i < v.rows; ++i) x(at++) = a[vi](i, j);
      }
    }
  }
  return x;
}

Assignment unpack(const std::vector<Variable>& vars, const Packing& packing, const Vector& x) {
  Assignment a;
  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    const auto& v = vars[vi];
    Matrix m(v.rows, v.cols);
    int at = packing.offset[vi];
    if (v.symmetric) {
      for (int j = 0; j < v.cols; ++j) {
        for (int i = 0; i <= j; ++i) m(i, j) = m(j, i) = x(at++);
      }
    } else {
      for (int j = 0; j < v.cols; ++j) {
        for (int i = 0; i < v.rows; ++i) m(i, j) = x(at++);
      }
    }
    a.push_back(std::move(m));
  }
  return a;
}

Matrix apply_term(const Term& t, const Matrix& X) {
  Matrix v = t.left * X * t.right;
  if (t.mirror) v += v.transpose().eval();
  return v;
}

// Affine map x -> vec(F(x)) stacked over blocks: f0 + G x.
struct AffineMap {
  Matrix G;
  Vector f0;
  std::vector<int> row_offset;
};

AffineMap vectorise(const Problem& problem, const Packing& packing) {
  AffineMap map;
  int rows = 0;
  for (const auto& b : problem.blocks()) {
    map.row_offset.push_back(rows);
    rows += b.size() * b.size();
  }
  map.G = Matrix::Zero(rows, packing.total);
  map.f0 = Vector::Zero(rows);
  const auto& vars = problem.variables();
  for (std::size_t bi = 0; bi < problem.blocks().size(); ++bi) {
    const auto& b = problem.blocks()[bi];
    const int s = b.size();
    map.f0.segment(map.row_offset[bi], s * s) = b.constant.reshaped();
    for (const auto& t : b.terms) {
      const auto& v = vars[t.variable];
      const int count = v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
      for (int k = 0; k < count; ++k) {
        const Matrix contribution = apply_term(t, basis_matrix(v, k));
        map.G.block(map.row_offset[bi], packing.offset[t.variable] + k, s * s, 1) +=
            contribution.reshaped();
      }
    }
  }
  return map;
}

}  // namespace

SolveResult solve_feasibility(const Problem& problem, const SolverOptions& options) {
  problem.validate();
  const auto& vars = problem.variables();
  const auto& blocks = problem.blocks();
  const Packing packing(vars);
  const AffineMap map = vectorise(problem, packing);
  const int nb = static_cast<int>(blocks.size());
  const int nx = packing.total;
  const int ny = nx + 1;  // decision vector plus the common slack t

  // Per block: constant and one coefficient matrix per decision entry.
  std::vector<Matrix> F0(nb);
  std::vector<std::vector<Matrix>> G(nb);
  std::vector<double> margin(nb);
  int barrier_weight = 2 * nx;
  for (int b = 0; b < nb; ++b) {
    const int sz = blocks[b].size();
    F0[b] = blocks[b].constant;
    for (int k = 0; k < nx; ++k) G[b].push_back(map.G.block(map.row_offset[b], k, sz * sz, 1).reshaped(sz, sz));
    margin[b] = problem.margin(b);
    barrier_weight += sz;
  }

  Assignment start = options.start;
  if (start.empty()) {
    for (const auto& v : vars) start.push_back(Matrix::Identity(v.rows, v.cols));
  }
  if (start.size() != vars.size()) throw DimensionMismatch("solver start has the wrong variable count");
  const Vector x0 = pack(vars, packing, start);
  const double bound = options.box_bound * (1.0 + x0.cwiseAbs().maxCoeff());
  const double bound2 = bound * bound;

  auto block_value = [&](int b, const Vector& x) {
    Matrix F = F0[b];
    for (int k = 0; k < nx; ++k) F += x(k) * G[b][k];
    return Matrix(0.5 * (F + F.transpose()));
  };
  auto min_eig = [](const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
  };

  // Start strictly inside: t below every block's smallest eigenvalue.
  Vector y(ny);
  y.head(nx) = x0;
  double lowest = std::numeric_limits<double>::infinity();
  for (int b = 0; b < nb; ++b) lowest = std::min(lowest, min_eig(block_value(b, x0)));
  y(nx) = lowest - 1.0 - std::abs(lowest);

  // Barrier objective -s t - sum log det(F_b(x) - t I) - sum log(R^2 - x_k^2);
  // +inf outside the domain.
  auto objective = [&](const Vector& v, double s) {
    double f = -s * v(nx);
    for (int k = 0; k < nx; ++k) {
      const double gap = bound2 - v(k) * v(k);
      if (gap <= 0.0) return std::numeric_limits<double>::infinity();
      f -= std::log(gap);
    }
    for (int b = 0; b < nb; ++b) {
      Matrix S = block_value(b, v.head(nx));
      S.diagonal().array() -= v(nx);
      Eigen::LLT<Matrix> llt(S);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      f -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    return f;
  };

  auto feasible_now = [&](const Vector& v, double* worst) {
    bool ok = true;
    *worst = std::numeric_limits<double>::infinity();
    for (int b = 0; b < nb; ++b) {
      const double e = min_eig(block_value(b, v.head(nx)));
      *worst = std::min(*worst, e - margin[b]);
      ok = ok && e >= margin[b];
    }
    return ok;
  };

  SolveResult result;
  double s = 1.0 / (1.0 + std::abs(y(nx)));
  int steps = 0;
  while (steps < options.max_iterations) {
    for (int inner = 0; inner < 60 && steps < options.max_iterations; ++inner) {
      Vector g = Vector::Zero(ny);
      Matrix H = Matrix::Zero(ny, ny);
      g(nx) = -s;
      for (int k = 0; k < nx; ++k) {
        const double gap = bound2 - y(k) * y(k);
        g(k) += 2.0 * y(k) / gap;
        H(k, k) += 2.0 * (bound2 + y(k) * y(k)) / (gap * gap);
      }
      for (int b = 0; b < nb; ++b) {
        Matrix S = block_value(b, y.head(nx));
        S.diagonal().array() -= y(nx);
        const Matrix Sinv = S.llt().solve(Matrix::Identity(S.rows(), S.cols()));
        std::vector<Matrix> W(ny);
        for (int k = 0; k < nx; ++k) W[k] = Sinv * G[b][k];
        W[nx] = -Sinv;
        for (int j = 0; j < ny; ++j) {
          g(j) -= W[j].trace();
          for (int l = 0; l <= j; ++l) {
            const double h = (W[j].array() * W[l].transpose().array()).sum();
            H(j, l) += h;
            if (l != j) H(l, j) += h;
          }
        }
      }
      const Vector step = -H.ldlt().solve(g);
      const double decrement = -g.dot(step);
      if (!(decrement > 1e-10)) break;
      const double f = objective(y, s);
      double alpha = 1.0;
      Vector trial = y + step;
      double ft = objective(trial, s);
      while (!(ft <= f - 0.25 * alpha * decrement) && alpha > 1e-12) {
        alpha *= 0.5;
        trial = y + alpha * step;
        ft = objective(trial, s);
      }
      if (!std::isfinite(ft) || alpha <= 1e-12) break;
      y = trial;
      ++steps;

      double worst = 0.0;
      if (!options.maximize_margin && feasible_now(y, &worst)) {
        Witness w;
        w.assignment = unpack(vars, packing, y.head(nx));
        w.min_block_eigenvalue = worst + *std::min_element(margin.begin(), margin.end());
        w.iterations = steps;
        result.status = Status::Feasible;
        result.iterations = steps;
        result.last_slack = worst;
        result.witness = std::move(w);
        return result;
      }
      result.last_slack = worst;
    }
    if (options.maximize_margin && barrier_weight / s < 1e-9 * (1.0 + std::abs(y(nx)))) break;
    // The optimal t is at most t + barrier_weight / s; once that bound is below
    // every margin no strictly feasible point exists inside the box.
    if (y(nx) + barrier_weight / s < *std::min_element(margin.begin(), margin.end()) || s > 1e14) break;
    s *= options.barrier_growth;
  }
  result.iterations = steps;
  double worst = 0.0;
  if (options.maximize_margin && feasible_now(y, &worst)) {
    Witness w;
    w.assignment = unpack(vars, packing, y.head(nx));
    w.min_block_eigenvalue = worst + *std::min_element(margin.begin(), margin.end());
    w.iterations = steps;
    result.status = Status::Feasible;
    result.witness = std::move(w);
  }
  result.last_slack = worst;
  return result;
}

Vector jacobi_eigenvalues(const Matrix& symmetric) {
  Matrix a = 0.5 * (symmetric + symmetric.transpose());
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-30 * (1.0 + a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index r = p + 1; r < n; ++r) {
        if (a(p, r) == 0.0) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * a(p, r));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
      }
    }
  }
  Vector d = a.diagonal();
  std::sort(d.begin(), d.end());
  return d;
}

std::vector<double> check_witness(const Problem& problem, const Assignment& assignment) {
  const auto& vars = problem.variables();
  if (assignment.size() != vars.size()) {
    throw DimensionMismatch("check_witness: expected " + std::to_string(vars.size()) + " variables");
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (assignment[i].rows() != vars[i].rows || assignment[i].cols() != vars[i].cols) {
      throw DimensionMismatch("check_witness: variable " + vars[i].name + " has the wrong shape");
    }
  }
  std::vector<double> out;
  for (const auto& b : problem.blocks()) {
    Matrix F = b.constant;
    for (const auto& t : b.terms) F += apply_term(t, assignment[t.variable]);
    out.push_back(F.rows() == 0 ? std::numeric_limits<double>::infinity() : jacobi_eigenvalues(F)(0));
  }
  return out;
}

}  // namespace consensus_kit::lmi
