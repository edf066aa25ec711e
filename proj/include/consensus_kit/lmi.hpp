#pragma once

#include <optional>
#include <string>
#include <vector>

#include "consensus_kit/common.hpp"

namespace consensus_kit::lmi {

struct Variable {
  std::string name;
  int rows = 0;
  int cols = 0;
  bool symmetric = false;
};

/// left * X * right, plus its transpose when `mirror` is set (used for
/// off-diagonal placements so the block stays symmetric).
struct Term {
  int variable = 0;
  Matrix left;
  Matrix right;
  bool mirror = false;
};

/// Partition of a block into sub-blocks of the given sizes.
class BlockLayout {
 public:
  explicit BlockLayout(std::vector<int> sizes);
  int total() const { return total_; }
  int offset(int part) const { return offsets_.at(part); }
  int size(int part) const { return sizes_.at(part); }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int total_ = 0;
};

/// constant + sum(terms) > 0.
struct Block {
  std::string label;
  Matrix constant;
  std::vector<Term> terms;

  int size() const { return static_cast<int>(constant.rows()); }

  /// Adds coef_left * X * coef_right at sub-block (row, col) and its mirror
  /// at (col, row) when row != col.
  void place(const BlockLayout& layout, int row, int col, int variable, const Matrix& coef_left,
             const Matrix& coef_right);
  /// Adds a constant sub-block (mirrored when row != col).
  void place_constant(const BlockLayout& layout, int row, int col, const Matrix& value);
};

using Assignment = std::vector<Matrix>;

/// Strict LMI system over matrix-valued decision variables.
class Problem {
 public:
  int add_variable(std::string name, int rows, int cols, bool symmetric);
  Block& add_block(std::string label, int size);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Per-block strictness margin: 1e-7 * (1 + ||F_0||_F).
  double margin(int block) const;

  /// Throws DimensionMismatch on inconsistent term shapes.
  void validate() const;

 private:
  std::vector<Variable> variables_;
  std::vector<Block> blocks_;
};

struct Witness {
  Assignment assignment;
  double min_block_eigenvalue = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  /// Newton steps across all barrier stages.
  int max_iterations = 2000;
  /// Every packed decision entry stays within box_bound * (1 + max |start|).
  double box_bound = 1e3;
  /// Barrier weight multiplier between stages.
  double barrier_growth = 8.0;
  /// Keep going to the largest common slack instead of stopping at the first
  /// strictly feasible iterate.
  bool maximize_margin = true;
  /// Starting point; all variables Identity(rows, cols) when empty.
  Assignment start;
};

enum class Status { Feasible, Undecided };

struct SolveResult {
  Status status = Status::Undecided;
  std::optional<Witness> witness;
  int iterations = 0;
  /// Worst block slack (min eigenvalue minus margin) at the last iterate.
  double last_slack = 0.0;
};

/// Log-det barrier method on max t s.t. F_b(x) >= t I for every block, with the
/// decision entries boxed. Stops at the first iterate whose blocks all clear
/// their margins. Undecided is not a proof of infeasibility.
SolveResult solve_feasibility(const Problem& problem, const SolverOptions& options = {});

/// Evaluates every block at `assignment` term by term and returns its
/// smallest eigenvalue (cyclic Jacobi, independent of the solver path).
std::vector<double> check_witness(const Problem& problem, const Assignment& assignment);

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
Vector jacobi_eigenvalues(const Matrix& symmetric);

}  // namespace consensus_kit::lmi
