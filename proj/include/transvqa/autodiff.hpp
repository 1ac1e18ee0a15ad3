#pragma once

// Minimal reverse-mode differentiation over dense matrices. Just enough to
// back-propagate the toy reference model; not a general tensor library.

#include <Eigen/Dense>

#include <functional>
#include <utility>
#include <vector>

namespace transvqa::ad {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
};

class Tape {
 public:
  Var leaf(Mat value);
  Var constant(Mat value);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps the tape backwards.
  void backward(Var out);

  // Used by op implementations.
  Var push(Mat value, std::vector<int> parents, std::function<void(Tape&, int)> back);
  Mat& grad_ref(int id) { return nodes_[id].grad; }
  const Mat& value_at(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&, int)> back;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var tanh(Var a);
Var transpose(Var a);
Var softmax_rows(Var a);
Var mean_rows(Var a);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, int start, int count);
/// Sum over rows r of cos(reference_r, a_r). Rows where either vector has
/// zero norm contribute 0 and receive no gradient; their count is returned
/// through `degenerate` when non-null.
Var cosine_rows_sum(const Mat& reference, Var a, int* degenerate = nullptr);
/// Sum of log softmax(a_row)[col] over the given (row, col) picks.
Var log_softmax_pick(Var a, const std::vector<std::pair<int, int>>& picks);
/// Scalar (1x1) sum.
Var sum_scalars(const std::vector<Var>& parts);

}  // namespace transvqa::ad
