#include "transvqa/autodiff.hpp"

#include "transvqa/core.hpp"

#include <cmath>

namespace transvqa::ad {

Var Tape::leaf(Mat value) {
  Node n;
  n.grad = Mat::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1, this};
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1, this};
}

Var Tape::push(Mat value, std::vector<int> parents, std::function<void(Tape&, int)> back) {
  Node n;
  for (int p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  if (n.needs_grad) {
    n.grad = Mat::Zero(value.rows(), value.cols());
    n.back = std::move(back);
  }
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1, this};
}

void Tape::backward(Var out) {
  if (nodes_[out.id].value.size() != 1) throw Error("backward needs a scalar output");
  if (!nodes_[out.id].needs_grad) return;
  nodes_[out.id].grad(0, 0) = 1.0;
  for (int id = out.id; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.back) n.back(*this, id);
  }
}

namespace {

void accumulate(Tape& t, int id, const Mat& g) {
  if (t.needs_grad(id)) t.grad_ref(id) += g;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Mat v = t.value(a) * t.value(b);
  int ia = a.id, ib = b.id;
  return t.push(std::move(v), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(ia)) t.grad_ref(ia) += g * t.value_at(ib).transpose();
    if (t.needs_grad(ib)) t.grad_ref(ib) += t.value_at(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  Mat v = t.value(a) + t.value(b);
  int ia = a.id, ib = b.id;
  return t.push(std::move(v), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat g = t.grad_ref(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = *a.tape;
  Mat v = t.value(a).rowwise() + RowVec(t.value(row));
  int ia = a.id, ir = row.id;
  return t.push(std::move(v), {ia, ir}, [ia, ir](Tape& t, int self) {
    const Mat g = t.grad_ref(self);
    accumulate(t, ia, g);
    accumulate(t, ir, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Mat v = t.value(a) * s;
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia, s](Tape& t, int self) {
    accumulate(t, ia, t.grad_ref(self) * s);
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Mat v = t.value(a).array().tanh().matrix();
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia](Tape& t, int self) {
    const Mat& y = t.value_at(self);
    accumulate(t, ia, (t.grad_ref(self).array() * (1.0 - y.array().square())).matrix());
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  Mat v = t.value(a).transpose();
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia](Tape& t, int self) {
    accumulate(t, ia, t.grad_ref(self).transpose());
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Mat& x = t.value(a);
  Mat v(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    RowVec e = (x.row(r).array() - x.row(r).maxCoeff()).exp().matrix();
    v.row(r) = e / e.sum();
  }
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia](Tape& t, int self) {
    const Mat& y = t.value_at(self);
    const Mat& g = t.grad_ref(self);
    Mat ga(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = g.row(r).dot(y.row(r));
      ga.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    accumulate(t, ia, ga);
  });
}

Var mean_rows(Var a) {
  Tape& t = *a.tape;
  const Mat& x = t.value(a);
  Mat v = x.colwise().mean();
  int ia = a.id;
  auto n = static_cast<double>(x.rows());
  return t.push(std::move(v), {ia}, [ia, n](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    Mat ga = g.replicate(static_cast<Eigen::Index>(n), 1) / n;
    accumulate(t, ia, ga);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts.front()).cols();
  std::vector<int> ids;
  for (auto p : parts) {
    if (t.value(p).cols() != cols) throw Error("concat_rows: column mismatch");
    rows += t.value(p).rows();
    ids.push_back(p.id);
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    v.middleRows(at, t.value(p).rows()) = t.value(p);
    at += t.value(p).rows();
  }
  return t.push(std::move(v), ids, [ids](Tape& t, int self) {
    Eigen::Index at = 0;
    const Mat g = t.grad_ref(self);
    for (int id : ids) {
      auto r = t.value_at(id).rows();
      accumulate(t, id, g.middleRows(at, r));
      at += r;
    }
  });
}

Var slice_rows(Var a, int start, int count) {
  Tape& t = *a.tape;
  Mat v = t.value(a).middleRows(start, count);
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia, start, count](Tape& t, int self) {
    if (!t.needs_grad(ia)) return;
    t.grad_ref(ia).middleRows(start, count) += t.grad_ref(self);
  });
}

Var cosine_rows_sum(const Mat& reference, Var a, int* degenerate) {
  Tape& t = *a.tape;
  const Mat& x = t.value(a);
  if (reference.rows() != x.rows() || reference.cols() != x.cols()) {
    throw Error("cosine_rows_sum: shape mismatch");
  }
  double total = 0.0;
  int skipped = 0;
  // Per row: c = <r, x> / (|r| |x|).
  Mat back_coef = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double nr2 = reference.row(i).squaredNorm();
    double nx2 = x.row(i).squaredNorm();
    if (nr2 == 0.0 || nx2 == 0.0) {
      ++skipped;
      continue;
    }
    double denom = std::sqrt(nr2 * nx2);
    double c = reference.row(i).dot(x.row(i)) / denom;
    total += c;
    // dc/dx = r / (|r||x|) - c x / |x|^2
    back_coef.row(i) = reference.row(i) / denom - c * x.row(i) / nx2;
  }
  if (degenerate) *degenerate = skipped;
  Mat v(1, 1);
  v(0, 0) = total;
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia, back_coef = std::move(back_coef)](Tape& t, int self) {
    accumulate(t, ia, back_coef * t.grad_ref(self)(0, 0));
  });
}

Var log_softmax_pick(Var a, const std::vector<std::pair<int, int>>& picks) {
  Tape& t = *a.tape;
  const Mat& x = t.value(a);
  double total = 0.0;
  Mat back_coef = Mat::Zero(x.rows(), x.cols());
  for (auto [r, c] : picks) {
    double mx = x.row(r).maxCoeff();
    RowVec e = (x.row(r).array() - mx).exp().matrix();
    double z = e.sum();
    total += x(r, c) - mx - std::log(z);
    back_coef.row(r) -= e / z;
    back_coef(r, c) += 1.0;
  }
  Mat v(1, 1);
  v(0, 0) = total;
  int ia = a.id;
  return t.push(std::move(v), {ia}, [ia, back_coef = std::move(back_coef)](Tape& t, int self) {
    accumulate(t, ia, back_coef * t.grad_ref(self)(0, 0));
  });
}

Var sum_scalars(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape;
  Mat v = Mat::Zero(1, 1);
  std::vector<int> ids;
  for (auto p : parts) {
    v += t.value(p);
    ids.push_back(p.id);
  }
  return t.push(std::move(v), ids, [ids](Tape& t, int self) {
    const Mat g = t.grad_ref(self);
    for (int id : ids) accumulate(t, id, g);
  });
}

}  // namespace transvqa::ad
