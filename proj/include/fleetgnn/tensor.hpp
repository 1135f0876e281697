#pragma once

// Dense row-major tensors and a tape-based reverse-mode differentiator with
// just the operators the graph networks need.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fleetgnn::ad {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
      throw std::invalid_argument("tensor values do not match shape");
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }
  static Tensor column(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n, 1}, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : size() / std::max<std::size_t>(rows(), 1); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool operator==(const Tensor&) const = default;

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

inline std::string shape_string(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t index = 0;
};

/// Directed edge list (src -> dst) over `nodes` vertices, shared by the
/// closures recorded on a tape.
struct EdgeIndex {
  std::size_t nodes = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;

  std::size_t size() const { return src.size(); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }
  Var parameter(Tensor value) { return push(std::move(value), true, nullptr); }

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }

  /// Gradient of the last backward() target with respect to `v`; zeros when
  /// `v` does not influence it.
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.index);
    if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
    return n.grad;
  }

  void backward(Var loss) {
    if (value(loss).size() != 1) {
      throw std::invalid_argument("backward requires a scalar, got " + shape_string(value(loss)));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    accumulate_grad(loss.index)[0] = 1.0;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back && !n.grad.empty()) n.back(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // Operator plumbing.
  Var push(Tensor value, bool requires_grad, BackwardFn back) {
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(back)});
    return Var{nodes_.size() - 1};
  }
  const Tensor& upstream(std::size_t i) const { return nodes_[i].grad; }
  /// Gradient buffer of node i, allocated on first use; nullptr when the node
  /// does not require a gradient.
  Tensor* grad_buffer(Var v) {
    if (!nodes_[v.index].requires_grad) return nullptr;
    return &accumulate_grad(v.index);
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn back;
  };

  Tensor& accumulate_grad(std::size_t i) {
    Node& n = nodes_[i];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
  }

  std::vector<Node> nodes_;
};

namespace detail {

inline bool any_requires(const Tape& t, std::initializer_list<Var> vs) {
  return std::any_of(vs.begin(), vs.end(), [&](Var v) { return t.requires_grad(v); });
}

template <typename Deriv>
Var unary(Tape& t, Var a, Tensor out, Deriv deriv) {
  const bool rg = t.requires_grad(a);
  Tape::BackwardFn back;
  if (rg) {
    back = [a, deriv](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      const Tensor& x = tape.value(a);
      const Tensor& y = tape.value(Var{self});
      Tensor* g = tape.grad_buffer(a);
      for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += up[i] * deriv(x[i], y[i]);
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

}  // namespace detail

inline Var matmul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols() != B.rows()) {
    throw std::invalid_argument("matmul shape mismatch " + shape_string(A) + " * " + shape_string(B));
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C({n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) C(i, j) += aip * B(p, j);
    }
  }
  const bool rg = detail::any_requires(t, {a, b});
  Tape::BackwardFn back;
  if (rg) {
    back = [a, b](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      const Tensor& A = tape.value(a);
      const Tensor& B = tape.value(b);
      const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
      if (Tensor* ga = tape.grad_buffer(a)) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += up(i, j) * B(p, j);
            (*ga)(i, p) += s;
          }
      }
      if (Tensor* gb = tape.grad_buffer(b)) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) (*gb)(p, j) += aip * up(i, j);
          }
      }
    };
  }
  return t.push(std::move(C), rg, std::move(back));
}

inline Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B)) throw std::invalid_argument("add shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  const bool rg = detail::any_requires(t, {a, b});
  Tape::BackwardFn back;
  if (rg) {
    back = [a, b](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      for (Var v : {a, b}) {
        if (Tensor* g = tape.grad_buffer(v))
          for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += up[i];
      }
    };
  }
  return t.push(std::move(C), rg, std::move(back));
}

/// Elementwise product.
inline Var mul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B)) throw std::invalid_argument("mul shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  const bool rg = detail::any_requires(t, {a, b});
  Tape::BackwardFn back;
  if (rg) {
    back = [a, b](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      const Tensor& A = tape.value(a);
      const Tensor& B = tape.value(b);
      if (Tensor* ga = tape.grad_buffer(a))
        for (std::size_t i = 0; i < up.size(); ++i) (*ga)[i] += up[i] * B[i];
      if (Tensor* gb = tape.grad_buffer(b))
        for (std::size_t i = 0; i < up.size(); ++i) (*gb)[i] += up[i] * A[i];
    };
  }
  return t.push(std::move(C), rg, std::move(back));
}

inline Var sum(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  double s = 0.0;
  for (double v : A.values()) s += v;
  const bool rg = t.requires_grad(a);
  Tape::BackwardFn back;
  if (rg) {
    back = [a](Tape& tape, std::size_t self) {
      const double up = tape.upstream(self)[0];
      Tensor* g = tape.grad_buffer(a);
      for (double& v : g->values()) v += up;
    };
  }
  return t.push(Tensor::scalar(s), rg, std::move(back));
}

inline Var relu(Tape& t, Var a) {
  Tensor out = t.value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return detail::unary(t, a, std::move(out), [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(Tape& t, Var a, double slope) {
  Tensor out = t.value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : slope * v;
  return detail::unary(t, a, std::move(out),
                       [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Tape& t, Var a) {
  Tensor out = t.value(a);
  for (double& v : out.values()) v = stable_sigmoid(v);
  return detail::unary(t, a, std::move(out), [](double, double y) { return y * (1.0 - y); });
}

/// out[e] = src_scores[src[e]] + dst_scores[dst[e]] for column vectors.
inline Var edge_scores(Tape& t, Var src_scores, Var dst_scores,
                       std::shared_ptr<const EdgeIndex> edges) {
  const Tensor& S = t.value(src_scores);
  const Tensor& D = t.value(dst_scores);
  if (S.rows() != edges->nodes || D.rows() != edges->nodes || S.cols() != 1 || D.cols() != 1) {
    throw std::invalid_argument("edge_scores expects two node column vectors");
  }
  Tensor out({edges->size(), 1}, 0.0);
  for (std::size_t e = 0; e < edges->size(); ++e) out[e] = S[edges->src[e]] + D[edges->dst[e]];
  const bool rg = detail::any_requires(t, {src_scores, dst_scores});
  Tape::BackwardFn back;
  if (rg) {
    back = [src_scores, dst_scores, edges](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      Tensor* gs = tape.grad_buffer(src_scores);
      Tensor* gd = tape.grad_buffer(dst_scores);
      for (std::size_t e = 0; e < edges->size(); ++e) {
        if (gs) (*gs)[edges->src[e]] += up[e];
        if (gd) (*gd)[edges->dst[e]] += up[e];
      }
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

/// Softmax of per-edge scores over the in-edges of each destination node.
inline Var edge_softmax(Tape& t, Var scores, std::shared_ptr<const EdgeIndex> edges) {
  const Tensor& E = t.value(scores);
  if (E.size() != edges->size()) throw std::invalid_argument("edge_softmax size mismatch");
  std::vector<double> max_in(edges->nodes, -INFINITY);
  for (std::size_t e = 0; e < edges->size(); ++e) {
    max_in[edges->dst[e]] = std::max(max_in[edges->dst[e]], E[e]);
  }
  Tensor out({edges->size(), 1}, 0.0);
  std::vector<double> denom(edges->nodes, 0.0);
  for (std::size_t e = 0; e < edges->size(); ++e) {
    out[e] = std::exp(E[e] - max_in[edges->dst[e]]);
    denom[edges->dst[e]] += out[e];
  }
  for (std::size_t e = 0; e < edges->size(); ++e) out[e] /= denom[edges->dst[e]];
  const bool rg = t.requires_grad(scores);
  Tape::BackwardFn back;
  if (rg) {
    back = [scores, edges](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      const Tensor& alpha = tape.value(Var{self});
      std::vector<double> dot(edges->nodes, 0.0);
      for (std::size_t e = 0; e < edges->size(); ++e) dot[edges->dst[e]] += up[e] * alpha[e];
      Tensor* g = tape.grad_buffer(scores);
      for (std::size_t e = 0; e < edges->size(); ++e) {
        (*g)[e] += alpha[e] * (up[e] - dot[edges->dst[e]]);
      }
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

/// out[dst[e], :] += coeff[e] * features[src[e], :].
inline Var edge_aggregate(Tape& t, Var coeff, Var features, std::shared_ptr<const EdgeIndex> edges) {
  const Tensor& C = t.value(coeff);
  const Tensor& H = t.value(features);
  if (C.size() != edges->size() || H.rows() != edges->nodes) {
    throw std::invalid_argument("edge_aggregate shape mismatch: coeff " + shape_string(C) +
                                ", features " + shape_string(H));
  }
  const std::size_t f = H.cols();
  Tensor out({edges->nodes, f}, 0.0);
  for (std::size_t e = 0; e < edges->size(); ++e) {
    const double c = C[e];
    const std::size_t s = edges->src[e], d = edges->dst[e];
    for (std::size_t k = 0; k < f; ++k) out(d, k) += c * H(s, k);
  }
  const bool rg = detail::any_requires(t, {coeff, features});
  Tape::BackwardFn back;
  if (rg) {
    back = [coeff, features, edges](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      const Tensor& C = tape.value(coeff);
      const Tensor& H = tape.value(features);
      const std::size_t f = H.cols();
      Tensor* gc = tape.grad_buffer(coeff);
      Tensor* gh = tape.grad_buffer(features);
      for (std::size_t e = 0; e < edges->size(); ++e) {
        const std::size_t s = edges->src[e], d = edges->dst[e];
        if (gc) {
          double acc = 0.0;
          for (std::size_t k = 0; k < f; ++k) acc += up(d, k) * H(s, k);
          (*gc)[e] += acc;
        }
        if (gh) {
          for (std::size_t k = 0; k < f; ++k) (*gh)(s, k) += C[e] * up(d, k);
        }
      }
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

/// Horizontal concatenation of matrices with equal row counts.
inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols needs at least one input");
  const std::size_t n = t.value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != n) throw std::invalid_argument("concat_cols row mismatch");
    total += t.value(p).cols();
  }
  Tensor out({n, total}, 0.0);
  std::size_t offset = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& P = t.value(p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < P.cols(); ++k) out(i, offset + k) = P(i, k);
    offset += P.cols();
    rg = rg || t.requires_grad(p);
  }
  Tape::BackwardFn back;
  if (rg) {
    back = [parts](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      std::size_t offset = 0;
      for (Var p : parts) {
        const std::size_t c = tape.value(p).cols();
        if (Tensor* g = tape.grad_buffer(p)) {
          for (std::size_t i = 0; i < g->rows(); ++i)
            for (std::size_t k = 0; k < c; ++k) (*g)(i, k) += up(i, offset + k);
        }
        offset += c;
      }
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

/// Elementwise mean of equally shaped inputs.
inline Var mean_of(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("mean_of needs at least one input");
  Tensor out = t.value(parts[0]);
  bool rg = t.requires_grad(parts[0]);
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Tensor& P = t.value(parts[p]);
    if (!P.same_shape(out)) throw std::invalid_argument("mean_of shape mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += P[i];
    rg = rg || t.requires_grad(parts[p]);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (double& v : out.values()) v *= inv;
  Tape::BackwardFn back;
  if (rg) {
    back = [parts, inv](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      for (Var p : parts) {
        if (Tensor* g = tape.grad_buffer(p))
          for (std::size_t i = 0; i < up.size(); ++i) (*g)[i] += inv * up[i];
      }
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

/// Picks entries of a column vector; repeated indices are allowed.
inline Var gather_rows(Tape& t, Var column, std::vector<std::size_t> rows) {
  const Tensor& X = t.value(column);
  if (X.cols() != 1) throw std::invalid_argument("gather_rows expects a column vector");
  Tensor out({rows.size(), 1}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= X.rows()) throw std::out_of_range("gather_rows index out of range");
    out[i] = X[rows[i]];
  }
  const bool rg = t.requires_grad(column);
  Tape::BackwardFn back;
  if (rg) {
    back = [column, rows = std::move(rows)](Tape& tape, std::size_t self) {
      const Tensor& up = tape.upstream(self);
      Tensor* g = tape.grad_buffer(column);
      for (std::size_t i = 0; i < rows.size(); ++i) (*g)[rows[i]] += up[i];
    };
  }
  return t.push(std::move(out), rg, std::move(back));
}

/// Sum over i of (target[i] - pred[i])^2; the target carries no gradient.
inline Var squared_error_sum(Tape& t, Var pred, Tensor target) {
  const Tensor& P = t.value(pred);
  if (P.size() != target.size()) throw std::invalid_argument("squared_error_sum size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = target[i] - P[i];
    s += d * d;
  }
  const bool rg = t.requires_grad(pred);
  Tape::BackwardFn back;
  if (rg) {
    back = [pred, target = std::move(target)](Tape& tape, std::size_t self) {
      const double up = tape.upstream(self)[0];
      const Tensor& P = tape.value(pred);
      Tensor* g = tape.grad_buffer(pred);
      for (std::size_t i = 0; i < P.size(); ++i) (*g)[i] += up * 2.0 * (P[i] - target[i]);
    };
  }
  return t.push(Tensor::scalar(s), rg, std::move(back));
}

}  // namespace fleetgnn::ad
