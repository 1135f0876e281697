#pragma once

// GCN and GAT Q-function approximators over the reversed line graph.
//
// Layer l maps node embeddings H (N x F_in) to
//   GCN: act(mean_{j in P(i)} H_j W_l)
//   GAT: act(concat_k sum_{j in P(i)} alpha^k_ij H_j W^k_l)   (hidden layers)
//        sigmoid(mean_k sum_{j in P(i)} alpha^k_ij H_j W^k_l)  (output layer)
// where P(i) are the dual predecessors of road i (itself plus its successor
// roads), act is ReLU on hidden layers and sigmoid on the last one, and
//   alpha^k_ij = softmax_j LeakyReLU(a^k_dst . H_i W^k + a^k_src . H_j W^k).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fleetgnn/rng.hpp"
#include "fleetgnn/roadnet.hpp"
#include "fleetgnn/tensor.hpp"

namespace fleetgnn {

using ad::Tensor;
using ad::Var;

enum class GnnKind { Gcn, Gat };

inline std::string to_string(GnnKind k) { return k == GnnKind::Gcn ? "gcn" : "gat"; }

inline GnnKind parse_gnn_kind(const std::string& s) {
  if (s == "gcn") return GnnKind::Gcn;
  if (s == "gat") return GnnKind::Gat;
  throw std::invalid_argument("unknown GNN kind '" + s + "'");
}

struct GnnConfig {
  GnnKind kind = GnnKind::Gat;
  std::size_t layers = 8;
  std::size_t hidden_dim = 32;  // total width of a hidden layer (all heads)
  std::size_t heads = 8;        // GAT only
  std::size_t input_dim = 3;
  double leaky_slope = 0.2;     // GAT attention

  bool operator==(const GnnConfig&) const = default;

  void check() const {
    if (layers < 1) throw std::invalid_argument("GNN needs at least one layer");
    if (heads < 1) throw std::invalid_argument("GAT needs at least one head");
    if (hidden_dim < 1 || input_dim < 1) throw std::invalid_argument("GNN widths must be positive");
    if (kind == GnnKind::Gat && layers > 1 && hidden_dim % heads != 0) {
      throw std::invalid_argument("hidden_dim must be a multiple of heads");
    }
  }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden_dim; }
  std::size_t layer_out(std::size_t l) const { return l + 1 == layers ? 1 : hidden_dim; }
  std::size_t head_dim(std::size_t l) const {
    return l + 1 == layers ? 1 : hidden_dim / heads;
  }
};

/// Named parameter tensors in a fixed order. Value-semantic, so a copy is a
/// fully independent target network.
struct ParamStore {
  GnnConfig config;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t size() const { return tensors.size(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::out_of_range("no parameter named " + name);
  }
  Tensor& operator[](const std::string& name) { return tensors[index_of(name)]; }
  const Tensor& operator[](const std::string& name) const { return tensors[index_of(name)]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  std::vector<double> flat() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& t : tensors) out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
  }
  void set_flat(const std::vector<double>& values) {
    if (values.size() != scalar_count()) throw std::invalid_argument("flat parameter size mismatch");
    std::size_t k = 0;
    for (auto& t : tensors)
      for (double& v : t.values()) v = values[k++];
  }

  bool operator==(const ParamStore&) const = default;
};

using Gradients = std::vector<Tensor>;

namespace detail {

inline std::string gat_name(std::size_t l, std::size_t h, const char* what) {
  return "layer" + std::to_string(l) + ".head" + std::to_string(h) + "." + what;
}

inline Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out}, 0.0);
  for (double& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return t;
}

}  // namespace detail

/// Layout of the parameters for `config`, all zero.
inline ParamStore zero_params(const GnnConfig& config) {
  config.check();
  ParamStore p;
  p.config = config;
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.kind == GnnKind::Gcn) {
      p.names.push_back("layer" + std::to_string(l) + ".weight");
      p.tensors.emplace_back(std::vector<std::size_t>{config.layer_in(l), config.layer_out(l)}, 0.0);
      continue;
    }
    const std::size_t d = config.head_dim(l);
    for (std::size_t h = 0; h < config.heads; ++h) {
      p.names.push_back(detail::gat_name(l, h, "weight"));
      p.tensors.emplace_back(std::vector<std::size_t>{config.layer_in(l), d}, 0.0);
      p.names.push_back(detail::gat_name(l, h, "att_src"));
      p.tensors.emplace_back(std::vector<std::size_t>{d, 1}, 0.0);
      p.names.push_back(detail::gat_name(l, h, "att_dst"));
      p.tensors.emplace_back(std::vector<std::size_t>{d, 1}, 0.0);
    }
  }
  return p;
}

/// Glorot-uniform initialization, deterministic in `seed`.
inline ParamStore init_params(const GnnConfig& config, std::uint64_t seed) {
  ParamStore p = zero_params(config);
  Rng rng(seed);
  for (Tensor& t : p.tensors) t = detail::glorot(t.rows(), t.cols(), rng);
  return p;
}

inline std::shared_ptr<const ad::EdgeIndex> make_edge_index(const DualGraph& graph) {
  auto e = std::make_shared<ad::EdgeIndex>();
  e->nodes = graph.node_count;
  e->src.reserve(graph.edges.size());
  e->dst.reserve(graph.edges.size());
  for (auto [s, d] : graph.edges) {
    e->src.push_back(s);
    e->dst.push_back(d);
  }
  return e;
}

/// Recorded forward pass. `output` is the N x 1 column of Q values.
struct ForwardTrace {
  ad::Tape tape;
  std::vector<Var> params;
  Var output;
  std::vector<Var> attention;  // GAT: one E x 1 coefficient column per (layer, head)
  std::shared_ptr<const ad::EdgeIndex> edges;
};

inline ForwardTrace trace_forward(const ParamStore& params, const DualGraph& graph,
                                  const Tensor& features, bool track_gradients = true) {
  const GnnConfig& cfg = params.config;
  cfg.check();
  if (features.rows() != graph.node_count || features.cols() != cfg.input_dim) {
    throw std::invalid_argument("features " + ad::shape_string(features) + " do not match " +
                                std::to_string(graph.node_count) + " roads x " +
                                std::to_string(cfg.input_dim) + " inputs");
  }
  ForwardTrace tr;
  ad::Tape& t = tr.tape;
  tr.edges = make_edge_index(graph);
  for (const Tensor& p : params.tensors) {
    tr.params.push_back(track_gradients ? t.parameter(p) : t.constant(p));
  }

  Var h = t.constant(features);
  if (cfg.kind == GnnKind::Gcn) {
    Tensor mean_coeff({tr.edges->size(), 1}, 0.0);
    for (std::size_t e = 0; e < tr.edges->size(); ++e) {
      mean_coeff[e] = 1.0 / static_cast<double>(graph.predecessors[tr.edges->dst[e]].size());
    }
    Var coeff = t.constant(std::move(mean_coeff));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      Var z = ad::edge_aggregate(t, coeff, ad::matmul(t, h, tr.params[l]), tr.edges);
      h = l + 1 == cfg.layers ? ad::sigmoid(t, z) : ad::relu(t, z);
    }
  } else {
    std::size_t k = 0;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      std::vector<Var> heads;
      for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
        Var w = tr.params[k++], a_src = tr.params[k++], a_dst = tr.params[k++];
        Var z = ad::matmul(t, h, w);
        Var scores = ad::edge_scores(t, ad::matmul(t, z, a_src), ad::matmul(t, z, a_dst), tr.edges);
        Var alpha = ad::edge_softmax(t, ad::leaky_relu(t, scores, cfg.leaky_slope), tr.edges);
        tr.attention.push_back(alpha);
        heads.push_back(ad::edge_aggregate(t, alpha, z, tr.edges));
      }
      if (l + 1 == cfg.layers) {
        h = ad::sigmoid(t, ad::mean_of(t, heads));
      } else {
        h = ad::relu(t, heads.size() == 1 ? heads[0] : ad::concat_cols(t, heads));
      }
    }
  }
  tr.output = h;
  return tr;
}

/// Q value for every road, each in (0, 1).
inline std::vector<double> forward(const ParamStore& params, const DualGraph& graph,
                                   const Tensor& features) {
  ForwardTrace tr = trace_forward(params, graph, features, false);
  const auto v = tr.tape.value(tr.output).values();
  return {v.begin(), v.end()};
}

/// Back-propagates `loss` (recorded on tr.tape) to every parameter.
inline Gradients backward(ForwardTrace& tr, Var loss) {
  tr.tape.backward(loss);
  Gradients g;
  g.reserve(tr.params.size());
  for (Var p : tr.params) g.push_back(tr.tape.grad(p));
  return g;
}

inline void check_aligned(const ParamStore& params, const Gradients& grads) {
  if (grads.size() != params.size()) throw std::invalid_argument("gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].same_shape(params.tensors[i])) {
      throw std::invalid_argument("gradient shape mismatch for " + params.names[i]);
    }
  }
}

inline void sgd_step(ParamStore& params, const Gradients& grads, double learning_rate) {
  check_aligned(params, grads);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = params.tensors[i].values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= learning_rate * g[k];
  }
}

/// Adaptive-moment optimizer (bias-corrected first and second moments).
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, const Gradients& grads, double learning_rate) {
    check_aligned(params, grads);
    if (m_.empty()) {
      for (const auto& g : grads) {
        m_.emplace_back(g.shape(), 0.0);
        v_.emplace_back(g.shape(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto p = params.tensors[i].values();
      const auto g = grads[i].values();
      auto m = m_[i].values();
      auto v = v_[i].values();
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
        p[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

inline void copy_into_target(const ParamStore& online, ParamStore& target) {
  if (!(online.config == target.config) || online.names != target.names) {
    throw std::invalid_argument("target network layout differs from the online network");
  }
  target.tensors = online.tensors;
}

}  // namespace fleetgnn
