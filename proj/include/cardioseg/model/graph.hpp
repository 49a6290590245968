#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace cardioseg::model {

/// Dense NCHW tensor of doubles.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return v.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  double& at(int ni, int ci, int y, int x) { return v[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x]; }
  double at(int ni, int ci, int y, int x) const {
    return v[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
  }
};

using NodeId = int;

/// Records operations so gradients can be propagated back to inputs and
/// parameters. With `record == false` no backward state is kept.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Tensor t);
  /// Leaf whose gradient is read back after backward(). `t` must outlive the graph.
  NodeId leaf(const Tensor& t);

  NodeId conv2d(NodeId x, NodeId weight, NodeId bias, int stride);
  NodeId instance_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);
  NodeId leaky_relu(NodeId x, double slope);
  /// Inverted dropout; identity when rate == 0 or rng is null.
  NodeId dropout(NodeId x, double rate, std::mt19937_64* rng);
  NodeId upsample2x(NodeId x);
  NodeId concat(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);

  const Tensor& value(NodeId id) const;
  /// Gradient accumulated for `id`; zero-shaped when nothing flowed into it.
  const Tensor& grad(NodeId id) const;

  /// Seeds d(loss)/d(root) and runs the recorded backward functions in reverse order.
  void backward(NodeId root, const Tensor& seed);

 private:
  struct Node {
    std::unique_ptr<Tensor> owned;
    const Tensor* value = nullptr;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  NodeId push(Tensor t, bool needs_grad);
  bool needs(NodeId id) const { return nodes_[id].needs_grad; }
  Tensor& grad_ref(NodeId id);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace cardioseg::model
