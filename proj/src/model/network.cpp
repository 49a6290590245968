#include "cardioseg/model/network.hpp"

#include <cmath>

#include "cardioseg/core/error.hpp"

namespace cardioseg::model {

namespace {

// Walks the topology once. Without a graph it creates parameters and layer records;
// with one it consumes the parameters in the same order and emits graph nodes.
class Wiring {
 public:
  Wiring(Network& net, std::mt19937_64& init) : build_(&net), net_(&net), init_(&init) {}
  Wiring(const Network& net, Graph& g, std::vector<NodeId>& pnodes, std::mt19937_64* rng)
      : net_(&net), g_(&g), pnodes_(&pnodes), rng_(rng) {}

  NodeId run(NodeId input) {
    const auto& cfg = net_->cfg;
    const int L = cfg.levels;
    std::vector<NodeId> skips(L);
    NodeId x = input;
    for (int l = 0; l < L; ++l) {
      const int f = cfg.filters(l);
      const std::string p = "ctx" + std::to_string(l);
      x = l == 0 ? conv(x, l, p + ".in", 1, f, 3, 1) : conv(x, l, p + ".down", f / 2, f, 3, 2);
      NodeId y = norm(x, l, p + ".norm1", f);
      y = act(y, l, f);
      y = conv(y, l, p + ".conv1", f, f, 3, 1);
      y = drop(y, l, f);
      y = norm(y, l, p + ".norm2", f);
      y = act(y, l, f);
      y = conv(y, l, p + ".conv2", f, f, 3, 1);
      x = add(x, y, l, f);
      skips[l] = x;
    }
    NodeId logits = -1;
    bool first = true;
    const int heads = cfg.heads();
    for (int l = L - 2; l >= 0; --l) {
      const int f = cfg.filters(l);
      const std::string p = "loc" + std::to_string(l);
      NodeId u = upsample(x, l, 2 * f);
      u = conv(u, l, p + ".up", 2 * f, f, 3, 1);
      u = norm(u, l, p + ".norm_up", f);
      u = act(u, l, f);
      NodeId y = concat(skips[l], u, l, 2 * f);
      y = conv(y, l, p + ".conv3", 2 * f, 2 * f, 3, 1);
      y = norm(y, l, p + ".norm3", 2 * f);
      y = act(y, l, 2 * f);
      y = conv(y, l, p + ".conv1", 2 * f, f, 1, 1);
      y = norm(y, l, p + ".norm1", f);
      y = act(y, l, f);
      x = y;
      if (l < heads) {
        NodeId h = conv(y, l, "head" + std::to_string(l), f, cfg.classes, 1, 1, LayerKind::Head);
        for (int k = 0; k < l; ++k) h = upsample(h, l, cfg.classes);
        logits = first ? h : add(logits, h, l, cfg.classes);
        first = false;
      }
    }
    return logits;
  }

 private:
  bool building() const { return g_ == nullptr; }

  void record(LayerKind kind, const std::string& name, int level, int cin, int cout, int k = 0, int stride = 1) {
    if (building()) build_->layers.push_back({name, kind, level, cin, cout, k, stride});
  }

  NodeId take() {
    const Param& p = net_->params.at(cursor_++);
    pnodes_->push_back(g_->leaf(p.value));
    return pnodes_->back();
  }

  NodeId conv(NodeId x, int level, const std::string& name, int cin, int cout, int k, int stride,
              LayerKind kind = LayerKind::Conv) {
    record(kind, name, level, cin, cout, k, stride);
    if (building()) {
      Tensor w(cout, cin, k, k);
      const double a = std::sqrt(6.0 / (cin * k * k));
      std::uniform_real_distribution<double> dist(-a, a);
      for (double& v : w.v) v = dist(*init_);
      build_->params.push_back({name + ".weight", ParamKind::ConvWeight, std::move(w)});
      build_->params.push_back({name + ".bias", ParamKind::ConvBias, Tensor(cout, 1, 1, 1)});
      return -1;
    }
    const NodeId w = take();
    const NodeId b = take();
    return g_->conv2d(x, w, b, stride);
  }

  NodeId norm(NodeId x, int level, const std::string& name, int c) {
    record(LayerKind::InstanceNorm, name, level, c, c);
    if (building()) {
      build_->params.push_back({name + ".scale", ParamKind::NormScale, Tensor(c, 1, 1, 1, 1.0)});
      build_->params.push_back({name + ".shift", ParamKind::NormShift, Tensor(c, 1, 1, 1)});
      return -1;
    }
    const NodeId gamma = take();
    const NodeId beta = take();
    return g_->instance_norm(x, gamma, beta);
  }

  NodeId act(NodeId x, int level, int c) {
    record(LayerKind::LeakyRelu, "lrelu", level, c, c);
    return building() ? -1 : g_->leaky_relu(x, net_->cfg.leaky_slope);
  }

  NodeId drop(NodeId x, int level, int c) {
    record(LayerKind::Dropout, "dropout", level, c, c);
    return building() ? -1 : g_->dropout(x, net_->cfg.dropout_rate, rng_);
  }

  NodeId upsample(NodeId x, int level, int c) {
    record(LayerKind::Upsample, "upsample", level, c, c);
    return building() ? -1 : g_->upsample2x(x);
  }

  NodeId concat(NodeId a, NodeId b, int level, int c) {
    record(LayerKind::Concat, "concat", level, c, c);
    return building() ? -1 : g_->concat(a, b);
  }

  NodeId add(NodeId a, NodeId b, int level, int c) {
    record(LayerKind::Add, "add", level, c, c);
    return building() ? -1 : g_->add(a, b);
  }

  Network* build_ = nullptr;
  const Network* net_ = nullptr;
  std::mt19937_64* init_ = nullptr;
  Graph* g_ = nullptr;
  std::vector<NodeId>* pnodes_ = nullptr;
  std::mt19937_64* rng_ = nullptr;
  std::size_t cursor_ = 0;
};

}  // namespace

void NetworkConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (levels < 2 || levels > 12) bad("levels must lie in [2, 12]");
  if (base_filters < 1) bad("base_filters must be >= 1");
  if (classes < 2) bad("classes must be >= 2");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) bad("dropout_rate must lie in [0, 1)");
  if (!(leaky_slope >= 0 && leaky_slope < 1)) bad("leaky_slope must lie in [0, 1)");
  if (deep_supervision_levels < 1) bad("deep_supervision_levels must be >= 1");
  if (input_size < 1 || input_size % size_multiple() != 0)
    bad("input_size " + std::to_string(input_size) + " is not divisible by " + std::to_string(size_multiple()));
}

int NetworkConfig::heads() const { return std::min(deep_supervision_levels, levels - 1); }

NetworkConfig NetworkConfig::from_config(const Config& cfg, const std::string& section) {
  NetworkConfig n;
  auto k = [&](const char* key) { return section + "." + key; };
  n.levels = cfg.get_int(k("levels"), n.levels);
  n.base_filters = cfg.get_int(k("base_filters"), n.base_filters);
  n.classes = cfg.get_int(k("classes"), n.classes);
  n.dropout_rate = cfg.get_real(k("dropout_rate"), n.dropout_rate);
  n.leaky_slope = cfg.get_real(k("leaky_slope"), n.leaky_slope);
  n.deep_supervision_levels = cfg.get_int(k("deep_supervision_levels"), n.deep_supervision_levels);
  n.input_size = cfg.get_int(k("input_size"), n.input_size);
  n.validate();
  return n;
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Head)
      total += static_cast<std::size_t>(l.kernel) * l.kernel * l.in_channels * l.out_channels + l.out_channels;
    else if (l.kind == LayerKind::InstanceNorm)
      total += 2 * static_cast<std::size_t>(l.out_channels);
  }
  return total;
}

std::size_t Network::stored_param_count() const {
  std::size_t total = 0;
  for (const auto& p : params) total += p.value.size();
  return total;
}

const Param& Network::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw Error(ErrorCode::UnknownKey, "no parameter '" + name + "'");
}

Param& Network::param(const std::string& name) {
  return const_cast<Param&>(static_cast<const Network&>(*this).param(name));
}

Network build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Network net;
  net.cfg = cfg;
  std::mt19937_64 init(seed);
  Wiring(net, init).run(-1);
  return net;
}

NodeId forward_logits(Graph& g, const Network& net, NodeId x, std::vector<NodeId>& param_nodes,
                      std::mt19937_64* dropout_rng) {
  const Tensor& in = g.value(x);
  const int m = net.cfg.size_multiple();
  if (in.c != 1) throw Error(ErrorCode::ShapeMismatch, "network expects one input channel, got " + std::to_string(in.c));
  if (in.h % m != 0 || in.w % m != 0 || in.h == 0 || in.w == 0)
    throw Error(ErrorCode::ShapeMismatch, "input " + std::to_string(in.h) + "x" + std::to_string(in.w) +
                                              " is not a multiple of " + std::to_string(m));
  param_nodes.clear();
  param_nodes.reserve(net.params.size());
  return Wiring(net, g, param_nodes, dropout_rng).run(x);
}

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.n, logits.c, logits.h, logits.w);
  const std::size_t P = logits.plane();
  for (int n = 0; n < logits.n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * logits.c * P;
    for (std::size_t i = 0; i < P; ++i) {
      double mx = -INFINITY;
      for (int c = 0; c < logits.c; ++c) mx = std::max(mx, logits.v[base + c * P + i]);
      double sum = 0;
      for (int c = 0; c < logits.c; ++c) {
        const double e = std::exp(logits.v[base + c * P + i] - mx);
        p.v[base + c * P + i] = e;
        sum += e;
      }
      for (int c = 0; c < logits.c; ++c) p.v[base + c * P + i] /= sum;
    }
  }
  return p;
}

Tensor forward(const Network& net, const Tensor& batch) {
  Graph g(false);
  std::vector<NodeId> pn;
  const NodeId x = g.constant(batch);
  return softmax(g.value(forward_logits(g, net, x, pn, nullptr)));
}

}  // namespace cardioseg::model
