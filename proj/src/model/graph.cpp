#include "cardioseg/model/graph.hpp"

#include <cmath>

#include <Eigen/Core>

#include "cardioseg/core/error.hpp"

namespace cardioseg::model {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

// Unfolds one sample (cin x h x w) into a (cin*k*k) x (ho*wo) matrix.
void im2col(const double* x, int cin, int h, int w, int k, int stride, int ho, int wo, double* cols) {
  const int pad = k / 2;
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * P;
        const double* plane = x + static_cast<std::size_t>(ci) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          double* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, int cin, int h, int w, int k, int stride, int ho, int wo, double* dx) {
  const int pad = k / 2;
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * P;
        double* plane = dx + static_cast<std::size_t>(ci) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const double* src = row + static_cast<std::size_t>(oy) * wo;
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

NodeId Graph::push(Tensor t, bool needs_grad) {
  Node n;
  n.owned = std::make_unique<Tensor>(std::move(t));
  n.value = n.owned.get();
  n.needs_grad = needs_grad && record_;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor t) { return push(std::move(t), false); }

NodeId Graph::leaf(const Tensor& t) {
  Node n;
  n.value = &t;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Graph::value(NodeId id) const { return *nodes_.at(id).value; }

const Tensor& Graph::grad(NodeId id) const { return nodes_.at(id).grad; }

Tensor& Graph::grad_ref(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value->n, n.value->c, n.value->h, n.value->w);
  return n.grad;
}

NodeId Graph::conv2d(NodeId xi, NodeId wi, NodeId bi, int stride) {
  const Tensor& x = value(xi);
  const Tensor& W = value(wi);
  const Tensor& b = value(bi);
  const int k = W.h;
  require(W.w == k && k % 2 == 1, "conv kernel must be square and odd");
  require(W.c == x.c, "conv input channels differ from weight");
  require(b.size() == static_cast<std::size_t>(W.n), "conv bias size differs from output channels");
  const int cout = W.n, cin = x.c;
  const int ho = (x.h + 2 * (k / 2) - k) / stride + 1;
  const int wo = (x.w + 2 * (k / 2) - k) / stride + 1;
  const int K = cin * k * k;
  const int P = ho * wo;

  Tensor y(x.n, cout, ho, wo);
  CMapMat Wm(W.v.data(), cout, K);
  const Eigen::Map<const Eigen::VectorXd> bv(b.v.data(), cout);
  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(K) * P * (record_ ? x.n : 1));
  for (int n = 0; n < x.n; ++n) {
    double* c = cols->data() + (record_ ? static_cast<std::size_t>(n) * K * P : 0);
    im2col(x.v.data() + static_cast<std::size_t>(n) * cin * x.h * x.w, cin, x.h, x.w, k, stride, ho, wo, c);
    MapMat out(y.v.data() + static_cast<std::size_t>(n) * cout * P, cout, P);
    out.noalias() = Wm * CMapMat(c, K, P);
    out.colwise() += bv;
  }
  const bool ng = needs(xi) || needs(wi) || needs(bi);
  const NodeId id = push(std::move(y), ng);
  if (!nodes_[id].needs_grad) return id;

  nodes_[id].back = [this, id, xi, wi, bi, stride, k, cin, cout, ho, wo, K, P, cols] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& x = value(xi);
    const Tensor& W = value(wi);
    CMapMat Wm(W.v.data(), cout, K);
    RowMat dcols;
    for (int n = 0; n < x.n; ++n) {
      CMapMat go(g.v.data() + static_cast<std::size_t>(n) * cout * P, cout, P);
      CMapMat c(cols->data() + static_cast<std::size_t>(n) * K * P, K, P);
      if (needs(wi)) MapMat(grad_ref(wi).v.data(), cout, K).noalias() += go * c.transpose();
      if (needs(bi)) Eigen::Map<Eigen::VectorXd>(grad_ref(bi).v.data(), cout) += go.rowwise().sum();
      if (needs(xi)) {
        dcols.noalias() = Wm.transpose() * go;
        col2im(dcols.data(), cin, x.h, x.w, k, stride, ho, wo,
               grad_ref(xi).v.data() + static_cast<std::size_t>(n) * cin * x.h * x.w);
      }
    }
  };
  return id;
}

NodeId Graph::instance_norm(NodeId xi, NodeId gi, NodeId bi, double eps) {
  const Tensor& x = value(xi);
  const Tensor& gamma = value(gi);
  const Tensor& beta = value(bi);
  require(gamma.size() == static_cast<std::size_t>(x.c) && beta.size() == gamma.size(),
          "norm affine size differs from channels");
  const std::size_t N = x.plane();
  Tensor y(x.n, x.c, x.h, x.w);
  auto xhat = std::make_shared<std::vector<double>>(record_ ? x.size() : 0);
  auto inv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.n) * x.c);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * x.c + c) * N;
      double mean = 0;
      for (std::size_t i = 0; i < N; ++i) mean += x.v[off + i];
      mean /= N;
      double var = 0;
      for (std::size_t i = 0; i < N; ++i) var += (x.v[off + i] - mean) * (x.v[off + i] - mean);
      var /= N;
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv)[static_cast<std::size_t>(n) * x.c + c] = is;
      for (std::size_t i = 0; i < N; ++i) {
        const double xh = (x.v[off + i] - mean) * is;
        if (record_) (*xhat)[off + i] = xh;
        y.v[off + i] = gamma.v[c] * xh + beta.v[c];
      }
    }
  const NodeId id = push(std::move(y), needs(xi) || needs(gi) || needs(bi));
  if (!nodes_[id].needs_grad) return id;

  nodes_[id].back = [this, id, xi, gi, bi, N, xhat, inv] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& gamma = value(gi);
    const int C = g.c;
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < C; ++c) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * N;
        double sum_g = 0, sum_gx = 0;
        for (std::size_t i = 0; i < N; ++i) {
          sum_g += g.v[off + i];
          sum_gx += g.v[off + i] * (*xhat)[off + i];
        }
        if (needs(gi)) grad_ref(gi).v[c] += sum_gx;
        if (needs(bi)) grad_ref(bi).v[c] += sum_g;
        if (needs(xi)) {
          Tensor& dx = grad_ref(xi);
          const double s = gamma.v[c] * (*inv)[static_cast<std::size_t>(n) * C + c] / static_cast<double>(N);
          for (std::size_t i = 0; i < N; ++i)
            dx.v[off + i] += s * (static_cast<double>(N) * g.v[off + i] - sum_g - (*xhat)[off + i] * sum_gx);
        }
      }
  };
  return id;
}

NodeId Graph::leaky_relu(NodeId xi, double slope) {
  const Tensor& x = value(xi);
  Tensor y = x;
  for (double& v : y.v)
    if (v < 0) v *= slope;
  const NodeId id = push(std::move(y), needs(xi));
  if (!nodes_[id].needs_grad) return id;
  nodes_[id].back = [this, id, xi, slope] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& x = value(xi);
    Tensor& dx = grad_ref(xi);
    for (std::size_t i = 0; i < g.size(); ++i) dx.v[i] += x.v[i] < 0 ? slope * g.v[i] : g.v[i];
  };
  return id;
}

NodeId Graph::dropout(NodeId xi, double rate, std::mt19937_64* rng) {
  if (rate <= 0 || rng == nullptr) return xi;
  const Tensor& x = value(xi);
  auto scale = std::make_shared<std::vector<double>>(x.size());
  const double keep = 1.0 / (1.0 - rate);
  Tensor y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
    (*scale)[i] = u < rate ? 0.0 : keep;
    y.v[i] *= (*scale)[i];
  }
  const NodeId id = push(std::move(y), needs(xi));
  if (!nodes_[id].needs_grad) return id;
  nodes_[id].back = [this, id, xi, scale] {
    const Tensor& g = nodes_[id].grad;
    Tensor& dx = grad_ref(xi);
    for (std::size_t i = 0; i < g.size(); ++i) dx.v[i] += (*scale)[i] * g.v[i];
  };
  return id;
}

NodeId Graph::upsample2x(NodeId xi) {
  const Tensor& x = value(xi);
  Tensor y(x.n, x.c, x.h * 2, x.w * 2);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c)
      for (int r = 0; r < y.h; ++r)
        for (int q = 0; q < y.w; ++q) y.at(n, c, r, q) = x.at(n, c, r / 2, q / 2);
  const NodeId id = push(std::move(y), needs(xi));
  if (!nodes_[id].needs_grad) return id;
  nodes_[id].back = [this, id, xi] {
    const Tensor& g = nodes_[id].grad;
    Tensor& dx = grad_ref(xi);
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < g.c; ++c)
        for (int r = 0; r < g.h; ++r)
          for (int q = 0; q < g.w; ++q) dx.at(n, c, r / 2, q / 2) += g.at(n, c, r, q);
  };
  return id;
}

NodeId Graph::concat(NodeId ai, NodeId bi) {
  const Tensor& a = value(ai);
  const Tensor& b = value(bi);
  require(a.n == b.n && a.h == b.h && a.w == b.w, "concat operands differ in shape");
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  const std::size_t pa = a.c * a.plane(), pb = b.c * b.plane();
  for (int n = 0; n < a.n; ++n) {
    std::copy_n(a.v.begin() + n * pa, pa, y.v.begin() + n * (pa + pb));
    std::copy_n(b.v.begin() + n * pb, pb, y.v.begin() + n * (pa + pb) + pa);
  }
  const NodeId id = push(std::move(y), needs(ai) || needs(bi));
  if (!nodes_[id].needs_grad) return id;
  nodes_[id].back = [this, id, ai, bi, pa, pb] {
    const Tensor& g = nodes_[id].grad;
    for (int n = 0; n < g.n; ++n) {
      if (needs(ai)) {
        Tensor& da = grad_ref(ai);
        for (std::size_t i = 0; i < pa; ++i) da.v[n * pa + i] += g.v[n * (pa + pb) + i];
      }
      if (needs(bi)) {
        Tensor& db = grad_ref(bi);
        for (std::size_t i = 0; i < pb; ++i) db.v[n * pb + i] += g.v[n * (pa + pb) + pa + i];
      }
    }
  };
  return id;
}

NodeId Graph::add(NodeId ai, NodeId bi) {
  const Tensor& a = value(ai);
  const Tensor& b = value(bi);
  require(a.same_shape(b), "add operands differ in shape");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += b.v[i];
  const NodeId id = push(std::move(y), needs(ai) || needs(bi));
  if (!nodes_[id].needs_grad) return id;
  nodes_[id].back = [this, id, ai, bi] {
    const Tensor& g = nodes_[id].grad;
    for (NodeId t : {ai, bi}) {
      if (!needs(t)) continue;
      Tensor& d = grad_ref(t);
      for (std::size_t i = 0; i < g.size(); ++i) d.v[i] += g.v[i];
    }
  };
  return id;
}

void Graph::backward(NodeId root, const Tensor& seed) {
  if (!record_) throw Error(ErrorCode::InvalidConfig, "backward on a graph built without recording");
  require(seed.same_shape(value(root)), "backward seed shape differs from root");
  grad_ref(root) = seed;
  for (NodeId i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back();
  }
}

}  // namespace cardioseg::model
