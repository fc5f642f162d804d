#include "gefm/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gefm::num {

namespace {

using detail::Node;
using detail::NodePtr;

void check_finite(const char* op, const std::vector<double>& data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value produced by ") + op);
  }
}

Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<NodePtr> parents, detail::BackwardFn backward) {
  check_finite(op, data);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->recorded = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(op, a.shape(), std::move(out), {a.node()},
                     [dfdx](const Node& self, std::span<const double> g,
                            std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       const auto& x = self.parents[0]->data;
                       auto& ga = *pg[0];
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], self.data[i]);
                     });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void matmul_into(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// grad_a += g [n,m] * b^T [m,k]
void matmul_grad_a(std::span<const double> g, const double* b, double* ga, std::size_t n,
                   std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = g.data() + i * m;
    double* gai = ga + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += gi[j] * bp[j];
      gai[p] += acc;
    }
  }
}

// grad_b += a^T [k,n] * g [n,m]
void matmul_grad_b(std::span<const double> g, const double* a, double* gb, std::size_t n,
                   std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = g.data() + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* gbp = gb + p * m;
      for (std::size_t j = 0; j < m; ++j) gbp[j] += av * gi[j];
    }
  }
}

}  // namespace

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("reshape " + shape_str(shape()) + " -> " + shape_str(new_shape));
  }
  return make_result("reshape", std::move(new_shape), to_vector(), {node()},
                     [](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a.node(), b.node()},
                     [](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       for (auto* p : pg) {
                         if (!p) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) (*p)[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a.node(), b.node()},
                     [](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       if (pg[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                       if (pg[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a.node(), b.node()},
                     [](const Node& self, std::span<const double> g,
                        std::span<std::vector<double>*> pg) {
                       const auto& x = self.parents[0]->data;
                       const auto& y = self.parents[1]->data;
                       if (pg[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * y[i];
                       if (pg[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * x[i];
                     });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      "add_scalar", a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  const std::size_t c = x.cols();
  if (b.numel() != c) {
    throw ShapeError("add_bias: bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
  }
  auto xd = x.data(), bd = b.data();
  std::vector<double> out(xd.begin(), xd.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % c];
  return make_result("add_bias", x.shape(), std::move(out), {x.node(), b.node()},
                     [c](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       if (pg[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                       if (pg[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i % c] += g[i];
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2 || a.cols() != b.shape()[0]) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.shape()[1];
  std::vector<double> out(n * m, 0.0);
  matmul_into(a.data().data(), b.data().data(), out.data(), n, k, m);
  Shape shape = a.shape();
  shape.back() = m;
  return make_result("matmul", std::move(shape), std::move(out), {a.node(), b.node()},
                     [n, k, m](const Node& self, std::span<const double> g,
                               std::span<std::vector<double>*> pg) {
                       const auto& ad = self.parents[0]->data;
                       const auto& bd = self.parents[1]->data;
                       if (pg[0]) matmul_grad_a(g, bd.data(), pg[0]->data(), n, k, m);
                       if (pg[1]) matmul_grad_b(g, ad.data(), pg[1]->data(), n, k, m);
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || x.cols() != w.shape()[0] || b.numel() != w.shape()[1]) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()) +
                     ", bias " + shape_str(b.shape()));
  }
  const std::size_t n = x.rows(), k = x.cols(), m = w.shape()[1];
  std::vector<double> out(n * m);
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) std::copy(bd.begin(), bd.end(), out.begin() + i * m);
  matmul_into(x.data().data(), w.data().data(), out.data(), n, k, m);
  Shape shape = x.shape();
  shape.back() = m;
  return make_result("linear", std::move(shape), std::move(out), {x.node(), w.node(), b.node()},
                     [n, k, m](const Node& self, std::span<const double> g,
                               std::span<std::vector<double>*> pg) {
                       const auto& xd = self.parents[0]->data;
                       const auto& wd = self.parents[1]->data;
                       if (pg[0]) matmul_grad_a(g, wd.data(), pg[0]->data(), n, k, m);
                       if (pg[1]) matmul_grad_b(g, xd.data(), pg[1]->data(), n, k, m);
                       if (pg[2])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[2])[i % m] += g[i];
                     });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.rows() != n) {
      throw ShapeError("concat: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
    parents.push_back(p.node());
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto d = parts[k].data();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(d.begin() + i * w, w, out.begin() + i * total + offset);
    }
    offset += w;
  }
  Shape shape = parts[0].shape();
  if (shape.empty()) shape = {1};
  shape.back() = total;
  return make_result("concat", std::move(shape), std::move(out), std::move(parents),
                     [n, total, widths](const Node&, std::span<const double> g,
                                        std::span<std::vector<double>*> pg) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (pg[k]) {
                           auto& gk = *pg[k];
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < w; ++j) gk[i * w + j] += g[i * total + off + j];
                         }
                         off += w;
                       }
                     });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
  const std::size_t c = a.cols(), n = a.rows();
  if (start + len > c) throw ShapeError("slice_cols: range exceeds width of " + shape_str(a.shape()));
  auto d = a.data();
  std::vector<double> out(n * len);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(d.begin() + i * c + start, len, out.begin() + i * len);
  Shape shape = a.shape();
  shape.back() = len;
  return make_result("slice_cols", std::move(shape), std::move(out), {a.node()},
                     [n, c, start, len](const Node&, std::span<const double> g,
                                        std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < len; ++j) (*pg[0])[i * c + start + j] += g[i * len + j];
                     });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx) {
  const std::size_t c = a.cols(), n = a.rows();
  auto d = a.data();
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) throw ShapeError("gather_rows: index out of range");
    std::copy_n(d.begin() + idx[i] * c, c, out.begin() + i * c);
  }
  std::vector<std::size_t> index(idx.begin(), idx.end());
  return make_result("gather_rows", {idx.size(), c}, std::move(out), {a.node()},
                     [c, index = std::move(index)](const Node&, std::span<const double> g,
                                                   std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       auto& ga = *pg[0];
                       for (std::size_t i = 0; i < index.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[index[i] * c + j] += g[i * c + j];
                     });
}

Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> idx, std::size_t n_rows) {
  const std::size_t c = src.cols();
  if (src.rows() != idx.size()) throw ShapeError("scatter_add_rows: index count mismatch");
  auto d = src.data();
  std::vector<double> out(n_rows * c, 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n_rows) throw ShapeError("scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < c; ++j) out[idx[i] * c + j] += d[i * c + j];
  }
  std::vector<std::size_t> index(idx.begin(), idx.end());
  return make_result("scatter_add_rows", {n_rows, c}, std::move(out), {src.node()},
                     [c, index = std::move(index)](const Node&, std::span<const double> g,
                                                   std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       auto& gs = *pg[0];
                       for (std::size_t i = 0; i < index.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) gs[i * c + j] += g[index[i] * c + j];
                     });
}

Tensor scale_rows(const Tensor& a, std::span<const double> factors) {
  const std::size_t c = a.cols(), n = a.rows();
  if (factors.size() != n) throw ShapeError("scale_rows: factor count mismatch");
  auto d = a.data();
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = d[i * c + j] * factors[i];
  std::vector<double> f(factors.begin(), factors.end());
  return make_result("scale_rows", a.shape(), std::move(out), {a.node()},
                     [c, f = std::move(f)](const Node&, std::span<const double> g,
                                           std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       for (std::size_t i = 0; i < f.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) (*pg[0])[i * c + j] += g[i * c + j] * f[i];
                     });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result("sum", {}, {acc}, {a.node()},
                     [](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       for (auto& v : *pg[0]) v += g[0];
                     });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result("mean", {}, {acc / n}, {a.node()},
                     [n](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       for (auto& v : *pg[0]) v += g[0] / n;
                     });
}

Tensor sum_rows(const Tensor& a) {
  const std::size_t c = a.cols(), n = a.rows();
  auto d = a.data();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += d[i * c + j];
  return make_result("sum_rows", {c}, std::move(out), {a.node()},
                     [c, n](const Node&, std::span<const double> g, std::span<std::vector<double>*> pg) {
                       if (!pg[0]) return;
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) (*pg[0])[i * c + j] += g[j];
                     });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0)) throw NumericalError("log of non-positive value");
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data()) {
    if (v < 0) throw NumericalError("sqrt of negative value");
  }
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same_shape("maximum", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i], y[i]);
  return make_result("maximum", a.shape(), std::move(out), {a.node(), b.node()},
                     [](const Node& self, std::span<const double> g,
                        std::span<std::vector<double>*> pg) {
                       const auto& x = self.parents[0]->data;
                       const auto& y = self.parents[1]->data;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         // ties route to the first argument
                         const bool first = x[i] >= y[i];
                         if (first && pg[0]) (*pg[0])[i] += g[i];
                         if (!first && pg[1]) (*pg[1])[i] += g[i];
                       }
                     });
}

Tensor swish(const Tensor& a) {
  return unary(
      "swish", a, [](double x) { return x * stable_sigmoid(x); },
      [](double x, double) {
        const double s = stable_sigmoid(x);
        return s + x * s * (1.0 - s);
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t c = x.cols(), n = x.rows();
  if (gain.numel() != c || bias.numel() != c) {
    throw ShapeError("layer_norm: affine parameters do not match width of " + shape_str(x.shape()));
  }
  auto xd = x.data(), gd = gain.data(), bd = bias.data();
  std::vector<double> out(xd.size());
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xd.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (row[j] - mu) * inv * gd[j] + bd[j];
  }
  return make_result(
      "layer_norm", x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [c, n, inv_std = std::move(inv_std)](const Node& self, std::span<const double> g,
                                           std::span<std::vector<double>*> pg) {
        const auto& xd = self.parents[0]->data;
        const auto& gd = self.parents[1]->data;
        std::vector<double> xhat(c), dxhat(c);
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = xd.data() + i * c;
          double mu = 0.0;
          for (std::size_t j = 0; j < c; ++j) mu += row[j];
          mu /= static_cast<double>(c);
          const double inv = inv_std[i];
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            xhat[j] = (row[j] - mu) * inv;
            dxhat[j] = g[i * c + j] * gd[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[j];
          }
          mean_d /= static_cast<double>(c);
          mean_dx /= static_cast<double>(c);
          if (pg[0]) {
            for (std::size_t j = 0; j < c; ++j)
              (*pg[0])[i * c + j] += inv * (dxhat[j] - mean_d - xhat[j] * mean_dx);
          }
          if (pg[1])
            for (std::size_t j = 0; j < c; ++j) (*pg[1])[j] += g[i * c + j] * xhat[j];
          if (pg[2])
            for (std::size_t j = 0; j < c; ++j) (*pg[2])[j] += g[i * c + j];
        }
      });
}

}  // namespace gefm::num
