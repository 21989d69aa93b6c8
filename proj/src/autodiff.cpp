#include "toad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "toad/errors.hpp"
#include "toad/kernels.hpp"

namespace toad::ad {

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ConfigError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                    to_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a) {
  throw ConfigError(std::string(op) + ": unsupported shape " + to_string(a));
}

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::vector<std::shared_ptr<Node>> inputs, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool track =
      g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const auto& n) { return n->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

void check_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

// Gradient slot of input i, or nullptr when it does not need one.
double* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

const std::vector<double>& value_of(Node& self, std::size_t i) { return self.inputs[i]->value; }

template <class F>
Tensor unary(const Tensor& a, const char* op, F f, std::function<void(Node&)> bw) {
  std::vector<double> out(a.size());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(a.shape(), std::move(out), op, {a.shared()}, std::move(bw));
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) shape = {1};
  for (auto d : shape)
    if (d == 0) throw ConfigError("tensor extents must be positive, got " + to_string(shape));
  if (numel(shape) != values.size())
    throw ConfigError("tensor shape " + to_string(shape) + " does not match " +
                      std::to_string(values.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value[r * node_->shape.at(1) + c];
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return from(shape(), node_->value, node_->requires_grad); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---- primitives --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(m * n);
    kernels::serial::gemm(a.values(), b.values(), out, m, k, n);
    return make_result({m, n}, std::move(out), "matmul", {a.shared(), b.shared()},
                       [m, k, n](Node& self) {
                         const auto& g = self.grad;
                         const auto& av = value_of(self, 0);
                         const auto& bv = value_of(self, 1);
                         if (double* ga = grad_of(self, 0)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) {
                               double s = 0.0;
                               for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
                               ga[i * k + p] += s;
                             }
                         }
                         if (double* gb = grad_of(self, 1)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) {
                               const double aip = av[i * k + p];
                               for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                             }
                         }
                       });
  }
  if (a.rank() == 2 && b.rank() == 1) {
    const std::size_t m = a.dim(0), k = a.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(m);
    kernels::serial::gemm(a.values(), b.values(), out, m, k, 1);
    return make_result({m}, std::move(out), "matmul", {a.shared(), b.shared()},
                       [m, k](Node& self) {
                         const auto& g = self.grad;
                         const auto& av = value_of(self, 0);
                         const auto& bv = value_of(self, 1);
                         if (double* ga = grad_of(self, 0)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g[i] * bv[p];
                         }
                         if (double* gb = grad_of(self, 1)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) gb[p] += av[i * k + p] * g[i];
                         }
                       });
  }
  if (a.rank() == 1 && b.rank() == 2) {
    const std::size_t k = a.dim(0), n = b.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(n);
    kernels::serial::gemm(a.values(), b.values(), out, 1, k, n);
    return make_result({n}, std::move(out), "matmul", {a.shared(), b.shared()},
                       [k, n](Node& self) {
                         const auto& g = self.grad;
                         const auto& av = value_of(self, 0);
                         const auto& bv = value_of(self, 1);
                         if (double* ga = grad_of(self, 0)) {
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += bv[p * n + j] * g[j];
                             ga[p] += s;
                           }
                         }
                         if (double* gb = grad_of(self, 1)) {
                           for (std::size_t p = 0; p < k; ++p)
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av[p] * g[j];
                         }
                       });
  }
  shape_error("matmul", a.shape(), b.shape());
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), "add", {a.shared(), b.shared()}, [](Node& self) {
    const auto& g = self.grad;
    for (std::size_t s = 0; s < 2; ++s)
      if (double* gi = grad_of(self, s))
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), "sub", {a.shared(), b.shared()}, [](Node& self) {
    const auto& g = self.grad;
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = grad_of(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), "mul", {a.shared(), b.shared()}, [](Node& self) {
    const auto& g = self.grad;
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (double* gb = grad_of(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; }, [factor](Node& self) {
    const auto& g = self.grad;
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Tensor add_rowwise(const Tensor& m, const Tensor& b) {
  if (m.rank() != 2 || b.rank() != 1 || b.dim(0) != m.dim(1))
    shape_error("add_rowwise", m.shape(), b.shape());
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(m.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = m[r * cols + c] + b[c];
  return make_result(m.shape(), std::move(out), "add_rowwise", {m.shared(), b.shared()},
                     [rows, cols](Node& self) {
                       const auto& g = self.grad;
                       if (double* gm = grad_of(self, 0))
                         for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
                       if (double* gb = grad_of(self, 1))
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  const std::size_t rank = parts[0].rank();
  if (rank > 2 || axis >= rank) shape_error("concat", parts[0].shape());
  for (const auto& p : parts) {
    if (p.rank() != rank) shape_error("concat", parts[0].shape(), p.shape());
    for (std::size_t d = 0; d < rank; ++d)
      if (d != axis && p.dim(d) != parts[0].dim(d)) shape_error("concat", parts[0].shape(), p.shape());
  }
  // View each part as [outer, inner_p] and interleave along inner.
  const std::size_t outer = (rank == 2 && axis == 1) ? parts[0].dim(0) : 1;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    widths.push_back(p.size() / outer);
    total += widths.back();
  }
  std::vector<double> out(outer * total);
  std::vector<std::shared_ptr<Node>> inputs;
  std::size_t offset = 0;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto v = parts[s].values();
    for (std::size_t r = 0; r < outer; ++r)
      std::copy_n(v.data() + r * widths[s], widths[s], out.data() + r * total + offset);
    offset += widths[s];
    inputs.push_back(parts[s].shared());
  }
  Shape shape;
  if (rank == 1) {
    shape = {total};
  } else if (axis == 1) {
    shape = {outer, total};
  } else {
    std::size_t rows = 0;
    for (const auto& p : parts) rows += p.dim(0);
    shape = {rows, parts[0].dim(1)};
  }
  return make_result(std::move(shape), std::move(out), "concat", std::move(inputs),
                     [outer, total, widths](Node& self) {
                       const auto& g = self.grad;
                       std::size_t off = 0;
                       for (std::size_t s = 0; s < widths.size(); ++s) {
                         if (double* gs = grad_of(self, s))
                           for (std::size_t r = 0; r < outer; ++r)
                             for (std::size_t c = 0; c < widths[s]; ++c)
                               gs[r * widths[s] + c] += g[r * total + off + c];
                         off += widths[s];
                       }
                     });
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ConfigError("stack_rows: no inputs");
  const std::size_t n = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != n) shape_error("stack_rows", rows[0].shape(), r.shape());
    out.insert(out.end(), r.values().begin(), r.values().end());
    inputs.push_back(r.shared());
  }
  return make_result({rows.size(), n}, std::move(out), "stack_rows", std::move(inputs),
                     [n](Node& self) {
                       const auto& g = self.grad;
                       for (std::size_t s = 0; s < self.inputs.size(); ++s)
                         if (double* gs = grad_of(self, s))
                           for (std::size_t c = 0; c < n; ++c) gs[c] += g[s * n + c];
                     });
}

Tensor slice(const Tensor& v, std::size_t start, std::size_t length) {
  if (v.rank() != 1 || length == 0 || start + length > v.size())
    throw ConfigError("slice: range [" + std::to_string(start) + "," +
                      std::to_string(start + length) + ") out of bounds for shape " +
                      to_string(v.shape()));
  std::vector<double> out(v.values().begin() + static_cast<std::ptrdiff_t>(start),
                          v.values().begin() + static_cast<std::ptrdiff_t>(start + length));
  return make_result({length}, std::move(out), "slice", {v.shared()}, [start](Node& self) {
    const auto& g = self.grad;
    if (double* gv = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) gv[start + i] += g[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Node& self) {
        const auto& g = self.grad;
        const auto& y = self.value;
        if (double* ga = grad_of(self, 0))
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](Node& self) {
    const auto& g = self.grad;
    const auto& y = self.value;
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& self) {
    const auto& g = self.grad;
    const auto& x = value_of(self, 0);
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) ga[i] += g[i];
  });
}

Tensor softmax(const Tensor& a, const std::vector<bool>* mask) {
  if (a.rank() > 2) shape_error("softmax", a.shape());
  const std::size_t width = a.shape().back();
  const std::size_t rows = a.size() / width;
  if (mask && mask->size() != width)
    throw ConfigError("softmax: mask length " + std::to_string(mask->size()) +
                      " does not match trailing extent of " + to_string(a.shape()));
  auto keep = [mask](std::size_t j) { return mask == nullptr || (*mask)[j]; };
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * width;
    double* y = out.data() + r * width;
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < width; ++j)
      if (keep(j)) hi = std::max(hi, x[j]);
    if (hi == -std::numeric_limits<double>::infinity())
      throw InputError("softmax: every position is masked");
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j)
      if (keep(j)) z += (y[j] = std::exp(x[j] - hi));
    for (std::size_t j = 0; j < width; ++j) y[j] /= z;
  }
  return make_result(a.shape(), std::move(out), "softmax", {a.shared()},
                     [rows, width](Node& self) {
                       const auto& g = self.grad;
                       const auto& y = self.value;
                       double* ga = grad_of(self, 0);
                       if (!ga) return;
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t o = r * width;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < width; ++j) dot += y[o + j] * g[o + j];
                         for (std::size_t j = 0; j < width; ++j)
                           ga[o + j] += y[o + j] * (g[o + j] - dot);
                       }
                     });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return make_result({1}, {s}, "sum", {a.shared()}, [](Node& self) {
    const double g = self.grad[0];
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) ga[i] += g;
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_result({1}, {s * inv}, "mean", {a.shared()}, [inv](Node& self) {
    const double g = self.grad[0] * inv;
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) ga[i] += g;
  });
}

Tensor squared_difference(const Tensor& a, const Tensor& b) {
  check_same("squared_difference", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = a[i] - b[i];
    out[i] = d * d;
  }
  return make_result(a.shape(), std::move(out), "squared_difference", {a.shared(), b.shared()},
                     [](Node& self) {
                       const auto& g = self.grad;
                       const auto& av = value_of(self, 0);
                       const auto& bv = value_of(self, 1);
                       double* ga = grad_of(self, 0);
                       double* gb = grad_of(self, 1);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double d = 2.0 * (av[i] - bv[i]) * g[i];
                         if (ga) ga[i] += d;
                         if (gb) gb[i] -= d;
                       }
                     });
}

// ---- losses ------------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::size_t gold) {
  if (logits.rank() != 1) shape_error("cross_entropy", logits.shape());
  const std::size_t n = logits.size();
  if (gold >= n)
    throw InputError("cross_entropy: gold class " + std::to_string(gold) + " outside [0," +
                     std::to_string(n) + ")");
  const auto x = logits.values();
  const double hi = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - hi);
  const double lse = hi + std::log(z);
  return make_result({1}, {lse - x[gold]}, "cross_entropy", {logits.shared()},
                     [gold, lse](Node& self) {
                       const double g = self.grad[0];
                       const auto& xv = value_of(self, 0);
                       if (double* gx = grad_of(self, 0)) {
                         for (std::size_t i = 0; i < xv.size(); ++i)
                           gx[i] += g * std::exp(xv[i] - lse);
                         gx[gold] -= g;
                       }
                     });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same("mse", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_result({1}, {s * inv}, "mse", {a.shared(), b.shared()}, [inv](Node& self) {
    const double g = self.grad[0];
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = 2.0 * inv * (av[i] - bv[i]) * g;
      if (ga) ga[i] += d;
      if (gb) gb[i] -= d;
    }
  });
}

Tensor grad_reverse(const Tensor& x, double rho) {
  if (!(rho >= 0.0)) throw ConfigError("grad_reverse: rho must be >= 0");
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(x.shape(), std::move(out), "grad_reverse", {x.shared()}, [rho](Node& self) {
    const auto& g = self.grad;
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= rho * g[i];
  });
}

// ---- graph -------------------------------------------------------------------

Graph::Graph(const Tensor& root) {
  if (!root.defined() || !root.requires_grad()) return;
  // Iterative post-order DFS; the reversed post-order is a reverse
  // topological order (outputs before inputs).
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  std::vector<Node*> post;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    post.push_back(node);
    stack.pop_back();
  }
  order_.assign(post.rbegin(), post.rend());
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw UsageError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) return;
  Graph graph(loss);
  for (Node* n : graph.reverse_order()) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  Node* root = graph.reverse_order().front();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (Node* n : graph.reverse_order())
    if (n->backward) n->backward(*n);
}

}  // namespace toad::ad
