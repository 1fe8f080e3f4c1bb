#include "hemlets/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

#include "hemlets/error.hpp"
#include "hemlets/kernels.hpp"

namespace hemlets::ad {

using detail::Node;

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(ErrorCode::dimension, "negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

namespace {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value,
                                std::vector<std::shared_ptr<Node>> parents = {}) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->grad.assign(n->value.size(), 0.0);
  n->requires_grad = std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p->requires_grad; });
  n->parents = std::move(parents);
  return n;
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

DiffArray DiffArray::constant(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != values.size()) {
    throw Error(ErrorCode::dimension, "value count does not match shape " + shape_str(shape));
  }
  return DiffArray(make_node(std::move(shape), std::move(values)));
}

DiffArray DiffArray::variable(Shape shape, std::vector<double> values) {
  DiffArray a = constant(std::move(shape), std::move(values));
  a.node_->requires_grad = true;
  return a;
}

DiffArray DiffArray::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  DiffArray a = constant(std::move(shape), std::vector<double>(n, 0.0));
  a.node_->requires_grad = requires_grad;
  return a;
}

double DiffArray::item() const {
  if (size() != 1) throw Error(ErrorCode::rank, "item() needs a single-element array");
  return node_->value[0];
}

void DiffArray::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

DiffArray add(const DiffArray& a, const DiffArray& b) {
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !(b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.shape().back())) {
    throw Error(ErrorCode::dimension, "add: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t nb = b.size();
  std::vector<double> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += b.values()[broadcast ? i % nb : i];
  auto out = make_node(a.shape(), std::move(v), {a.node(), b.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  out->backward = [o, pa, pb, broadcast, nb] {
    for (std::size_t i = 0; i < o->grad.size(); ++i) {
      pa->grad[i] += o->grad[i];
      pb->grad[broadcast ? i % nb : i] += o->grad[i];
    }
  };
  return DiffArray(out);
}

DiffArray depth_plane_sum(const DiffArray& plane, const DiffArray& depth) {
  if (plane.rank() != 2 || depth.rank() != 2 || plane.dim(0) != depth.dim(0)) {
    throw Error(ErrorCode::dimension,
                "depth_plane_sum: shapes " + shape_str(plane.shape()) + " and " + shape_str(depth.shape()));
  }
  const int rows = plane.dim(0);
  const int area = plane.dim(1);
  const int d = depth.dim(1);
  std::vector<double> v(static_cast<std::size_t>(rows) * d * area);
  const auto pv = plane.values();
  const auto dv = depth.values();
  for (int r = 0; r < rows; ++r) {
    for (int z = 0; z < d; ++z) {
      double* row = v.data() + (static_cast<std::size_t>(r) * d + z) * area;
      const double dz = dv[static_cast<std::size_t>(r) * d + z];
      for (int i = 0; i < area; ++i) row[i] = pv[static_cast<std::size_t>(r) * area + i] + dz;
    }
  }
  auto out = make_node({rows, d * area}, std::move(v), {plane.node(), depth.node()});
  Node* o = out.get();
  Node* pp = plane.node().get();
  Node* pd = depth.node().get();
  out->backward = [o, pp, pd, rows, area, d] {
    for (int r = 0; r < rows; ++r) {
      for (int z = 0; z < d; ++z) {
        const double* g = o->grad.data() + (static_cast<std::size_t>(r) * d + z) * area;
        double acc = 0.0;
        for (int i = 0; i < area; ++i) {
          pp->grad[static_cast<std::size_t>(r) * area + i] += g[i];
          acc += g[i];
        }
        pd->grad[static_cast<std::size_t>(r) * d + z] += acc;
      }
    }
  };
  return DiffArray(out);
}

DiffArray scale(const DiffArray& a, double factor) {
  std::vector<double> v(a.values().begin(), a.values().end());
  for (double& x : v) x *= factor;
  auto out = make_node(a.shape(), std::move(v), {a.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  out->backward = [o, pa, factor] {
    for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += factor * o->grad[i];
  };
  return DiffArray(out);
}

DiffArray sub(const DiffArray& a, const DiffArray& b) { return add(a, scale(b, -1.0)); }

DiffArray multiply(const DiffArray& a, const DiffArray& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::dimension, "multiply: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
  auto out = make_node(a.shape(), std::move(v), {a.node(), b.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  out->backward = [o, pa, pb] {
    for (std::size_t i = 0; i < o->grad.size(); ++i) {
      pa->grad[i] += o->grad[i] * pb->value[i];
      pb->grad[i] += o->grad[i] * pa->value[i];
    }
  };
  return DiffArray(out);
}

DiffArray matmul(const DiffArray& a, const DiffArray& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorCode::dimension, "matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> v(static_cast<std::size_t>(m) * n);
  const auto exec = kernels::default_exec();
  kernels::matmul(exec, a.values(), b.values(), v, m, k, n);
  auto out = make_node({m, n}, std::move(v), {a.node(), b.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  out->backward = [o, pa, pb, m, k, n, exec] {
    if (pa->requires_grad) kernels::matmul_a_bt_accumulate(exec, o->grad, pb->value, pa->grad, m, n, k);
    if (pb->requires_grad) kernels::matmul_at_b_accumulate(exec, pa->value, o->grad, pb->grad, m, k, n);
  };
  return DiffArray(out);
}

DiffArray relu(const DiffArray& a) {
  std::vector<double> v(a.values().begin(), a.values().end());
  for (double& x : v) x = std::max(x, 0.0);
  auto out = make_node(a.shape(), std::move(v), {a.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  out->backward = [o, pa] {
    for (std::size_t i = 0; i < o->grad.size(); ++i) {
      if (pa->value[i] > 0.0) pa->grad[i] += o->grad[i];
    }
  };
  return DiffArray(out);
}

DiffArray reshape(const DiffArray& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw Error(ErrorCode::dimension, "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  auto out = make_node(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()), {a.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  out->backward = [o, pa] {
    for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i];
  };
  return DiffArray(out);
}

DiffArray concat_columns(const DiffArray& a, const DiffArray& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw Error(ErrorCode::dimension, "concat_columns: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int rows = a.dim(0), na = a.dim(1), nb = b.dim(1), n = na + nb;
  std::vector<double> v(static_cast<std::size_t>(rows) * n);
  for (int r = 0; r < rows; ++r) {
    std::copy_n(&a.values()[static_cast<std::size_t>(r) * na], na, &v[static_cast<std::size_t>(r) * n]);
    std::copy_n(&b.values()[static_cast<std::size_t>(r) * nb], nb, &v[static_cast<std::size_t>(r) * n + na]);
  }
  auto out = make_node({rows, n}, std::move(v), {a.node(), b.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  out->backward = [o, pa, pb, rows, na, nb, n] {
    for (int r = 0; r < rows; ++r) {
      const double* g = &o->grad[static_cast<std::size_t>(r) * n];
      for (int j = 0; j < na; ++j) pa->grad[static_cast<std::size_t>(r) * na + j] += g[j];
      for (int j = 0; j < nb; ++j) pb->grad[static_cast<std::size_t>(r) * nb + j] += g[na + j];
    }
  };
  return DiffArray(out);
}

DiffArray softmax_over_axes(const DiffArray& a, int trailing_axes, double temperature) {
  if (trailing_axes < 1 || trailing_axes > a.rank()) throw Error(ErrorCode::dimension, "softmax: bad axis count");
  if (!(temperature > 0.0)) throw Error(ErrorCode::config, "softmax temperature must be positive");
  std::size_t group = 1;
  for (int i = a.rank() - trailing_axes; i < a.rank(); ++i) group *= static_cast<std::size_t>(a.dim(i));
  const std::size_t rows = group ? a.size() / group : 0;
  std::vector<double> v(a.size());
  const auto x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * group;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < group; ++i) m = std::max(m, temperature * x[base + i]);
    double total = 0.0;
    for (std::size_t i = 0; i < group; ++i) total += v[base + i] = std::exp(temperature * x[base + i] - m);
    for (std::size_t i = 0; i < group; ++i) v[base + i] /= total;
  }
  auto out = make_node(a.shape(), std::move(v), {a.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  out->backward = [o, pa, rows, group, temperature] {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * group;
      double dot = 0.0;
      for (std::size_t i = 0; i < group; ++i) dot += o->grad[base + i] * o->value[base + i];
      for (std::size_t i = 0; i < group; ++i) {
        pa->grad[base + i] += temperature * o->value[base + i] * (o->grad[base + i] - dot);
      }
    }
  };
  return DiffArray(out);
}

namespace {

template <typename F, typename G>
DiffArray reduce(const DiffArray& a, F value_term, G grad_term) {
  double s = 0.0;
  for (double x : a.values()) s += value_term(x);
  auto out = make_node({}, {s}, {a.node()});
  Node* o = out.get();
  Node* pa = a.node().get();
  out->backward = [o, pa, grad_term] {
    const double g = o->grad[0];
    for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g * grad_term(pa->value[i]);
  };
  return DiffArray(out);
}

}  // namespace

DiffArray sum(const DiffArray& a) {
  return reduce(a, [](double x) { return x; }, [](double) { return 1.0; });
}

DiffArray abs_sum(const DiffArray& a) {
  return reduce(a, [](double x) { return std::abs(x); }, [](double x) { return sgn(x); });
}

DiffArray square_sum(const DiffArray& a) {
  return reduce(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

DiffArray expectation_over_grid(const DiffArray& p, int depth, int height, int width) {
  const std::size_t vol = static_cast<std::size_t>(depth) * height * width;
  if (vol == 0 || p.size() % vol != 0) {
    throw Error(ErrorCode::dimension, "expectation_over_grid: size is not a multiple of the grid volume");
  }
  const int blocks = static_cast<int>(p.size() / vol);
  std::vector<double> v(3 * static_cast<std::size_t>(blocks), 0.0);
  const auto pv = p.values();
  for (int b = 0; b < blocks; ++b) {
    std::size_t i = b * vol;
    for (int z = 0; z < depth; ++z) {
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x, ++i) {
          v[3 * b] += pv[i] * x;
          v[3 * b + 1] += pv[i] * y;
          v[3 * b + 2] += pv[i] * z;
        }
      }
    }
  }
  auto out = make_node({blocks, 3}, std::move(v), {p.node()});
  Node* o = out.get();
  Node* pp = p.node().get();
  out->backward = [o, pp, blocks, depth, height, width, vol] {
    for (int b = 0; b < blocks; ++b) {
      const double gx = o->grad[3 * b], gy = o->grad[3 * b + 1], gz = o->grad[3 * b + 2];
      std::size_t i = b * vol;
      for (int z = 0; z < depth; ++z) {
        for (int y = 0; y < height; ++y) {
          for (int x = 0; x < width; ++x, ++i) pp->grad[i] += gx * x + gy * y + gz * z;
        }
      }
    }
  };
  return DiffArray(out);
}

void backward(const DiffArray& sink) {
  if (!sink.defined() || sink.size() != 1) throw Error(ErrorCode::rank, "backward needs a scalar sink");

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{sink.node().get(), 0}};
  seen.insert(sink.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  sink.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->requires_grad && (*it)->backward) (*it)->backward();
  }
}

}  // namespace hemlets::ad
