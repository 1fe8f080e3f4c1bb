#include "hemlets/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <limits>

namespace hemlets::kernels {

namespace {

std::atomic<Exec> g_default_exec{Exec::parallel};

// Layer `l` of the stack receives every stamp targeting it, in input order.
void render_layer(std::span<double> layer_values, int layer, int height, int width,
                  std::span<const GaussianStamp> stamps, const GaussianParams& params) {
  const double inv_two_var = 1.0 / (2.0 * params.sigma * params.sigma);
  const double radius = params.truncate * params.sigma;
  const double radius2 = radius * radius;
  for (const GaussianStamp& s : stamps) {
    if (s.layer != layer) continue;
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.cx - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(s.cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.cy - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(s.cy + radius)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - s.cy;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - s.cx;
        const double d2 = dx * dx + dy * dy;
        if (d2 > radius2) continue;
        double& v = layer_values[static_cast<std::size_t>(y) * width + x];
        v = std::max(v, std::exp(-d2 * inv_two_var));
      }
    }
  }
}

void render_volume_channel(std::span<double> values, int depth, int height, int width, VolumeStamp c,
                           std::array<double, 3> sigma, double truncate) {
  if (std::isnan(c.cx) || std::isnan(c.cy) || std::isnan(c.cz)) return;
  const double rx = truncate * sigma[0], ry = truncate * sigma[1], rz = truncate * sigma[2];
  const int x0 = std::max(0, static_cast<int>(std::ceil(c.cx - rx)));
  const int x1 = std::min(width - 1, static_cast<int>(std::floor(c.cx + rx)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(c.cy - ry)));
  const int y1 = std::min(height - 1, static_cast<int>(std::floor(c.cy + ry)));
  const int z0 = std::max(0, static_cast<int>(std::ceil(c.cz - rz)));
  const int z1 = std::min(depth - 1, static_cast<int>(std::floor(c.cz + rz)));
  const double t2 = truncate * truncate;
  for (int z = z0; z <= z1; ++z) {
    const double dz = (z - c.cz) / sigma[2];
    for (int y = y0; y <= y1; ++y) {
      const double dy = (y - c.cy) / sigma[1];
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x - c.cx) / sigma[0];
        const double q = dx * dx + dy * dy + dz * dz;
        if (q > t2) continue;
        values[(static_cast<std::size_t>(z) * height + y) * width + x] = std::exp(-0.5 * q);
      }
    }
  }
}

void soft_argmax_one(std::span<const double> v, int depth, int height, int width, double temperature,
                     WeightMode mode, double* out) {
  const std::size_t n = v.size();
  double shift = 0.0;
  if (mode == WeightMode::logits) {
    shift = -std::numeric_limits<double>::infinity();
    for (double x : v) shift = std::max(shift, temperature * x);
  }
  double total = 0.0, sx = 0.0, sy = 0.0, sz = 0.0;
  std::size_t idx = 0;
  for (int z = 0; z < depth; ++z) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x, ++idx) {
        const double w = mode == WeightMode::logits ? std::exp(temperature * v[idx] - shift) : v[idx];
        total += w;
        sx += w * x;
        sy += w * y;
        sz += w * z;
      }
    }
  }
  assert(idx == n);
  (void)n;
  out[0] = sx / total;
  out[1] = sy / total;
  out[2] = sz / total;
}

}  // namespace

Exec default_exec() { return g_default_exec.load(); }
void set_default_exec(Exec exec) { g_default_exec.store(exec); }

void set_num_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}
int num_threads() { return omp_get_max_threads(); }

void render_gaussian_stack(Exec exec, std::span<double> stack, int layers, int height, int width,
                           std::span<const GaussianStamp> stamps, const GaussianParams& params) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  assert(stack.size() == plane * layers);
  if (exec == Exec::serial) {
    for (int l = 0; l < layers; ++l) render_layer(stack.subspan(l * plane, plane), l, height, width, stamps, params);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int l = 0; l < layers; ++l) render_layer(stack.subspan(l * plane, plane), l, height, width, stamps, params);
}

void render_volume_stack(Exec exec, std::span<double> stack, int channels, int depth, int height, int width,
                         std::span<const VolumeStamp> centers, std::array<double, 3> sigma_xyz,
                         double truncate) {
  const std::size_t vol = static_cast<std::size_t>(depth) * height * width;
  assert(stack.size() == vol * channels && centers.size() == static_cast<std::size_t>(channels));
  if (exec == Exec::serial) {
    for (int c = 0; c < channels; ++c) {
      render_volume_channel(stack.subspan(c * vol, vol), depth, height, width, centers[c], sigma_xyz, truncate);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    render_volume_channel(stack.subspan(c * vol, vol), depth, height, width, centers[c], sigma_xyz, truncate);
  }
}

void soft_argmax_batch(Exec exec, std::span<const double> volumes, int count, int depth, int height, int width,
                       double temperature, WeightMode mode, std::span<double> out_xyz) {
  const std::size_t vol = static_cast<std::size_t>(depth) * height * width;
  assert(volumes.size() == vol * count && out_xyz.size() == 3 * static_cast<std::size_t>(count));
  if (exec == Exec::serial) {
    for (int i = 0; i < count; ++i) {
      soft_argmax_one(volumes.subspan(i * vol, vol), depth, height, width, temperature, mode, &out_xyz[3 * i]);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    soft_argmax_one(volumes.subspan(i * vol, vol), depth, height, width, temperature, mode, &out_xyz[3 * i]);
  }
}

void matmul(Exec exec, std::span<const double> a, std::span<const double> b, std::span<double> c, int m, int k,
            int n) {
  auto row = [&](int i) {
    double* ci = &c[static_cast<std::size_t>(i) * n];
    std::fill(ci, ci + n, 0.0);
    const double* ai = &a[static_cast<std::size_t>(i) * k];
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = &b[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  };
  if (exec == Exec::serial) {
    for (int i = 0; i < m; ++i) row(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) row(i);
}

void matmul_at_b_accumulate(Exec exec, std::span<const double> a, std::span<const double> b, std::span<double> c,
                            int k, int m, int n) {
  // Row i of C depends on column i of A; each row is owned by one thread.
  auto row = [&](int i) {
    double* ci = &c[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double api = a[static_cast<std::size_t>(p) * m + i];
      if (api == 0.0) continue;
      const double* bp = &b[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  };
  if (exec == Exec::serial) {
    for (int i = 0; i < m; ++i) row(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) row(i);
}

void matmul_a_bt_accumulate(Exec exec, std::span<const double> a, std::span<const double> b, std::span<double> c,
                            int m, int k, int n) {
  auto row = [&](int i) {
    const double* ai = &a[static_cast<std::size_t>(i) * k];
    double* ci = &c[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) {
      const double* bj = &b[static_cast<std::size_t>(j) * k];
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  };
  if (exec == Exec::serial) {
    for (int i = 0; i < m; ++i) row(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) row(i);
}

void blend_skin(Exec exec, std::span<const double> rest_vertices, std::span<const double> weights,
                int num_vertices, int num_joints, std::span<const double> transforms,
                std::span<double> out_vertices) {
  auto vertex = [&](int v) {
    const double* p = &rest_vertices[3 * static_cast<std::size_t>(v)];
    const double* w = &weights[static_cast<std::size_t>(v) * num_joints];
    double d[3] = {0.0, 0.0, 0.0};
    for (int j = 0; j < num_joints; ++j) {
      if (w[j] == 0.0) continue;
      const double* t = &transforms[12 * static_cast<std::size_t>(j)];
      for (int r = 0; r < 3; ++r) {
        const double rp = (t[3 * r] - (r == 0 ? 1.0 : 0.0)) * p[0] + (t[3 * r + 1] - (r == 1 ? 1.0 : 0.0)) * p[1] +
                          (t[3 * r + 2] - (r == 2 ? 1.0 : 0.0)) * p[2] + t[9 + r];
        d[r] += w[j] * rp;
      }
    }
    double* o = &out_vertices[3 * static_cast<std::size_t>(v)];
    o[0] = p[0] + d[0];
    o[1] = p[1] + d[1];
    o[2] = p[2] + d[2];
  };
  if (exec == Exec::serial) {
    for (int v = 0; v < num_vertices; ++v) vertex(v);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int v = 0; v < num_vertices; ++v) vertex(v);
}

}  // namespace hemlets::kernels
