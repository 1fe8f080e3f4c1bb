#pragma once

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference and an OpenMP version. The OpenMP versions only split work over
// independent outputs (layers, volumes, matrix rows, vertices), so their
// results are bitwise identical to the serial ones for any thread count.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace hemlets::kernels {

enum class Exec { serial, parallel };

/// Process-wide default used by the higher-level modules.
Exec default_exec();
void set_default_exec(Exec exec);

/// Sets the OpenMP thread count (n <= 0 leaves the runtime default).
void set_num_threads(int n);
int num_threads();

/// One Gaussian peak to draw into layer `layer` of a stack.
struct GaussianStamp {
  int layer = 0;
  double cx = 0.0;
  double cy = 0.0;
};

struct GaussianParams {
  double sigma = 2.0;
  /// Values further than truncate * sigma from the center are left at zero.
  double truncate = 3.0;
};

/// Draws amplitude-1 Gaussians into a zero-initialised L x H x W stack,
/// combining overlapping peaks by element-wise maximum.
void render_gaussian_stack(Exec exec, std::span<double> stack, int layers, int height, int width,
                           std::span<const GaussianStamp> stamps, const GaussianParams& params);

/// 3D Gaussian blobs, one per channel of an C x D x H x W stack (NaN center = empty channel).
struct VolumeStamp {
  double cx = 0.0, cy = 0.0, cz = 0.0;
};
void render_volume_stack(Exec exec, std::span<double> stack, int channels, int depth, int height,
                         int width, std::span<const VolumeStamp> centers,
                         std::array<double, 3> sigma_xyz, double truncate);

enum class WeightMode { logits, heatmap };

/// Expected (x, y, z) voxel index for each of `count` volumes of size D x H x W.
/// In logits mode weights are softmax(temperature * v); in heatmap mode the
/// non-negative values are normalised by their sum.
void soft_argmax_batch(Exec exec, std::span<const double> volumes, int count, int depth, int height,
                       int width, double temperature, WeightMode mode, std::span<double> out_xyz);

/// C (m x n) = A (m x k) * B (k x n), row-major.
void matmul(Exec exec, std::span<const double> a, std::span<const double> b, std::span<double> c, int m,
            int k, int n);
/// C (m x n) += A^T * B with A (k x m), B (k x n).
void matmul_at_b_accumulate(Exec exec, std::span<const double> a, std::span<const double> b,
                            std::span<double> c, int k, int m, int n);
/// C (m x n) += A * B^T with A (m x k), B (n x k).
void matmul_a_bt_accumulate(Exec exec, std::span<const double> a, std::span<const double> b,
                            std::span<double> c, int m, int k, int n);

/// Linear blend skinning in delta form:
///   out_v = v + sum_j w_vj * ((R_j - I) v + t_j)
/// `transforms` holds 12 doubles per joint (row-major 3x3 rotation, then translation),
/// already expressed relative to the rest pose.
void blend_skin(Exec exec, std::span<const double> rest_vertices, std::span<const double> weights,
                int num_vertices, int num_joints, std::span<const double> transforms,
                std::span<double> out_vertices);

}  // namespace hemlets::kernels
