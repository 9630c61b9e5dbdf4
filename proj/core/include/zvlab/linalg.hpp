#pragma once

#include <Eigen/Dense>

namespace zvlab {

/// Largest spatial dimension supported by the small vector types. Storage is
/// inline, so per-step arithmetic on paths never touches the heap.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline Vec scalar_vec(double v) {
    Vec out(1);
    out(0) = v;
    return out;
}

/// Spectral norm; closed form for d <= 2.
double operator_norm(const Mat& m);

}  // namespace zvlab
