#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

namespace lpca {

/// C[M×N] (+)= op(A) · op(B) on row-major buffers. op(A) is M×K: A is stored
/// M×K, or K×M when trans_a. Likewise op(B) is K×N.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMat>;
  using Map = Eigen::Map<RowMat>;
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map out(c, M, N);
  if (!accumulate) out.setZero();
  if (k == 0) return;
  if (!trans_a && !trans_b) {
    out.noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
  } else if (trans_a && !trans_b) {
    out.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, K, N);
  } else if (!trans_a && trans_b) {
    out.noalias() += ConstMap(a, M, K) * ConstMap(b, N, K).transpose();
  } else {
    out.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, N, K).transpose();
  }
}

/// Multiply-accumulate tally of forward ops on the current thread. Used to
/// cross-check the closed-form complexity accounting against executed work.
inline std::uint64_t& mac_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}

}  // namespace lpca
