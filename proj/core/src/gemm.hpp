// Copyright 2026 The Super Token Transformer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Row-major accumulate-into GEMM kernels used by matmul and the convolutions,
// backed by Eigen.

#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace stt {

namespace detail {
template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstView = Eigen::Map<const RowMajor<T>>;
template <typename T>
using View = Eigen::Map<RowMajor<T>>;
}  // namespace detail

// C[n,m] += A[n,k] * B[k,m]
template <typename T>
inline void gemm_nn(std::int64_t n, std::int64_t m, std::int64_t k, const T* a, const T* b, T* c) {
  detail::View<T>(c, n, m).noalias() += detail::ConstView<T>(a, n, k) * detail::ConstView<T>(b, k, m);
}

// C[n,m] += A[n,k] * B[m,k]^T
template <typename T>
inline void gemm_nt(std::int64_t n, std::int64_t m, std::int64_t k, const T* a, const T* b, T* c) {
  detail::View<T>(c, n, m).noalias() += detail::ConstView<T>(a, n, k) * detail::ConstView<T>(b, m, k).transpose();
}

// C[n,m] += A[k,n]^T * B[k,m]
template <typename T>
inline void gemm_tn(std::int64_t n, std::int64_t m, std::int64_t k, const T* a, const T* b, T* c) {
  detail::View<T>(c, n, m).noalias() += detail::ConstView<T>(a, k, n).transpose() * detail::ConstView<T>(b, k, m);
}

}  // namespace stt
