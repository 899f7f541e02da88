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

#include "stt/ops.hpp"
#include "gemm.hpp"

namespace stt {
namespace {

using Index = std::int64_t;

struct MatmulPlan {
  Index batch = 1;
  Index n = 0, k = 0, m = 0;
  bool a_batched = true;
  bool b_batched = true;
  Shape out;
};

MatmulPlan plan_matmul(const Shape& a, const Shape& b) {
  auto fail = [&] { return DimensionError("matmul: incompatible shapes " + a.str() + " and " + b.str()); };
  if (a.rank() < 2 || b.rank() < 2) throw fail();
  MatmulPlan plan;
  plan.n = a[a.rank() - 2];
  plan.k = a.back();
  plan.m = b.back();
  if (b[b.rank() - 2] != plan.k) throw fail();
  const std::vector<Index> lead_a(a.dims().begin(), a.dims().end() - 2);
  const std::vector<Index> lead_b(b.dims().begin(), b.dims().end() - 2);
  std::vector<Index> lead;
  if (lead_a == lead_b) {
    lead = lead_a;
  } else if (lead_b.empty()) {
    lead = lead_a;
    plan.b_batched = false;
  } else if (lead_a.empty()) {
    lead = lead_b;
    plan.a_batched = false;
  } else {
    throw fail();
  }
  for (auto d : lead) plan.batch *= d;
  lead.push_back(plan.n);
  lead.push_back(plan.m);
  plan.out = Shape(lead);
  return plan;
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const MatmulPlan p = plan_matmul(a.shape(), b.shape());
  std::vector<T> out(static_cast<std::size_t>(p.out.numel()), T{0});
  const T* av = a.data().data();
  const T* bv = b.data().data();
  const Index sa = p.a_batched ? p.n * p.k : 0;
  const Index sb = p.b_batched ? p.k * p.m : 0;
  for (Index i = 0; i < p.batch; ++i) {
    gemm_nn<T>(p.n, p.m, p.k, av + i * sa, bv + i * sb, out.data() + i * p.n * p.m);
  }
  detail::add_macs(static_cast<std::uint64_t>(p.batch * p.n * p.k * p.m));
  return record_op<T>("matmul", p.out, std::move(out), {a, b}, [a, b, p, sa, sb](std::span<const T> g) mutable {
    const T* av = a.data().data();
    const T* bv = b.data().data();
    if (a.requires_grad()) {
      T* ga = a.grad_buffer().data();
      for (Index i = 0; i < p.batch; ++i) {
        gemm_nt<T>(p.n, p.k, p.m, g.data() + i * p.n * p.m, bv + i * sb, ga + i * sa);
      }
    }
    if (b.requires_grad()) {
      T* gb = b.grad_buffer().data();
      for (Index i = 0; i < p.batch; ++i) {
        gemm_tn<T>(p.k, p.m, p.n, av + i * sa, g.data() + i * p.n * p.m, gb + i * sb);
      }
    }
  });
}

template BasicTensor<float> matmul(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> matmul(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace stt
