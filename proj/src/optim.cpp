// Copyright 2026 The SeqPE Authors
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

#include "seqpe/optim.hpp"

#include <cmath>

#include "seqpe/error.hpp"

namespace seqpe {

AdamState make_adam_state(const ParameterList& params, double lr, double weight_decay) {
  AdamState s;
  s.lr = lr;
  s.weight_decay = weight_decay;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, const ParameterList& params) {
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "Adam state does not match the parameter list");
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw Error(ErrorCode::kMissingGrad, "no gradient for " + p.name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor x = params[k].tensor;
    auto w = x.mutable_data();
    auto g = x.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    const double decay = params[k].decay ? state.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) + decay * w[i]);
    }
  }
}

}  // namespace seqpe
