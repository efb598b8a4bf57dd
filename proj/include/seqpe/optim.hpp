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

#pragma once

#include <cstdint>
#include <vector>

#include "seqpe/nn.hpp"

namespace seqpe {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

AdamState make_adam_state(const ParameterList& params, double lr, double weight_decay = 0.0);

// One bias-corrected Adam update with decoupled weight decay (applied only to
// parameters whose `decay` flag is set). Throws MissingGrad if any parameter
// has no gradient buffer.
void adam_step(AdamState& state, const ParameterList& params);

}  // namespace seqpe
