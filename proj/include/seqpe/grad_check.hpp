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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqpe/nn.hpp"

namespace seqpe {

struct GradCheckOptions {
  double step = 1e-5;  // central-difference h, must lie in (0, 1e-3]
  double tolerance = 1e-4;
  // Coordinates sampled uniformly over all parameter elements. When
  // per_parameter > 0, that many are drawn from every parameter instead.
  std::size_t samples = 100;
  std::size_t per_parameter = 0;
  std::uint64_t seed = 0;
  // Test hook: negate the analytic gradient before comparing.
  bool flip_sign = false;
};

struct GradCheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool ok = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed = true;
  double max_rel_error = 0.0;

  // Max relative error keyed by the parameter-name prefix before the first '.'.
  std::map<std::string, double> max_error_by_module() const;
};

// Compares reverse-mode gradients of the scalar `loss` with central finite
// differences. Relative error is |g_ad - g_fd| / max(1, |g_fd|); a coordinate
// with a non-finite difference quotient fails.
GradCheckReport grad_check(const std::function<Tensor()>& loss, const ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace seqpe
