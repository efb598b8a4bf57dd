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

#include "seqpe/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "seqpe/error.hpp"

namespace seqpe {

std::map<std::string, double> GradCheckReport::max_error_by_module() const {
  std::map<std::string, double> out;
  for (const auto& e : entries) {
    std::string key = e.parameter.substr(0, e.parameter.find('.'));
    auto& slot = out[key];
    slot = std::max(slot, std::isfinite(e.rel_error) ? e.rel_error : INFINITY);
  }
  return out;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss, const ParameterList& params,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0 && options.step <= 1e-3)) {
    throw Error(ErrorCode::kOutOfRange, "finite-difference step must lie in (0, 1e-3]");
  }
  zero_grads(params);
  {
    Tensor l = loss();
    l.backward();
  }

  // (parameter, element) pairs to probe.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  Rng rng(options.seed, 0x6772616463686b);
  if (options.per_parameter > 0) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      const std::size_t n = params[p].tensor.numel();
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      rng.shuffle(std::span<std::size_t>(idx));
      for (std::size_t i = 0; i < std::min(n, options.per_parameter); ++i) coords.emplace_back(p, idx[i]);
    }
  } else {
    const std::size_t total = parameter_count(params);
    for (std::size_t s = 0; s < options.samples && total > 0; ++s) {
      std::size_t flat = static_cast<std::size_t>(rng.below(total));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const std::size_t n = params[p].tensor.numel();
        if (flat < n) {
          coords.emplace_back(p, flat);
          break;
        }
        flat -= n;
      }
    }
  }

  GradCheckReport report;
  for (auto [p, i] : coords) {
    Tensor t = params[p].tensor;
    const double analytic_raw = t.has_grad() ? t.grad()[i] : 0.0;
    const double analytic = options.flip_sign ? -analytic_raw : analytic_raw;
    auto values = t.mutable_data();
    const double saved = values[i];
    double plus, minus;
    {
      NoGradGuard guard;
      values[i] = saved + options.step;
      plus = loss().item();
      values[i] = saved - options.step;
      minus = loss().item();
      values[i] = saved;
    }
    const double numeric = (plus - minus) / (2.0 * options.step);
    GradCheckEntry e;
    e.parameter = params[p].name;
    e.index = i;
    e.analytic = analytic;
    e.numeric = numeric;
    if (std::isfinite(numeric) && std::isfinite(analytic)) {
      e.rel_error = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      e.ok = e.rel_error < options.tolerance;
    } else {
      e.rel_error = INFINITY;
      e.ok = false;
    }
    report.passed = report.passed && e.ok;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace seqpe
