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

#include <string>
#include <vector>

#include "seqpe/rng.hpp"
#include "seqpe/tensor.hpp"

namespace seqpe {

struct Parameter {
  std::string name;
  Tensor tensor;
  // Decoupled weight decay applies only where this is true.
  bool decay = true;
};

using ParameterList = std::vector<Parameter>;

// N(0, stddev) initialised trainable tensor.
Tensor normal_parameter(Shape shape, Rng& rng, double stddev = 0.02);

void zero_grads(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out, bool decay = true) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Two-layer GELU feed-forward with hidden width `expansion * width`.
struct Mlp {
  Linear up;
  Linear down;

  Mlp() = default;
  Mlp(std::size_t width, std::size_t expansion, Rng& rng);
  Tensor operator()(const Tensor& x) const { return down(gelu(up(x))); }
  void collect(const std::string& prefix, ParameterList& out, bool decay = true) const;
};

}  // namespace seqpe
