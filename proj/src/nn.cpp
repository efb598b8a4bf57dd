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

#include "seqpe/nn.hpp"

namespace seqpe {

Tensor normal_parameter(Shape shape, Rng& rng, double stddev) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(data), true);
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(normal_parameter({in, out}, rng)) {
  if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParameterList& out, bool decay) const {
  out.push_back({prefix + ".weight", weight, decay});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, false});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain(Tensor::full({width}, 1.0, true)), bias(Tensor::zeros({width}, true)) {}

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gain", gain, false});
  out.push_back({prefix + ".bias", bias, false});
}

Mlp::Mlp(std::size_t width, std::size_t expansion, Rng& rng)
    : up(width, width * expansion, rng), down(width * expansion, width, rng) {}

void Mlp::collect(const std::string& prefix, ParameterList& out, bool decay) const {
  up.collect(prefix + ".up", out, decay);
  down.collect(prefix + ".down", out, decay);
}

}  // namespace seqpe
