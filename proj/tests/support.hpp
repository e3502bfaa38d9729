// Copyright 2026 The DAS Search Authors
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

// Test doubles shared by the unit tests and the acceptance binary.

#pragma once

#include <cmath>
#include <random>

#include "das/decoder.hpp"

namespace das::testing {

// Next-token distribution drawn afresh for every prefix from a hash of
// (seed, prefix). SOS and UNK get zero mass.
class RandomGenerator : public GeneratorModel {
 public:
  RandomGenerator(std::size_t vocab_size, std::uint64_t seed, double eos_weight = 1.0)
      : vsize_(vocab_size), seed_(seed), eos_weight_(eos_weight) {}

  std::size_t vocab_size() const override { return vsize_; }

  std::vector<double> next_logprobs(std::span<const TokenId>, std::span<const TokenId> prefix) const override {
    std::uint64_t h = seed_;
    for (TokenId t : prefix) h = splitmix64(h ^ static_cast<std::uint64_t>(t + 1));
    Rng rng(h);
    std::vector<double> w(vsize_, 0.0);
    double total = 0.0;
    for (std::size_t v = 0; v < vsize_; ++v) {
      if (static_cast<TokenId>(v) == kSos || static_cast<TokenId>(v) == kUnk) continue;
      w[v] = 0.05 + rng.uniform();
      if (static_cast<TokenId>(v) == kEos) w[v] *= eos_weight_;
      total += w[v];
    }
    std::vector<double> out(vsize_);
    for (std::size_t v = 0; v < vsize_; ++v) out[v] = w[v] > 0 ? std::log(w[v] / total) : kNegInf;
    return out;
  }

 private:
  std::size_t vsize_;
  std::uint64_t seed_;
  double eos_weight_;
};

// Discriminator with Gaussian weights.
inline DiscriminatorModel random_discriminator(std::uint64_t seed, int t_max, std::size_t d_hash = 64,
                                               double scale = 1.0) {
  FeatureConfig cfg;
  cfg.d_hash = d_hash;
  cfg.t_max = t_max;
  DiscriminatorModel m(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  m.bias() = nd(rng);
  for (auto& w : m.dense_weights()) w = nd(rng);
  for (auto& w : m.sparse_weights()) w = nd(rng);
  return m;
}

}  // namespace das::testing
