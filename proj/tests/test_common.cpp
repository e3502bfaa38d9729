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

#include <gtest/gtest.h>

#include <set>

#include "das/common.hpp"

using namespace das;

TEST(Common, StripReservedDropsFrameTokens) {
  EXPECT_EQ(strip_reserved({kSos, 5, 6, kEos}), (TokenSeq{5, 6}));
  EXPECT_EQ(strip_reserved({kUnk, 4}), (TokenSeq{kUnk, 4}));  // UNK is content
}

TEST(Common, Fnv1aKnownValues) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Common, DerivedSeedsDifferPerComponent) {
  std::set<std::uint64_t> seen;
  for (auto name : {"synth", "discriminator", "sweep-subset-0", "sweep-subset-1"}) seen.insert(derive_seed(42, name));
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_EQ(derive_seed(42, "synth"), derive_seed(42, "synth"));
  EXPECT_NE(derive_seed(42, "synth"), derive_seed(43, "synth"));
}

TEST(Common, RngReproducibleAndInRange) {
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.index(7);
    EXPECT_EQ(x, b.index(7));
    EXPECT_LT(x, 7u);
    const double u = a.uniform();
    b.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Common, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  Rng rng(3);
  rng.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Common, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125}) EXPECT_EQ(std::stod(format_double(v)), v);
}
