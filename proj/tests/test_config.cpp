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

#include <cstdlib>

#include "das/config.hpp"

namespace das {
namespace {

TEST(Config, DefaultsValidateAndRoundTrip) {
  const RunConfig c;
  EXPECT_NO_THROW(validate_config(c));
  const std::string text = serialize_config(c);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, ParsesSectionsAndSpecialValues) {
  const auto c = parse_config(R"(seed = 2026
jobs = 2

[search]
beam = 4
k_rerank = 8
alpha = 0.5
length_penalty = 2
final_pick = gen

[selftrain]
tau_delta = 0.3
replay = true

[discriminator]
seed = 17
buckets = 1, 5,10
use_source = no

[sweep]
alpha = 0,0.5,1
)");
  EXPECT_EQ(c.seed, 2026u);
  EXPECT_EQ(c.jobs, 2);
  EXPECT_EQ(c.search.beam, 4);
  EXPECT_EQ(c.search.k_rerank, 8);
  EXPECT_DOUBLE_EQ(c.search.alpha, 0.5);
  EXPECT_EQ(c.search.rules.length_penalty, 2.0);
  EXPECT_EQ(c.search.pick, FinalPick::kBestGen);
  EXPECT_EQ(c.selftrain.tau_delta, 0.3);
  EXPECT_TRUE(c.selftrain.replay);
  EXPECT_EQ(c.discriminator.seed, 17u);
  EXPECT_EQ(c.discriminator.buckets, (std::vector<int>{1, 5, 10}));
  EXPECT_FALSE(c.discriminator.use_source);
  EXPECT_EQ(c.sweep.alpha, (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(c.disc_settings().hyper.seed, 17u);
  EXPECT_EQ(serialize_config(parse_config(serialize_config(c))), serialize_config(c));
}

TEST(Config, SetValueOverrides) {
  RunConfig c;
  set_config_value(c, "search.length_penalty", "1.5");
  EXPECT_EQ(c.search.rules.length_penalty, 1.5);
  set_config_value(c, "search.length_penalty", "off");
  EXPECT_FALSE(c.search.rules.length_penalty.has_value());
  set_config_value(c, "selftrain.tau_delta", "auto");
  EXPECT_FALSE(c.selftrain.tau_delta.has_value());
  set_config_value(c, "discriminator.seed", "auto");
  EXPECT_EQ(c.disc_settings().hyper.seed, c.component_seed("discriminator"));
  EXPECT_THROW(set_config_value(c, "search.nope", "1"), ValidationError);
  EXPECT_THROW(set_config_value(c, "search.beam", "five"), ValidationError);
  EXPECT_THROW(set_config_value(c, "search.beam", "5x"), ValidationError);
  EXPECT_THROW(set_config_value(c, "search.final_pick", "best"), ValidationError);
  EXPECT_THROW(set_config_value(c, "selftrain.replay", "maybe"), ValidationError);
  EXPECT_THROW(set_config_value(c, "sweep.alpha", "1,x"), ValidationError);
}

TEST(Config, ValidationRejectsBadValues) {
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"search.beam", "0"},          {"search.k_rerank", "2"},           {"search.alpha", "-1"},
      {"search.t_max", "0"},         {"generator.kappa", "0"},           {"generator.lambda_copy", "1.5"},
      {"discriminator.epochs", "0"}, {"discriminator.learning_rate", "0"}, {"selftrain.tau_acc", "2"},
      {"sweep.alpha", "-1"},         {"sweep.repetitions", "0"},         {"jobs", "0"},
      {"synth.n_test", "0"},         {"discriminator.buckets", "0,5"},
  };
  for (const auto& [key, value] : bad) {
    RunConfig c;
    set_config_value(c, key, value);
    EXPECT_THROW(validate_config(c), ValidationError) << key << "=" << value;
  }
  EXPECT_THROW(parse_config("[search\nbeam=1\n"), ValidationError);
  EXPECT_THROW(parse_config("[search]\nbogus = 1\n"), ValidationError);
}

TEST(Config, ComponentSeedsDiffer) {
  RunConfig c;
  c.seed = 5;
  EXPECT_NE(c.component_seed("synth"), c.component_seed("discriminator"));
  RunConfig d;
  d.seed = 6;
  EXPECT_NE(c.component_seed("synth"), d.component_seed("synth"));
}

TEST(Config, EnvironmentOverrides) {
  RunConfig c;
  ::setenv("DAS_OUT_DIR", "/tmp/elsewhere", 1);
  ::setenv("DAS_JOBS", "3", 1);
  apply_env_overrides(c);
  EXPECT_EQ(c.paths.out_dir, "/tmp/elsewhere");
  EXPECT_EQ(c.jobs, 3);
  ::setenv("DAS_JOBS", "many", 1);
  EXPECT_THROW(apply_env_overrides(c), ValidationError);
  ::unsetenv("DAS_OUT_DIR");
  ::unsetenv("DAS_JOBS");
}

}  // namespace
}  // namespace das
