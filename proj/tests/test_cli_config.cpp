#include <gtest/gtest.h>

#include <cstdlib>

#include "covprior/concurrency.hpp"
#include "covprior/run_config.hpp"

using namespace covprior;
using nlohmann::json;

namespace {

RunConfig resolve(const std::string& sub, const json& file, const json& flags) {
  json j = default_config(sub);
  overlay_config(j, file, "config");
  overlay_config(j, flags, "command line");
  return make_run_config(sub, j);
}

}  // namespace

TEST(Config, DefaultsForEverySubcommand) {
  for (const auto& sub : subcommands()) {
    const json j = default_config(sub);
    EXPECT_EQ(j.at("seed"), 20140601);
    if (sub == "fit" || sub == "birds") continue;  // need an input
    EXPECT_NO_THROW(make_run_config(sub, j)) << sub;
  }
  const RunConfig fit = resolve("fit", {{"data", "x.csv"}}, json::object());
  EXPECT_EQ(fit.chains.num_chains, 3);
  EXPECT_EQ(fit.chains.warmup_iters, 1000);
  EXPECT_EQ(fit.chains.sample_iters, 1000);
  EXPECT_EQ(fit.chains.target_accept, 0.8);
  EXPECT_EQ(fit.priors.size(), 4u);
}

TEST(Config, FlagsOverrideFileOverridesDefaults) {
  const RunConfig c = resolve("prior-sample", {{"seed", 5}, {"n", 200}, {"d", 3}}, {{"seed", 9}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.draws, 200);
  EXPECT_EQ(c.d, 3);
  EXPECT_EQ(c.out_dir, "covprior_out");
  EXPECT_EQ(c.resolved.at("seed"), 9);
}

TEST(Config, ChainSeedAndJobsFollowTopLevel) {
  const RunConfig c = resolve("fit", {{"data", "a.csv"}, {"jobs", 2}}, {{"seed", 11}});
  EXPECT_EQ(c.chains.seed, 11u);
  EXPECT_EQ(c.chains.jobs, 2);
}

TEST(Config, UnknownKeysRejected) {
  json j = default_config("check");
  EXPECT_THROW(overlay_config(j, {{"chains", 4}}, "config"), ConfigError);
  EXPECT_THROW(overlay_config(j, json::array(), "config"), ConfigError);
  EXPECT_THROW(default_config("train"), ConfigError);
}

TEST(Config, ValidationErrors) {
  EXPECT_THROW(resolve("fit", json::object(), json::object()), ConfigError);
  EXPECT_THROW(resolve("fit", {{"data", "a"}, {"sampler", "gibbs"}, {"priors", {"iw", "bmm"}}}, json::object()), ConfigError);
  EXPECT_NO_THROW(resolve("fit", {{"data", "a"}, {"sampler", "gibbs"}, {"priors", {"iw"}}}, json::object()));
  EXPECT_THROW(resolve("prior-sample", {{"priors", {"iwsc"}}}, json::object()), ConfigError);
  EXPECT_THROW(resolve("prior-sample", {{"d", 1}}, json::object()), ConfigError);
  EXPECT_THROW(resolve("prior-sample", {{"n", "ten"}}, json::object()), ConfigError);
  EXPECT_THROW(resolve("birds", json::object(), json::object()), ConfigError);
  EXPECT_THROW(resolve("birds", {{"synth", true}, {"input", "x.csv"}}, json::object()), ConfigError);
  EXPECT_NO_THROW(resolve("birds", {{"synth", true}}, json::object()));
  EXPECT_THROW(resolve("simulate", {{"warmup", -1}}, json::object()), ConfigError);
  EXPECT_THROW(resolve("simulate", {{"jobs", -1}}, json::object()), ConfigError);
}

TEST(Config, SimulateGridSelection) {
  const RunConfig all = resolve("simulate", json::object(), json::object());
  ASSERT_EQ(all.grid.dims.size(), 1u);
  EXPECT_EQ(all.grid.dims[0].n, (std::vector<int>{10, 50, 250}));
  const RunConfig full = resolve("simulate", json::object(), {{"full", true}});
  EXPECT_EQ(full.grid.dims.size(), 2u);
  const RunConfig cell = resolve("simulate", {{"d", 2}, {"n", {10}}, {"sigma", {0.01}}, {"rho", {0.99}}}, {{"priors", {"iw", "bmm"}}});
  ASSERT_EQ(cell.grid.dims.size(), 1u);
  EXPECT_EQ(cell.grid.dims[0].replicates, 5);
  EXPECT_EQ(cell.grid.dims[0].sigma, (std::vector<double>{0.01}));
  EXPECT_EQ(cell.grid.priors.size(), 2u);
  EXPECT_EQ(cell.grid.master_seed, cell.seed);
}

TEST(Config, JobsFromEnvironment) {
  ::setenv("COVPRIOR_JOBS", "3", 1);
  EXPECT_EQ(resolve_jobs(0), 3);
  EXPECT_EQ(resolve_jobs(5), 5);
  ::setenv("COVPRIOR_JOBS", "junk", 1);
  EXPECT_EQ(resolve_jobs(0), 1);
  ::unsetenv("COVPRIOR_JOBS");
  EXPECT_EQ(resolve_jobs(0), 1);
}
