#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "covprior/analysis.hpp"
#include "covprior/birds.hpp"
#include "covprior/error.hpp"
#include "covprior/priors.hpp"
#include "covprior/samplers.hpp"
#include "covprior/simulation.hpp"
#include "json.hpp"

// Resolved configuration of one CLI invocation. Resolution order: built-in
// defaults, then the JSON config file, then command-line flags.

namespace covprior {

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"prior-sample", "fit", "simulate", "birds", "check"};
  return s;
}

/// Every key a subcommand accepts, with its default value.
inline nlohmann::json default_config(const std::string& sub) {
  using nlohmann::json;
  json j = {{"seed", 20140601}, {"jobs", 0}, {"out", "covprior_out"}};
  const json chains = {{"chains", 3}, {"warmup", 1000}, {"iters", 1000}, {"target_accept", 0.8}, {"max_depth", 10},
                       {"thin", 1}};
  const json four = {"iw", "siw", "hiw", "bmm"};
  if (sub == "prior-sample") {
    j.update({{"priors", four}, {"prior_specs", json::array()}, {"d", 2}, {"n", 1000}, {"mode", "prior_study"}});
  } else if (sub == "fit") {
    j.update(chains);
    j.update({{"data", ""}, {"priors", four}, {"prior_specs", json::array()}, {"sampler", "nuts"}});
  } else if (sub == "simulate") {
    j.update(chains);
    j.update({{"d", nullptr}, {"n", json::array()}, {"sigma", json::array()}, {"rho", json::array()}, {"priors", four},
              {"replicates", nullptr}, {"full", false}});
  } else if (sub == "birds") {
    j.update(chains);
    j.update({{"input", ""}, {"synth", false}, {"mode", "pairwise"}, {"response", "both"},
              {"priors", {"iw", "siw", "hiw", "bmm", "iwsc"}}});
  } else if (sub == "check") {
    j.update({{"full", false}});
  } else {
    throw ConfigError("unknown subcommand '" + sub + "'");
  }
  return j;
}

/// Copies `over` onto `base`, rejecting keys `base` does not have.
inline void overlay_config(nlohmann::json& base, const nlohmann::json& over, const std::string& source) {
  if (!over.is_object()) throw ConfigError(source + ": expected a JSON object");
  for (const auto& [key, value] : over.items()) {
    if (!base.contains(key)) throw ConfigError(source + ": unknown key '" + key + "'");
    base[key] = value;
  }
}

inline nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

struct RunConfig {
  std::string subcommand;
  nlohmann::json resolved;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string out_dir;
  ChainConfig chains;
  std::vector<FitPrior> priors;
  std::vector<PriorSpec> explicit_specs;  // replaces `priors` when nonempty (prior-sample, fit)
  int d = 2;
  int draws = 0;
  SpecMode mode = SpecMode::prior_study;
  std::string data_path;
  std::string sampler;
  ScenarioGrid grid;
  std::string input_path;
  bool synth = false;
  std::vector<StudyMode> study_modes;
  std::vector<Response> responses;
  bool full = false;
};

namespace detail {

template <class V>
V config_get(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + j.at(key).dump());
  }
}

inline std::vector<FitPrior> config_priors(const nlohmann::json& j, bool allow_iwsc) {
  std::vector<FitPrior> out;
  const auto names = config_get<std::vector<std::string>>(j, "priors");
  for (const auto& s : names) {
    const FitPrior p = parse_fit_prior(s);
    if (p == FitPrior::iwsc && !allow_iwsc) throw ConfigError("iwsc is only available for data fits");
    out.push_back(p);
  }
  if (out.empty()) throw ConfigError("priors must be nonempty");
  return out;
}

}  // namespace detail

/// Validates a resolved configuration and converts it to typed fields.
inline RunConfig make_run_config(const std::string& sub, const nlohmann::json& resolved) {
  using detail::config_get;
  RunConfig c;
  c.subcommand = sub;
  c.resolved = resolved;
  c.seed = config_get<std::uint64_t>(resolved, "seed");
  c.jobs = config_get<int>(resolved, "jobs");
  if (c.jobs < 0) throw ConfigError("jobs must be >= 0");
  c.out_dir = config_get<std::string>(resolved, "out");
  if (c.out_dir.empty()) throw ConfigError("out must be nonempty");
  if (resolved.contains("chains")) {
    c.chains.num_chains = config_get<int>(resolved, "chains");
    c.chains.warmup_iters = config_get<int>(resolved, "warmup");
    c.chains.sample_iters = config_get<int>(resolved, "iters");
    c.chains.target_accept = config_get<double>(resolved, "target_accept");
    c.chains.max_tree_depth = config_get<int>(resolved, "max_depth");
    c.chains.thin = config_get<int>(resolved, "thin");
    c.chains.seed = c.seed;
    c.chains.jobs = c.jobs;
    c.chains.validate();
  }
  auto read_specs = [&](int default_dim) {
    for (const auto& s : config_get<nlohmann::json>(resolved, "prior_specs")) {
      try {
        c.explicit_specs.push_back(prior_from_json(s, default_dim));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("prior_specs: ") + e.what());
      }
    }
  };

  if (sub == "prior-sample") {
    c.d = config_get<int>(resolved, "d");
    if (c.d < 2) throw ConfigError("d must be >= 2");
    c.draws = config_get<int>(resolved, "n");
    if (c.draws < 1) throw ConfigError("n must be >= 1");
    const auto mode = config_get<std::string>(resolved, "mode");
    if (mode == "prior_study") c.mode = SpecMode::prior_study;
    else if (mode == "posterior_inference") c.mode = SpecMode::posterior_inference;
    else throw ConfigError("mode must be prior_study or posterior_inference");
    c.priors = detail::config_priors(resolved, false);
    read_specs(c.d);
    for (const auto& s : c.explicit_specs)
      if (s.dim() != c.d) throw ConfigError("prior_specs dimension differs from d");
  } else if (sub == "fit") {
    c.data_path = config_get<std::string>(resolved, "data");
    if (c.data_path.empty()) throw ConfigError("fit needs --data");
    c.sampler = config_get<std::string>(resolved, "sampler");
    if (c.sampler != "nuts" && c.sampler != "gibbs") throw ConfigError("sampler must be nuts or gibbs");
    c.priors = detail::config_priors(resolved, true);
    read_specs(2);
    if (c.sampler == "gibbs") {
      for (auto p : c.priors)
        if (p != FitPrior::iw) throw ConfigError("the exact sampler supports only the iw prior");
      for (const auto& s : c.explicit_specs)
        if (s.kind() != PriorKind::iw) throw ConfigError("the exact sampler supports only the iw prior");
    }
  } else if (sub == "simulate") {
    c.full = config_get<bool>(resolved, "full");
    c.priors = detail::config_priors(resolved, true);
    ScenarioGrid g;
    if (resolved.at("d").is_null()) {
      g = ScenarioGrid::desk_default(c.full);
    } else {
      const int d = config_get<int>(resolved, "d");
      if (d == 2) g.dims.push_back(ScenarioGrid::table_d2());
      else if (d == 10) g.dims.push_back(ScenarioGrid::table_d10(c.full ? 5 : 2));
      else g.dims.push_back({d, {50}, {1.0}, {0.0}, 5});
    }
    const auto ns = config_get<std::vector<int>>(resolved, "n");
    const auto sigmas = config_get<std::vector<double>>(resolved, "sigma");
    const auto rhos = config_get<std::vector<double>>(resolved, "rho");
    for (auto& dg : g.dims) {
      if (!ns.empty()) dg.n = ns;
      if (!sigmas.empty()) dg.sigma = sigmas;
      if (!rhos.empty()) dg.rho = rhos;
      if (!resolved.at("replicates").is_null()) dg.replicates = config_get<int>(resolved, "replicates");
    }
    g.priors = c.priors;
    g.master_seed = c.seed;
    g.validate();
    c.grid = g;
  } else if (sub == "birds") {
    c.input_path = config_get<std::string>(resolved, "input");
    c.synth = config_get<bool>(resolved, "synth");
    if (c.synth == !c.input_path.empty()) throw ConfigError("birds needs exactly one of --input or --synth");
    const auto mode = config_get<std::string>(resolved, "mode");
    if (mode == "pairwise" || mode == "both") c.study_modes.push_back(StudyMode::pairwise);
    if (mode == "joint" || mode == "both") c.study_modes.push_back(StudyMode::joint);
    if (c.study_modes.empty()) throw ConfigError("mode must be pairwise, joint or both");
    const auto resp = config_get<std::string>(resolved, "response");
    if (resp == "total" || resp == "both") c.responses.push_back(Response::total);
    if (resp == "mean" || resp == "both") c.responses.push_back(Response::mean);
    if (c.responses.empty()) throw ConfigError("response must be total, mean or both");
    c.priors = detail::config_priors(resolved, true);
  } else if (sub == "check") {
    c.full = config_get<bool>(resolved, "full");
  }
  return c;
}

}  // namespace covprior
