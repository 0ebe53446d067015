#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "covprior/covprior.hpp"
#include "covprior/run_config.hpp"

namespace fs = std::filesystem;
using namespace covprior;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

// Thrown by a subcommand body to report a failed run that already printed
// its diagnostics.
struct RunFailed {};

class Output {
 public:
  explicit Output(const RunConfig& cfg) : dir_(cfg.out_dir) {
    json rec = cfg.resolved;
    rec["jobs"] = resolve_jobs(cfg.jobs);
    header_ = "# covprior " + cfg.subcommand + " " + rec.dump();
    fs::create_directories(dir_);
  }

  // Every file lives directly in the output directory and starts with the
  // configuration comment.
  std::ofstream open(const std::string& name) const {
    const fs::path p = dir_ / name;
    std::ofstream os(p);
    if (!os) throw Error("cannot write " + p.string());
    os << header_ << '\n';
    return os;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
  std::string header_;
};

std::vector<PriorSpec> specs_for(const RunConfig& c, int d, SpecMode mode) {
  if (!c.explicit_specs.empty()) return c.explicit_specs;
  std::vector<PriorSpec> out;
  for (FitPrior p : c.priors) out.push_back(default_spec(base_kind(p), d, mode));
  return out;
}

int run_prior_sample(const RunConfig& c) {
  const Output out(c);
  auto os = out.open("prior_samples.csv");
  os << "prior,draw";
  for (int i = 1; i <= c.d; ++i) os << ",sigma_" << i;
  for (int i = 1; i <= c.d; ++i)
    for (int j = i + 1; j <= c.d; ++j) os << ",rho_" << i << '_' << j;
  os << '\n';
  for (const PriorSpec& spec : specs_for(c, c.d, c.mode)) {
    RngStream rng(c.seed, stream_key("prior-sample|" + to_string(spec.kind())));
    for (int k = 0; k < c.draws; ++k) {
      const auto [sigma, dec] = prior_sample(spec, rng);
      os << to_string(spec.kind()) << ',' << k;
      for (int i = 0; i < c.d; ++i) os << ',' << format_double(dec.sigma(i));
      for (double r : dec.corr.upper_entries()) os << ',' << format_double(r);
      os << '\n';
    }
  }
  std::cout << "wrote " << out.path("prior_samples.csv") << '\n';
  return kOk;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path);
  return read_dataset_csv(in);
}

int run_fit(const RunConfig& c, const Dataset& data) {
  const Output out(c);
  struct Job {
    std::string name;
    FitReport report;
  };
  std::vector<Job> jobs;
  if (!c.explicit_specs.empty()) {
    for (const auto& spec : c.explicit_specs) {
      if (c.sampler == "gibbs") {
        const auto& p = std::get<IwParams>(spec.params());
        jobs.push_back({"iw", gibbs_iw_fit(p.nu, p.lambda, data, c.chains)});
      } else {
        jobs.push_back({to_string(spec.kind()), nuts_fit(spec, data, c.chains)});
      }
    }
  } else {
    for (FitPrior p : c.priors) {
      if (c.sampler == "gibbs") {
        const PriorSpec spec = default_spec(PriorKind::iw, data.d(), SpecMode::posterior_inference);
        const auto& hp = std::get<IwParams>(spec.params());
        jobs.push_back({"iw", gibbs_iw_fit(hp.nu, hp.lambda, data, c.chains)});
      } else {
        jobs.push_back({to_string(p), fit_with_prior(p, data, c.chains)});
      }
    }
  }
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const std::string stem = "fit_" + jobs[k].name + (c.explicit_specs.size() > 1 ? "_" + std::to_string(k) : "");
    {
      auto os = out.open(stem + ".json");
      os << to_json(jobs[k].report).dump(2) << '\n';
    }
    {
      auto os = out.open("draws_" + stem.substr(4) + ".csv");
      write_draws_csv(os, jobs[k].report.draws);
    }
    const auto& r = jobs[k].report;
    std::cout << jobs[k].name << ": max_rhat=" << format_double(r.max_rhat) << " divergences=" << r.divergences
              << " reruns=" << r.reruns_performed << '\n';
  }
  return kOk;
}

int run_simulate(const RunConfig& c) {
  const Output out(c);
  const auto results = run_grid(c.grid, c.chains, c.jobs);
  {
    auto os = out.open("simulation_results.csv");
    write_results_csv(os, results);
  }
  {
    auto os = out.open("bias_summary.csv");
    write_bias_csv(os, bias_summary(results));
  }
  int failed = 0;
  for (const auto& r : results) failed += r.ok() ? 0 : 1;
  std::cout << "cells=" << results.size() << " failed=" << failed << '\n';
  return failed == 0 ? kOk : kFailed;
}

CountTable load_table(const RunConfig& c) {
  if (c.synth) {
    RngStream rng(c.seed, stream_key("synth-counts"));
    return synth_counts(rng);
  }
  std::ifstream in(c.input_path);
  if (!in) throw ConfigError("cannot open counts file " + c.input_path);
  return load_counts(in);
}

int run_birds(const RunConfig& c, const CountTable& table) {
  const Output out(c);
  if (c.synth) {
    auto os = out.open("synth_counts.csv");
    write_counts(os, table);
  }
  std::vector<StudyRow> rows;
  for (StudyMode m : c.study_modes) {
    StudyOptions opt;
    opt.mode = m;
    opt.responses = c.responses;
    opt.priors = c.priors;
    opt.master_seed = c.seed;
    auto part = correlation_study(table, opt, c.chains, c.jobs);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  auto os = out.open("birds_correlations.csv");
  write_study_csv(os, rows);
  int failed = 0;
  for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
  std::cout << "rows=" << rows.size() << " failed=" << failed << '\n';
  return failed == 0 ? kOk : kFailed;
}

int run_check(const RunConfig& c) {
  const Output out(c);
  auto os = out.open("check_report.txt");
  bool ok = true;
  auto report = [&](bool pass, const std::string& line) {
    ok = ok && pass;
    const std::string s = std::string(pass ? "PASS " : "FAIL ") + line;
    std::cout << s << '\n';
    os << s << '\n';
  };
  const PriorKind kinds[] = {PriorKind::iw, PriorKind::siw, PriorKind::hiw_ht, PriorKind::bmm_mu};
  for (int d : {2, 10}) {
    for (PriorKind k : kinds) {
      const auto g = gradient_check(k, d, d == 2 ? 100 : 10, c.seed);
      report(g.passed, "gradient " + to_string(k) + " d=" + std::to_string(d) + " max_rel_error=" +
                           format_double(g.max_rel_error));
    }
  }
  ChainConfig pf;
  pf.num_chains = 4;
  pf.thin = 20;  // heavy prior tails mix slowly; thin so KS sees near-independent draws
  pf.jobs = c.jobs;
  const std::vector<int> dims = c.full ? std::vector<int>{2, 10} : std::vector<int>{2};
  for (int d : dims) {
    for (PriorKind k : kinds) {
      const auto r = pushforward_check(k, d, c.full ? 5000 : 2000, pf, c.seed);
      report(r.sigma1.p_value > 0.01 && r.rho12.p_value > 0.01,
             "push-forward " + to_string(k) + " d=" + std::to_string(d) + " ks_p(sigma_1)=" +
                 format_double(r.sigma1.p_value) + " ks_p(rho_1_2)=" + format_double(r.rho12.p_value));
    }
  }
  ChainConfig conj;
  conj.jobs = c.jobs;
  const int datasets = c.full ? 20 : 5;
  const auto nuts = conjugacy_check(datasets, 50, conj, c.seed, false);
  report(nuts.failures == 0, "conjugacy nuts datasets=" + std::to_string(datasets) +
                                 " max_abs_z=" + format_double(nuts.max_abs_z));
  const auto exact = conjugacy_check(datasets, 50, conj, c.seed, true);
  report(exact.failures == 0, "conjugacy exact datasets=" + std::to_string(datasets) +
                                  " max_abs_z=" + format_double(exact.max_abs_z));
  return ok ? kOk : kFailed;
}

void add_chain_flags(CLI::App* app, json& flags) {
  app->add_option_function<int>("--chains", [&flags](int v) { flags["chains"] = v; }, "number of chains");
  app->add_option_function<int>("--warmup", [&flags](int v) { flags["warmup"] = v; }, "warmup iterations per chain");
  app->add_option_function<int>("--iters", [&flags](int v) { flags["iters"] = v; }, "retained iterations per chain");
  app->add_option_function<double>("--target-accept", [&flags](double v) { flags["target_accept"] = v; }, "step-size adaptation target");
  app->add_option_function<int>("--max-depth", [&flags](int v) { flags["max_depth"] = v; }, "maximum tree depth");
  app->add_option_function<int>("--thin", [&flags](int v) { flags["thin"] = v; }, "keep every k-th draw");
}

void add_priors_flag(CLI::App* app, json& flags) {
  app->add_option_function<std::string>(
      "--priors,--prior",
      [&flags](const std::string& v) {
        json list = json::array();
        for (const auto& s : split_csv_line(v))
          if (!s.empty()) list.push_back(s);
        flags["priors"] = list;
      },
      "comma-separated list: iw,siw,hiw,bmm[,iwsc]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian covariance estimation under inverse-Wishart-type priors"};
  app.require_subcommand(1);
  std::string config_path;
  json flags = json::object();
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { flags["seed"] = v; }, "master seed");
    sub->add_option_function<int>("--jobs", [&](int v) { flags["jobs"] = v; }, "worker threads (default COVPRIOR_JOBS or 1)");
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { flags["out"] = v; }, "output directory");
  };

  auto* prior_sample_cmd = app.add_subcommand("prior-sample", "direct draws of (sigma, rho) from each prior");
  common(prior_sample_cmd);
  add_priors_flag(prior_sample_cmd, flags);
  prior_sample_cmd->add_option_function<int>("--d", [&](int v) { flags["d"] = v; }, "dimension");
  prior_sample_cmd->add_option_function<int>("--n", [&](int v) { flags["n"] = v; }, "draws per prior");
  prior_sample_cmd->add_option_function<std::string>("--mode", [&](const std::string& v) { flags["mode"] = v; },
                                                     "prior_study or posterior_inference hyperparameters");

  auto* fit_cmd = app.add_subcommand("fit", "posterior fit of one dataset (headerless CSV, mean zero)");
  common(fit_cmd);
  add_priors_flag(fit_cmd, flags);
  add_chain_flags(fit_cmd, flags);
  fit_cmd->add_option_function<std::string>("--data", [&](const std::string& v) { flags["data"] = v; }, "data CSV");
  fit_cmd->add_option_function<std::string>("--sampler", [&](const std::string& v) { flags["sampler"] = v; },
                                             "nuts or gibbs (exact, iw only)");

  auto* sim_cmd = app.add_subcommand("simulate", "factorial simulation study");
  common(sim_cmd);
  add_priors_flag(sim_cmd, flags);
  add_chain_flags(sim_cmd, flags);
  sim_cmd->add_option_function<int>("--d", [&](int v) { flags["d"] = v; }, "restrict to one dimension");
  sim_cmd->add_option_function<std::vector<int>>("--n", [&](const std::vector<int>& v) { flags["n"] = v; }, "sample sizes")->delimiter(',');
  sim_cmd->add_option_function<std::vector<double>>("--sigma", [&](const std::vector<double>& v) { flags["sigma"] = v; }, "scales")
      ->delimiter(',');
  sim_cmd->add_option_function<std::vector<double>>("--rho", [&](const std::vector<double>& v) { flags["rho"] = v; }, "correlations")
      ->delimiter(',');
  sim_cmd->add_option_function<int>("--replicates", [&](int v) { flags["replicates"] = v; }, "replicates per cell");
  sim_cmd->add_flag_function("--full", [&](std::int64_t) { flags["full"] = true; }, "include the d=10 grid");

  auto* birds_cmd = app.add_subcommand("birds", "species correlation study on yearly counts");
  common(birds_cmd);
  add_priors_flag(birds_cmd, flags);
  add_chain_flags(birds_cmd, flags);
  birds_cmd->add_option_function<std::string>("--input", [&](const std::string& v) { flags["input"] = v; }, "counts CSV");
  birds_cmd->add_flag_function("--synth", [&](std::int64_t) { flags["synth"] = true; }, "use the synthetic reference table");
  birds_cmd->add_option_function<std::string>("--mode", [&](const std::string& v) { flags["mode"] = v; },
                                              "pairwise, joint or both");
  birds_cmd->add_option_function<std::string>("--response", [&](const std::string& v) { flags["response"] = v; },
                                              "total, mean or both");

  auto* check_cmd = app.add_subcommand("check", "gradient, push-forward and conjugacy self-checks");
  common(check_cmd);
  check_cmd->add_flag_function("--full", [&](std::int64_t) { flags["full"] = true; }, "acceptance-size checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string sub = chosen->get_name();

  RunConfig cfg;
  Dataset data;
  CountTable table;
  try {
    json resolved = default_config(sub);
    if (!config_path.empty()) overlay_config(resolved, read_config_file(config_path), config_path);
    overlay_config(resolved, flags, "command line");
    cfg = make_run_config(sub, resolved);
    if (sub == "fit") data = load_dataset(cfg.data_path);
    if (sub == "birds") table = load_table(cfg);
  } catch (const Error& e) {
    std::cerr << "covprior " << sub << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "covprior " << sub << ": invalid configuration: " << e.what() << '\n';
    return kInvalid;
  }

  try {
    if (sub == "prior-sample") return run_prior_sample(cfg);
    if (sub == "fit") return run_fit(cfg, data);
    if (sub == "simulate") return run_simulate(cfg);
    if (sub == "birds") return run_birds(cfg, table);
    if (sub == "check") return run_check(cfg);
  } catch (const std::exception& e) {
    std::cerr << "covprior " << sub << ": " << e.what() << '\n';
    return kFailed;
  }
  return kFailed;
}
