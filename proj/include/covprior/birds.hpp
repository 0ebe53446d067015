#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "covprior/analysis.hpp"
#include "covprior/concurrency.hpp"
#include "covprior/diagnostics.hpp"
#include "covprior/error.hpp"
#include "covprior/format.hpp"
#include "covprior/likelihood.hpp"
#include "covprior/rng.hpp"
#include "covprior/samplers.hpp"

namespace covprior {

struct CountTable {
  std::vector<int> years;
  std::vector<std::string> species;
  Eigen::MatrixXd totals;            // years x species
  Eigen::VectorXd surveys_per_year;  // one per year

  int num_years() const { return static_cast<int>(years.size()); }
  int num_species() const { return static_cast<int>(species.size()); }
};

inline constexpr double kDefaultSurveys = 500.0;

namespace detail {
inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}
}  // namespace detail

/// Header: year, species..., optionally a "surveys" column anywhere after
/// year. Blank lines and lines starting with '#' are skipped.
inline CountTable load_counts(std::istream& is) {
  CountTable t;
  std::string line;
  int lineno = 0;
  int surveys_col = -1;
  std::vector<int> species_cols;
  bool header_seen = false;
  std::vector<std::vector<double>> rows;
  std::vector<double> surveys;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto tl = trim(line);
    if (tl.empty() || tl.front() == '#') continue;
    const auto cells = split_csv_line(tl);
    if (!header_seen) {
      header_seen = true;
      width = cells.size();
      if (width < 2 || detail::lower(cells[0]) != "year") throw ParseError("header must start with 'year'", lineno);
      for (std::size_t c = 1; c < cells.size(); ++c) {
        if (detail::lower(cells[c]) == "surveys") {
          if (surveys_col >= 0) throw ParseError("duplicate surveys column", lineno);
          surveys_col = static_cast<int>(c);
        } else {
          if (cells[c].empty()) throw ParseError("empty species name", lineno);
          species_cols.push_back(static_cast<int>(c));
          t.species.push_back(cells[c]);
        }
      }
      if (t.species.empty()) throw ParseError("no species columns", lineno);
      continue;
    }
    if (cells.size() != width) throw ParseError("expected " + std::to_string(width) + " fields", lineno);
    const double year = parse_double(cells[0], lineno);
    if (year != std::floor(year)) throw ParseError("year must be an integer", lineno);
    t.years.push_back(static_cast<int>(year));
    std::vector<double> row;
    for (int c : species_cols) {
      const double v = parse_double(cells[static_cast<std::size_t>(c)], lineno);
      if (!std::isfinite(v)) throw ParseError("count must be finite", lineno);
      if (v < 0.0) throw NegativeCount("negative count at line " + std::to_string(lineno));
      row.push_back(v);
    }
    rows.push_back(std::move(row));
    if (surveys_col >= 0) {
      const double s = parse_double(cells[static_cast<std::size_t>(surveys_col)], lineno);
      if (!(s > 0.0) || !std::isfinite(s)) throw ParseError("surveys must be positive", lineno);
      surveys.push_back(s);
    } else {
      surveys.push_back(kDefaultSurveys);
    }
  }
  if (!header_seen) throw ParseError("missing header", lineno);
  if (rows.empty()) throw ParseError("no data rows", lineno);
  t.totals.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.species.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.totals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  t.surveys_per_year = Eigen::Map<const Eigen::VectorXd>(surveys.data(), static_cast<Eigen::Index>(surveys.size()));
  return t;
}

inline void write_counts(std::ostream& os, const CountTable& t) {
  os << "year";
  for (const auto& s : t.species) os << ',' << s;
  os << ",surveys\n";
  for (int y = 0; y < t.num_years(); ++y) {
    os << t.years[static_cast<std::size_t>(y)];
    for (int s = 0; s < t.num_species(); ++s) os << ',' << format_double(t.totals(y, s));
    os << ',' << format_double(t.surveys_per_year(y)) << '\n';
  }
}

struct Responses {
  Eigen::MatrixXd total;
  Eigen::MatrixXd mean;
};

inline Responses responses(const CountTable& t) {
  Responses r{t.totals, t.totals};
  for (Eigen::Index y = 0; y < r.mean.rows(); ++y) r.mean.row(y) /= t.surveys_per_year(y);
  return r;
}

struct SpeciesSummary {
  const char* name;
  double total_mean;
  double total_sd;
};

/// Total-count summaries of the ten most abundant species, 1995-2013.
inline const std::vector<SpeciesSummary>& reference_species() {
  static const std::vector<SpeciesSummary> s = {
      {"Ovenbird", 1098, 244},           {"White-throated Sparrow", 725, 135}, {"Nashville Warbler", 722, 214},
      {"Red-eyed Vireo", 672, 145},      {"Chestnut-sided Warbler", 432, 133}, {"Veery", 293, 65},
      {"Blue Jay", 267, 85},             {"American Robin", 225, 84},         {"Hermit Thrush", 222, 67},
      {"Least Flycatcher", 136, 35}};
  return s;
}

inline constexpr double kSynthCorrelation = 0.4;

/// Synthetic stand-in for the reference counts: 19 years (1995-2013) x 10
/// species. Latent normal scores with equicorrelation 0.4 are moment-matched
/// per column (sample mean 0, sample SD 1) so each species' sample mean and
/// SD hit the reference values before rounding and flooring at zero.
/// Surveys per year are round(N(500, 10^2)).
inline CountTable synth_counts(RngStream& rng) {
  const auto& ref = reference_species();
  const int years = 19;
  const int k = static_cast<int>(ref.size());
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(k, k, kSynthCorrelation);
  corr.diagonal().setOnes();
  const Eigen::MatrixXd chol = cholesky(corr);
  Eigen::MatrixXd z(years, k);
  Eigen::VectorXd e(k);
  for (int y = 0; y < years; ++y) {
    for (int s = 0; s < k; ++s) e(s) = rng.normal();
    z.row(y) = (chol * e).transpose();
  }
  const Eigen::VectorXd sd = column_sd(z);
  CountTable t;
  t.totals.resize(years, k);
  for (int s = 0; s < k; ++s) {
    const double m = z.col(s).mean();
    for (int y = 0; y < years; ++y) {
      const double v = ref[static_cast<std::size_t>(s)].total_mean + ref[static_cast<std::size_t>(s)].total_sd * (z(y, s) - m) / sd(s);
      t.totals(y, s) = std::max(0.0, std::round(v));
    }
    t.species.emplace_back(ref[static_cast<std::size_t>(s)].name);
  }
  t.surveys_per_year.resize(years);
  for (int y = 0; y < years; ++y) {
    t.years.push_back(1995 + y);
    t.surveys_per_year(y) = std::round(kDefaultSurveys + 10.0 * rng.normal());
  }
  return t;
}

enum class StudyMode { pairwise, joint };
enum class Response { total, mean };

inline std::string to_string(StudyMode m) { return m == StudyMode::pairwise ? "pairwise" : "joint"; }
inline std::string to_string(Response r) { return r == Response::total ? "total" : "mean"; }

struct StudyRow {
  Response response;
  StudyMode mode;
  std::string species_a;
  std::string species_b;
  FitPrior prior;
  double pearson_r = 0.0;
  double post_mean_rho = std::numeric_limits<double>::quiet_NaN();
  double post_q025 = std::numeric_limits<double>::quiet_NaN();
  double post_q975 = std::numeric_limits<double>::quiet_NaN();
  double rhat_max = std::numeric_limits<double>::quiet_NaN();
  int divergences = 0;
  std::size_t draws = 0;
  std::string error;
};

struct StudyOptions {
  StudyMode mode = StudyMode::pairwise;
  std::vector<Response> responses = {Response::total, Response::mean};
  std::vector<FitPrior> priors = all_fit_priors();
  std::uint64_t master_seed = 20140601;
};

/// Fits every (response, prior) for each species pair (pairwise) or once on
/// all species (joint). Columns are centered before fitting. Rows are ordered
/// by response, pair (a < b), prior.
inline std::vector<StudyRow> correlation_study(const CountTable& table, const StudyOptions& opt, const ChainConfig& cfg,
                                               int jobs = 0) {
  cfg.validate();
  if (opt.priors.empty() || opt.responses.empty()) throw ConfigError("study needs priors and responses");
  const int k = table.num_species();
  if (k < 2) throw DomainError("need at least two species");
  const Responses resp = responses(table);

  struct Task {
    Response response;
    FitPrior prior;
    int a;  // -1 for the joint fit
    int b;
  };
  std::vector<Task> tasks;
  for (Response r : opt.responses) {
    if (opt.mode == StudyMode::pairwise) {
      for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
          for (FitPrior p : opt.priors) tasks.push_back({r, p, a, b});
    } else {
      for (FitPrior p : opt.priors) tasks.push_back({r, p, -1, -1});
    }
  }

  const int workers = resolve_jobs(jobs);
  ChainConfig inner = cfg;
  if (workers > 1) inner.jobs = 1;
  std::vector<std::vector<StudyRow>> out(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const Task& task = tasks[i];
    const Eigen::MatrixXd& y = task.response == Response::total ? resp.total : resp.mean;
    std::vector<int> cols;
    if (task.a >= 0) {
      cols = {task.a, task.b};
    } else {
      for (int c = 0; c < k; ++c) cols.push_back(c);
    }
    Eigen::MatrixXd sub(y.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = y.col(cols[c]);

    std::vector<StudyRow>& rows = out[i];
    for (std::size_t u = 0; u < cols.size(); ++u) {
      for (std::size_t v = u + 1; v < cols.size(); ++v) {
        StudyRow row;
        row.response = task.response;
        row.mode = opt.mode;
        row.species_a = table.species[static_cast<std::size_t>(cols[u])];
        row.species_b = table.species[static_cast<std::size_t>(cols[v])];
        row.prior = task.prior;
        const Eigen::VectorXd xa = sub.col(static_cast<Eigen::Index>(u));
        const Eigen::VectorXd xb = sub.col(static_cast<Eigen::Index>(v));
        try {
          row.pearson_r = pearson(std::span<const double>(xa.data(), xa.size()), std::span<const double>(xb.data(), xb.size()));
        } catch (const std::exception& e) {
          row.pearson_r = std::numeric_limits<double>::quiet_NaN();
          row.error = e.what();
        }
        rows.push_back(std::move(row));
      }
    }
    try {
      ChainConfig local = inner;
      std::string label = "birds|" + to_string(task.response) + "|" + to_string(opt.mode) + "|" + to_string(task.prior);
      for (int c : cols) label += "|" + std::to_string(c);
      RngStream s(opt.master_seed, stream_key(label));
      local.seed = s.next_u64();
      const FitReport fit = fit_with_prior(task.prior, center(Dataset(sub)), local);
      std::size_t idx = 0;
      for (std::size_t u = 0; u < cols.size(); ++u) {
        for (std::size_t v = u + 1; v < cols.size(); ++v, ++idx) {
          const auto& q = fit.at("rho_" + std::to_string(u + 1) + "_" + std::to_string(v + 1));
          StudyRow& row = rows[idx];
          row.post_mean_rho = q.mean;
          row.post_q025 = q.q025;
          row.post_q975 = q.q975;
          row.rhat_max = fit.max_rhat;
          row.divergences = fit.divergences;
          row.draws = fit.draws.total();
        }
      }
    } catch (const std::exception& e) {
      for (auto& row : rows)
        if (row.error.empty()) row.error = e.what();
    }
  });

  std::vector<StudyRow> flat;
  for (auto& v : out)
    for (auto& r : v) flat.push_back(std::move(r));
  if (opt.mode == StudyMode::joint) {
    // Joint tasks produce all pairs per prior; reorder to response, pair, prior.
    std::stable_sort(flat.begin(), flat.end(), [&](const StudyRow& x, const StudyRow& y) {
      auto pos = [&](const std::string& s) {
        return std::find(table.species.begin(), table.species.end(), s) - table.species.begin();
      };
      return std::make_tuple(static_cast<int>(x.response), pos(x.species_a), pos(x.species_b)) <
             std::make_tuple(static_cast<int>(y.response), pos(y.species_a), pos(y.species_b));
    });
  }
  return flat;
}

inline void write_study_csv(std::ostream& os, const std::vector<StudyRow>& rows) {
  os << "response,mode,species_a,species_b,prior,pearson_r,post_mean_rho,post_q025,post_q975,rhat_max\n";
  for (const auto& r : rows) {
    os << to_string(r.response) << ',' << to_string(r.mode) << ',' << r.species_a << ',' << r.species_b << ','
       << to_string(r.prior) << ',' << format_double(r.pearson_r) << ',' << format_double(r.post_mean_rho) << ','
       << format_double(r.post_q025) << ',' << format_double(r.post_q975) << ',' << format_double(r.rhat_max) << '\n';
  }
  for (const auto& r : rows) {
    if (r.error.empty()) continue;
    os << "# failed " << to_string(r.response) << ' ' << r.species_a << '/' << r.species_b << ' ' << to_string(r.prior)
       << ": " << r.error << '\n';
  }
}

}  // namespace covprior
