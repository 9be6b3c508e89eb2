// hbcm: command-line front end for data generation, fitting and benchmarks.
// Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure.

#include "hbcm/bench.hpp"
#include "hbcm/io.hpp"
#include "hbcm/metrics.hpp"
#include "hbcm/model.hpp"
#include "hbcm/simulate.hpp"
#include "hbcm/spectral.hpp"
#include "hbcm/vem.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace hbcm;
using nlohmann::json;

namespace {

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<Cell> parse_cells(const std::vector<std::string>& specs) {
  if (specs.empty() || (specs.size() == 1 && specs[0] == "all")) return table1_cells();
  std::vector<Cell> cells;
  for (const std::string& s : specs) {
    Cell c{};
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d,%d,%d%c", &c.n, &c.p, &c.k, &tail) != 3 || c.n < 2 ||
        c.p < 2 || c.k < 2) {
      throw ValidationError("bad cell '" + s + "' (expected N,P,K)");
    }
    cells.push_back(c);
  }
  return cells;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
}

void add_spectral_flags(CLI::App* cmd, SpectralOptions& opts) {
  cmd->add_flag("--row-normalize", opts.row_normalize,
                "Scale embedded rows to unit length before k-means");
  cmd->add_flag_callback("--laplacian", [&opts] { opts.laplacian = Laplacian::Normalized; },
                         "Use the normalized affinity D^-1/2 K D^-1/2");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block covariance clustering of features: simulate, fit, benchmark"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Draw a synthetic data set");
  int g_n = 0, g_p = 0, g_k = 0;
  std::uint64_t g_seed = 1;
  std::string g_out, g_truth, g_noise = "gaussian";
  double g_dof = 0.0, g_sigma = 0.0;
  bool g_table1 = false;
  gen->add_option("--n", g_n, "Samples (rows)")->required()->check(CLI::PositiveNumber);
  gen->add_option("--p", g_p, "Features (columns)")->required()->check(CLI::PositiveNumber);
  gen->add_option("--k", g_k, "Communities")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", g_seed, "Random seed");
  gen->add_option("--out", g_out, "Data CSV")->required();
  gen->add_option("--truth", g_truth, "Ground-truth JSON")->required();
  gen->add_option("--noise", g_noise, "gaussian | t | t-std")
      ->check(CLI::IsMember({"gaussian", "t", "t-std"}));
  gen->add_option("--dof", g_dof, "Degrees of freedom for t noise (> 2)");
  auto* sigma_opt = gen->add_option(
      "--sigma", g_sigma, "Homogeneous system: lambda 1, omega 1 / 0.5, noise sd S");
  auto* table1_opt = gen->add_flag("--table1", g_table1,
                                   "Benchmark system: lambda ~ N(0,1), sigma2 ~ chi2(2) + 1 (default)");
  sigma_opt->excludes(table1_opt);

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit the variational EM estimator");
  std::string f_data, f_out;
  std::vector<std::string> f_init{"spectral"};
  int f_k = 0;
  std::uint64_t f_seed = 1;
  FitOptions f_opts;
  fitc->add_option("--data", f_data, "Data CSV")->required();
  fitc->add_option("--k", f_k, "Communities")->required();
  fitc->add_option("--seed", f_seed, "Random seed");
  fitc->add_option("--out", f_out, "Fit JSON")->required();
  fitc->add_option("--init", f_init, "spectral | labels FILE")->expected(1, 2);
  fitc->add_option("--max-iters", f_opts.max_iters, "Iteration cap")->capture_default_str();
  fitc->add_option("--tol", f_opts.elbo_rel_tol, "Relative ELBO change to stop")
      ->capture_default_str();
  fitc->add_flag("--paper-literal-init", f_opts.paper_literal_init,
                 "Initial label mass drawn from U(0, 0.5) instead of U(0.5, 1)");
  add_spectral_flags(fitc, f_opts.spectral);

  // spectral
  auto* spec = app.add_subcommand("spectral", "Spectral clustering of the features");
  std::string s_data, s_out;
  int s_k = 0;
  std::uint64_t s_seed = 1;
  SpectralOptions s_opts;
  spec->add_option("--data", s_data, "Data CSV")->required();
  spec->add_option("--k", s_k, "Communities")->required();
  spec->add_option("--seed", s_seed, "Random seed");
  spec->add_option("--out", s_out, "Labels JSON")->required();
  add_spectral_flags(spec, s_opts);

  // cv
  auto* cvc = app.add_subcommand("cv", "Choose K by split-half agreement");
  std::string c_data, c_out, c_method = "hbcm";
  int c_kmin = 2, c_kmax = 9, c_m = 10, c_threads = 0;
  std::uint64_t c_seed = 1;
  FitOptions c_opts;
  cvc->add_option("--data", c_data, "Data CSV")->required();
  cvc->add_option("--k-min", c_kmin, "Smallest K")->capture_default_str();
  cvc->add_option("--k-max", c_kmax, "Largest K")->capture_default_str();
  cvc->add_option("--m", c_m, "Random splits")->capture_default_str();
  cvc->add_option("--seed", c_seed, "Random seed");
  cvc->add_option("--out", c_out, "Report JSON")->required();
  cvc->add_option("--method", c_method, "hbcm | spectral")
      ->check(CLI::IsMember({"hbcm", "spectral"}));
  cvc->add_option("--threads", c_threads, "Worker threads (0: all cores)");
  add_spectral_flags(cvc, c_opts.spectral);

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark grid and parameter sweeps");
  bench->require_subcommand(1);
  auto* t1 = bench->add_subcommand("table1", "(N, P, K) benchmark grid");
  std::vector<std::string> b_cells{"all"};
  int b_reps = 30, b_threads = 0;
  std::uint64_t b_seed = 1;
  std::string b_out, b_summary;
  bool b_timing = false;
  FitOptions b_opts;
  t1->add_option("--cells", b_cells, "all, or one or more N,P,K triples");
  t1->add_option("--reps", b_reps, "Replicates per cell")->capture_default_str();
  t1->add_option("--seed", b_seed, "Master seed");
  t1->add_option("--out", b_out, "Per-replicate CSV")->required();
  t1->add_option("--summary", b_summary, "Summary CSV");
  t1->add_flag("--timing", b_timing, "Add a wall_ms column (not deterministic)");
  t1->add_option("--threads", b_threads, "Worker threads (0: all cores)");
  add_spectral_flags(t1, b_opts.spectral);

  auto* sw = bench->add_subcommand("sweep", "Vary one parameter of the generator");
  SweepSpec w_spec;
  int w_threads = 0;
  std::uint64_t w_seed = 1;
  std::string w_out, w_summary;
  bool w_timing = false;
  FitOptions w_opts;
  sw->add_option("--name", w_spec.name, "sigma | omega | tdof | tdof-std | mislead | misspec")
      ->required();
  sw->add_option("--reps", w_spec.reps, "Replicates per grid value")->capture_default_str();
  sw->add_option("--n", w_spec.n, "Samples")->capture_default_str();
  sw->add_option("--p", w_spec.p, "Features (ignored by mislead)")->capture_default_str();
  sw->add_option("--k", w_spec.k, "Communities (ignored by mislead)")->capture_default_str();
  sw->add_option("--grid", w_spec.grid, "Grid values (default: the sweep's range)");
  sw->add_option("--seed", w_seed, "Master seed");
  sw->add_option("--out", w_out, "Per-replicate CSV")->required();
  sw->add_option("--summary", w_summary, "Summary CSV");
  sw->add_flag("--timing", w_timing, "Add a wall_ms column (not deterministic)");
  sw->add_option("--threads", w_threads, "Worker threads (0: all cores)");
  add_spectral_flags(sw, w_opts.spectral);

  // ari
  auto* ari = app.add_subcommand("ari", "Adjusted Rand index of two labelings");
  std::string a_path, b_path;
  ari->add_option("--a", a_path, "Labels JSON")->required();
  ari->add_option("--b", b_path, "Labels JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      NoiseSpec noise = NoiseSpec::gaussian();
      if (g_noise != "gaussian") {
        if (!(g_dof > 2.0)) throw ValidationError("--dof must be > 2 for t noise");
        noise = g_noise == "t" ? NoiseSpec::student_t(g_dof)
                               : NoiseSpec::student_t_standardized(g_dof);
      }
      const ParameterSystem sys =
          *sigma_opt ? homogeneous_system(g_p, g_k, 1.0, g_sigma, 1.0, 0.5, derive_seed(g_seed, 1))
                     : table1_system(g_p, g_k, derive_seed(g_seed, 1));
      const Dataset d = generate_dataset(g_n, sys, noise, derive_seed(g_seed, 2));
      write_csv(g_out, d.x);
      Labels one_based = d.truth.labels;
      for (int& c : one_based) ++c;
      write_json(g_truth, json{{"labels", one_based},
                               {"system", d.truth.system},
                               {"alpha", matrix_to_json(d.truth.alpha)}});
    } else if (*fitc) {
      const Matrix x = read_csv(f_data);
      std::optional<Labels> init;
      if (f_init[0] == "labels") {
        if (f_init.size() != 2) throw ValidationError("--init labels needs a FILE");
        init = read_labels_json(f_init[1]);
      } else if (f_init[0] != "spectral" || f_init.size() != 1) {
        throw ValidationError("--init expects 'spectral' or 'labels FILE'");
      }
      const FitResult r = fit(x, f_k, f_opts, init, f_seed);
      write_json(f_out, json(r));
      std::cerr << "iterations " << r.iterations << (r.converged ? " (converged)" : "")
                << ", final ELBO " << r.elbo_trace.back() << '\n';
    } else if (*spec) {
      const Matrix x = read_csv(s_data);
      write_labels_json(s_out, spectral_cluster(abs_correlation(center_columns(x)), s_k,
                                                s_seed, s_opts));
    } else if (*cvc) {
      if (c_kmin < 2 || c_kmax < c_kmin) throw ValidationError("need 2 <= k-min <= k-max");
      std::vector<int> ks(static_cast<std::size_t>(c_kmax - c_kmin + 1));
      std::iota(ks.begin(), ks.end(), c_kmin);
      const Matrix x = read_csv(c_data);
      const CvReport rep =
          select_k_cv(x, ks, c_m, c_method == "hbcm" ? Method::Hbcm : Method::Spectral,
                      c_seed, c_opts, c_threads);
      json per = json::array();
      for (Eigen::Index s = 0; s < rep.per_split_ari.rows(); ++s) {
        json row = json::array();
        for (Eigen::Index c = 0; c < rep.per_split_ari.cols(); ++c) {
          row.push_back(nan_to_null(rep.per_split_ari(s, c)));
        }
        per.push_back(row);
      }
      json means = json::array();
      for (double v : rep.mean_ari) means.push_back(nan_to_null(v));
      write_json(c_out, json{{"k_values", rep.k_values},
                             {"mean_ari", means},
                             {"best_k", rep.best_k},
                             {"per_split_ari", per}});
      std::cout << "best_k " << rep.best_k << '\n';
    } else if (*t1 || *sw) {
      const std::vector<BenchRow> rows =
          *t1 ? bench_table1(parse_cells(b_cells), b_reps, b_seed, b_opts, b_threads)
              : bench_sweep(w_spec, w_seed, w_opts, w_threads);
      std::ostringstream csv;
      write_rows_csv(csv, rows, *t1 ? b_timing : w_timing);
      write_text(*t1 ? b_out : w_out, csv.str());
      std::ostringstream summary;
      write_summary_csv(summary, summarize(rows));
      const std::string& summary_path = *t1 ? b_summary : w_summary;
      if (summary_path.empty()) {
        std::cout << summary.str();
      } else {
        write_text(summary_path, summary.str());
      }
    } else if (*ari) {
      std::printf("%.10f\n", adjusted_rand_index(read_labels_json(a_path),
                                                 read_labels_json(b_path)));
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
