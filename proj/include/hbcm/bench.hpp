#pragma once

// Experiment harness: cross-validated choice of K, the (N, P, K) benchmark
// grid and the parameter sweeps. Every task owns a random stream derived from
// the master seed, and results are gathered in task order, so parallel and
// serial runs write identical files.

#include "hbcm/common.hpp"
#include "hbcm/vem.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbcm {

enum class Method { Hbcm, Spectral };

const char* method_name(Method m);

// Runs fn(0..count-1) on a pool of worker threads (hardware concurrency when
// threads <= 0). Exceptions from tasks are rethrown after all workers finish.
void parallel_for(int count, const std::function<void(int)>& fn, int threads = 0);

struct CvReport {
  std::vector<int> k_values;
  std::vector<double> mean_ari;  // NaN when every split failed for that K
  int best_k = 0;
  Matrix per_split_ari;          // M x |k_values|, NaN marks a failed split
};

// Splits the rows in half at random M times, clusters the columns of each
// half independently and scores the agreement of the two labelings by ARI.
// The K with the largest mean agreement wins; ties go to the smallest K.
CvReport select_k_cv(const Matrix& x, const std::vector<int>& k_candidates, int m,
                     Method method, std::uint64_t seed, const FitOptions& opts = {},
                     int threads = 0);

struct BenchRow {
  std::string scenario;
  int n = 0;
  int p = 0;
  int k = 0;
  double param = 0.0;  // sweep grid value; 0 for the grid benchmark
  Method method = Method::Hbcm;
  int replicate = 0;
  std::uint64_t seed = 0;
  double ari = 0.0;
  double ari_mislead = 0.0;  // NaN unless the scenario has misleading labels
  int iterations = 0;        // 0 for spectral
  double wall_ms = 0.0;
  bool failed = false;
};

struct Cell {
  int n;
  int p;
  int k;
};

// The 18 (N, P, K) combinations of the benchmark grid.
std::vector<Cell> table1_cells();

std::vector<BenchRow> bench_table1(const std::vector<Cell>& cells, int reps,
                                   std::uint64_t seed, const FitOptions& opts = {},
                                   int threads = 0);

struct SweepSpec {
  std::string name;  // sigma | omega | tdof | tdof-std | mislead | misspec
  int n = 1000;
  int p = 1000;
  int k = 3;
  int reps = 10;
  std::vector<double> grid;  // empty selects the default range for the sweep
};

// Maps a sweep name or its long alias (omega_offdiag, t_dof,
// t_dof_standardized) to the short form; throws ValidationError otherwise.
std::string canonical_sweep_name(const std::string& name);

// Default grid values for a sweep; throws ValidationError on unknown names.
std::vector<double> default_sweep_grid(const std::string& name);

std::vector<BenchRow> bench_sweep(const SweepSpec& spec, std::uint64_t seed,
                                  const FitOptions& opts = {}, int threads = 0);

struct SummaryRow {
  std::string scenario;
  int n, p, k;
  double param;
  Method method;
  int count;   // successful replicates
  int failed;
  double mean_ari;
  double sd_ari;
  double mean_ari_mislead;
};

// Mean and sample standard deviation per (scenario, n, p, k, param, method)
// in first-appearance order; failed rows are counted but not averaged.
std::vector<SummaryRow> summarize(const std::vector<BenchRow>& rows);

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows,
                    bool include_timing = false);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace hbcm
