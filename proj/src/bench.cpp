#include "hbcm/bench.hpp"

#include "hbcm/metrics.hpp"
#include "hbcm/simulate.hpp"
#include "hbcm/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

namespace hbcm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t cell_key(int n, int p, int k) {
  return (static_cast<std::uint64_t>(n) << 40) ^ (static_cast<std::uint64_t>(p) << 16) ^
         static_cast<std::uint64_t>(k);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

struct Scenario {
  Matrix x;
  Labels truth;
  Labels mislead;  // empty when not applicable
};

// Runs spectral clustering and the VEM fit seeded by it on one dataset.
std::pair<BenchRow, BenchRow> run_both(const Scenario& sc, int k, std::uint64_t seed,
                                       const FitOptions& opts, BenchRow base) {
  BenchRow spec = base;
  spec.method = Method::Spectral;
  BenchRow hb = base;
  hb.method = Method::Hbcm;
  const bool with_mislead = !sc.mislead.empty();
  spec.ari_mislead = hb.ari_mislead = kNaN;

  Labels spectral_labels;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix xc = center_columns(sc.x);
    spectral_labels = spectral_cluster(abs_correlation(xc), k, derive_seed(seed, 11),
                                       opts.spectral);
    spec.wall_ms = elapsed_ms(t0);
    spec.ari = adjusted_rand_index(spectral_labels, sc.truth);
    if (with_mislead) spec.ari_mislead = adjusted_rand_index(spectral_labels, sc.mislead);
  } catch (const std::exception& e) {
    std::cerr << "warning: spectral failed in " << base.scenario << " replicate "
              << base.replicate << ": " << e.what() << '\n';
    spec.failed = hb.failed = true;
    spec.ari = hb.ari = kNaN;
    return {spec, hb};
  }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fit(sc.x, k, opts, spectral_labels, seed);
    hb.wall_ms = elapsed_ms(t0) + spec.wall_ms;
    hb.iterations = r.iterations;
    hb.ari = adjusted_rand_index(r.labels, sc.truth);
    if (with_mislead) hb.ari_mislead = adjusted_rand_index(r.labels, sc.mislead);
  } catch (const std::exception& e) {
    std::cerr << "warning: fit failed in " << base.scenario << " replicate "
              << base.replicate << ": " << e.what() << '\n';
    hb.failed = true;
    hb.ari = kNaN;
  }
  return {spec, hb};
}

}  // namespace

const char* method_name(Method m) { return m == Method::Hbcm ? "hbcm" : "spectral"; }

void parallel_for(int count, const std::function<void(int)>& fn, int threads) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CvReport select_k_cv(const Matrix& x, const std::vector<int>& k_candidates, int m,
                     Method method, std::uint64_t seed, const FitOptions& opts,
                     int threads) {
  check_data(x);
  if (x.rows() < 4) throw ValidationError("cross-validation needs N >= 4");
  if (m < 1) throw ValidationError("cross-validation needs M >= 1");
  if (k_candidates.empty()) throw ValidationError("no candidate K values");
  for (int k : k_candidates) {
    if (k < 2) throw ValidationError("candidate K must be >= 2");
  }
  const auto nk = static_cast<int>(k_candidates.size());
  const Eigen::Index n = x.rows();
  const Eigen::Index half = n / 2;

  // Split m is shared by every candidate K.
  std::vector<std::pair<Matrix, Matrix>> splits(static_cast<std::size_t>(m));
  for (int s = 0; s < m; ++s) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(derive_seed(seed, 0x5b1, static_cast<std::uint64_t>(s)));
    std::shuffle(idx.begin(), idx.end(), rng);
    Matrix a(half, x.cols());
    Matrix b(n - half, x.cols());
    for (Eigen::Index i = 0; i < half; ++i) a.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = half; i < n; ++i) {
      b.row(i - half) = x.row(idx[static_cast<std::size_t>(i)]);
    }
    splits[static_cast<std::size_t>(s)] = {std::move(a), std::move(b)};
  }

  CvReport rep;
  rep.k_values = k_candidates;
  rep.per_split_ari = Matrix::Constant(m, nk, kNaN);
  parallel_for(
      m * nk,
      [&](int task) {
        const int s = task / nk;
        const int c = task % nk;
        const int k = k_candidates[static_cast<std::size_t>(c)];
        const auto& [a, b] = splits[static_cast<std::size_t>(s)];
        const std::uint64_t task_seed =
            derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(s));
        try {
          auto cluster = [&](const Matrix& part, std::uint64_t sd) {
            if (method == Method::Spectral) {
              return spectral_cluster(abs_correlation(center_columns(part)), k, sd,
                                      opts.spectral);
            }
            return fit(part, k, opts, std::nullopt, sd).labels;
          };
          const Labels la = cluster(a, derive_seed(task_seed, 1));
          const Labels lb = cluster(b, derive_seed(task_seed, 2));
          rep.per_split_ari(s, c) = adjusted_rand_index(la, lb);
        } catch (const std::exception& e) {
          std::cerr << "warning: cross-validation split " << s + 1 << " with K=" << k
                    << " failed: " << e.what() << '\n';
        }
      },
      threads);

  rep.mean_ari.assign(static_cast<std::size_t>(nk), kNaN);
  double best = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < nk; ++c) {
    double total = 0.0;
    int used = 0;
    for (int s = 0; s < m; ++s) {
      const double v = rep.per_split_ari(s, c);
      if (std::isnan(v)) continue;
      total += v;
      ++used;
    }
    if (used == 0) continue;
    const double mean = total / used;
    rep.mean_ari[static_cast<std::size_t>(c)] = mean;
    const int k = k_candidates[static_cast<std::size_t>(c)];
    if (mean > best || (mean == best && k < rep.best_k)) {
      best = mean;
      rep.best_k = k;
    }
  }
  if (rep.best_k == 0) throw NumericalError("every cross-validation split failed");
  return rep;
}

std::vector<Cell> table1_cells() {
  std::vector<Cell> cells;
  for (int k : {3, 5, 7}) {
    for (int p : {300, 500, 1000}) cells.push_back({500, p, k});
  }
  for (int k : {3, 5, 7}) {
    for (int p : {500, 1000, 1500}) cells.push_back({1000, p, k});
  }
  return cells;
}

std::vector<BenchRow> bench_table1(const std::vector<Cell>& cells, int reps,
                                   std::uint64_t seed, const FitOptions& opts,
                                   int threads) {
  if (reps < 1) throw ValidationError("need at least one replicate");
  const int tasks = static_cast<int>(cells.size()) * reps;
  std::vector<std::pair<BenchRow, BenchRow>> out(static_cast<std::size_t>(tasks));
  parallel_for(
      tasks,
      [&](int t) {
        const Cell& cell = cells[static_cast<std::size_t>(t / reps)];
        const int r = t % reps;
        const std::uint64_t rs =
            derive_seed(seed, cell_key(cell.n, cell.p, cell.k), static_cast<std::uint64_t>(r));
        BenchRow base;
        base.scenario = "table1";
        base.n = cell.n;
        base.p = cell.p;
        base.k = cell.k;
        base.replicate = r;
        base.seed = rs;
        const ParameterSystem sys = table1_system(cell.p, cell.k, derive_seed(rs, 1));
        Dataset d = generate_dataset(cell.n, sys, NoiseSpec::gaussian(), derive_seed(rs, 2));
        out[static_cast<std::size_t>(t)] =
            run_both({std::move(d.x), std::move(d.truth.labels), {}}, cell.k, rs, opts, base);
      },
      threads);
  std::vector<BenchRow> rows;
  rows.reserve(out.size() * 2);
  for (auto& [s, h] : out) {
    rows.push_back(std::move(s));
    rows.push_back(std::move(h));
  }
  return rows;
}

std::string canonical_sweep_name(const std::string& name) {
  if (name == "omega_offdiag") return "omega";
  if (name == "t_dof") return "tdof";
  if (name == "t_dof_standardized") return "tdof-std";
  for (const char* known : {"sigma", "omega", "tdof", "tdof-std", "mislead", "misspec"}) {
    if (name == known) return name;
  }
  throw ValidationError("unknown sweep '" + name +
                        "' (expected sigma|omega|tdof|tdof-std|mislead|misspec)");
}

std::vector<double> default_sweep_grid(const std::string& sweep) {
  const std::string name = canonical_sweep_name(sweep);
  auto range = [](double lo, double hi, double step) {
    std::vector<double> g;
    const int count = static_cast<int>(std::lround((hi - lo) / step)) + 1;
    for (int i = 0; i < count; ++i) g.push_back(lo + step * i);
    return g;
  };
  if (name == "sigma" || name == "mislead") return range(1.0, 10.0, 1.0);
  if (name == "omega") return range(0.1, 0.9, 0.1);
  if (name == "tdof" || name == "tdof-std") {
    return {3, 4, 5, 6, 8, 10, 15, 20, 30, std::numeric_limits<double>::infinity()};
  }
  return range(0.0, 0.5, 0.1);  // misspec
}

std::vector<BenchRow> bench_sweep(const SweepSpec& spec, std::uint64_t seed,
                                  const FitOptions& opts, int threads) {
  const std::string name = canonical_sweep_name(spec.name);
  const std::vector<double> grid = spec.grid.empty() ? default_sweep_grid(name) : spec.grid;
  if (spec.reps < 1) throw ValidationError("need at least one replicate");
  constexpr double kSweepSigma = 6.0;

  const int tasks = static_cast<int>(grid.size()) * spec.reps;
  std::vector<std::pair<BenchRow, BenchRow>> out(static_cast<std::size_t>(tasks));
  parallel_for(
      tasks,
      [&](int t) {
        const std::size_t g = static_cast<std::size_t>(t / spec.reps);
        const int r = t % spec.reps;
        const double value = grid[g];
        const std::uint64_t rs = derive_seed(seed, fnv1a(name) ^ mix_seed(g),
                                             static_cast<std::uint64_t>(r));
        BenchRow base;
        base.scenario = name;
        base.n = spec.n;
        base.p = spec.p;
        base.k = spec.k;
        base.param = value;
        base.replicate = r;
        base.seed = rs;

        Scenario sc;
        const std::uint64_t sys_seed = derive_seed(rs, 1);
        const std::uint64_t data_seed = derive_seed(rs, 2);
        if (name == "sigma") {
          const auto sys = homogeneous_system(spec.p, spec.k, 1.0, value, 1.0, 0.5, sys_seed);
          Dataset d = generate_dataset(spec.n, sys, NoiseSpec::gaussian(), data_seed);
          sc = {std::move(d.x), std::move(d.truth.labels), {}};
        } else if (name == "omega") {
          const auto sys =
              homogeneous_system(spec.p, spec.k, 1.0, kSweepSigma, 1.0, value, sys_seed);
          Dataset d = generate_dataset(spec.n, sys, NoiseSpec::gaussian(), data_seed);
          sc = {std::move(d.x), std::move(d.truth.labels), {}};
        } else if (name == "tdof" || name == "tdof-std") {
          const auto sys =
              homogeneous_system(spec.p, spec.k, 1.0, kSweepSigma, 1.0, 0.5, sys_seed);
          NoiseSpec noise = NoiseSpec::gaussian();
          if (std::isfinite(value)) {
            noise = name == "tdof" ? NoiseSpec::student_t(value)
                                        : NoiseSpec::student_t_standardized(value);
          }
          Dataset d = generate_dataset(spec.n, sys, noise, data_seed);
          sc = {std::move(d.x), std::move(d.truth.labels), {}};
        } else if (name == "mislead") {
          MisleadingSetup ms = misleading_lambda_system(value, sys_seed);
          base.p = ms.system.p;
          base.k = ms.system.k;
          Dataset d = generate_dataset(spec.n, ms.system, NoiseSpec::gaussian(), data_seed);
          sc = {std::move(d.x), std::move(d.truth.labels), std::move(ms.mislead)};
        } else {  // misspec
          const auto sys =
              homogeneous_system(spec.p, spec.k, 1.0, kSweepSigma, 1.0, 0.5, sys_seed);
          Dataset d = perturbed_covariance_dataset(spec.n, sys, value, 10, data_seed);
          sc = {std::move(d.x), std::move(d.truth.labels), {}};
        }
        out[static_cast<std::size_t>(t)] = run_both(sc, base.k, rs, opts, base);
      },
      threads);
  std::vector<BenchRow> rows;
  rows.reserve(out.size() * 2);
  for (auto& [s, h] : out) {
    rows.push_back(std::move(s));
    rows.push_back(std::move(h));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<BenchRow>& rows) {
  using Key = std::tuple<std::string, int, int, int, double, int>;
  std::map<Key, std::size_t> index;
  std::vector<SummaryRow> out;
  std::vector<std::vector<const BenchRow*>> members;
  for (const BenchRow& r : rows) {
    const Key key{r.scenario, r.n, r.p, r.k, r.param, static_cast<int>(r.method)};
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.scenario, r.n, r.p, r.k, r.param, r.method, 0, 0, kNaN, kNaN, kNaN});
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t s = 0; s < out.size(); ++s) {
    SummaryRow& row = out[s];
    double total = 0.0;
    double total_mislead = 0.0;
    int mislead_count = 0;
    for (const BenchRow* r : members[s]) {
      if (r->failed) {
        ++row.failed;
        continue;
      }
      ++row.count;
      total += r->ari;
      if (!std::isnan(r->ari_mislead)) {
        total_mislead += r->ari_mislead;
        ++mislead_count;
      }
    }
    if (row.count == 0) continue;
    row.mean_ari = total / row.count;
    double ss = 0.0;
    for (const BenchRow* r : members[s]) {
      if (!r->failed) ss += (r->ari - row.mean_ari) * (r->ari - row.mean_ari);
    }
    row.sd_ari = row.count > 1 ? std::sqrt(ss / (row.count - 1)) : 0.0;
    if (mislead_count > 0) row.mean_ari_mislead = total_mislead / mislead_count;
  }
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows,
                    bool include_timing) {
  out << "scenario,n,p,k,param,method,replicate,seed,ari,ari_mislead,iterations,failed";
  if (include_timing) out << ",wall_ms";
  out << '\n';
  for (const BenchRow& r : rows) {
    out << r.scenario << ',' << r.n << ',' << r.p << ',' << r.k << ',' << num(r.param)
        << ',' << method_name(r.method) << ',' << r.replicate << ',' << r.seed << ','
        << num(r.ari) << ',' << num(r.ari_mislead) << ',' << r.iterations << ','
        << (r.failed ? 1 : 0);
    if (include_timing) out << ',' << num(r.wall_ms);
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "scenario,n,p,k,param,method,count,failed,mean_ari,sd_ari,mean_ari_mislead\n";
  for (const SummaryRow& r : rows) {
    out << r.scenario << ',' << r.n << ',' << r.p << ',' << r.k << ',' << num(r.param)
        << ',' << method_name(r.method) << ',' << r.count << ',' << r.failed << ','
        << num(r.mean_ari) << ',' << num(r.sd_ari) << ',' << num(r.mean_ari_mislead)
        << '\n';
  }
}

}  // namespace hbcm
