#include "hbcm/bench.hpp"
#include "hbcm/simulate.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <sstream>

using namespace hbcm;

TEST(Sweeps, NamesAndGrids) {
  EXPECT_EQ(canonical_sweep_name("omega_offdiag"), "omega");
  EXPECT_EQ(canonical_sweep_name("t_dof"), "tdof");
  EXPECT_EQ(canonical_sweep_name("t_dof_standardized"), "tdof-std");
  EXPECT_EQ(canonical_sweep_name("sigma"), "sigma");
  EXPECT_THROW(canonical_sweep_name("lambda"), ValidationError);

  EXPECT_EQ(default_sweep_grid("sigma").size(), 10u);
  EXPECT_EQ(default_sweep_grid("mislead").front(), 1.0);
  EXPECT_EQ(default_sweep_grid("omega").back(), 0.9);
  EXPECT_TRUE(std::isinf(default_sweep_grid("tdof").back()));
  EXPECT_EQ(default_sweep_grid("misspec").front(), 0.0);
}

TEST(Table1, EighteenCells) {
  const auto cells = table1_cells();
  ASSERT_EQ(cells.size(), 18u);
  for (const Cell& c : cells) EXPECT_GE(c.k, 2);
}

TEST(ParallelFor, VisitsEveryIndexAndRethrows) {
  std::vector<std::atomic<int>> hits(37);
  parallel_for(37, [&](int i) { ++hits[i]; }, 3);
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(5, [](int i) { if (i == 3) throw std::runtime_error("x"); }, 2),
               std::runtime_error);
}

TEST(Bench, CsvIsDeterministicAcrossThreadCounts) {
  const std::vector<Cell> cells = {{80, 30, 2}};
  std::ostringstream a, b;
  write_rows_csv(a, bench_table1(cells, 3, 42, {}, 1));
  write_rows_csv(b, bench_table1(cells, 3, 42, {}, 3));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("scenario,n,p,k,param,method,replicate,seed,ari,", 0), 0u);
  std::ostringstream c;
  write_rows_csv(c, bench_table1(cells, 3, 43, {}, 1));
  EXPECT_NE(a.str(), c.str());
}

TEST(Bench, SweepRowsAndSummary) {
  SweepSpec spec;
  spec.name = "sigma";
  spec.n = 60;
  spec.p = 30;
  spec.k = 2;
  spec.reps = 2;
  spec.grid = {1.0, 4.0};
  const auto rows = bench_sweep(spec, 5, {}, 1);
  ASSERT_EQ(rows.size(), 8u);  // 2 values x 2 reps x 2 methods
  const auto summary = summarize(rows);
  ASSERT_EQ(summary.size(), 4u);
  for (const SummaryRow& s : summary) {
    EXPECT_EQ(s.count + s.failed, 2);
    EXPECT_TRUE(std::isnan(s.mean_ari_mislead));
  }
  // Sample standard deviation over the two replicates.
  const double a = rows[0].ari, b = rows[2].ari;
  ASSERT_EQ(rows[0].method, rows[2].method);
  ASSERT_EQ(rows[0].param, rows[2].param);
  EXPECT_NEAR(summary[0].sd_ari, std::abs(a - b) / std::sqrt(2.0), 1e-12);
}

TEST(Cv, SingletonCandidate) {
  const ParameterSystem s = homogeneous_system(40, 3, 1.0, 1.0, 1.0, 0.3, 6);
  const Matrix x = generate_dataset(120, s, NoiseSpec::gaussian(), 7).x;
  const CvReport r = select_k_cv(x, {3}, 3, Method::Spectral, 8, {}, 1);
  EXPECT_EQ(r.best_k, 3);
  EXPECT_EQ(r.per_split_ari.rows(), 3);
  EXPECT_EQ(r.per_split_ari.cols(), 1);
}

TEST(Cv, PicksTrueKOnClearData) {
  const ParameterSystem s = homogeneous_system(60, 3, 1.0, 1.0, 1.0, 0.5, 9);
  const Matrix x = generate_dataset(200, s, NoiseSpec::gaussian(), 10).x;
  const CvReport r = select_k_cv(x, {2, 3, 4}, 5, Method::Hbcm, 11, {}, 1);
  EXPECT_EQ(r.best_k, 3);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(r.mean_ari[c], r.per_split_ari.col(c).mean());
  EXPECT_THROW(select_k_cv(x, {1}, 4, Method::Hbcm, 11), ValidationError);
}
