#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gefm/metrics/metrics.hpp"
#include "gefm/numcore/rng.hpp"
#include "support/reference.hpp"

namespace {

using namespace gefm;
namespace gt = gefm::testing;
using metrics::EnsembleForecast;
using metrics::Sequence;
using num::Tensor;

// Random data shaped [S][T] with [N, D] fields.
std::vector<Sequence> random_sequences(std::size_t S, std::size_t T, std::size_t N, std::size_t D, std::uint64_t seed) {
  std::vector<Sequence> out(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t t = 0; t < T; ++t) out[s].push_back(gt::random_tensor({N, D}, seed + 100 * s + t));
  return out;
}

std::vector<EnsembleForecast> random_ensembles(std::size_t S, std::size_t K, std::size_t T, std::size_t N,
                                               std::size_t D, std::uint64_t seed) {
  std::vector<EnsembleForecast> out(S);
  for (std::size_t s = 0; s < S; ++s) out[s] = random_sequences(K, T, N, D, seed + 10000 * s);
  return out;
}

std::vector<double> positive_weights(std::size_t n, std::uint64_t seed) {
  num::RngStream rng({seed, num::Purpose::test, 0, 0});
  std::vector<double> w(n);
  for (auto& v : w) v = 0.5 + rng.uniform();
  return w;
}

double double_sum_crps(const std::vector<double>& x, double y) {
  const double k = static_cast<double>(x.size());
  double a = 0.0, b = 0.0;
  for (double xi : x) a += std::fabs(xi - y);
  for (double xi : x)
    for (double xj : x) b += std::fabs(xi - xj);
  return a / k - b / (2.0 * k * (k - 1.0));
}

// ------------------------------------------------------------ area weights

TEST(AreaWeights, PlanarGridIsAllOnes) {
  for (double w : metrics::area_weights(mesh::GridSpec::planar(5, 7))) EXPECT_EQ(w, 1.0);
}

TEST(AreaWeights, SphericalMeanIsOneAndHemispheresMatch) {
  const auto grid = mesh::GridSpec::latlon_cell_centred(12, 24);
  const auto w = metrics::area_weights(grid);
  double mean = 0.0;
  for (double v : w) mean += v;
  EXPECT_NEAR(mean / static_cast<double>(w.size()), 1.0, 1e-12);
  for (std::size_t r = 0; r < 12; ++r) EXPECT_NEAR(w[r * 24], w[(11 - r) * 24], 1e-12);
  EXPECT_GT(w[6 * 24], w[0]);

  mesh::GridSpec two = grid;
  two.rows = 2;
  two.cols = 3;
  two.lat0 = -45.0;
  two.dlat = 90.0;
  const auto w2 = metrics::area_weights(two);
  for (double v : w2) EXPECT_NEAR(v, 1.0, 1e-15);
}

// -------------------------------------------------------------------- RMSE

TEST(Rmse, ZeroForPerfectForecast) {
  const auto y = random_sequences(2, 3, 4, 2, 1);
  for (const auto& row : metrics::rmse(y, y, positive_weights(4, 2)))
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(Rmse, SingleNodeError) {
  const std::vector<Sequence> f{{Tensor::from({1, 1}, {3.0})}}, y{{Tensor::from({1, 1}, {1.0})}};
  EXPECT_DOUBLE_EQ(metrics::rmse(f, y, std::vector<double>{1.0})[0][0], 2.0);
}

TEST(Rmse, MatchesLoopReference) {
  const std::size_t S = 3, T = 2, N = 6, D = 3;
  const auto f = random_sequences(S, T, N, D, 10), y = random_sequences(S, T, N, D, 20);
  const auto w = positive_weights(N, 3);
  const auto table = metrics::rmse(f, y, w);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < D; ++j) {
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < N; ++a) {
          const double e = f[s][t].at(a, j) - y[s][t].at(a, j);
          acc += w[a] * e * e;
        }
      EXPECT_NEAR(table[t][j], std::sqrt(acc / (S * N)), 1e-12);
    }
}

TEST(Rmse, ShapeMismatchThrows) {
  const auto f = random_sequences(2, 2, 4, 2, 1), y = random_sequences(2, 2, 5, 2, 2);
  EXPECT_THROW(metrics::rmse(f, y, positive_weights(5, 1)), num::ShapeError);
}

// --------------------------------------------------------- ensemble RMSE

TEST(EnsembleMeanRmse, SingleMemberEqualsRmse) {
  const auto e = random_ensembles(2, 1, 3, 5, 2, 30);
  const auto y = random_sequences(2, 3, 5, 2, 40);
  const auto w = positive_weights(5, 4);
  std::vector<Sequence> f{e[0][0], e[1][0]};
  EXPECT_EQ(metrics::ensemble_mean_rmse(e, y, w), metrics::rmse(f, y, w));
}

TEST(EnsembleMeanRmse, SymmetricMembersCancel) {
  const auto y = random_sequences(1, 2, 4, 2, 50);
  const auto d = random_sequences(1, 2, 4, 2, 60)[0];
  EnsembleForecast e(2);
  for (std::size_t t = 0; t < 2; ++t) {
    auto plus = y[0][t].to_vector(), minus = y[0][t].to_vector();
    for (std::size_t i = 0; i < plus.size(); ++i) {
      plus[i] += d[t][i];
      minus[i] -= d[t][i];
    }
    e[0].push_back(Tensor::from({4, 2}, plus));
    e[1].push_back(Tensor::from({4, 2}, minus));
  }
  for (const auto& row : metrics::ensemble_mean_rmse({e}, y, positive_weights(4, 5)))
    for (double v : row) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(EnsembleMeanRmse, EqualsRmseOfExplicitMean) {
  const std::size_t S = 2, K = 4, T = 2, N = 5, D = 2;
  const auto e = random_ensembles(S, K, T, N, D, 70);
  const auto y = random_sequences(S, T, N, D, 80);
  const auto w = positive_weights(N, 6);
  std::vector<Sequence> mean(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> m(N * D, 0.0);
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < N * D; ++i) m[i] += e[s][k][t][i] / K;
      mean[s].push_back(Tensor::from({N, D}, m));
    }
  const auto a = metrics::ensemble_mean_rmse(e, y, w), b = metrics::rmse(mean, y, w);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < D; ++j) EXPECT_NEAR(a[t][j], b[t][j], 1e-12);
}

TEST(EnsembleMeanRmse, NonIncreasingInEnsembleSizeForUnbiasedNoise) {
  const std::size_t S = 20, N = 200;
  const auto y = random_sequences(S, 1, N, 1, 90);
  std::vector<EnsembleForecast> ens(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t k = 0; k < 40; ++k) {
      const auto noise = gt::random_tensor({N, 1}, 5000 + 100 * s + k);
      auto x = y[s][0].to_vector();
      for (std::size_t i = 0; i < N; ++i) x[i] += noise[i];
      ens[s].push_back({Tensor::from({N, 1}, x)});
    }
  const auto w = std::vector<double>(N, 1.0);
  double previous = 1e300;
  for (std::size_t k : {5u, 10u, 20u, 40u}) {
    const double r = metrics::ensemble_mean_rmse(metrics::member_prefix(ens, k), y, w)[0][0];
    EXPECT_LE(r, previous);
    EXPECT_NEAR(r, 1.0 / std::sqrt(static_cast<double>(k)), 0.1 / std::sqrt(static_cast<double>(k)));
    previous = r;
  }
}

// ------------------------------------------------------------ spread / SpSkR

TEST(SpreadSkill, IdenticalMembersGiveZero) {
  const auto y = random_sequences(1, 2, 4, 1, 100);
  const auto m = random_sequences(1, 2, 4, 1, 110)[0];
  const std::vector<EnsembleForecast> e{{m, m, m}};
  for (const auto& row : metrics::spread_skill_ratio(e, y, std::vector<double>(4, 1.0)))
    for (double v : row) EXPECT_EQ(v, 0.0);
  const std::vector<EnsembleForecast> single{{m}};
  for (const auto& row : metrics::spread_skill_ratio(single, y, std::vector<double>(4, 1.0)))
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(SpreadSkill, ZeroRmseIsFlaggedNotInfinite) {
  const std::vector<Sequence> y{{Tensor::from({3, 1}, {0.5, -1.25, 2.0})}};
  auto up = y[0][0].to_vector(), down = y[0][0].to_vector();
  for (auto& v : up) v += 1.0;
  for (auto& v : down) v -= 1.0;
  const std::vector<EnsembleForecast> e{{{Tensor::from({3, 1}, up)}, {Tensor::from({3, 1}, down)}}};
  EXPECT_TRUE(std::isnan(metrics::spread_skill_ratio(e, y, std::vector<double>(3, 1.0))[0][0]));
}

TEST(SpreadSkill, SpreadMatchesLoopReference) {
  const std::size_t S = 2, K = 3, T = 1, N = 4, D = 2;
  const auto e = random_ensembles(S, K, T, N, D, 130);
  const auto w = positive_weights(N, 7);
  const auto sp = metrics::spread(e, w);
  for (std::size_t j = 0; j < D; ++j) {
    double acc = 0.0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < N; ++a) {
        double mean = 0.0;
        for (std::size_t k = 0; k < K; ++k) mean += e[s][k][0].at(a, j) / K;
        for (std::size_t k = 0; k < K; ++k) acc += w[a] * std::pow(mean - e[s][k][0].at(a, j), 2);
      }
    EXPECT_NEAR(sp[0][j], std::sqrt(acc / (S * K * N)), 1e-12);
  }
}

TEST(SpreadSkill, ExchangeableEnsembleIsCalibrated) {
  // Members and truth i.i.d. N(0, 1); K = 20; S * N = 10^5 points.
  const std::size_t S = 10, N = 10000, K = 20;
  std::vector<Sequence> y(S);
  std::vector<EnsembleForecast> e(S);
  for (std::size_t s = 0; s < S; ++s) {
    y[s] = {gt::random_tensor({N, 1}, 1000 + s)};
    for (std::size_t k = 0; k < K; ++k) e[s].push_back({gt::random_tensor({N, 1}, 2000 + 100 * s + k)});
  }
  const double r = metrics::spread_skill_ratio(e, y, std::vector<double>(N, 1.0))[0][0];
  EXPECT_GE(r, 0.95);
  EXPECT_LE(r, 1.05);
}

// -------------------------------------------------------------------- CRPS

TEST(Crps, SortedEqualsDoubleSum) {
  num::RngStream rng({3, num::Purpose::test, 0, 0});
  for (std::size_t k = 2; k <= 9; ++k)
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> x(k);
      for (auto& v : x) v = 3.0 * rng.normal();
      const double y = rng.normal();
      EXPECT_NEAR(metrics::fair_crps(x, y), double_sum_crps(x, y), 1e-12) << "K=" << k;
    }
}

TEST(Crps, CollapsedEnsembles) {
  EXPECT_EQ(metrics::fair_crps(std::vector<double>{0.7, 0.7, 0.7}, 0.7), 0.0);
  EXPECT_DOUBLE_EQ(metrics::fair_crps(std::vector<double>{2.0, 2.0, 2.0, 2.0}, -0.5), 2.5);
  EXPECT_EQ(metrics::fair_crps(std::vector<double>{1.25}, 3.0), 1.75);
}

TEST(Crps, GaussianEnsembleConvergesToClosedForm) {
  // Members ~ N(0, 1), y = 0, K = 1000, 10^4 points.
  const double exact = 2.0 / std::sqrt(2.0 * std::numbers::pi) - 1.0 / std::sqrt(std::numbers::pi);
  num::RngStream rng({4, num::Purpose::test, 0, 0});
  std::vector<double> x(1000);
  double acc = 0.0;
  for (int p = 0; p < 10000; ++p) {
    rng.fill_normal(x);
    acc += metrics::fair_crps(x, 0.0);
  }
  EXPECT_NEAR(acc / 10000.0, exact, 0.02 * exact);
}

TEST(Crps, SingleMemberEqualsMaeExactly) {
  const auto e = random_ensembles(3, 1, 2, 5, 2, 140);
  const auto y = random_sequences(3, 2, 5, 2, 150);
  const auto w = positive_weights(5, 8);
  std::vector<Sequence> f{e[0][0], e[1][0], e[2][0]};
  EXPECT_EQ(metrics::ensemble_crps(e, y, w), metrics::mae(f, y, w));
}

TEST(Crps, TableMatchesPointwiseDoubleSum) {
  const std::size_t S = 2, K = 5, T = 2, N = 4, D = 2;
  const auto e = random_ensembles(S, K, T, N, D, 160);
  const auto y = random_sequences(S, T, N, D, 170);
  const auto w = positive_weights(N, 9);
  const auto table = metrics::ensemble_crps(e, y, w);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < D; ++j) {
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < N; ++a) {
          std::vector<double> x;
          for (std::size_t k = 0; k < K; ++k) x.push_back(e[s][k][t].at(a, j));
          acc += w[a] * double_sum_crps(x, y[s][t].at(a, j));
        }
      EXPECT_NEAR(table[t][j], acc / (S * N), 1e-12);
    }
}

TEST(Metrics, InvariantUnderJointNodePermutation) {
  const std::size_t N = 6;
  const auto e = random_ensembles(2, 3, 1, N, 1, 180);
  const auto y = random_sequences(2, 1, N, 1, 190);
  const auto w = positive_weights(N, 10);
  const std::vector<std::size_t> perm{4, 0, 5, 2, 1, 3};
  auto sh = [&](const Tensor& t) {
    std::vector<double> d(N);
    for (std::size_t i = 0; i < N; ++i) d[i] = t[perm[i]];
    return Tensor::from({N, 1}, d);
  };
  auto pe = e;
  auto py = y;
  std::vector<double> pw(N);
  for (std::size_t i = 0; i < N; ++i) pw[i] = w[perm[i]];
  for (auto& ens : pe)
    for (auto& m : ens) m[0] = sh(m[0]);
  for (auto& s : py) s[0] = sh(s[0]);
  EXPECT_NEAR(metrics::ensemble_crps(e, y, w)[0][0], metrics::ensemble_crps(pe, py, pw)[0][0], 1e-12);
  EXPECT_NEAR(metrics::spread_skill_ratio(e, y, w)[0][0], metrics::spread_skill_ratio(pe, py, pw)[0][0], 1e-12);
}

// ------------------------------------------------------------------ report

TEST(Report, CsvLayout) {
  std::vector<metrics::MetricRow> rows;
  metrics::append_rows(rows, "graph_efm", {"u", "v"}, "crps", {{0.5, std::nan("")}}, 10, 20);
  EXPECT_EQ(metrics::to_csv(rows),
            "model,variable,lead_time_steps,metric,value,S,K\n"
            "graph_efm,u,1,crps,0.5,10,20\n"
            "graph_efm,v,1,crps,NA,10,20\n");
}

}  // namespace
