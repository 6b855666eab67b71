#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "restless/core.hpp"
#include "restless/markov.hpp"
#include "restless/rng.hpp"
#include "restless/synthgen.hpp"

using namespace restless;

namespace {

const double kBinState[2] = {0.1, 0.9};  // representative states below/above thr 0.25

Trajectory traj_from_bins(int arm_id, const std::vector<int>& bins) {
  Trajectory tr;
  tr.arm_id = arm_id;
  for (int b : bins) tr.steps.push_back(Step{EngagementState(kBinState[b]), Action::passive});
  return tr;
}

Discretizer binary() { return Discretizer(2, EngagementState(0.25)); }

// Planted order-3 process: the next bin copies the bin three steps back, so
// the order-3 window determines the future exactly while shorter windows see
// an (approximately) fair coin.
std::vector<Trajectory> planted_order3(int n_trajs, int length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Trajectory> trajs;
  for (int arm = 0; arm < n_trajs; ++arm) {
    std::vector<int> bins(static_cast<std::size_t>(length));
    for (int t = 0; t < 3; ++t) bins[static_cast<std::size_t>(t)] = rng.coin_flip() ? 1 : 0;
    for (int t = 3; t < length; ++t) {
      bins[static_cast<std::size_t>(t)] = bins[static_cast<std::size_t>(t - 3)];
    }
    trajs.push_back(traj_from_bins(arm, bins));
  }
  return trajs;
}

}  // namespace

TEST_CASE("a constant trajectory yields one key with all its mass on one bin") {
  const auto trajs = std::vector<Trajectory>{traj_from_bins(0, {1, 1, 1, 1})};
  const auto counts = count_transitions(trajs, 1, binary());
  CHECK(counts.total == 3);
  const auto key = TransitionCounts::key_of({1}, Action::passive, 2);
  REQUIRE(counts.table.count(key) == 1);
  CHECK(counts.table.at(key)[1] == 3);
  CHECK(counts.table.at(key)[0] == 0);
  CHECK(counts.table.size() == 1);
}

TEST_CASE("h equal to the trajectory length counts nothing") {
  const auto trajs = std::vector<Trajectory>{traj_from_bins(0, {1, 0, 1, 0})};
  const auto counts = count_transitions(trajs, 4, binary());
  CHECK(counts.total == 0);
  CHECK(counts.table.empty());
}

TEST_CASE("alternating bins at order 2 produce the two expected keys") {
  const auto trajs = std::vector<Trajectory>{traj_from_bins(0, {0, 1, 0, 1})};
  const auto counts = count_transitions(trajs, 2, binary());
  CHECK(counts.total == 2);
  const auto key01 = TransitionCounts::key_of({0, 1}, Action::passive, 2);
  const auto key10 = TransitionCounts::key_of({1, 0}, Action::passive, 2);
  REQUIRE(counts.table.count(key01) == 1);
  REQUIRE(counts.table.count(key10) == 1);
  CHECK(counts.table.at(key01)[0] == 1);  // (0,1) -> 0
  CHECK(counts.table.at(key01)[1] == 0);
  CHECK(counts.table.at(key10)[1] == 1);  // (1,0) -> 1
  CHECK(counts.table.at(key10)[0] == 0);
}

TEST_CASE("keys separate actions") {
  Trajectory tr;
  tr.arm_id = 0;
  tr.steps = {Step{EngagementState(0.9), Action::active},
              Step{EngagementState(0.9), Action::passive},
              Step{EngagementState(0.1), Action::passive}};
  const auto counts = count_transitions({tr}, 1, binary());
  CHECK(counts.total == 2);
  const auto key_active = TransitionCounts::key_of({1}, Action::active, 2);
  const auto key_passive = TransitionCounts::key_of({1}, Action::passive, 2);
  CHECK(counts.table.at(key_active)[1] == 1);
  CHECK(counts.table.at(key_passive)[0] == 1);
}

TEST_CASE("transition totals equal the sum of max(0, L - h)") {
  std::vector<Trajectory> trajs;
  const std::vector<int> lengths{4, 9, 2, 17};
  Rng rng(5);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    std::vector<int> bins;
    for (int t = 0; t < lengths[i]; ++t) bins.push_back(rng.coin_flip() ? 1 : 0);
    trajs.push_back(traj_from_bins(static_cast<int>(i), bins));
  }
  for (int h : {1, 2, 3, 8}) {
    std::int64_t expected = 0;
    for (int L : lengths) expected += std::max(0, L - h);
    CAPTURE(h);
    CHECK(count_transitions(trajs, h, binary()).total == expected);
  }
}

TEST_CASE("empirical probabilities normalize the per-key counts") {
  TransitionCounts counts;
  counts.order = 1;
  counts.n_bins = 2;

  counts.table[0] = {0, 3};
  CHECK(empirical_probs(counts, 0) == std::vector<double>{0.0, 1.0});
  counts.table[1] = {1, 1};
  CHECK(empirical_probs(counts, 1) == std::vector<double>{0.5, 0.5});
  counts.table[2] = {1, 3};
  CHECK(empirical_probs(counts, 2) == std::vector<double>{0.25, 0.75});

  CHECK_THROWS_AS(empirical_probs(counts, 999), std::out_of_range);
}

TEST_CASE("empirical probabilities of any counted dataset sum to one") {
  const auto trajs = planted_order3(10, 30, 17);
  for (int h : {1, 2, 3}) {
    const auto counts = count_transitions(trajs, h, binary());
    for (const auto& [key, row] : counts.table) {
      const auto probs = empirical_probs(counts, key);
      double sum = 0.0;
      for (double p : probs) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("deterministic order-1 data has zero mean negative log-likelihood") {
  // Constant trajectories: every observed transition has empirical probability 1.
  std::vector<Trajectory> trajs{traj_from_bins(0, {1, 1, 1, 1, 1}),
                                traj_from_bins(1, {0, 0, 0, 0, 0})};
  CHECK(mean_negloglik(trajs, 1, binary()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("iid fair-coin bins give about ln 2 per transition at any order") {
  Rng rng(23);
  std::vector<Trajectory> trajs;
  const int length = 400;
  for (int arm = 0; arm < 30; ++arm) {
    std::vector<int> bins;
    for (int t = 0; t < length; ++t) bins.push_back(rng.coin_flip() ? 1 : 0);
    trajs.push_back(traj_from_bins(arm, bins));
  }
  for (int h : {1, 2, 3}) {
    const double per_transition = mean_negloglik(trajs, h, binary()) / (length - h);
    CAPTURE(h);
    CHECK(per_transition == doctest::Approx(std::log(2.0)).epsilon(0.01));
  }
}

TEST_CASE("a planted order-3 process separates l(3) from l(1)") {
  const auto trajs = planted_order3(40, 40, 29);
  const double l1 = mean_negloglik(trajs, 1, binary());
  const double l3 = mean_negloglik(trajs, 3, binary());
  CHECK(l3 < l1);
  // The order-3 window determines the next bin exactly.
  CHECK(l3 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(l1 > 1.0);  // roughly (L-1) * ln 2
}

TEST_CASE("relative improvement is definitional") {
  const auto pct = relative_improvement({2.0, 1.8});
  REQUIRE(pct.size() == 2);
  CHECK(pct[0] == 0.0);
  CHECK(pct[1] == doctest::Approx(10.0).epsilon(1e-12));
  const auto flat = relative_improvement({1.3, 1.3, 1.3, 1.3});
  for (double pct : flat) CHECK(pct == 0.0);
  CHECK_THROWS_AS(relative_improvement({}), std::invalid_argument);
  CHECK_THROWS_AS(relative_improvement({0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("likelihood report covers orders 1..max and is monotone on refining datasets") {
  const auto planted = planted_order3(40, 40, 31);
  const auto report = likelihood_report(planted, 5, binary());
  REQUIRE(report.orders == std::vector<int>{1, 2, 3, 4, 5});
  REQUIRE(report.mean_negloglik.size() == 5);
  REQUIRE(report.relative_improvement_pct.size() == 5);
  CHECK(report.relative_improvement_pct[0] == 0.0);
  for (std::size_t i = 1; i < report.mean_negloglik.size(); ++i) {
    CHECK(report.mean_negloglik[i] <= report.mean_negloglik[i - 1] + 1e-9);
  }
  // Orders >= 3 stay at the deterministic floor.
  CHECK(report.mean_negloglik[3] <= 1e-12);
  CHECK(report.relative_improvement_pct[2] == doctest::Approx(100.0).epsilon(1e-9));

  // Same monotonicity on a generated synthetic corpus.
  const auto corpus = generate_historical_dataset(10, 40, GenMode::train, 7);
  const auto corpus_report = likelihood_report(corpus, 4, binary());
  for (std::size_t i = 1; i < corpus_report.mean_negloglik.size(); ++i) {
    CHECK(corpus_report.mean_negloglik[i] <= corpus_report.mean_negloglik[i - 1] + 1e-9);
  }
}

TEST_CASE("likelihood CSV has one row per order") {
  const auto trajs = planted_order3(10, 20, 37);
  const auto report = likelihood_report(trajs, 3, binary());
  const std::string path = "markov_scratch_report.csv";
  write_likelihood_csv(path, report);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "h,mean_negloglik,relative_improvement_pct");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
  std::remove(path.c_str());
}

TEST_CASE("degenerate inputs are rejected with clear errors") {
  CHECK_THROWS_AS(count_transitions({traj_from_bins(0, {1, 1})}, 0, binary()),
                  std::invalid_argument);
  CHECK_THROWS_AS(mean_negloglik({traj_from_bins(0, {1, 1})}, 5, binary()),
                  std::invalid_argument);
  CHECK_THROWS_AS(likelihood_report({traj_from_bins(0, {1, 1, 1})}, 0, binary()),
                  std::invalid_argument);
}
