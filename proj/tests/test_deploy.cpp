#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pb/deploy.hpp"
#include "pb/errors.hpp"

using namespace pb;

namespace {

NetworkSpec tiny_mlp() {
  NetworkSpec spec;
  spec.layers.push_back(LayerSpec::fc(2, 4));
  spec.layers.push_back(LayerSpec::act_layer(Activation::Tanh));
  spec.layers.push_back(LayerSpec::fc(4, 2));
  spec.seed = 1;
  return spec;
}

}  // namespace

TEST_CASE("cost_per_billion reproduces the reference table") {
  CHECK(std::fabs(cost_per_billion(0.31, 1581885.0) - 0.0544) <= 1e-4 + 1e-12);
  CHECK(std::fabs(cost_per_billion(0.31, 59604227.0) - 0.0014) <= 1e-4 + 1e-12);
  CHECK(std::fabs(cost_per_billion(0.17, 107001.0) - 0.4413) <= 1e-4 + 1e-12);
  CHECK(std::fabs(cost_per_billion(0.17, 16319841.0) - 0.0028) <= 1e-4 + 1e-12);
  CHECK(cost_per_billion(3.60, 1000000.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(cost_per_billion(0.0, 100.0), config_error);
  CHECK_THROWS_AS(cost_per_billion(0.31, -1.0), config_error);
}

TEST_CASE("cost model is homogeneous: scaling both inputs cancels") {
  for (double k : {2.0, 10.0, 0.5}) {
    const double base = cost_per_billion(0.31, 1581885.0);
    CHECK(cost_per_billion(0.31 * k, 1581885.0 * k) ==
          doctest::Approx(base).epsilon(1e-12));
    // scaling cost alone scales the result linearly
    CHECK(cost_per_billion(0.31 * k, 1581885.0) ==
          doctest::Approx(base * k).epsilon(1e-12));
  }
}

TEST_CASE("speedup examples") {
  CHECK(speedup(123.0, 123.0) == doctest::Approx(1.0));
  CHECK(speedup(16319841.0, 107001.0) == doctest::Approx(152.52).epsilon(1e-4));
  // the cost ratio of the table's first column truncates to 38x
  CHECK(std::floor(0.0544 / 0.0014) == 38.0);
  CHECK_THROWS_AS(speedup(1.0, 0.0), config_error);
}

TEST_CASE("required_replicas examples and monotonicity") {
  CHECK(required_replicas(16000000.0, 1581885.0) == 11);
  CHECK(required_replicas(16000000.0, 16319841.0) == 1);
  CHECK(required_replicas(5000.0, 5000.0) == 1);
  CHECK_THROWS_AS(required_replicas(0.0, 1.0), config_error);
  CHECK_THROWS_AS(required_replicas(1.0, 0.0), config_error);
  // replicas never decrease as the target grows
  uint64_t prev = 0;
  for (double target = 1e5; target <= 2e6; target += 1e5) {
    const uint64_t r = required_replicas(target, 123456.0);
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("format_fixed4 rounds half to even") {
  CHECK(format_fixed4(0.0544) == "0.0544");
  CHECK(format_fixed4(1.0) == "1.0000");
  CHECK(format_fixed4(0.00004) == "0.0000");
  CHECK(format_fixed4(0.00006) == "0.0001");
  CHECK(format_fixed4(152.52) == "152.5200");
}

TEST_CASE("bench validates its arguments") {
  auto model = ModelGraph::build(tiny_mlp());
  CHECK_THROWS_AS(bench_throughput(model, {1, 2}, 0.1, 7), config_error);
  CHECK_THROWS_AS(bench_throughput(model, {}, 0.5, 7), config_error);
  CHECK_THROWS_AS(bench_throughput(model, {4, 2}, 0.5, 7), config_error);
  CHECK_THROWS_AS(bench_throughput(model, {2, 2}, 0.5, 7), config_error);
}

TEST_CASE("bench with a single batch size selects it as optimal") {
  auto model = ModelGraph::build(tiny_mlp());
  BenchResult r = bench_throughput(model, {8}, 0.5, 7);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].error.empty());
  CHECK(r.optimal_batch == 8);
  CHECK(r.rows[0].units_per_s > 0.0);
  // ran for at least the requested duration
  CHECK(r.rows[0].wall_time_s >= 0.5);

  std::ostringstream csv;
  write_bench_csv(r, csv);
  CHECK(csv.str().find("batch_size,units_per_s,wall_time_s") == 0);
}

TEST_CASE("cost table renders one aligned row per entry") {
  std::vector<CostTableRow> rows;
  rows.push_back({"n1-standard-2", 0.31, "original", 1581885, 1581885.0, 64});
  rows.push_back({"c2-standard-4", 0.17, "reduced", 107001, 107001.0, 32});
  const std::string table = render_cost_table(rows);
  CHECK(table.find("n1-standard-2") != std::string::npos);
  CHECK(table.find("c2-standard-4") != std::string::npos);
  CHECK(table.find("0.0544") != std::string::npos);  // cost per B units
  CHECK(std::count(table.begin(), table.end(), '\n') >= 3);  // header + rows
}
