#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pb/network.hpp"

namespace pb {

struct CostModel {
  double hourly_cost_usd = 0.0;
  double units_per_s = 0.0;
};

// hourly_cost / (units_per_s * 3600) * 1e9
double cost_per_billion(double hourly_cost_usd, double units_per_s);

double speedup(double tps_new, double tps_old);

// ceil(target / per_instance)
uint64_t required_replicas(double target_units_per_s,
                           double per_instance_units_per_s);

// 4 fractional digits, half-even
std::string format_fixed4(double v);

struct BenchRow {
  size_t batch_size = 0;
  double units_per_s = 0.0;
  double wall_time_s = 0.0;
  std::string error;  // non-empty when the forward pass failed
};

struct BenchResult {
  std::vector<BenchRow> rows;
  size_t optimal_batch = 0;  // argmax units_per_s over successful rows
};

// Repeated forward passes per batch size until min_duration_s elapses
// (one warm-up iteration excluded). batch_sizes must be strictly
// increasing.
BenchResult bench_throughput(const ModelGraph& model,
                             const std::vector<size_t>& batch_sizes,
                             double min_duration_s, uint64_t seed,
                             size_t threads = 1);

void write_bench_csv(const BenchResult& result, std::ostream& out);

struct CostTableRow {
  std::string instance;
  double hourly_cost_usd = 0.0;
  std::string experiment;
  uint64_t total_params = 0;
  double units_per_s = 0.0;
  size_t optimal_batch = 0;
};

// Aligned-column text table: instance, hourly cost, experiment, total
// parameters, units/s, cost per B units, optimal batch size.
std::string render_cost_table(const std::vector<CostTableRow>& rows);

}  // namespace pb
