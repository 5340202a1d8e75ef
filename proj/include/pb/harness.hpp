#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pb/dataset.hpp"
#include "pb/engine.hpp"

namespace pb {

struct RunRecord {
  std::string run_id;
  uint64_t seed = 0;
  double width_multiplier = 1.0;
  size_t dendrite_cycles = 0;
  size_t params = 0;
  double train_acc = 0.0, val_acc = 0.0, test_acc = 0.0;
  double wall_time_s = 0.0;
  std::string error;  // non-empty when the cell failed
};

struct SweepConfig {
  NetworkSpec base;
  std::vector<double> multipliers = {1.0, 0.5, 0.25, 0.125};
  std::vector<size_t> cycles = {0, 1, 2, 3};
  std::vector<uint64_t> seeds = {7};
  PBConfig pb;

  void validate() const;
};

// Trains on the dataset's train split (pb_train; cycles come from
// config.max_cycles), evaluates test accuracy once on the best-val
// weights.
RunRecord train_eval(const NetworkSpec& spec, const Dataset& dataset,
                     const PBConfig& config, uint64_t seed,
                     TrainReport* report_out = nullptr);

// Every (multiplier x cycles x seed) cell, trained independently, sorted
// by (multiplier, cycles, seed). Failed cells carry error text and are
// excluded from the CSV.
std::vector<RunRecord> run_sweep(const SweepConfig& config,
                                 const Dataset& dataset);

void write_sweep_csv(const std::vector<RunRecord>& records, std::ostream& out);

// Per multiplier, the smallest-parameter dendrite run whose val accuracy
// reaches the (m=1, cycles=0) baseline.
std::vector<RunRecord> recovery_points(const std::vector<RunRecord>& records);

}  // namespace pb
