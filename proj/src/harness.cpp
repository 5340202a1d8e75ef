#include "pb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace pb {

void SweepConfig::validate() const {
  if (multipliers.empty()) throw config_error("sweep needs >= 1 multiplier");
  for (double m : multipliers)
    if (!(m > 0.0) || m > 1.0)
      throw config_error("sweep multipliers must be in (0, 1]");
  if (cycles.empty()) throw config_error("sweep needs >= 1 cycle count");
  if (seeds.empty()) throw config_error("sweep needs >= 1 seed");
}

namespace {

std::string make_run_id(double m, size_t cycles, uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "m%.4f_c%zu_s%llu", m, cycles,
                static_cast<unsigned long long>(seed));
  return buf;
}

}  // namespace

RunRecord train_eval(const NetworkSpec& spec, const Dataset& dataset,
                     const PBConfig& config, uint64_t seed,
                     TrainReport* report_out) {
  if (dataset.train_idx.empty())
    throw data_error("dataset has no train split; call split() first");
  RunRecord rec;
  rec.run_id = make_run_id(spec.width_multiplier, config.max_cycles, seed);
  rec.seed = seed;
  rec.width_multiplier = spec.width_multiplier;
  rec.dendrite_cycles = config.max_cycles;

  const auto t0 = std::chrono::steady_clock::now();
  NetworkSpec s = spec;
  s.seed = derive_seed(seed, "model");
  ModelGraph model = ModelGraph::build(s);
  const DataView train = dataset.train_view();
  const DataView val = dataset.val_view();
  const DataView test = dataset.test_view();
  TrainReport report =
      pb_train(model, train, val, config, derive_seed(seed, "train"));

  rec.params = model.count_params(true);
  rec.train_acc = report.final_train_acc;
  rec.val_acc = report.best_val_acc;
  rec.test_acc = evaluate_accuracy(model, test);
  if (config.record_timings)
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  if (report_out) *report_out = std::move(report);
  return rec;
}

std::vector<RunRecord> run_sweep(const SweepConfig& config,
                                 const Dataset& dataset) {
  config.validate();
  std::vector<double> multipliers = config.multipliers;
  std::vector<size_t> cycles = config.cycles;
  std::vector<uint64_t> seeds = config.seeds;
  std::sort(multipliers.begin(), multipliers.end());
  std::sort(cycles.begin(), cycles.end());
  std::sort(seeds.begin(), seeds.end());

  std::vector<RunRecord> out;
  for (double m : multipliers)
    for (size_t c : cycles)
      for (uint64_t seed : seeds) {
        NetworkSpec spec = config.base;
        spec.width_multiplier = m;
        PBConfig pb = config.pb;
        pb.max_cycles = c;
        try {
          out.push_back(train_eval(spec, dataset, pb, seed));
        } catch (const std::exception& ex) {
          RunRecord rec;
          rec.run_id = make_run_id(m, c, seed);
          rec.seed = seed;
          rec.width_multiplier = m;
          rec.dendrite_cycles = c;
          rec.error = ex.what();
          out.push_back(std::move(rec));
        }
      }
  return out;
}

void write_sweep_csv(const std::vector<RunRecord>& records,
                     std::ostream& out) {
  out << "run_id,seed,width_multiplier,dendrite_cycles,params,train_acc,"
         "val_acc,test_acc,wall_time_s\n";
  char buf[64];
  for (const RunRecord& r : records) {
    if (!r.error.empty()) continue;
    std::snprintf(buf, sizeof(buf), "%.4f", r.width_multiplier);
    out << r.run_id << ',' << r.seed << ',' << buf << ','
        << r.dendrite_cycles << ',' << r.params << ',';
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,", r.train_acc, r.val_acc,
                  r.test_acc);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%.4f", r.wall_time_s);
    out << buf << '\n';
  }
}

std::vector<RunRecord> recovery_points(const std::vector<RunRecord>& records) {
  const RunRecord* baseline = nullptr;
  for (const RunRecord& r : records)
    if (r.error.empty() && r.width_multiplier == 1.0 && r.dendrite_cycles == 0)
      baseline = &r;
  std::vector<RunRecord> out;
  if (!baseline) return out;
  std::vector<double> ms;
  for (const RunRecord& r : records)
    if (std::find(ms.begin(), ms.end(), r.width_multiplier) == ms.end())
      ms.push_back(r.width_multiplier);
  for (double m : ms) {
    const RunRecord* best = nullptr;
    for (const RunRecord& r : records) {
      if (!r.error.empty() || r.width_multiplier != m ||
          r.dendrite_cycles == 0)
        continue;
      if (r.val_acc >= baseline->val_acc && (!best || r.params < best->params))
        best = &r;
    }
    if (best) out.push_back(*best);
  }
  return out;
}

}  // namespace pb
