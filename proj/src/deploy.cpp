#include "pb/deploy.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include "pb/rng.hpp"

namespace pb {

double cost_per_billion(double hourly_cost_usd, double units_per_s) {
  if (hourly_cost_usd <= 0.0 || units_per_s <= 0.0)
    throw config_error("cost_per_billion requires positive inputs");
  return hourly_cost_usd / (units_per_s * 3600.0) * 1e9;
}

double speedup(double tps_new, double tps_old) {
  if (tps_new <= 0.0 || tps_old <= 0.0)
    throw config_error("speedup requires positive throughputs");
  return tps_new / tps_old;
}

uint64_t required_replicas(double target_units_per_s,
                           double per_instance_units_per_s) {
  if (target_units_per_s <= 0.0 || per_instance_units_per_s <= 0.0)
    throw config_error("required_replicas requires positive inputs");
  return static_cast<uint64_t>(
      std::ceil(target_units_per_s / per_instance_units_per_s));
}

std::string format_fixed4(double v) {
  // ties-to-even via the default FP rounding mode
  const double r = std::nearbyint(v * 1e4) / 1e4;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", r);
  return buf;
}

namespace {

double run_forwards(const ModelGraph& model, const Tensor& x, size_t threads) {
  if (threads <= 1) {
    Tape tape;
    model.forward(tape, x);
    return 0.0;
  }
  const size_t n = x.dim(0), f = x.dim(1);
  const size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  for (size_t t = 0; t < threads; ++t) {
    const size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&model, &x, lo, hi, f]() {
      std::vector<double> slice((hi - lo) * f);
      std::copy_n(x.values().begin() + lo * f, (hi - lo) * f, slice.begin());
      Tensor xs = Tensor::from({hi - lo, f}, std::move(slice));
      Tape tape;
      model.forward(tape, xs);
    });
  }
  for (auto& th : pool) th.join();
  return 0.0;
}

}  // namespace

BenchResult bench_throughput(const ModelGraph& model,
                             const std::vector<size_t>& batch_sizes,
                             double min_duration_s, uint64_t seed,
                             size_t threads) {
  if (min_duration_s < 0.5)
    throw config_error("bench min_duration_s must be >= 0.5");
  if (batch_sizes.empty()) throw config_error("bench needs >= 1 batch size");
  for (size_t i = 1; i < batch_sizes.size(); ++i)
    if (batch_sizes[i] <= batch_sizes[i - 1])
      throw config_error("bench batch sizes must be strictly increasing");

  BenchResult result;
  double best = -1.0;
  for (size_t bs : batch_sizes) {
    BenchRow row;
    row.batch_size = bs;
    try {
      Rng rng(derive_seed(seed, "bench.b" + std::to_string(bs)));
      std::vector<double> xs(bs * model.input_dim());
      for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
      Tensor x = Tensor::from({bs, model.input_dim()}, std::move(xs));
      run_forwards(model, x, threads);  // warm-up, excluded
      const auto t0 = std::chrono::steady_clock::now();
      size_t iters = 0;
      double elapsed = 0.0;
      do {
        run_forwards(model, x, threads);
        ++iters;
        elapsed = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      } while (elapsed < min_duration_s);
      row.wall_time_s = elapsed;
      row.units_per_s = static_cast<double>(bs * iters) / elapsed;
      if (row.units_per_s > best) {
        best = row.units_per_s;
        result.optimal_batch = bs;
      }
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

void write_bench_csv(const BenchResult& result, std::ostream& out) {
  out << "batch_size,units_per_s,wall_time_s,error\n";
  for (const BenchRow& r : result.rows) {
    out << r.batch_size << ',';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,%.4f,", r.units_per_s,
                  r.wall_time_s);
    out << buf << r.error << '\n';
  }
  out << "optimal_batch," << result.optimal_batch << ",,\n";
}

std::string render_cost_table(const std::vector<CostTableRow>& rows) {
  const std::vector<std::string> header = {
      "Instance",     "Hourly Cost", "Experiment",        "Total Parameters",
      "Units per second", "Cost per B units", "Optimal Batch Size"};
  std::vector<std::vector<std::string>> cells;
  cells.push_back(header);
  for (const CostTableRow& r : rows) {
    std::vector<std::string> c;
    c.push_back(r.instance);
    c.push_back("$" + format_fixed4(r.hourly_cost_usd));
    c.push_back(r.experiment);
    c.push_back(std::to_string(r.total_params));
    {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.0f", r.units_per_s);
      c.push_back(buf);
    }
    c.push_back("$" + format_fixed4(
                         cost_per_billion(r.hourly_cost_usd, r.units_per_s)));
    c.push_back(std::to_string(r.optimal_batch));
    cells.push_back(std::move(c));
  }
  std::vector<size_t> widths(header.size(), 0);
  for (const auto& row : cells)
    for (size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], row[i].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << row[i] << std::string(widths[i] - row[i].size(), ' ');
      out << (i + 1 == row.size() ? "" : "  ");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pb
