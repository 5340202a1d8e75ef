// Command-line front end: train / sweep / cost / bench / gen-data / verify.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pb/dataset.hpp"
#include "pb/deploy.hpp"
#include "pb/harness.hpp"
#include "pb/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  uint64_t seed = 7;
  std::string output_dir = "out";
  // dataset
  std::string dataset_kind = "two_spirals";
  size_t n_per_class = 500;
  double turns = 1.75;
  double noise_sigma = 0.05;
  size_t n_classes = 3;
  double center_radius = 2.0;
  double blob_sigma = 0.3;
  std::string idx_images, idx_labels;
  double train_frac = 0.7, val_frac = 0.15;
  // network
  pb::NetworkSpec network;
  // pb + sweep
  pb::PBConfig pb;
  std::vector<double> sweep_multipliers = {1.0, 0.5, 0.25, 0.125};
  std::vector<size_t> sweep_cycles = {0, 1, 2, 3};
  std::vector<uint64_t> sweep_seeds = {7};
};

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw pb::config_error("unknown config key '" + it.key() + "' in " +
                             where);
  }
}

pb::NetworkSpec default_network() {
  pb::NetworkSpec spec;
  spec.layers = {pb::LayerSpec::fc(2, 16),
                 pb::LayerSpec::act_layer(pb::Activation::Tanh),
                 pb::LayerSpec::fc(16, 16),
                 pb::LayerSpec::act_layer(pb::Activation::Tanh),
                 pb::LayerSpec::fc(16, 2)};
  return spec;
}

pb::NetworkSpec parse_network(const json& j) {
  reject_unknown(j, {"layers", "width_multiplier", "in_height", "in_width"},
                 "network");
  pb::NetworkSpec spec;
  spec.width_multiplier = j.value("width_multiplier", 1.0);
  spec.in_height = j.value("in_height", 0);
  spec.in_width = j.value("in_width", 0);
  if (!j.contains("layers")) throw pb::config_error("network.layers missing");
  for (const json& lj : j.at("layers")) {
    reject_unknown(lj,
                   {"kind", "in", "out", "in_channels", "out_channels",
                    "stride", "padding", "act"},
                   "network.layers[]");
    const std::string kind = lj.at("kind");
    if (kind == "fully_connected") {
      spec.layers.push_back(
          pb::LayerSpec::fc(lj.at("in").get<size_t>(), lj.at("out").get<size_t>()));
    } else if (kind == "conv2d") {
      spec.layers.push_back(pb::LayerSpec::conv(
          lj.at("in_channels").get<size_t>(), lj.at("out_channels").get<size_t>(),
          lj.value("stride", 1), lj.value("padding", 1)));
    } else if (kind == "activation") {
      spec.layers.push_back(pb::LayerSpec::act_layer(
          pb::activation_from_string(lj.value("act", "tanh"))));
    } else if (kind == "flatten") {
      spec.layers.push_back(pb::LayerSpec::flatten_layer());
    } else if (kind == "global_avg_pool") {
      spec.layers.push_back(pb::LayerSpec::gap_layer());
    } else {
      throw pb::config_error("unknown layer kind: " + kind);
    }
  }
  return spec;
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  cfg.network = default_network();
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw pb::usage_error("config file not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw pb::config_error("config parse error in " + path + ": " + ex.what());
  }
  reject_unknown(j, {"seed", "output_dir", "dataset", "network", "pb", "sweep"},
                 path);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d,
                   {"kind", "n_per_class", "turns", "noise_sigma", "n_classes",
                    "center_radius", "sigma", "images", "labels", "train_frac",
                    "val_frac"},
                   "dataset");
    cfg.dataset_kind = d.value("kind", cfg.dataset_kind);
    cfg.n_per_class = d.value("n_per_class", cfg.n_per_class);
    cfg.turns = d.value("turns", cfg.turns);
    cfg.noise_sigma = d.value("noise_sigma", cfg.noise_sigma);
    cfg.n_classes = d.value("n_classes", cfg.n_classes);
    cfg.center_radius = d.value("center_radius", cfg.center_radius);
    cfg.blob_sigma = d.value("sigma", cfg.blob_sigma);
    cfg.idx_images = d.value("images", cfg.idx_images);
    cfg.idx_labels = d.value("labels", cfg.idx_labels);
    cfg.train_frac = d.value("train_frac", cfg.train_frac);
    cfg.val_frac = d.value("val_frac", cfg.val_frac);
  }
  if (j.contains("network")) cfg.network = parse_network(j.at("network"));
  if (j.contains("pb")) {
    const json& p = j.at("pb");
    reject_unknown(p,
                   {"pool_size", "candidate_epochs", "max_epochs",
                    "patience_normal", "patience_dendrite", "improvement_eps",
                    "max_cycles", "lr_main", "lr_candidate",
                    "cascade_dendrites", "batch_size", "target_layers"},
                   "pb");
    cfg.pb.pool_size = p.value("pool_size", cfg.pb.pool_size);
    cfg.pb.candidate_epochs = p.value("candidate_epochs", cfg.pb.candidate_epochs);
    cfg.pb.max_epochs = p.value("max_epochs", cfg.pb.max_epochs);
    cfg.pb.patience_normal = p.value("patience_normal", cfg.pb.patience_normal);
    cfg.pb.patience_dendrite =
        p.value("patience_dendrite", cfg.pb.patience_dendrite);
    cfg.pb.improvement_eps = p.value("improvement_eps", cfg.pb.improvement_eps);
    cfg.pb.max_cycles = p.value("max_cycles", cfg.pb.max_cycles);
    cfg.pb.lr_main = p.value("lr_main", cfg.pb.lr_main);
    cfg.pb.lr_candidate = p.value("lr_candidate", cfg.pb.lr_candidate);
    cfg.pb.cascade_dendrites =
        p.value("cascade_dendrites", cfg.pb.cascade_dendrites);
    cfg.pb.batch_size = p.value("batch_size", cfg.pb.batch_size);
    if (p.contains("target_layers"))
      cfg.pb.target_layers = p.at("target_layers").get<std::vector<size_t>>();
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"multipliers", "cycles", "seeds"}, "sweep");
    if (s.contains("multipliers"))
      cfg.sweep_multipliers = s.at("multipliers").get<std::vector<double>>();
    if (s.contains("cycles"))
      cfg.sweep_cycles = s.at("cycles").get<std::vector<size_t>>();
    if (s.contains("seeds"))
      cfg.sweep_seeds = s.at("seeds").get<std::vector<uint64_t>>();
  }
  return cfg;
}

pb::Dataset build_dataset(const RunConfig& cfg) {
  pb::Dataset ds;
  const uint64_t dseed = pb::derive_seed(cfg.seed, "data");
  if (cfg.dataset_kind == "two_spirals")
    ds = pb::gen_two_spirals(cfg.n_per_class, cfg.turns, cfg.noise_sigma, dseed);
  else if (cfg.dataset_kind == "blobs")
    ds = pb::gen_blobs(cfg.n_per_class, cfg.n_classes, cfg.center_radius,
                       cfg.blob_sigma, dseed);
  else if (cfg.dataset_kind == "idx")
    ds = pb::load_idx(cfg.idx_images, cfg.idx_labels);
  else
    throw pb::config_error("unknown dataset kind: " + cfg.dataset_kind);
  ds.split(dseed, cfg.train_frac, cfg.val_frac);
  return ds;
}

void prepare_output(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
}

int cmd_train(const RunConfig& cfg) {
  prepare_output(cfg);
  pb::Dataset ds = build_dataset(cfg);
  pb::TrainReport report;
  pb::RunRecord rec = pb::train_eval(cfg.network, ds, cfg.pb, cfg.seed, &report);

  std::ofstream csv(cfg.output_dir + "/report.csv");
  pb::write_report_csv(report, csv);

  pb::NetworkSpec s = cfg.network;
  s.seed = pb::derive_seed(cfg.seed, "model");

  std::cout << "run " << rec.run_id << ": params=" << rec.params
            << " train_acc=" << pb::format_fixed4(rec.train_acc)
            << " val_acc=" << pb::format_fixed4(rec.val_acc)
            << " test_acc=" << pb::format_fixed4(rec.test_acc) << "\n"
            << "report: " << cfg.output_dir << "/report.csv\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  prepare_output(cfg);
  pb::Dataset ds = build_dataset(cfg);
  pb::SweepConfig sweep;
  sweep.base = cfg.network;
  sweep.multipliers = cfg.sweep_multipliers;
  sweep.cycles = cfg.sweep_cycles;
  sweep.seeds = cfg.sweep_seeds;
  sweep.pb = cfg.pb;
  const auto records = pb::run_sweep(sweep, ds);

  std::ofstream csv(cfg.output_dir + "/sweep.csv");
  pb::write_sweep_csv(records, csv);
  size_t failures = 0;
  for (const auto& r : records)
    if (!r.error.empty()) {
      ++failures;
      std::cerr << "cell " << r.run_id << " failed: " << r.error << "\n";
    }

  for (const auto& r : pb::recovery_points(records))
    std::cout << "recovery point m=" << pb::format_fixed4(r.width_multiplier)
              << ": " << r.run_id << " params=" << r.params
              << " val_acc=" << pb::format_fixed4(r.val_acc) << "\n";
  std::cout << "sweep: " << records.size() - failures << " rows written to "
            << cfg.output_dir << "/sweep.csv\n";
  return 0;
}

int cmd_cost(double hourly, double tps, double old_tps, double target,
             const std::string& table_path, const std::string& out_path) {
  if (hourly < 0.0 || tps < 0.0 || old_tps < 0.0 || target < 0.0)
    throw pb::config_error("cost inputs must be positive");
  std::ostringstream out;
  if (hourly > 0.0 && tps > 0.0)
    out << "cost_per_billion: "
        << pb::format_fixed4(pb::cost_per_billion(hourly, tps)) << "\n";
  if (old_tps > 0.0 && tps > 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", pb::speedup(tps, old_tps));
    out << "speedup: " << buf << "x\n";
  }
  if (target > 0.0 && tps > 0.0)
    out << "required_replicas: " << pb::required_replicas(target, tps) << "\n";
  if (!table_path.empty()) {
    std::ifstream in(table_path);
    if (!in) throw pb::usage_error("table file not found: " + table_path);
    json j;
    in >> j;
    std::vector<pb::CostTableRow> rows;
    for (const json& rj : j) {
      reject_unknown(rj,
                     {"instance", "hourly_cost", "experiment", "total_params",
                      "units_per_s", "optimal_batch"},
                     table_path);
      pb::CostTableRow row;
      row.instance = rj.at("instance");
      row.hourly_cost_usd = rj.at("hourly_cost");
      row.experiment = rj.at("experiment");
      row.total_params = rj.at("total_params");
      row.units_per_s = rj.at("units_per_s");
      row.optimal_batch = rj.value("optimal_batch", 0);
      rows.push_back(std::move(row));
    }
    out << pb::render_cost_table(rows);
  }
  std::cout << out.str();
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw pb::format_error("cannot write " + out_path);
    f << out.str();
  }
  return 0;
}

int cmd_bench(const RunConfig& cfg, const std::vector<size_t>& batches,
              double min_duration, size_t threads) {
  prepare_output(cfg);
  pb::NetworkSpec s = cfg.network;
  s.seed = pb::derive_seed(cfg.seed, "model");
  pb::ModelGraph model = pb::ModelGraph::build(s);
  const auto result = pb::bench_throughput(model, batches, min_duration,
                                           cfg.seed, threads);
  std::ofstream csv(cfg.output_dir + "/bench.csv");
  pb::write_bench_csv(result, csv);
  for (const auto& r : result.rows) {
    if (!r.error.empty()) {
      std::cout << "batch " << r.batch_size << ": failed (" << r.error << ")\n";
      continue;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.0f", r.units_per_s);
    std::cout << "batch " << r.batch_size << ": " << buf << " samples/s\n";
  }
  std::cout << "optimal batch: " << result.optimal_batch << "\n"
            << "bench: " << cfg.output_dir << "/bench.csv\n";
  return 0;
}

int cmd_gen_data(const RunConfig& cfg, bool idx) {
  prepare_output(cfg);
  pb::Dataset ds = build_dataset(cfg);
  pb::save_csv(ds, cfg.output_dir + "/data.csv");
  std::cout << "wrote " << ds.size() << " samples to " << cfg.output_dir
            << "/data.csv\n";
  if (idx) {
    pb::save_idx(ds, cfg.output_dir + "/data-images.idx",
                 cfg.output_dir + "/data-labels.idx");
    std::cout << "wrote IDX pair to " << cfg.output_dir << "\n";
  }
  return 0;
}

int cmd_verify() {
  const auto results = pb::run_verification();
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": "
              << r.detail << "\n";
    all = all && r.passed;
  }
  if (!all) throw pb::error("verification failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perforated Backpropagation trainer, compression sweep "
               "harness, and deployment cost calculator"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed_override = 0;
  bool seed_set = false;
  int cycles_override = -1;
  double width_override = 0.0;
  std::string out_override;
  bool timings = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed_override, "override top-level seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_override, "override output directory");
    sub->add_flag("--timings", timings,
                  "record real wall times in CSV output (off by default so "
                  "re-runs are byte-identical)");
  };

  CLI::App* train = app.add_subcommand("train", "train one model (PB or baseline)");
  add_common(train);
  train->add_option("--cycles", cycles_override,
                    "dendrite cycles (0 = plain baseline)");
  train->add_option("--width", width_override, "width multiplier override");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "width-multiplier x dendrite-cycle compression sweep");
  add_common(sweep);

  CLI::App* cost = app.add_subcommand("cost", "deployment cost arithmetic");
  double hourly = 0.0, tps = 0.0, old_tps = 0.0, target = 0.0;
  std::string table_path, cost_out;
  cost->add_option("--hourly", hourly, "instance cost, USD per hour");
  cost->add_option("--tps", tps, "throughput, units per second");
  cost->add_option("--old-tps", old_tps, "reference throughput for speedup");
  cost->add_option("--target", target, "required units/s for replica count");
  cost->add_option("--table", table_path, "JSON rows for an aligned cost table");
  cost->add_option("--cost-out", cost_out, "also write the output to this file");

  CLI::App* bench =
      app.add_subcommand("bench", "forward-pass throughput over batch sizes");
  add_common(bench);
  std::vector<size_t> batches = {1, 8, 32, 128};
  double min_duration = 0.5;
  size_t threads = 1;
  bench->add_option("--batches", batches, "batch sizes (strictly increasing)");
  bench->add_option("--min-duration", min_duration,
                    "seconds per batch size (>= 0.5)");
  bench->add_option("--threads", threads, "forward-pass worker threads");

  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset");
  add_common(gen);
  bool gen_idx = false;
  gen->add_flag("--idx", gen_idx, "also write an IDX image/label pair");

  CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
  (void)verify;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    cfg.pb.record_timings = timings;
    if (cycles_override >= 0)
      cfg.pb.max_cycles = static_cast<size_t>(cycles_override);
    if (width_override > 0.0) cfg.network.width_multiplier = width_override;

    if (train->parsed()) return cmd_train(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (cost->parsed())
      return cmd_cost(hourly, tps, old_tps, target, table_path, cost_out);
    if (bench->parsed()) return cmd_bench(cfg, batches, min_duration, threads);
    if (gen->parsed()) return cmd_gen_data(cfg, gen_idx);
    if (verify->parsed()) return cmd_verify();
  } catch (const pb::usage_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const pb::config_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const pb::data_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const pb::format_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
  return 0;
}
