// Acceptance harness: re-checks every release criterion end to end and
// prints exactly one PASS/FAIL line per criterion. Criteria 6, 7 and 9 run
// the CLI against the frozen pilot config and compare with the golden
// artifacts committed under tests/golden/.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pb/dataset.hpp"
#include "pb/deploy.hpp"
#include "pb/engine.hpp"
#include "pb/errors.hpp"
#include "pb/network.hpp"
#include "pb/rng.hpp"
#include "pb/tensor.hpp"

namespace {

std::string g_cli, g_golden;

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string out_path = "acceptance_cli_out.txt";
  const int status =
      std::system((g_cli + " " + args + " > " + out_path + " 2>&1").c_str());
  if (output) *output = read_file(out_path);
  std::remove(out_path.c_str());
  return WEXITSTATUS(status);
}

double parse_metric(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  if (pos == std::string::npos) throw pb::error("missing metric " + key);
  return std::atof(text.c_str() + pos + key.size() + 1);
}

pb::NetworkSpec mlp(std::vector<size_t> dims, uint64_t seed) {
  pb::NetworkSpec spec;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    spec.layers.push_back(pb::LayerSpec::fc(dims[i], dims[i + 1]));
    if (i + 2 < dims.size())
      spec.layers.push_back(pb::LayerSpec::act_layer(pb::Activation::Tanh));
  }
  spec.seed = seed;
  return spec;
}

pb::ErrorMatrix random_error(pb::Rng& rng, size_t patterns, size_t outputs) {
  pb::ErrorMatrix e;
  e.patterns = patterns;
  e.outputs = outputs;
  e.e.resize(patterns * outputs);
  for (auto& x : e.e) x = rng.normal();
  e.compute_means();
  return e;
}

pb::Tensor random_tensor(pb::Rng& rng, pb::Shape shape, bool grad = true) {
  std::vector<double> v(pb::shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return pb::Tensor::from(std::move(shape), std::move(v), grad);
}

// --- criterion 1: gradient correctness ---------------------------------

bool check_gradients(std::string& detail) {
  const double t0 = now_s();
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    pb::Rng rng(pb::derive_seed(seed, "acc.grad"));
    {
      auto x = random_tensor(rng, {3, 4});
      auto w = random_tensor(rng, {4, 2}, false);
      auto b = random_tensor(rng, {2}, false);
      worst = std::max(
          worst, pb::grad_check(
                     [&](pb::Tape& t, pb::Tensor& v) {
                       auto h = pb::activation(t, pb::add_bias(t, pb::matmul(t, v, w), b),
                                               pb::Activation::Tanh);
                       return pb::sum(t, pb::mul(t, h, h));
                     },
                     x, 1e-5));
    }
    {
      auto x = random_tensor(rng, {4, 3});
      std::vector<double> onehot(12, 0.0);
      for (size_t p = 0; p < 4; ++p) onehot[p * 3 + rng.below(3)] = 1.0;
      auto target = pb::Tensor::from({4, 3}, onehot);
      worst = std::max(
          worst, pb::grad_check(
                     [&](pb::Tape& t, pb::Tensor& v) {
                       return pb::softmax_cross_entropy(t, v, target).loss;
                     },
                     x, 1e-5));
    }
    {
      // composed candidate objective S: ascent direction of candidate_step
      // against central finite differences of S in every coordinate
      auto model = pb::ModelGraph::build(mlp({2, 4, 2}, seed));
      std::vector<double> xs(16 * 2);
      for (auto& v : xs) v = rng.normal();
      auto x = pb::Tensor::from({16, 2}, xs);
      std::map<size_t, pb::LayerTrace> trace;
      pb::Tape tape;
      model.forward(tape, x, &trace);
      pb::ErrorMatrix e = random_error(rng, 16, 2);
      pb::PBConfig cfg;
      cfg.pool_size = 1;
      auto pool = pb::spawn_candidates(model, 0, cfg, seed);
      const auto w0 = pool.per_neuron[0][0].win.values();
      const auto b0 = pool.per_neuron[0][0].bias.values();
      pb::candidate_step(pool, trace.at(0), e, 1e-6);
      const auto w1 = pool.per_neuron[0][0].win.values();
      for (size_t i = 0; i < w0.size(); ++i) {
        const double analytic = (w1[i] - w0[i]) / 1e-6;
        auto probe = [&](double d) {
          auto p = pb::spawn_candidates(model, 0, cfg, seed);
          p.per_neuron[0][0].win.values() = w0;
          p.per_neuron[0][0].win.values()[i] += d;
          p.per_neuron[0][0].bias.values() = b0;
          return pb::correlation_score(
              pb::candidate_output(p, p.per_neuron[0][0], 0, trace.at(0)), e);
        };
        const double numeric = (probe(1e-5) - probe(-1e-5)) / 2e-5;
        worst = std::max(worst,
                         std::fabs(analytic - numeric) /
                             std::max({1.0, std::fabs(analytic),
                                       std::fabs(numeric)}));
      }
    }
  }
  const double dt = now_s() - t0;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e in %.1fs", worst, dt);
  detail = buf;
  return worst < 1e-4 && dt < 30.0;
}

// --- criterion 2: freeze / perforation suite ---------------------------

bool check_freeze(std::string& detail) {
  pb::Rng rng(pb::derive_seed(2, "acc.freeze"));
  auto model = pb::ModelGraph::build(mlp({2, 6, 2}, 2));
  std::vector<double> xs(32 * 2);
  for (auto& v : xs) v = rng.normal();
  auto x = pb::Tensor::from({32, 2}, xs);
  std::vector<double> onehot(32 * 2, 0.0);
  for (size_t p = 0; p < 32; ++p) onehot[p * 2 + rng.below(2)] = 1.0;
  auto y = pb::Tensor::from({32, 2}, onehot);

  // full dendrite phase with Main frozen: every pre-existing main
  // parameter must keep its exact value (integration adds new u
  // parameters, so the group hash itself changes structurally)
  model.set_trainable(pb::ParamGroup::Main, false);
  std::vector<std::vector<double>> main_before;
  for (const auto& p : model.params())
    if (p.role == pb::ParamRole::Weight || p.role == pb::ParamRole::Bias)
      main_before.push_back(p.tensor.values());
  std::map<size_t, pb::LayerTrace> trace;
  {
    pb::Tape tape;
    model.forward(tape, x, &trace);
  }
  pb::ErrorMatrix e = pb::residual_error(model, x, y);
  pb::PBConfig cfg;
  cfg.pool_size = 2;
  auto pool = pb::spawn_candidates(model, 0, cfg, 5);
  for (int step = 0; step < 25; ++step)
    pb::candidate_step(pool, trace.at(0), e, 0.01);
  pb::select_and_integrate(model, pool);
  model.set_trainable(pb::ParamGroup::Main, true);
  model.set_trainable(pb::ParamGroup::DendriteInput, false);
  std::vector<std::vector<double>> main_after;
  for (const auto& p : model.params())
    if (p.role == pb::ParamRole::Weight || p.role == pb::ParamRole::Bias)
      main_after.push_back(p.tensor.values());
  const bool main_frozen = main_before == main_after;

  // full normal phase: installed dendrite input weights must not move
  const uint64_t din_hash = model.hash_group(pb::ParamGroup::DendriteInput);
  pb::DataView data{x, y, std::vector<int>(32, 0)};
  for (size_t p = 0; p < 32; ++p)
    data.labels[p] = onehot[p * 2 + 1] == 1.0 ? 1 : 0;
  pb::Rng sgd_rng(pb::derive_seed(2, "acc.sgd"));
  for (int epoch = 0; epoch < 5; ++epoch)
    pb::sgd_epoch(model, data, 0.05, 8, sgd_rng);
  const bool din_frozen =
      model.hash_group(pb::ParamGroup::DendriteInput) == din_hash;

  // u = 0 everywhere: main gradients equal the dendrite-free model's
  auto plain = pb::ModelGraph::build(mlp({2, 6, 2}, 2));
  auto dendritic = pb::ModelGraph::build(mlp({2, 6, 2}, 2));
  {
    std::map<size_t, pb::LayerTrace> tr;
    pb::Tape tape;
    dendritic.forward(tape, x, &tr);
    auto p2 = pb::spawn_candidates(dendritic, 0, cfg, 5);
    pb::candidate_step(p2, tr.at(0), e, 0.01);
    pb::select_and_integrate(dendritic, p2);  // u stays 0
  }
  auto grads = [&](pb::ModelGraph& m) {
    pb::Tape tape;
    auto r = pb::softmax_cross_entropy(tape, m.forward(tape, x), y);
    tape.backward(r.loss);
    std::vector<double> g;
    for (const auto& p : m.params())
      if (p.role == pb::ParamRole::Weight || p.role == pb::ParamRole::Bias)
        g.insert(g.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    return g;
  };
  const auto g1 = grads(plain);
  const auto g2 = grads(dendritic);
  const bool grads_equal =
      g1.size() == g2.size() &&
      std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0;

  detail = std::string("main ") + (main_frozen ? "frozen" : "MOVED") +
           ", dendrite inputs " + (din_frozen ? "frozen" : "MOVED") +
           ", u=0 grads " + (grads_equal ? "exact" : "DIFFER");
  return main_frozen && din_frozen && grads_equal;
}

// --- criterion 3: zero-impact integration ------------------------------

bool check_zero_impact(std::string& detail) {
  pb::Rng rng(pb::derive_seed(3, "acc.zero"));
  auto model = pb::ModelGraph::build(mlp({2, 8, 2}, 3));
  std::vector<double> xs(100 * 2);
  for (auto& v : xs) v = rng.normal();
  auto x = pb::Tensor::from({100, 2}, xs);
  std::map<size_t, pb::LayerTrace> trace;
  pb::Tape t0;
  const auto before = model.forward(t0, x, &trace).values();

  pb::PBConfig cfg;
  cfg.pool_size = 4;
  auto pool = pb::spawn_candidates(model, 0, cfg, 7);
  pb::ErrorMatrix e = random_error(rng, 100, 2);
  pb::candidate_step(pool, trace.at(0), e, 0.01);
  pb::select_and_integrate(model, pool);

  pb::Tape t1;
  const auto after = model.forward(t1, x).values();
  const bool equal =
      before.size() == after.size() &&
      std::memcmp(before.data(), after.data(),
                  before.size() * sizeof(double)) == 0;
  detail = equal ? "outputs bit-identical on 100 inputs" : "outputs DIFFER";
  return equal;
}

// --- criterion 4: correlation oracle -----------------------------------

bool check_correlation(std::string& detail) {
  pb::Rng rng(pb::derive_seed(4, "acc.corr"));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const size_t patterns = 2 + rng.below(31);
    const size_t outputs = 1 + rng.below(8);
    pb::ErrorMatrix e = random_error(rng, patterns, outputs);
    std::vector<double> v(patterns);
    for (auto& x : v) x = rng.normal();

    double v_mean = 0.0;
    for (double a : v) v_mean += a;
    v_mean /= static_cast<double>(patterns);
    double brute = 0.0;
    for (size_t o = 0; o < outputs; ++o) {
      double cov = 0.0;
      for (size_t p = 0; p < patterns; ++p)
        cov += (v[p] - v_mean) * (e.at(p, o) - e.col_mean[o]);
      brute += std::fabs(cov);
    }
    worst = std::max(worst, std::fabs(pb::correlation_score(v, e) - brute));
  }

  // argmax invariance under E -> lambda * E
  auto model = pb::ModelGraph::build(mlp({2, 6, 2}, 4));
  std::vector<double> xs(24 * 2);
  for (auto& v : xs) v = rng.normal();
  auto x = pb::Tensor::from({24, 2}, xs);
  std::map<size_t, pb::LayerTrace> trace;
  pb::Tape tape;
  model.forward(tape, x, &trace);
  pb::ErrorMatrix e = random_error(rng, 24, 2);
  pb::PBConfig cfg;
  cfg.pool_size = 4;
  auto argmaxes = [&](double lambda) {
    pb::ErrorMatrix scaled = e;
    for (auto& v : scaled.e) v *= lambda;
    scaled.compute_means();
    auto pool = pb::spawn_candidates(model, 0, cfg, 17);
    pb::candidate_step(pool, trace.at(0), scaled, 0.0);
    std::vector<size_t> best;
    for (const auto& neuron : pool.per_neuron) {
      size_t bi = 0;
      for (size_t q = 1; q < neuron.size(); ++q)
        if (neuron[q].score > neuron[bi].score) bi = q;
      best.push_back(bi);
    }
    return best;
  };
  const auto base = argmaxes(1.0);
  bool invariant = true;
  for (double lambda : {0.5, 2.0, 10.0})
    invariant = invariant && argmaxes(lambda) == base;

  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |diff| %.2e, argmax %s", worst,
                invariant ? "invariant" : "NOT invariant");
  detail = buf;
  return worst < 1e-12 && invariant;
}

// --- criterion 5: parameter accounting ---------------------------------

bool check_param_accounting(std::string& detail) {
  pb::Rng rng(pb::derive_seed(5, "acc.params"));
  size_t specs = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const size_t h1 = 2 + rng.below(12);
    const size_t h2 = 2 + rng.below(12);
    auto model = pb::ModelGraph::build(mlp({2, h1, h2, 2}, 500 + trial));
    size_t expected = model.count_params();
    const size_t cycles = 1 + rng.below(3);
    std::vector<double> xs(8 * 2);
    for (auto& v : xs) v = rng.normal();
    auto x = pb::Tensor::from({8, 2}, xs);
    pb::PBConfig cfg;
    cfg.pool_size = 2;
    for (size_t c = 0; c < cycles; ++c) {
      for (size_t layer : model.hidden_param_layers()) {
        std::map<size_t, pb::LayerTrace> trace;
        pb::Tape tape;
        model.forward(tape, x, &trace);
        pb::ErrorMatrix e = random_error(rng, 8, 2);
        auto pool = pb::spawn_candidates(model, layer, cfg, rng.next_u64());
        pb::candidate_step(pool, trace.at(layer), e, 0.01);
        pb::select_and_integrate(model, pool);
        expected += pb::dendrite_cycle_params(model.layer(layer).out_dim,
                                              model.layer(layer).in_dim, c);
      }
      if (model.count_params() != expected) {
        detail = "closed-form mismatch on spec " + std::to_string(trial);
        return false;
      }
    }
    ++specs;
  }
  detail = std::to_string(specs) + " random specs match n*(d+c+1)+n";
  return true;
}

// --- criterion 6: desk-scale improvement -------------------------------

bool check_improvement(std::string& detail) {
  const std::string cfg = g_golden + "/pilot_config.json";
  const double t0 = now_s();
  std::string base_out, pb_out;
  if (run_cli("train --config " + cfg + " --cycles 0 --out acc_c6_base",
              &base_out) != 0 ||
      run_cli("train --config " + cfg + " --out acc_c6_pb", &pb_out) != 0) {
    detail = "CLI run failed";
    return false;
  }
  const double dt = now_s() - t0;
  const double base_val = parse_metric(base_out, "val_acc");
  const double pb_val = parse_metric(pb_out, "val_acc");

  // frozen pilot thresholds
  double want_base = -1.0, want_pb = -1.0, min_gap = 0.05;
  std::istringstream in(read_file(g_golden + "/improvement.txt"));
  std::string key;
  double value;
  while (in >> key) {
    if (key[0] == '#') {
      std::getline(in, key);
      continue;
    }
    in >> value;
    if (key == "baseline_val_acc") want_base = value;
    if (key == "pb_val_acc") want_pb = value;
    if (key == "min_gap") min_gap = value;
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "baseline %.4f (golden %.4f), pb %.4f (golden %.4f), %.1fs",
                base_val, want_base, pb_val, want_pb, dt);
  detail = buf;
  return std::fabs(base_val - want_base) < 1e-9 &&
         std::fabs(pb_val - want_pb) < 1e-9 &&
         pb_val - base_val >= min_gap && dt < 120.0;
}

// --- criterion 7: compression recovery ---------------------------------

struct SweepCell {
  size_t params = 0;
  double val_acc = 0.0;
};

std::map<std::string, SweepCell> parse_sweep(const std::string& csv) {
  std::map<std::string, SweepCell> cells;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() < 9) continue;
    cells[fields[0]] = {static_cast<size_t>(std::atoll(fields[4].c_str())),
                        std::atof(fields[6].c_str())};
  }
  return cells;
}

bool check_compression(std::string& detail) {
  const std::string cfg = g_golden + "/pilot_config.json";
  const double t0 = now_s();
  if (run_cli("sweep --config " + cfg + " --out acc_c7") != 0) {
    detail = "CLI sweep failed";
    return false;
  }
  const double dt = now_s() - t0;
  const std::string got = read_file("acc_c7/sweep.csv");
  const std::string want = read_file(g_golden + "/compression_sweep.csv");
  const bool matches_golden = got == want && !want.empty();

  auto cells = parse_sweep(got);
  const auto baseline = cells.find("m1.0000_c0_s7");
  const auto compressed = cells.find("m0.2500_c3_s7");
  bool recovered = false;
  char buf[160];
  if (baseline != cells.end() && compressed != cells.end()) {
    recovered = compressed->second.val_acc >= baseline->second.val_acc - 0.02 &&
                compressed->second.params < baseline->second.params;
    std::snprintf(buf, sizeof(buf),
                  "m=0.25+dendrites %.4f/%zu params vs m=1.0 baseline %.4f/%zu"
                  " params, golden %s, %.1fs",
                  compressed->second.val_acc, compressed->second.params,
                  baseline->second.val_acc, baseline->second.params,
                  matches_golden ? "matched" : "MISMATCH", dt);
    detail = buf;
  } else {
    detail = "required sweep cells missing";
  }
  return matches_golden && recovered && dt < 600.0;
}

// --- criterion 8: cost table arithmetic --------------------------------

bool check_cost_model(std::string& detail) {
  const double c1 = pb::cost_per_billion(0.31, 1581885.0);
  const double c2 = pb::cost_per_billion(0.31, 59604227.0);
  const double c3 = pb::cost_per_billion(0.17, 107001.0);
  const double c4 = pb::cost_per_billion(0.17, 16319841.0);
  const bool table = std::fabs(c1 - 0.0544) <= 1e-4 + 1e-12 &&
                     std::fabs(c2 - 0.0014) <= 1e-4 + 1e-12 &&
                     std::fabs(c3 - 0.4413) <= 1e-4 + 1e-12 &&
                     std::fabs(c4 - 0.0028) <= 1e-4 + 1e-12;
  const bool replicas = pb::required_replicas(16000000.0, 1581885.0) == 11 &&
                        pb::required_replicas(16000000.0, 16319841.0) == 1;
  const bool ratio = std::floor(0.0544 / 0.0014) == 38.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "%s %s %s %s; replicas %s; ratio 38x %s",
                pb::format_fixed4(c1).c_str(), pb::format_fixed4(c2).c_str(),
                pb::format_fixed4(c3).c_str(), pb::format_fixed4(c4).c_str(),
                replicas ? "ok" : "WRONG", ratio ? "ok" : "WRONG");
  detail = buf;
  return table && replicas && ratio;
}

// --- criterion 9: determinism ------------------------------------------

bool check_determinism(std::string& detail) {
  const std::string cfg = g_golden + "/pilot_config.json";
  if (run_cli("sweep --config " + cfg + " --out acc_c9_a") != 0 ||
      run_cli("sweep --config " + cfg + " --out acc_c9_b") != 0) {
    detail = "CLI sweep failed";
    return false;
  }
  const std::string a = read_file("acc_c9_a/sweep.csv");
  const std::string b = read_file("acc_c9_b/sweep.csv");
  const bool equal = !a.empty() && a == b;
  detail = equal ? "two sweep runs byte-identical (" +
                       std::to_string(a.size()) + " bytes)"
                 : "sweep CSVs DIFFER";
  return equal;
}

// --- criterion 10: explicit non-reproduction ---------------------------

bool check_non_reproduction(std::string& detail) {
  // The published large-scale results need the original models and
  // datasets; the README must say so explicitly and point at the
  // desk-scale analogs instead.
  // golden dir lives at <repo>/tests/golden
  std::string readme = read_file(g_golden + "/../../README.md");
  if (readme.empty()) readme = read_file("README.md");
  const char* required[] = {"SNLI", "IMDB", "BERT", "ProteinBERT",
                            "MobileNet", "out of scope"};
  std::vector<std::string> missing;
  for (const char* k : required)
    if (readme.find(k) == std::string::npos) missing.push_back(k);
  if (!missing.empty()) {
    detail = "README missing: ";
    for (const auto& m : missing) detail += m + " ";
    return false;
  }
  detail = "large-scale results documented as out of scope in README";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <path-to-pbcli> <golden-dir>\n");
    return 2;
  }
  g_cli = argv[1];
  g_golden = argv[2];

  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"gradient correctness", check_gradients},
      {"freeze/perforation suite", check_freeze},
      {"zero-impact integration", check_zero_impact},
      {"correlation oracle", check_correlation},
      {"parameter accounting", check_param_accounting},
      {"desk-scale PB improvement", check_improvement},
      {"desk-scale compression recovery", check_compression},
      {"cost table arithmetic", check_cost_model},
      {"determinism", check_determinism},
      {"explicit non-reproduction", check_non_reproduction},
  };

  bool all = true;
  for (size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].fn(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    std::printf("criterion %2zu %-32s %s  (%s)\n", i + 1, criteria[i].name,
                ok ? "PASS" : "FAIL", detail.c_str());
    all = all && ok;
  }
  return all ? 0 : 1;
}
