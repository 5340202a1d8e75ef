#include "pb/engine.hpp"

#include "pb/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace pb {

void ErrorMatrix::compute_means() {
  col_mean.assign(outputs, 0.0);
  for (size_t p = 0; p < patterns; ++p)
    for (size_t o = 0; o < outputs; ++o) col_mean[o] += at(p, o);
  for (auto& m : col_mean) m /= static_cast<double>(patterns);
}

void PBConfig::validate() const {
  if (pool_size == 0 || candidate_epochs == 0 || max_epochs == 0 ||
      patience_normal == 0 || patience_dendrite == 0 || batch_size == 0)
    throw config_error("all PB budgets must be positive");
  if (lr_main <= 0.0 || lr_candidate <= 0.0)
    throw config_error("learning rates must be positive");
  if (improvement_eps < 0.0)
    throw config_error("improvement epsilon must be non-negative");
}

const char* phase_name(Phase p) {
  return p == Phase::NormalTraining ? "normal" : "dendrite";
}

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

void write_report_csv(const TrainReport& report, std::ostream& out) {
  out << "cycle,phase,epoch,train_loss,train_acc,val_acc,params,wall_time_s\n";
  for (const EpochRow& r : report.rows) {
    out << r.cycle << ',' << phase_name(r.phase) << ',' << r.epoch << ','
        << fmt4(r.train_loss) << ',' << fmt4(r.train_acc) << ','
        << fmt4(r.val_acc) << ',' << r.params << ',' << fmt4(r.wall_time_s)
        << '\n';
  }
}

ErrorMatrix residual_error(const ModelGraph& model, const Tensor& x,
                           const Tensor& targets_onehot) {
  Tape tape;
  Tensor logits = model.forward(tape, x);
  auto ce = softmax_cross_entropy(tape, logits, targets_onehot);
  // no backward: parameter grads are never written here
  ErrorMatrix e;
  e.patterns = logits.dim(0);
  e.outputs = logits.dim(1);
  e.e = std::move(ce.logit_grad);
  e.compute_means();
  return e;
}

double correlation_score(const std::vector<double>& v, const ErrorMatrix& e) {
  if (v.size() != e.patterns)
    throw dim_error("correlation_score: V has " + std::to_string(v.size()) +
                    " entries, error matrix has " + std::to_string(e.patterns) +
                    " patterns");
  double vbar = 0.0;
  for (double x : v) vbar += x;
  vbar /= static_cast<double>(v.size());
  double s = 0.0;
  for (size_t o = 0; o < e.outputs; ++o) {
    double cov = 0.0;
    for (size_t p = 0; p < e.patterns; ++p)
      cov += (v[p] - vbar) * (e.at(p, o) - e.col_mean[o]);
    s += std::fabs(cov);
  }
  return s;
}

namespace {

Activation host_activation(const ModelGraph& model, size_t layer_id) {
  // the nonlinearity applied to the host layer's output, if any
  for (size_t i = layer_id + 1; i < model.num_layers(); ++i) {
    const LayerSpec& l = model.layer(i);
    if (l.kind == LayerKind::Act) return l.act;
    if (l.kind == LayerKind::FullyConnected || l.kind == LayerKind::Conv2d)
      break;
  }
  return Activation::Tanh;
}

// column i of a [P,n] tensor as [P,1]
Tensor extract_column(const Tensor& t, size_t i) {
  const size_t P = t.dim(0), n = t.dim(1);
  std::vector<double> col(P);
  for (size_t p = 0; p < P; ++p) col[p] = t.values()[p * n + i];
  return Tensor::from({P, 1}, std::move(col));
}

// channel i of a [P,n,H,W] tensor as [P,1,H,W]
Tensor extract_channel(const Tensor& t, size_t i) {
  const size_t P = t.dim(0), n = t.dim(1), HW = t.dim(2) * t.dim(3);
  std::vector<double> out(P * HW);
  for (size_t p = 0; p < P; ++p)
    for (size_t k = 0; k < HW; ++k)
      out[p * HW + k] = t.values()[(p * n + i) * HW + k];
  return Tensor::from({P, 1, t.dim(2), t.dim(3)}, std::move(out));
}

// Builds the candidate's output V on a tape; inputs come from the trace
// and are constants (the network is frozen during candidate training).
Tensor candidate_forward(Tape& tape, const CandidatePool& pool,
                         const CandidateUnit& unit, size_t neuron_index,
                         const LayerTrace& trace) {
  if (!pool.conv) {
    Tensor pre = add_bias(tape, matmul(tape, trace.input, unit.win), unit.bias);
    for (size_t j = 0; j < unit.cascade.size(); ++j) {
      Tensor col = extract_column(trace.dendrite_outputs[j], neuron_index);
      pre = add(tape, pre, scale_cols(tape, col, unit.cascade[j]));
    }
    return activation(tape, pre, pool.act);
  }
  Tensor pre =
      conv2d(tape, trace.input, unit.win, unit.bias, pool.stride, pool.padding);
  for (size_t j = 0; j < unit.cascade.size(); ++j) {
    Tensor ch = extract_channel(trace.dendrite_outputs[j], neuron_index);
    pre = add(tape, pre, channel_scale(tape, ch, unit.cascade[j]));
  }
  Tensor v = activation(tape, pre, pool.act);
  return global_avg_pool(tape, v);  // spatial mean -> one value per pattern
}

}  // namespace

CandidatePool spawn_candidates(const ModelGraph& model, size_t layer_id,
                               const PBConfig& config, uint64_t seed) {
  const auto eligible = model.hidden_param_layers();
  if (std::find(eligible.begin(), eligible.end(), layer_id) == eligible.end())
    throw config_error("layer " + std::to_string(layer_id) +
                       " is not eligible for dendrites");
  const LayerSpec& l = model.layer(layer_id);
  const DendriteBlock* blk = model.block_for(layer_id);
  const size_t existing = blk ? blk->cycles.size() : 0;

  CandidatePool pool;
  pool.layer_id = layer_id;
  pool.conv = l.kind == LayerKind::Conv2d;
  pool.stride = l.stride;
  pool.padding = l.padding;
  pool.n_neurons = pool.conv ? l.out_channels : l.out_dim;
  pool.n_inputs = pool.conv ? 9 * l.in_channels : l.in_dim;
  pool.n_cascade = config.cascade_dendrites ? existing : 0;
  pool.act = host_activation(model, layer_id);

  const size_t fan_in = pool.n_inputs + pool.n_cascade;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + 1));
  pool.per_neuron.resize(pool.n_neurons);
  for (size_t i = 0; i < pool.n_neurons; ++i) {
    for (size_t q = 0; q < config.pool_size; ++q) {
      Rng rng(derive_seed(seed, "cand.layer" + std::to_string(layer_id) +
                                    ".n" + std::to_string(i) + ".q" +
                                    std::to_string(q)));
      CandidateUnit u;
      u.win = pool.conv ? Tensor::zeros({1, l.in_channels, 3, 3}, true)
                        : Tensor::zeros({l.in_dim, 1}, true);
      for (auto& w : u.win.values()) w = rng.uniform(-bound, bound);
      u.bias = Tensor::zeros({1}, true);
      for (size_t j = 0; j < pool.n_cascade; ++j) {
        Tensor c = Tensor::zeros({1}, true);
        c.values()[0] = rng.uniform(-bound, bound);
        u.cascade.push_back(c);
      }
      pool.per_neuron[i].push_back(std::move(u));
    }
  }
  return pool;
}

std::vector<double> candidate_output(const CandidatePool& pool,
                                     const CandidateUnit& unit,
                                     size_t neuron_index,
                                     const LayerTrace& trace) {
  Tape tape;
  Tensor v = candidate_forward(tape, pool, unit, neuron_index, trace);
  return v.values();
}

double candidate_step(CandidatePool& pool, const LayerTrace& trace,
                      const ErrorMatrix& e, double lr) {
  double best_sum = 0.0;
  for (size_t i = 0; i < pool.per_neuron.size(); ++i) {
    double best = 0.0;
    for (CandidateUnit& unit : pool.per_neuron[i]) {
      Tape tape;
      Tensor v = candidate_forward(tape, pool, unit, i, trace);
      const auto& vv = v.values();
      const size_t P = vv.size();
      double vbar = 0.0;
      for (double x : vv) vbar += x;
      vbar /= static_cast<double>(P);

      // dS/dV_p = sum_o sign(cov_o) * (E[p][o] - mean_o); the centered-V
      // term drops because centered E sums to zero over p
      std::vector<double> g(P, 0.0);
      double s = 0.0;
      for (size_t o = 0; o < e.outputs; ++o) {
        double cov = 0.0;
        for (size_t p = 0; p < P; ++p)
          cov += (vv[p] - vbar) * (e.at(p, o) - e.col_mean[o]);
        const double sigma = cov >= 0.0 ? 1.0 : -1.0;
        s += std::fabs(cov);
        for (size_t p = 0; p < P; ++p)
          g[p] += sigma * (e.at(p, o) - e.col_mean[o]);
      }
      unit.score = s;
      unit.v = vv;

      // gradient of J = sum_p g_p * V_p equals dS/dparams
      Tensor gt = Tensor::from({P, 1}, g);
      Tensor j = sum(tape, mul(tape, v, gt));
      tape.backward(j);

      auto ascend = [lr](Tensor& t) {
        if (!t.has_grad()) return;
        const auto& gr = t.grad();
        auto& val = t.values();
        for (size_t k = 0; k < val.size(); ++k) val[k] += lr * gr[k];
        t.drop_grad();
      };
      ascend(unit.win);
      ascend(unit.bias);
      for (Tensor& c : unit.cascade) ascend(c);

      best = std::max(best, s);
    }
    best_sum += best;
  }
  return best_sum;
}

size_t dendrite_cycle_params(size_t n_neurons, size_t fan_in,
                             size_t cycles_before) {
  return n_neurons * (fan_in + cycles_before + 1) + n_neurons;
}

void select_and_integrate(ModelGraph& model, const CandidatePool& pool) {
  if (pool.per_neuron.empty() || pool.per_neuron.front().empty())
    throw usage_error("select_and_integrate on an empty candidate pool");
  const size_t n = pool.n_neurons;
  DendriteCycle cyc;
  cyc.bias = Tensor::zeros({n});
  cyc.out_weight = Tensor::zeros({n});  // exactly 0: integration is a no-op
  for (size_t j = 0; j < pool.n_cascade; ++j)
    cyc.cascade.push_back(Tensor::zeros({n}));
  if (pool.conv) {
    const size_t C = pool.n_inputs / 9;
    cyc.win = Tensor::zeros({n, C, 3, 3});
  } else {
    cyc.win = Tensor::zeros({pool.n_inputs, n});
  }
  for (size_t i = 0; i < n; ++i) {
    const auto& cands = pool.per_neuron[i];
    size_t best = 0;
    for (size_t q = 1; q < cands.size(); ++q)
      if (cands[q].score > cands[best].score) best = q;
    const CandidateUnit& w = cands[best];
    if (pool.conv) {
      const size_t per = w.win.size();  // C*9
      std::copy(w.win.values().begin(), w.win.values().end(),
                cyc.win.values().begin() + i * per);
    } else {
      for (size_t k = 0; k < pool.n_inputs; ++k)
        cyc.win.values()[k * n + i] = w.win.values()[k];
    }
    cyc.bias.values()[i] = w.bias.values()[0];
    for (size_t j = 0; j < pool.n_cascade; ++j)
      cyc.cascade[j].values()[i] = w.cascade[j].values()[0];
  }
  // installed input weights stay frozen forever (requires_grad left false);
  // the output weight joins the main trainable group via set_trainable
  model.add_dendrite_cycle(pool.layer_id, pool.act, std::move(cyc));
}

std::pair<double, double> sgd_epoch(ModelGraph& model, const DataView& data,
                                    double lr, size_t batch_size, Rng& rng) {
  const size_t n = data.x.dim(0);
  const size_t f = data.x.dim(1);
  const size_t o = data.y_onehot.dim(1);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the epoch stream
  for (size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  double loss_sum = 0.0;
  size_t correct = 0;
  for (size_t start = 0; start < n; start += batch_size) {
    const size_t bs = std::min(batch_size, n - start);
    std::vector<double> bx(bs * f), by(bs * o);
    std::vector<int> blab(bs);
    for (size_t r = 0; r < bs; ++r) {
      const size_t src = order[start + r];
      std::copy_n(data.x.values().begin() + src * f, f, bx.begin() + r * f);
      std::copy_n(data.y_onehot.values().begin() + src * o, o,
                  by.begin() + r * o);
      blab[r] = data.labels[src];
    }
    Tensor xb = Tensor::from({bs, f}, std::move(bx));
    Tensor yb = Tensor::from({bs, o}, std::move(by));

    Tape tape;
    Tensor logits = model.forward(tape, xb);
    auto ce = softmax_cross_entropy(tape, logits, yb);
    loss_sum += ce.loss.item() * static_cast<double>(bs);
    for (size_t r = 0; r < bs; ++r) {
      const double* row = logits.values().data() + r * o;
      size_t arg = 0;
      for (size_t c = 1; c < o; ++c)
        if (row[c] > row[arg]) arg = c;
      if (static_cast<int>(arg) == blab[r]) ++correct;
    }
    tape.backward(ce.loss);
    for (ParamEntry& p : model.params()) {
      if (!p.tensor.requires_grad() || !p.tensor.has_grad()) continue;
      kernels::active().axpy(-lr, p.tensor.grad().data(),
                             p.tensor.values().data(), p.tensor.size());
      p.tensor.drop_grad();
    }
  }
  return {loss_sum / static_cast<double>(n),
          static_cast<double>(correct) / static_cast<double>(n)};
}

double evaluate_accuracy(const ModelGraph& model, const DataView& data) {
  Tape tape;
  Tensor logits = model.forward(tape, data.x);
  const size_t n = logits.dim(0), o = logits.dim(1);
  size_t correct = 0;
  for (size_t r = 0; r < n; ++r) {
    const double* row = logits.values().data() + r * o;
    size_t arg = 0;
    for (size_t c = 1; c < o; ++c)
      if (row[c] > row[arg]) arg = c;
    if (static_cast<int>(arg) == data.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainReport pb_train(ModelGraph& model, const DataView& train,
                     const DataView& val, const PBConfig& config,
                     uint64_t seed) {
  config.validate();
  std::vector<size_t> targets = config.target_layers;
  if (targets.empty()) targets = model.hidden_param_layers();
  for (size_t t : targets) {
    const auto ok = model.hidden_param_layers();
    if (std::find(ok.begin(), ok.end(), t) == ok.end())
      throw config_error("target layer " + std::to_string(t) +
                         " is not a hidden parameterized layer");
  }

  TrainReport report;
  const auto tved = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    if (!config.record_timings) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         tved)
        .count();
  };

  double best_val = -1.0;
  auto best_snap = model.snapshot_values();
  double prev_cycle_best = -1.0;

  for (size_t cycle = 0;; ++cycle) {
    // --- normal training phase ---
    size_t since = 0;
    for (size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
      Rng rng(derive_seed(seed, "shuffle.c" + std::to_string(cycle) + ".e" +
                                    std::to_string(epoch)));
      auto [loss, tacc] =
          sgd_epoch(model, train, config.lr_main, config.batch_size, rng);
      const double vacc = evaluate_accuracy(model, val);
      report.rows.push_back({cycle, Phase::NormalTraining, epoch, loss, tacc,
                             vacc, model.count_params(true), elapsed()});
      if (vacc > best_val + config.improvement_eps) {
        best_val = vacc;
        best_snap = model.snapshot_values();
        since = 0;
      } else {
        ++since;
      }
      if (since >= config.patience_normal) break;
    }
    model.restore_values(best_snap);
    if (!config.snapshot_dir.empty())
      model.save_weights(config.snapshot_dir + "/best.pbw");

    report.best_val_acc = best_val;
    report.cycles_completed = cycle;
    if (cycle == 0) report.baseline_val_acc = best_val;

    if (cycle >= 1 && best_val < prev_cycle_best + config.improvement_eps)
      break;  // a full cycle brought no improvement
    prev_cycle_best = best_val;
    if (cycle == config.max_cycles) break;

    // --- dendrite training phase ---
    model.set_trainable(ParamGroup::Main, false);
    std::map<size_t, LayerTrace> trace;
    {
      Tape tape;
      model.forward(tape, train.x, &trace);
    }
    ErrorMatrix e = residual_error(model, train.x, train.y_onehot);

    std::vector<CandidatePool> pools;
    for (size_t t : targets)
      pools.push_back(spawn_candidates(
          model, t, config,
          derive_seed(seed, "spawn.c" + std::to_string(cycle))));

    const double frozen_loss = report.rows.empty() ? 0.0 : report.rows.back().train_loss;
    const double frozen_tacc = evaluate_accuracy(model, train);
    double best_s = -1.0;
    size_t s_since = 0;
    for (size_t step = 0; step < config.candidate_epochs; ++step) {
      double s_sum = 0.0;
      for (CandidatePool& p : pools)
        s_sum += candidate_step(p, trace.at(p.layer_id), e,
                                config.lr_candidate);
      report.rows.push_back({cycle, Phase::DendriteTraining, step, frozen_loss,
                             frozen_tacc, best_val, model.count_params(true),
                             elapsed()});
      if (s_sum > best_s + config.improvement_eps * (1.0 + std::fabs(best_s))) {
        best_s = s_sum;
        s_since = 0;
      } else {
        ++s_since;
      }
      if (s_since >= config.patience_dendrite) break;
    }

    for (const CandidatePool& p : pools) select_and_integrate(model, p);
    model.set_trainable(ParamGroup::Main, true);
    model.set_trainable(ParamGroup::DendriteInput, false);
    // registry changed; re-snapshot the (functionally identical) best state
    best_snap = model.snapshot_values();
  }

  model.set_trainable(ParamGroup::Main, true);
  model.set_trainable(ParamGroup::DendriteInput, false);
  report.final_params = model.count_params(true);
  report.final_train_acc = evaluate_accuracy(model, train);
  return report;
}

}  // namespace pb
