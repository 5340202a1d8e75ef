#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pb/network.hpp"
#include "pb/rng.hpp"

namespace pb {

// Per-sample gradient of the task loss at the output logits, the residual
// error signal the dendrite candidates are trained against.
struct ErrorMatrix {
  size_t patterns = 0, outputs = 0;
  std::vector<double> e;         // row-major [patterns x outputs]
  std::vector<double> col_mean;  // [outputs]

  double at(size_t p, size_t o) const { return e[p * outputs + o]; }
  void compute_means();
};

struct PBConfig {
  size_t pool_size = 4;
  size_t candidate_epochs = 300;  // max ascent steps per dendrite phase
  size_t max_epochs = 400;        // max epochs per normal phase
  size_t patience_normal = 10;
  size_t patience_dendrite = 10;
  double improvement_eps = 1e-4;  // absolute, on validation accuracy
  size_t max_cycles = 3;          // dendrite phases; 0 = plain baseline
  double lr_main = 0.05;
  double lr_candidate = 0.01;
  bool cascade_dendrites = true;
  size_t batch_size = 32;
  // empty = all hidden fully_connected/conv2d layers
  std::vector<size_t> target_layers;
  // when set, the best-weights snapshot is also written here as .pbw
  std::string snapshot_dir;
  bool record_timings = false;  // wall_time_s stays 0 unless enabled

  void validate() const;
};

enum class Phase { NormalTraining, DendriteTraining };
const char* phase_name(Phase p);

struct PhaseState {
  Phase phase = Phase::NormalTraining;
  size_t cycle = 0;
  double best_val = 0.0;
  size_t epochs_since_improvement = 0;
  std::string best_weights_path;
};

struct EpochRow {
  size_t cycle = 0;
  Phase phase = Phase::NormalTraining;
  size_t epoch = 0;
  double train_loss = 0.0, train_acc = 0.0, val_acc = 0.0;
  size_t params = 0;
  double wall_time_s = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> rows;
  double best_val_acc = 0.0;
  double baseline_val_acc = 0.0;  // best val after the first normal phase
  double final_train_acc = 0.0;
  size_t final_params = 0;
  size_t cycles_completed = 0;
};

void write_report_csv(const TrainReport& report, std::ostream& out);

// Labeled design matrix in engine terms: X [N x F], one-hot targets and
// integer labels for accuracy.
struct DataView {
  Tensor x;
  Tensor y_onehot;
  std::vector<int> labels;
};

// --- candidate machinery ----------------------------------------------

struct CandidateUnit {
  Tensor win;                   // FC: [d,1]; conv: [1,C,3,3]
  Tensor bias;                  // [1]
  std::vector<Tensor> cascade;  // scalars [1], one per existing cycle
  double score = 0.0;
  std::vector<double> v;        // last output over the P patterns
};

struct CandidatePool {
  size_t layer_id = 0;
  bool conv = false;
  size_t stride = 1, padding = 1;
  size_t n_neurons = 0;
  size_t n_inputs = 0;   // d: presynaptic fan-in per unit
  size_t n_cascade = 0;  // c: existing dendrite cycles seen by candidates
  Activation act = Activation::Tanh;
  std::vector<std::vector<CandidateUnit>> per_neuron;  // [n][pool_size]
};

ErrorMatrix residual_error(const ModelGraph& model, const Tensor& x,
                           const Tensor& targets_onehot);

// S = sum_o | sum_p (V_p - mean V)(E[p][o] - mean_o) |
double correlation_score(const std::vector<double>& v, const ErrorMatrix& e);

CandidatePool spawn_candidates(const ModelGraph& model, size_t layer_id,
                               const PBConfig& config, uint64_t seed);

// Candidate output V over the trace patterns (conv hosts: spatial mean).
std::vector<double> candidate_output(const CandidatePool& pool,
                                     const CandidateUnit& unit,
                                     size_t neuron_index,
                                     const LayerTrace& trace);

// One full-batch gradient-ascent step on S for every candidate in the
// pool. Updates scores and cached outputs. Returns the sum over neurons of
// the best candidate score after the step.
double candidate_step(CandidatePool& pool, const LayerTrace& trace,
                      const ErrorMatrix& e, double lr);

// Installs the argmax-S candidate of every neuron as a frozen dendrite
// cycle with a zero output weight; forward output is unchanged.
void select_and_integrate(ModelGraph& model, const CandidatePool& pool);

// Closed-form parameter cost of one dendrite cycle on a layer:
// n*(d + c + 1) + n.
size_t dendrite_cycle_params(size_t n_neurons, size_t fan_in, size_t cycles_before);

// --- phase controller ---------------------------------------------------

TrainReport pb_train(ModelGraph& model, const DataView& train,
                     const DataView& val, const PBConfig& config,
                     uint64_t seed);

// One epoch of minibatch SGD on the task loss; returns (mean loss, acc).
std::pair<double, double> sgd_epoch(ModelGraph& model, const DataView& data,
                                    double lr, size_t batch_size, Rng& rng);

double evaluate_accuracy(const ModelGraph& model, const DataView& data);

}  // namespace pb
