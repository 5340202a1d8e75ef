#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pb/tensor.hpp"

namespace pb {

enum class LayerKind { FullyConnected, Conv2d, Act, Flatten, GlobalAvgPool };

struct LayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  size_t in_dim = 0, out_dim = 0;                           // fully_connected
  size_t in_channels = 0, out_channels = 0;                 // conv2d (3x3)
  size_t stride = 1, padding = 1;
  Activation act = Activation::Tanh;                        // activation layer

  static LayerSpec fc(size_t in, size_t out);
  static LayerSpec conv(size_t in_ch, size_t out_ch, size_t stride = 1,
                        size_t padding = 1);
  static LayerSpec act_layer(Activation a);
  static LayerSpec flatten_layer();
  static LayerSpec gap_layer();
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  double width_multiplier = 1.0;  // in (0,1]; hidden dims only
  uint64_t seed = 0;
  // input spatial dims, required when the first parameterized layer is conv2d
  size_t in_height = 0, in_width = 0;
};

// hidden dim scaling: max(1, round(dim * m)); input/output dims untouched
size_t scale_dim(size_t dim, double m);

// Returns the spec with the width multiplier applied and the dim chain
// re-validated. Throws pb::config_error naming the layer on a chain break.
NetworkSpec apply_width_multiplier(const NetworkSpec& spec);

// Dendrites installed on one host layer, one unit per neuron per cycle.
// For fully-connected hosts win is [d, n]; for conv hosts win is
// [n, C, 3, 3] (a 3x3 filter per host channel). cascade[j] is the [n]
// vector of weights each neuron places on its own cycle-j dendrite output.
struct DendriteCycle {
  Tensor win;                   // group dendrite_input, frozen once installed
  Tensor bias;                  // group dendrite_input
  std::vector<Tensor> cascade;  // group dendrite_input
  Tensor out_weight;            // u, group dendrite_output
};

struct DendriteBlock {
  size_t layer_id = 0;
  Activation act = Activation::Tanh;
  std::vector<DendriteCycle> cycles;
};

enum class ParamRole { Weight, Bias, DendriteInput, DendriteOutput };
enum class ParamGroup { Main, DendriteInput, DendriteOutput };

struct ParamEntry {
  std::string name;
  size_t layer_id;
  ParamRole role;
  Tensor tensor;
};

// Per-layer values captured during a forward pass, consumed by dendrite
// candidate training: the tensor the host layer reads, plus the outputs of
// the layer's already-installed dendrites. All detached.
struct LayerTrace {
  Tensor input;
  std::vector<Tensor> dendrite_outputs;
};

class ModelGraph {
 public:
  // Builds and initializes from a spec (width multiplier applied here).
  static ModelGraph build(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  size_t input_dim() const { return input_dim_; }
  size_t output_dim() const { return output_dim_; }

  // x is [batch, input_dim]; conv front-ends reshape internally.
  Tensor forward(Tape& tape, const Tensor& x,
                 std::map<size_t, LayerTrace>* trace = nullptr) const;

  size_t count_params(bool include_dendrites = true) const;
  void set_trainable(ParamGroup group, bool flag);

  const std::vector<ParamEntry>& params() const { return params_; }
  std::vector<ParamEntry>& params() { return params_; }

  // Layer ids eligible for dendrites: hidden fully_connected/conv2d layers
  // (every parameterized layer except the last).
  std::vector<size_t> hidden_param_layers() const;
  const LayerSpec& layer(size_t id) const { return spec_.layers[id]; }
  size_t num_layers() const { return spec_.layers.size(); }

  DendriteBlock* block_for(size_t layer_id);
  const DendriteBlock* block_for(size_t layer_id) const;
  // Engine hook: installs a cycle on a layer and re-registers parameters.
  void add_dendrite_cycle(size_t layer_id, Activation act, DendriteCycle cycle);

  void save_weights(const std::string& path) const;
  void load_weights(const std::string& path);

  // In-memory snapshot of every registered parameter, registry order.
  std::vector<std::vector<double>> snapshot_values() const;
  void restore_values(const std::vector<std::vector<double>>& snap);

  // FNV-1a over the raw bytes of every parameter in the group(s); used by
  // the freeze-invariance checks.
  uint64_t hash_group(ParamGroup group) const;

 private:
  void rebuild_registry();

  NetworkSpec spec_;  // scaled
  size_t input_dim_ = 0, output_dim_ = 0;
  std::vector<Tensor> weights_, biases_;  // indexed by layer id (may be undefined)
  std::vector<DendriteBlock> blocks_;
  std::vector<ParamEntry> params_;
};

}  // namespace pb
