#include "pb/network.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "pb/rng.hpp"

namespace pb {

LayerSpec LayerSpec::fc(size_t in, size_t out) {
  LayerSpec s;
  s.kind = LayerKind::FullyConnected;
  s.in_dim = in;
  s.out_dim = out;
  return s;
}

LayerSpec LayerSpec::conv(size_t in_ch, size_t out_ch, size_t stride,
                          size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::act_layer(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::Act;
  s.act = a;
  return s;
}

LayerSpec LayerSpec::flatten_layer() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec LayerSpec::gap_layer() {
  LayerSpec s;
  s.kind = LayerKind::GlobalAvgPool;
  return s;
}

size_t scale_dim(size_t dim, double m) {
  const double scaled = std::round(static_cast<double>(dim) * m);
  return scaled < 1.0 ? 1 : static_cast<size_t>(scaled);
}

namespace {

struct ChainState {
  bool conv = false;
  size_t flat_dim = 0;
  size_t channels = 0, height = 0, width = 0;
};

size_t conv_out_spatial(size_t in, size_t pad, size_t stride) {
  if (in + 2 * pad < 3) throw config_error("conv2d input smaller than kernel");
  return (in + 2 * pad - 3) / stride + 1;
}

// Walks the layer chain. With fix_inputs, declared input dims are
// overwritten from the chain (used after width scaling); otherwise a
// mismatch is an error naming the layer index.
void walk_chain(NetworkSpec& spec, bool fix_inputs) {
  if (spec.layers.empty()) throw config_error("network spec has no layers");
  ChainState st;
  bool started = false;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::FullyConnected:
        if (!started) {
          st.conv = false;
          st.flat_dim = l.in_dim;
          started = true;
        }
        if (st.conv)
          throw config_error("layer " + std::to_string(i) +
                             ": fully_connected after conv2d requires "
                             "flatten or global_avg_pool");
        if (fix_inputs)
          l.in_dim = st.flat_dim;
        else if (l.in_dim != st.flat_dim)
          throw config_error("layer " + std::to_string(i) +
                             ": in_dim " + std::to_string(l.in_dim) +
                             " does not chain from previous dim " +
                             std::to_string(st.flat_dim));
        st.flat_dim = l.out_dim;
        break;
      case LayerKind::Conv2d:
        if (!started) {
          if (spec.in_height == 0 || spec.in_width == 0)
            throw config_error(
                "conv2d front-end requires in_height/in_width in the spec");
          st.conv = true;
          st.channels = l.in_channels;
          st.height = spec.in_height;
          st.width = spec.in_width;
          started = true;
        }
        if (!st.conv)
          throw config_error("layer " + std::to_string(i) +
                             ": conv2d after a flattened stage");
        if (fix_inputs)
          l.in_channels = st.channels;
        else if (l.in_channels != st.channels)
          throw config_error("layer " + std::to_string(i) + ": in_channels " +
                             std::to_string(l.in_channels) +
                             " does not chain from previous channels " +
                             std::to_string(st.channels));
        st.channels = l.out_channels;
        st.height = conv_out_spatial(st.height, l.padding, l.stride);
        st.width = conv_out_spatial(st.width, l.padding, l.stride);
        break;
      case LayerKind::Act:
        if (!started)
          throw config_error("layer 0 must be fully_connected or conv2d");
        break;
      case LayerKind::Flatten:
        if (!started || !st.conv)
          throw config_error("layer " + std::to_string(i) +
                             ": flatten requires a conv stage before it");
        st.conv = false;
        st.flat_dim = st.channels * st.height * st.width;
        break;
      case LayerKind::GlobalAvgPool:
        if (!started || !st.conv)
          throw config_error("layer " + std::to_string(i) +
                             ": global_avg_pool requires a conv stage");
        st.conv = false;
        st.flat_dim = st.channels;
        break;
    }
  }
  if (st.conv)
    throw config_error("network must end in a flattened stage");
}

std::vector<size_t> param_layer_ids(const NetworkSpec& spec) {
  std::vector<size_t> ids;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto k = spec.layers[i].kind;
    if (k == LayerKind::FullyConnected || k == LayerKind::Conv2d)
      ids.push_back(i);
  }
  return ids;
}

}  // namespace

NetworkSpec apply_width_multiplier(const NetworkSpec& spec) {
  if (!(spec.width_multiplier > 0.0) || spec.width_multiplier > 1.0)
    throw config_error("width multiplier must be in (0, 1]");
  NetworkSpec s = spec;
  walk_chain(s, /*fix_inputs=*/false);
  const auto ids = param_layer_ids(s);
  if (ids.empty()) throw config_error("network has no parameterized layers");
  // hidden dims only: every parameterized layer's output except the last
  for (size_t j = 0; j + 1 < ids.size(); ++j) {
    LayerSpec& l = s.layers[ids[j]];
    if (l.kind == LayerKind::FullyConnected)
      l.out_dim = scale_dim(l.out_dim, s.width_multiplier);
    else
      l.out_channels = scale_dim(l.out_channels, s.width_multiplier);
  }
  walk_chain(s, /*fix_inputs=*/true);
  return s;
}

ModelGraph ModelGraph::build(const NetworkSpec& spec) {
  ModelGraph m;
  m.spec_ = apply_width_multiplier(spec);
  const auto ids = param_layer_ids(m.spec_);
  const LayerSpec& first = m.spec_.layers[ids.front()];
  m.input_dim_ = first.kind == LayerKind::FullyConnected
                     ? first.in_dim
                     : first.in_channels * spec.in_height * spec.in_width;
  const LayerSpec& last = m.spec_.layers[ids.back()];
  m.output_dim_ = last.kind == LayerKind::FullyConnected ? last.out_dim
                                                         : last.out_channels;
  m.weights_.resize(m.spec_.layers.size());
  m.biases_.resize(m.spec_.layers.size());
  for (size_t i = 0; i < m.spec_.layers.size(); ++i) {
    const LayerSpec& l = m.spec_.layers[i];
    if (l.kind != LayerKind::FullyConnected && l.kind != LayerKind::Conv2d)
      continue;
    Rng rng(derive_seed(m.spec_.seed, "init.layer" + std::to_string(i)));
    if (l.kind == LayerKind::FullyConnected) {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
      Tensor w = Tensor::zeros({l.in_dim, l.out_dim}, true);
      for (auto& v : w.values()) v = rng.uniform(-bound, bound);
      m.weights_[i] = w;
      m.biases_[i] = Tensor::zeros({l.out_dim}, true);
    } else {
      const size_t fan_in = 9 * l.in_channels, fan_out = 9 * l.out_channels;
      const double bound =
          std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Tensor w = Tensor::zeros({l.out_channels, l.in_channels, 3, 3}, true);
      for (auto& v : w.values()) v = rng.uniform(-bound, bound);
      m.weights_[i] = w;
      m.biases_[i] = Tensor::zeros({l.out_channels}, true);
    }
  }
  m.rebuild_registry();
  return m;
}

Tensor ModelGraph::forward(Tape& tape, const Tensor& x,
                           std::map<size_t, LayerTrace>* trace) const {
  if (x.rank() != 2 || x.dim(1) != input_dim_)
    throw dim_error("forward input " + shape_str(x.shape()) +
                    " does not match input dim " + std::to_string(input_dim_));
  Tensor cur = x;
  const auto ids = param_layer_ids(spec_);
  const LayerSpec& first = spec_.layers[ids.front()];
  if (first.kind == LayerKind::Conv2d)
    cur = reshape(tape, cur,
                  {x.dim(0), first.in_channels, spec_.in_height, spec_.in_width});
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    switch (l.kind) {
      case LayerKind::FullyConnected: {
        const Tensor in = cur;
        Tensor z = add_bias(tape, matmul(tape, in, weights_[i]), biases_[i]);
        const DendriteBlock* blk = block_for(i);
        LayerTrace* tr = nullptr;
        if (trace) {
          tr = &(*trace)[i];
          tr->input = in.detached();
        }
        if (blk && !blk->cycles.empty()) {
          // dendrites read a detached copy: no error signal is passed back
          // to earlier layers through dendrite pathways
          Tensor xd = in.detached();
          std::vector<Tensor> douts;
          for (const DendriteCycle& cyc : blk->cycles) {
            Tensor pre = add_bias(tape, matmul(tape, xd, cyc.win), cyc.bias);
            for (size_t j = 0; j < cyc.cascade.size(); ++j)
              pre = add(tape, pre, scale_cols(tape, douts[j], cyc.cascade[j]));
            Tensor d = activation(tape, pre, blk->act);
            douts.push_back(d);
            z = add(tape, z, scale_cols(tape, d, cyc.out_weight));
          }
          if (tr)
            for (const Tensor& d : douts)
              tr->dendrite_outputs.push_back(d.detached());
        }
        cur = z;
        break;
      }
      case LayerKind::Conv2d: {
        const Tensor in = cur;
        Tensor z =
            conv2d(tape, in, weights_[i], biases_[i], l.stride, l.padding);
        const DendriteBlock* blk = block_for(i);
        LayerTrace* tr = nullptr;
        if (trace) {
          tr = &(*trace)[i];
          tr->input = in.detached();
        }
        if (blk && !blk->cycles.empty()) {
          Tensor xd = in.detached();
          std::vector<Tensor> douts;
          for (const DendriteCycle& cyc : blk->cycles) {
            Tensor pre =
                conv2d(tape, xd, cyc.win, cyc.bias, l.stride, l.padding);
            for (size_t j = 0; j < cyc.cascade.size(); ++j)
              pre =
                  add(tape, pre, channel_scale(tape, douts[j], cyc.cascade[j]));
            Tensor d = activation(tape, pre, blk->act);
            douts.push_back(d);
            z = add(tape, z, channel_scale(tape, d, cyc.out_weight));
          }
          if (tr)
            for (const Tensor& d : douts)
              tr->dendrite_outputs.push_back(d.detached());
        }
        cur = z;
        break;
      }
      case LayerKind::Act:
        cur = activation(tape, cur, l.act);
        break;
      case LayerKind::Flatten:
        cur = flatten(tape, cur);
        break;
      case LayerKind::GlobalAvgPool:
        cur = global_avg_pool(tape, cur);
        break;
    }
  }
  return cur;
}

size_t ModelGraph::count_params(bool include_dendrites) const {
  size_t total = 0;
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.kind == LayerKind::FullyConnected)
      total += l.in_dim * l.out_dim + l.out_dim;
    else if (l.kind == LayerKind::Conv2d)
      total += 9 * l.in_channels * l.out_channels + l.out_channels;
  }
  if (include_dendrites) {
    for (const DendriteBlock& blk : blocks_)
      for (const DendriteCycle& cyc : blk.cycles) {
        total += cyc.win.size() + cyc.bias.size() + cyc.out_weight.size();
        for (const Tensor& c : cyc.cascade) total += c.size();
      }
  }
  return total;
}

void ModelGraph::set_trainable(ParamGroup group, bool flag) {
  for (ParamEntry& e : params_) {
    const bool match =
        group == ParamGroup::Main
            ? (e.role == ParamRole::Weight || e.role == ParamRole::Bias ||
               e.role == ParamRole::DendriteOutput)
            : (group == ParamGroup::DendriteInput
                   ? e.role == ParamRole::DendriteInput
                   : e.role == ParamRole::DendriteOutput);
    if (match) e.tensor.set_requires_grad(flag);
  }
}

std::vector<size_t> ModelGraph::hidden_param_layers() const {
  auto ids = param_layer_ids(spec_);
  if (!ids.empty()) ids.pop_back();
  return ids;
}

DendriteBlock* ModelGraph::block_for(size_t layer_id) {
  for (auto& b : blocks_)
    if (b.layer_id == layer_id) return &b;
  return nullptr;
}

const DendriteBlock* ModelGraph::block_for(size_t layer_id) const {
  for (const auto& b : blocks_)
    if (b.layer_id == layer_id) return &b;
  return nullptr;
}

void ModelGraph::add_dendrite_cycle(size_t layer_id, Activation act,
                                    DendriteCycle cycle) {
  DendriteBlock* blk = block_for(layer_id);
  if (!blk) {
    DendriteBlock b;
    b.layer_id = layer_id;
    b.act = act;
    // keep blocks sorted by layer id for deterministic registry order
    auto it = blocks_.begin();
    while (it != blocks_.end() && it->layer_id < layer_id) ++it;
    blk = &*blocks_.insert(it, std::move(b));
  }
  blk->cycles.push_back(std::move(cycle));
  rebuild_registry();
}

void ModelGraph::rebuild_registry() {
  params_.clear();
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    if (!weights_[i].defined()) continue;
    const std::string base = "layer" + std::to_string(i);
    params_.push_back({base + ".weight", i, ParamRole::Weight, weights_[i]});
    params_.push_back({base + ".bias", i, ParamRole::Bias, biases_[i]});
  }
  for (DendriteBlock& blk : blocks_) {
    const std::string base = "layer" + std::to_string(blk.layer_id) + ".dend";
    for (size_t c = 0; c < blk.cycles.size(); ++c) {
      DendriteCycle& cyc = blk.cycles[c];
      const std::string p = base + std::to_string(c);
      params_.push_back(
          {p + ".win", blk.layer_id, ParamRole::DendriteInput, cyc.win});
      params_.push_back(
          {p + ".bias", blk.layer_id, ParamRole::DendriteInput, cyc.bias});
      for (size_t j = 0; j < cyc.cascade.size(); ++j)
        params_.push_back({p + ".cascade" + std::to_string(j), blk.layer_id,
                           ParamRole::DendriteInput, cyc.cascade[j]});
      params_.push_back(
          {p + ".u", blk.layer_id, ParamRole::DendriteOutput, cyc.out_weight});
    }
  }
}

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& buf, size_t& pos) {
  if (pos + 4 > buf.size()) throw format_error("weight file truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

void ModelGraph::save_weights(const std::string& path) const {
  std::string buf = "PBW1";
  for (const ParamEntry& e : params_) {
    put_u32(buf, static_cast<uint32_t>(e.name.size()));
    buf += e.name;
    put_u32(buf, static_cast<uint32_t>(e.tensor.rank()));
    for (size_t d : e.tensor.shape()) put_u32(buf, static_cast<uint32_t>(d));
    const auto& v = e.tensor.values();
    // doubles written as little-endian IEEE-754 bit patterns
    for (double x : v) {
      uint64_t bits;
      std::memcpy(&bits, &x, 8);
      for (int i = 0; i < 8; ++i)
        buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), buf.size()));
  put_u32(buf, crc);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error("cannot open weight file for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw format_error("short write to weight file: " + path);
}

void ModelGraph::load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open weight file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 8 || buf.compare(0, 4, "PBW1") != 0)
    throw format_error("bad magic in weight file: " + path);
  const uint32_t stored_crc = [&] {
    size_t pos = buf.size() - 4;
    return get_u32(buf, pos);
  }();
  const uint32_t actual_crc = static_cast<uint32_t>(crc32(
      0L, reinterpret_cast<const Bytef*>(buf.data()), buf.size() - 4));
  if (stored_crc != actual_crc)
    throw format_error("weight file checksum mismatch: " + path);

  // Parse everything into staging first; the model is only mutated after
  // the whole file matches.
  struct Staged {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };
  std::vector<Staged> staged;
  size_t pos = 4;
  const size_t end = buf.size() - 4;
  while (pos < end) {
    Staged s;
    const uint32_t namelen = get_u32(buf, pos);
    if (pos + namelen > end) throw format_error("weight file truncated");
    s.name = buf.substr(pos, namelen);
    pos += namelen;
    const uint32_t rank = get_u32(buf, pos);
    size_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      const uint32_t d = get_u32(buf, pos);
      s.shape.push_back(d);
      numel *= d;
    }
    if (pos + numel * 8 > end) throw format_error("weight file truncated");
    s.values.resize(numel);
    for (size_t i = 0; i < numel; ++i) {
      uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<uint64_t>(
                    static_cast<unsigned char>(buf[pos + i * 8 + b]))
                << (8 * b);
      std::memcpy(&s.values[i], &bits, 8);
    }
    pos += numel * 8;
    staged.push_back(std::move(s));
  }
  if (staged.size() != params_.size())
    throw format_error("weight file has " + std::to_string(staged.size()) +
                       " parameter groups, model expects " +
                       std::to_string(params_.size()));
  for (size_t i = 0; i < staged.size(); ++i) {
    if (staged[i].name != params_[i].name)
      throw format_error("weight file group '" + staged[i].name +
                         "' does not match model group '" + params_[i].name +
                         "'");
    if (staged[i].shape != params_[i].tensor.shape())
      throw format_error("shape mismatch for '" + staged[i].name + "': file " +
                         shape_str(staged[i].shape) + ", model " +
                         shape_str(params_[i].tensor.shape()));
  }
  for (size_t i = 0; i < staged.size(); ++i)
    params_[i].tensor.values() = std::move(staged[i].values);
}

std::vector<std::vector<double>> ModelGraph::snapshot_values() const {
  std::vector<std::vector<double>> snap;
  snap.reserve(params_.size());
  for (const ParamEntry& e : params_) snap.push_back(e.tensor.values());
  return snap;
}

void ModelGraph::restore_values(const std::vector<std::vector<double>>& snap) {
  if (snap.size() != params_.size())
    throw usage_error("snapshot does not match current parameter registry");
  for (size_t i = 0; i < snap.size(); ++i) params_[i].tensor.values() = snap[i];
}

uint64_t ModelGraph::hash_group(ParamGroup group) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const ParamEntry& e : params_) {
    const bool match =
        group == ParamGroup::Main
            ? (e.role == ParamRole::Weight || e.role == ParamRole::Bias ||
               e.role == ParamRole::DendriteOutput)
            : (group == ParamGroup::DendriteInput
                   ? e.role == ParamRole::DendriteInput
                   : e.role == ParamRole::DendriteOutput);
    if (!match) continue;
    mix(e.name.data(), e.name.size());
    mix(e.tensor.values().data(), e.tensor.values().size() * sizeof(double));
  }
  return h;
}

}  // namespace pb
