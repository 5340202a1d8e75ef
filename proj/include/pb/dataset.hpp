#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pb/engine.hpp"

namespace pb {

struct Dataset {
  size_t n_features = 0;
  size_t n_classes = 0;
  std::vector<double> x;  // row-major [n x n_features]
  std::vector<int> y;     // class labels
  std::vector<size_t> train_idx, val_idx, test_idx;

  size_t size() const { return y.size(); }

  // Disjoint, exhaustive splits from a seeded shuffle.
  void split(uint64_t seed, double train_frac = 0.7, double val_frac = 0.15);

  DataView view(const std::vector<size_t>& idx) const;
  DataView train_view() const { return view(train_idx); }
  DataView val_view() const { return view(val_idx); }
  DataView test_view() const { return view(test_idx); }
};

// Two intertwined spirals: class k point i has t = i/n_per_class,
// r = 0.2 + 0.8t, theta = 2*pi*turns*t + k*pi, plus Gaussian noise.
Dataset gen_two_spirals(size_t n_per_class, double turns, double noise_sigma,
                        uint64_t seed);

// Gaussian blobs around class centers equally spaced on a circle.
Dataset gen_blobs(size_t n_per_class, size_t n_classes, double center_radius,
                  double sigma, uint64_t seed);

// IDX image/label pair (big-endian magic 0x803 / 0x801); pixels scaled to
// [0,1].
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Plain CSV (x...,label), one row per sample.
void save_csv(const Dataset& ds, const std::string& path);

}  // namespace pb
