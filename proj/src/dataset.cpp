#include "pb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pb/rng.hpp"

namespace pb {

void Dataset::split(uint64_t seed, double train_frac, double val_frac) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac >= 1.0)
    throw config_error("invalid split fractions");
  const size_t n = size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  for (size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  const size_t n_train = static_cast<size_t>(std::floor(train_frac * n));
  const size_t n_val = static_cast<size_t>(std::floor(val_frac * n));
  train_idx.assign(order.begin(), order.begin() + n_train);
  val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  test_idx.assign(order.begin() + n_train + n_val, order.end());
}

DataView Dataset::view(const std::vector<size_t>& idx) const {
  const size_t n = idx.size();
  std::vector<double> xs(n * n_features);
  std::vector<double> onehot(n * n_classes, 0.0);
  std::vector<int> labels(n);
  for (size_t r = 0; r < n; ++r) {
    std::copy_n(x.begin() + idx[r] * n_features, n_features,
                xs.begin() + r * n_features);
    labels[r] = y[idx[r]];
    onehot[r * n_classes + labels[r]] = 1.0;
  }
  return {Tensor::from({n, n_features}, std::move(xs)),
          Tensor::from({n, n_classes}, std::move(onehot)), std::move(labels)};
}

Dataset gen_two_spirals(size_t n_per_class, double turns, double noise_sigma,
                        uint64_t seed) {
  if (n_per_class < 1) throw config_error("n_per_class must be >= 1");
  if (turns <= 0.0) throw config_error("turns must be positive");
  if (noise_sigma < 0.0) throw config_error("noise sigma must be >= 0");
  Dataset ds;
  ds.n_features = 2;
  ds.n_classes = 2;
  Rng rng(derive_seed(seed, "two_spirals"));
  for (size_t k = 0; k < 2; ++k)
    for (size_t i = 0; i < n_per_class; ++i) {
      const double t =
          static_cast<double>(i) / static_cast<double>(n_per_class);
      const double r = 0.2 + 0.8 * t;
      const double theta = 2.0 * M_PI * turns * t + static_cast<double>(k) * M_PI;
      ds.x.push_back(r * std::cos(theta) + noise_sigma * rng.normal());
      ds.x.push_back(r * std::sin(theta) + noise_sigma * rng.normal());
      ds.y.push_back(static_cast<int>(k));
    }
  return ds;
}

Dataset gen_blobs(size_t n_per_class, size_t n_classes, double center_radius,
                  double sigma, uint64_t seed) {
  if (n_classes < 2) throw config_error("gen_blobs requires >= 2 classes");
  if (n_per_class < 1) throw config_error("n_per_class must be >= 1");
  if (center_radius <= 0.0) throw config_error("center radius must be positive");
  if (sigma < 0.0) throw config_error("sigma must be >= 0");
  Dataset ds;
  ds.n_features = 2;
  ds.n_classes = n_classes;
  Rng rng(derive_seed(seed, "blobs"));
  for (size_t k = 0; k < n_classes; ++k) {
    const double angle =
        2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n_classes);
    const double cx = center_radius * std::cos(angle);
    const double cy = center_radius * std::sin(angle);
    for (size_t i = 0; i < n_per_class; ++i) {
      ds.x.push_back(cx + sigma * rng.normal());
      ds.x.push_back(cy + sigma * rng.normal());
      ds.y.push_back(static_cast<int>(k));
    }
  }
  return ds;
}

namespace {

uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw format_error("truncated IDX file: " + path);
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw format_error("cannot open IDX images file: " + images_path);
  const uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", img_magic);
    throw format_error("bad IDX images magic " + std::string(buf) + " in " +
                       images_path);
  }
  const uint32_t n = read_be32(img, images_path);
  const uint32_t rows = read_be32(img, images_path);
  const uint32_t cols = read_be32(img, images_path);
  const size_t per = static_cast<size_t>(rows) * cols;
  std::vector<unsigned char> pixels(static_cast<size_t>(n) * per);
  if (!img.read(reinterpret_cast<char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size())))
    throw format_error("truncated IDX image payload in " + images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw format_error("cannot open IDX labels file: " + labels_path);
  const uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", lab_magic);
    throw format_error("bad IDX labels magic " + std::string(buf) + " in " +
                       labels_path);
  }
  const uint32_t n_labels = read_be32(lab, labels_path);
  if (n_labels != n)
    throw format_error("IDX count mismatch: " + std::to_string(n) +
                       " images vs " + std::to_string(n_labels) + " labels");
  std::vector<unsigned char> labels(n_labels);
  if (!lab.read(reinterpret_cast<char*>(labels.data()),
                static_cast<std::streamsize>(labels.size())))
    throw format_error("truncated IDX label payload in " + labels_path);

  Dataset ds;
  ds.n_features = per;
  ds.x.resize(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i)
    ds.x[i] = static_cast<double>(pixels[i]) / 255.0;
  ds.y.resize(n);
  int max_label = 0;
  for (size_t i = 0; i < n; ++i) {
    ds.y[i] = labels[i];
    max_label = std::max(max_label, ds.y[i]);
  }
  ds.n_classes = static_cast<size_t>(max_label) + 1;
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  // features are clamped to [0,1] and stored as bytes
  const size_t n = ds.size();
  const auto side = static_cast<uint32_t>(
      std::llround(std::sqrt(static_cast<double>(ds.n_features))));
  const uint32_t rows = side * side == ds.n_features ? side : 1;
  const uint32_t cols = static_cast<uint32_t>(ds.n_features) / rows;
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw format_error("cannot write IDX images file: " + images_path);
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<uint32_t>(n));
  write_be32(img, rows);
  write_be32(img, cols);
  for (double v : ds.x) {
    const double c = std::clamp(v, 0.0, 1.0);
    const unsigned char b =
        static_cast<unsigned char>(std::llround(c * 255.0));
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw format_error("cannot write IDX labels file: " + labels_path);
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<uint32_t>(n));
  for (int y : ds.y) {
    const unsigned char b = static_cast<unsigned char>(y);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw format_error("cannot write dataset CSV: " + path);
  for (size_t f = 0; f < ds.n_features; ++f) out << 'x' << f << ',';
  out << "label\n";
  char buf[32];
  for (size_t i = 0; i < ds.size(); ++i) {
    for (size_t f = 0; f < ds.n_features; ++f) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x[i * ds.n_features + f]);
      out << buf << ',';
    }
    out << ds.y[i] << '\n';
  }
}

}  // namespace pb
