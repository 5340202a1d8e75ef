#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "pb/dataset.hpp"
#include "pb/errors.hpp"
#include "pb/harness.hpp"

using namespace pb;

TEST_CASE("two spirals places t=0 points on the x axis") {
  Dataset ds = gen_two_spirals(1, 1.75, 0.0, 7);
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.n_features == 2);
  // class 0 at (0.2, 0), class 1 at (-0.2, 0)
  for (size_t i = 0; i < 2; ++i) {
    const double x = ds.x[i * 2], y = ds.x[i * 2 + 1];
    if (ds.y[i] == 0) {
      CHECK(x == doctest::Approx(0.2).epsilon(1e-12));
      CHECK(y == doctest::Approx(0.0).epsilon(1e-12));
    } else {
      CHECK(x == doctest::Approx(-0.2).epsilon(1e-12));
      CHECK(std::fabs(y) < 1e-12);
    }
  }
}

TEST_CASE("two spirals is deterministic and validates params") {
  Dataset a = gen_two_spirals(50, 1.75, 0.05, 7);
  Dataset b = gen_two_spirals(50, 1.75, 0.05, 7);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  Dataset c = gen_two_spirals(50, 1.75, 0.05, 8);
  CHECK(a.x != c.x);
  CHECK_THROWS_AS(gen_two_spirals(0, 1.75, 0.05, 7), config_error);
  CHECK_THROWS_AS(gen_two_spirals(10, 1.75, -0.1, 7), config_error);
}

TEST_CASE("blobs centers sit on the circle") {
  Dataset ds = gen_blobs(3, 2, 1.0, 0.0, 7);
  for (size_t i = 0; i < ds.size(); ++i) {
    const double x = ds.x[i * 2], y = ds.x[i * 2 + 1];
    if (ds.y[i] == 0) {
      CHECK(x == doctest::Approx(1.0));
      CHECK(std::fabs(y) < 1e-12);
    } else {
      CHECK(x == doctest::Approx(-1.0));
      CHECK(std::fabs(y) < 1e-12);
    }
  }
  CHECK_THROWS_AS(gen_blobs(3, 1, 1.0, 0.1, 7), config_error);
}

TEST_CASE("well separated blobs are learnable to 99 percent") {
  Dataset ds = gen_blobs(60, 2, 10.0, 0.1, 3);
  ds.split(3);
  NetworkSpec spec;
  spec.layers.push_back(LayerSpec::fc(2, 8));
  spec.layers.push_back(LayerSpec::act_layer(Activation::Tanh));
  spec.layers.push_back(LayerSpec::fc(8, 2));
  spec.seed = 3;
  PBConfig cfg;
  cfg.max_epochs = 60;
  cfg.patience_normal = 60;
  cfg.max_cycles = 0;
  RunRecord rec = train_eval(spec, ds, cfg, 3);
  CHECK(rec.train_acc >= 0.99);
}

TEST_CASE("split is disjoint, exhaustive and seeded") {
  Dataset ds = gen_two_spirals(40, 1.0, 0.05, 9);
  ds.split(9);
  std::set<size_t> seen;
  for (auto idx : {&ds.train_idx, &ds.val_idx, &ds.test_idx})
    for (size_t i : *idx) CHECK(seen.insert(i).second);  // no duplicates
  CHECK(seen.size() == ds.size());

  Dataset ds2 = gen_two_spirals(40, 1.0, 0.05, 9);
  ds2.split(9);
  CHECK(ds.train_idx == ds2.train_idx);
  ds2.split(10);
  CHECK(ds.train_idx != ds2.train_idx);
}

TEST_CASE("idx round trip scales pixels to unit range") {
  Dataset ds;
  ds.n_features = 4;
  ds.n_classes = 2;
  ds.x = {0, 1, 0, 1, 1, 0, 1, 0};  // written as bytes 0/255
  ds.y = {0, 1};
  const std::string img = "test_idx_images.bin", lbl = "test_idx_labels.bin";
  save_idx(ds, img, lbl);
  Dataset back = load_idx(img, lbl);
  REQUIRE(back.size() == 2);
  CHECK(back.n_features == 4);
  CHECK(back.x == std::vector<double>{0, 1, 0, 1, 1, 0, 1, 0});
  CHECK(back.y == ds.y);

  // wrong magic names the value observed
  {
    std::FILE* f = std::fopen(img.c_str(), "r+b");
    std::fputc(0x12, f);
    std::fclose(f);
    try {
      load_idx(img, lbl);
      FAIL("expected format_error");
    } catch (const format_error& e) {
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
  std::remove(img.c_str());
  std::remove(lbl.c_str());
}

TEST_CASE("idx count mismatch between files is a format error") {
  Dataset ds;
  ds.n_features = 4;
  ds.n_classes = 2;
  ds.x = {0, 1, 0, 1, 1, 0, 1, 0};
  ds.y = {0, 1};
  Dataset one;
  one.n_features = 4;
  one.n_classes = 1;
  one.x = {0, 1, 0, 1};
  one.y = {0};
  save_idx(ds, "ti2.bin", "tl2.bin");
  save_idx(one, "ti1.bin", "tl1.bin");
  CHECK_THROWS_AS(load_idx("ti2.bin", "tl1.bin"), format_error);
  CHECK_THROWS_AS(load_idx("no_images.bin", "tl1.bin"), format_error);
  for (const char* p : {"ti2.bin", "tl2.bin", "ti1.bin", "tl1.bin"})
    std::remove(p);
}

TEST_CASE("view assembles one-hot targets") {
  Dataset ds = gen_blobs(5, 2, 1.0, 0.1, 2);
  ds.split(2, 0.6, 0.2);
  DataView v = ds.train_view();
  REQUIRE(v.x.dim(0) == v.labels.size());
  for (size_t p = 0; p < v.labels.size(); ++p) {
    double row_sum = 0.0;
    for (size_t c = 0; c < ds.n_classes; ++c)
      row_sum += v.y_onehot.values()[p * ds.n_classes + c];
    CHECK(row_sum == 1.0);
    CHECK(v.y_onehot.values()[p * ds.n_classes + v.labels[p]] == 1.0);
  }
}
