#include "pb/verify.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "pb/deploy.hpp"
#include "pb/engine.hpp"
#include "pb/kernels.hpp"
#include "pb/rng.hpp"

namespace pb {

namespace {

NetworkSpec small_mlp(uint64_t seed) {
  NetworkSpec spec;
  spec.layers = {LayerSpec::fc(2, 8), LayerSpec::act_layer(Activation::Tanh),
                 LayerSpec::fc(8, 8), LayerSpec::act_layer(Activation::Tanh),
                 LayerSpec::fc(8, 2)};
  spec.seed = seed;
  return spec;
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

bool check_kernel_equivalence(std::string& detail) {
  using namespace kernels;
  const Backend current = selected();
  if (current == Backend::Scalar) {
    detail = "only scalar backend present";
    return true;
  }
  Rng rng(101);
  const Kernels& simd = active();
  const Kernels& ref = scalar_kernels();
  for (int trial = 0; trial < 20; ++trial) {
    const size_t m = 1 + rng.below(9), k = 1 + rng.below(9),
                 n = 1 + rng.below(17);
    std::vector<double> a(m * k), b(k * n), c1(m * n, 0.0), c2(m * n, 0.0);
    for (auto& v : a) v = rng.uniform(-2.0, 2.0);
    for (auto& v : b) v = rng.uniform(-2.0, 2.0);
    ref.gemm_nn_acc(a.data(), b.data(), c1.data(), m, k, n);
    simd.gemm_nn_acc(a.data(), b.data(), c2.data(), m, k, n);
    if (std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(double)) != 0) {
      detail = "gemm mismatch vs scalar reference";
      return false;
    }
    std::vector<double> d1(m * n), d2(m * n);
    ref.relu(c1.data(), d1.data(), c1.size());
    simd.relu(c2.data(), d2.data(), c2.size());
    if (std::memcmp(d1.data(), d2.data(), d1.size() * sizeof(double)) != 0) {
      detail = "relu mismatch vs scalar reference";
      return false;
    }
  }
  detail = std::string("backend ") + std::string(backend_name(current)) +
           " bit-identical to scalar";
  return true;
}

bool check_gradients(std::string& detail) {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({3, 4}, rng);
    auto f = [](Tape& tape, Tensor& t) {
      Tensor y = activation(tape, t, Activation::Tanh);
      return sum(tape, mul(tape, y, y));
    };
    worst = std::max(worst, grad_check(f, x, 1e-5));
  }
  std::ostringstream os;
  os << "max rel err " << worst;
  detail = os.str();
  return worst < 1e-4;
}

bool check_correlation_oracle(std::string& detail) {
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t p = 2 + rng.below(31), o = 1 + rng.below(8);
    ErrorMatrix e;
    e.patterns = p;
    e.outputs = o;
    e.e.resize(p * o);
    for (auto& v : e.e) v = rng.uniform(-1.0, 1.0);
    e.compute_means();
    std::vector<double> v(p);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    // brute-force double loop
    double vbar = 0.0;
    for (double x : v) vbar += x;
    vbar /= static_cast<double>(p);
    double expected = 0.0;
    for (size_t oo = 0; oo < o; ++oo) {
      double cov = 0.0;
      for (size_t pp = 0; pp < p; ++pp)
        cov += (v[pp] - vbar) * (e.at(pp, oo) - e.col_mean[oo]);
      expected += std::fabs(cov);
    }
    if (std::fabs(correlation_score(v, e) - expected) > 1e-12) {
      detail = "score diverged from brute force";
      return false;
    }
  }
  detail = "200 random instances within 1e-12";
  return true;
}

bool check_zero_impact(std::string& detail) {
  ModelGraph model = ModelGraph::build(small_mlp(5));
  PBConfig cfg;
  CandidatePool pool = spawn_candidates(model, 0, cfg, 13);
  Rng rng(31);
  Tensor x = random_tensor({16, 2}, rng);
  Tape t1;
  const auto before = model.forward(t1, x).values();
  select_and_integrate(model, pool);
  Tape t2;
  const auto after = model.forward(t2, x).values();
  if (std::memcmp(before.data(), after.data(),
                  before.size() * sizeof(double)) != 0) {
    detail = "forward changed at integration";
    return false;
  }
  detail = "forward bit-identical across integration";
  return true;
}

bool check_freeze(std::string& detail) {
  ModelGraph model = ModelGraph::build(small_mlp(9));
  model.set_trainable(ParamGroup::Main, false);
  const uint64_t before = model.hash_group(ParamGroup::Main);
  Rng rng(17);
  Tensor x = random_tensor({8, 2}, rng);
  std::vector<double> onehot(8 * 2, 0.0);
  for (size_t i = 0; i < 8; ++i) onehot[i * 2 + rng.below(2)] = 1.0;
  Tensor y = Tensor::from({8, 2}, std::move(onehot));
  Tape tape;
  Tensor logits = model.forward(tape, x);
  auto ce = softmax_cross_entropy(tape, logits, y);
  tape.backward(ce.loss);
  for (auto& p : model.params())
    if (p.tensor.has_grad()) {
      detail = "frozen parameter received a gradient";
      return false;
    }
  if (model.hash_group(ParamGroup::Main) != before) {
    detail = "frozen parameters changed";
    return false;
  }
  detail = "frozen groups untouched by backward";
  return true;
}

bool check_cost_model(std::string& detail) {
  const bool ok =
      format_fixed4(cost_per_billion(0.31, 1581885)) == "0.0544" &&
      format_fixed4(cost_per_billion(0.31, 59604227)) == "0.0014" &&
      required_replicas(16000000, 1581885) == 11 &&
      required_replicas(16000000, 16319841) == 1;
  detail = ok ? "reference cost table reproduced" : "cost values diverged";
  return ok;
}

}  // namespace

std::vector<CheckResult> run_verification() {
  std::vector<CheckResult> results;
  auto run = [&](const std::string& name, bool (*fn)(std::string&)) {
    CheckResult r;
    r.name = name;
    try {
      r.passed = fn(r.detail);
    } catch (const std::exception& ex) {
      r.passed = false;
      r.detail = ex.what();
    }
    results.push_back(std::move(r));
  };
  run("kernel-equivalence", check_kernel_equivalence);
  run("gradient-check", check_gradients);
  run("correlation-oracle", check_correlation_oracle);
  run("zero-impact-integration", check_zero_impact);
  run("freeze-discipline", check_freeze);
  run("cost-model", check_cost_model);
  return results;
}

}  // namespace pb
