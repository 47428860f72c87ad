#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "calving/eval/metrics.hpp"
#include "calving/features/divergence.hpp"
#include "calving/features/interpolate.hpp"
#include "calving/fusion/fusion.hpp"

namespace calving::cli {

struct VerifyOptions {
  // Test hook: adds a deliberate error to one analytic gradient so the
  // checker itself can be shown to catch faults.
  bool inject_gradient_fault = false;
};

namespace verify_detail {

struct Check {
  std::string name;
  std::function<bool(std::string&)> run;
};

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// A model wrapper that corrupts the first analytic gradient entry.
template <class Model>
struct FaultyModel {
  Model inner;
  bool fault = false;
  double loss_and_grad(std::span<const int> idx, std::vector<double>* grad) {
    double loss = inner.loss_and_grad(idx, grad);
    if (fault && grad && !grad->empty()) (*grad)[0] += 0.5;
    return loss;
  }
  std::vector<double> get_params() const { return inner.get_params(); }
  void set_params(std::span<const double> p) { inner.set_params(p); }
};

inline std::vector<double> random_simplex(int dim, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(dim));
  double sum = 0.0;
  for (double& x : v) {
    x = -std::log(std::max(rng.uniform(), 1e-300));
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace verify_detail

// The fast invariant suite behind `verify`: gradient checks over every layer
// type and the mixer composite, the divergence identities, fusion algebra,
// interpolation idempotence, and ROC sanity. Prints one line per check.
inline int cmd_verify(const VerifyOptions& opts = {}) {
  using verify_detail::Check;
  using verify_detail::near;
  std::vector<Check> checks;

  checks.push_back({"gradients: dense/conv/gap nets match central differences",
                    [&](std::string& detail) {
                      Rng rng(7);
                      double worst = 0.0;
                      for (int draw = 0; draw < 10; ++draw) {
                        nn::NetworkSpec spec;
                        std::vector<Tensor> inputs;
                        std::vector<int> labels;
                        if (draw % 2 == 0) {
                          spec = nn::dense_classifier(6, {5, 4}, 2, 4);
                          for (int i = 0; i < 4; ++i) {
                            Tensor x(6, 1);
                            for (double& v : x.v) v = rng.gauss();
                            inputs.push_back(x);
                            labels.push_back(rng.pick(2));
                          }
                        } else {
                          spec.input = {2, 12};
                          spec.layers = {nn::Conv1d{2, 3, 3, 1}, nn::Relu{},
                                         nn::GlobalAvgPool{}, nn::Dense{3, 2}, nn::Softmax{}};
                          for (int i = 0; i < 4; ++i) {
                            Tensor x(2, 12);
                            for (double& v : x.v) v = rng.gauss();
                            inputs.push_back(x);
                            labels.push_back(rng.pick(2));
                          }
                        }
                        verify_detail::FaultyModel<nn::NetModel> model{
                            {nn::Network::init(spec, rng.next_u64()), &inputs, &labels},
                            opts.inject_gradient_fault};
                        // Jitter every parameter (zero-init biases sit exactly
                        // on the ReLU kink, where central differences and the
                        // subgradient legitimately disagree).
                        auto params = model.get_params();
                        for (double& p : params) p += 0.05 * rng.gauss();
                        model.set_params(params);
                        std::vector<int> idx = {0, 1, 2, 3};
                        worst = std::max(worst,
                                         nn::finite_difference_check(model, idx, 1e-6));
                      }
                      detail = "max relative error " + std::to_string(worst);
                      return worst < 1e-4;
                    }});

  checks.push_back({"gradients: hlo-mixer composite matches central differences",
                    [&](std::string& detail) {
                      Rng rng(11);
                      fusion::FusionDataset data;
                      for (int i = 0; i < 4; ++i) {
                        std::array<streams::StreamOutput, 3> outs;
                        for (size_t s = 0; s < 3; ++s) {
                          outs[s].kind = streams::kFusedStreams[s];
                          double p = rng.uniform(0.05, 0.95);
                          outs[s].posterior = {1.0 - p, p};
                          outs[s].hlo.resize(streams::kHloDim);
                          for (double& v : outs[s].hlo) v = rng.gauss();
                        }
                        data.outputs.push_back(outs);
                        std::vector<double> mi(16);
                        for (double& v : mi) v = rng.gauss();
                        data.mixer_inputs.push_back(mi);
                        data.labels.push_back(rng.pick(2));
                      }
                      verify_detail::FaultyModel<fusion::HloMixerModel> model{
                          {nn::Network::init(fusion::mixer_spec(16), rng.next_u64()),
                           nn::Network::init(fusion::mixer_head_spec(), rng.next_u64()), &data},
                          opts.inject_gradient_fault};
                      auto params = model.get_params();
                      for (double& p : params) p += 0.05 * rng.gauss();
                      model.set_params(params);
                      std::vector<int> idx = {0, 1, 2, 3};
                      const double err = nn::finite_difference_check(model, idx, 1e-6);
                      detail = "max relative error " + std::to_string(err);
                      return err < 1e-4;
                    }});

  checks.push_back({"m-measure: constant posteriors give exactly zero",
                    [](std::string& detail) {
                      std::vector<std::vector<double>> seq(40, {0.2, 0.5, 0.3});
                      for (double m : features::m_measure(seq, 8))
                        if (m != 0.0) {
                          detail = "nonzero lag value " + std::to_string(m);
                          return false;
                        }
                      return true;
                    }});

  checks.push_back({"m-measure: alternating posteriors give D(p,q) at odd lags",
                    [](std::string& detail) {
                      const std::vector<double> p{0.8, 0.2}, q{0.2, 0.8};
                      std::vector<std::vector<double>> seq;
                      for (int t = 0; t < 40; ++t) seq.push_back(t % 2 == 0 ? p : q);
                      const double d = features::symmetric_kl(p, q);
                      const auto m = features::m_measure(seq, 8);
                      for (int dt = 1; dt <= 8; ++dt) {
                        const double want = dt % 2 == 1 ? d : 0.0;
                        if (!near(m[static_cast<size_t>(dt - 1)], want, 1e-12)) {
                          detail = "lag " + std::to_string(dt) + " off";
                          return false;
                        }
                      }
                      return true;
                    }});

  checks.push_back({"symmetric KL: frozen value, symmetry, non-negativity",
                    [](std::string& detail) {
                      const double d =
                          features::symmetric_kl(std::vector{0.8, 0.2}, std::vector{0.2, 0.8});
                      if (!near(d, 1.2 * std::log(4.0), 1e-12)) {
                        detail = "D([.8,.2],[.2,.8]) = " + std::to_string(d);
                        return false;
                      }
                      Rng rng(3);
                      for (int i = 0; i < 200; ++i) {
                        auto p = verify_detail::random_simplex(9, rng);
                        auto q = verify_detail::random_simplex(9, rng);
                        const double ab = features::symmetric_kl(p, q);
                        const double ba = features::symmetric_kl(q, p);
                        if (ab != ba || ab < 0.0) {
                          detail = "symmetry or sign violated";
                          return false;
                        }
                      }
                      return true;
                    }});

  checks.push_back({"fusion: uniform mixer weights equal plain averaging",
                    [](std::string& detail) {
                      Rng rng(5);
                      for (int i = 0; i < 100; ++i) {
                        std::vector<streams::StreamOutput> outs(3);
                        for (size_t s = 0; s < 3; ++s) {
                          outs[s].kind = streams::kFusedStreams[s];
                          double p = rng.uniform(0.0, 1.0);
                          outs[s].posterior = {1.0 - p, p};
                          outs[s].hlo.assign(streams::kHloDim, 0.0);
                        }
                        const auto avg = fusion::fuse_posterior_average(outs);
                        const auto mix = fusion::fuse_posterior_mixer(
                            outs, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
                        if (!near(avg[1], mix[1], 1e-12) || !near(avg[0], mix[0], 1e-12)) {
                          detail = "mean/mixer mismatch";
                          return false;
                        }
                        const auto mx = fusion::select_max_prob(outs);
                        if (mx[1] + 1e-15 < avg[1]) {
                          detail = "max selection below average";
                          return false;
                        }
                      }
                      return true;
                    }});

  checks.push_back({"fusion: one-hot weights reproduce the selected stream",
                    [](std::string& detail) {
                      Rng rng(9);
                      std::vector<streams::StreamOutput> outs(3);
                      for (size_t s = 0; s < 3; ++s) {
                        outs[s].kind = streams::kFusedStreams[s];
                        double p = rng.uniform(0.0, 1.0);
                        outs[s].posterior = {1.0 - p, p};
                        outs[s].hlo.resize(streams::kHloDim);
                        for (double& v : outs[s].hlo) v = rng.gauss();
                      }
                      for (size_t k = 0; k < 3; ++k) {
                        fusion::MixtureWeights w{};
                        w[k] = 1.0;
                        const auto fused = fusion::fuse_posterior_mixer(outs, w);
                        const auto mixed = fusion::mix_hlos(outs, w);
                        if (fused != outs[k].posterior || mixed != outs[k].hlo) {
                          detail = "one-hot weight " + std::to_string(k) + " not exact";
                          return false;
                        }
                      }
                      return true;
                    }});

  checks.push_back({"interpolation: identity on valid sequences, anchored fills",
                    [](std::string& detail) {
                      std::vector<std::vector<double>> v{{2.0}, {0.0}, {4.0}};
                      std::vector<bool> ok{true, false, true};
                      if (features::interpolate_mean(v, ok)[1][0] != 3.0) {
                        detail = "mean fill wrong";
                        return false;
                      }
                      std::vector<std::vector<double>> lin{{0.0}, {9.0}, {9.0}, {9.0}, {4.0}};
                      std::vector<bool> mask{true, false, false, false, true};
                      const auto filled = features::interpolate_linear(lin, mask);
                      if (filled[1][0] != 1.0 || filled[2][0] != 2.0 || filled[3][0] != 3.0) {
                        detail = "linear fill wrong";
                        return false;
                      }
                      const auto same = features::interpolate_mean(v, {true, true, true});
                      if (same != v) {
                        detail = "not identity on valid input";
                        return false;
                      }
                      return true;
                    }});

  checks.push_back({"roc: separable scores give AUC 1, staircase ends at (1,1)",
                    [](std::string& detail) {
                      const std::vector<double> scores{0.9, 0.8, 0.2, 0.1};
                      const std::vector<int> labels{1, 1, 0, 0};
                      const auto r = eval::roc_auc(scores, labels);
                      if (!near(r.auc, 1.0, 1e-12) || r.points.front().fpr != 0.0 ||
                          r.points.back().tpr != 1.0) {
                        detail = "auc " + std::to_string(r.auc);
                        return false;
                      }
                      return true;
                    }});

  int failures = 0;
  for (auto& check : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = check.run(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << check.name
              << (detail.empty() ? "" : " (" + detail + ")") << "\n";
    if (!ok) ++failures;
  }
  std::cout << (failures == 0 ? "verify: all checks passed\n"
                              : "verify: " + std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 6;
}

}  // namespace calving::cli
