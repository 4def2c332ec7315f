#pragma once

#include <vector>

#include "lta/autograd.hpp"

namespace lta {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
};

class Adam {
 public:
  Adam(const ag::ParameterSet& params, AdamOptions options);

  // Parameters with trainable[id] == false are left untouched (and their
  // moments are not advanced).
  void step(ag::ParameterSet& params, const ag::Gradients& grads,
            const std::vector<bool>& trainable = {});

  long steps() const { return steps_; }

 private:
  AdamOptions options_;
  std::vector<ag::Matrix> m_, v_;
  std::vector<long> counts_;
  long steps_ = 0;
};

}  // namespace lta
