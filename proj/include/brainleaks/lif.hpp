#pragma once

#include <utility>

#include "brainleaks/tensor.hpp"

namespace brainleaks {

// Fast-sigmoid surrogate used in place of the Dirac derivative of the spike
// nonlinearity during backward passes.
struct SurrogateSpec {
  double slope = 40.0;
};

double surrogate_derivative(double membrane, double threshold, const SurrogateSpec& spec);

// One dense layer of discrete-time LIF neurons. Readout layers are
// non-spiking: they accumulate membrane potential and never fire or reset.
struct LifLayer {
  Matrix weights;  // [out x in]
  Vector bias;     // [out]
  double decay = 0.7;
  double threshold = 1.0;
  bool spiking = true;

  Index fan_in() const { return weights.cols(); }
  Index width() const { return weights.rows(); }
  void validate() const;
};

struct LifState {
  Vector membrane;
  Vector last_spike;  // binary

  static LifState zero(Index width) {
    return {Vector::Zero(width), Vector::Zero(width)};
  }
};

// One membrane update:
//   nu' = decay * nu + W * input + bias - last_spike * threshold
// followed by a strict-threshold spike decision (nu' > threshold). The reset
// is soft: the threshold is subtracted on the *next* step via last_spike.
std::pair<LifState, Vector> lif_step(const LifLayer& layer, const LifState& state,
                                     const Vector& input_spikes);

}  // namespace brainleaks
