#include "brainleaks/lif.hpp"

#include "brainleaks/tape.hpp"

namespace brainleaks {

double surrogate_derivative(double membrane, double threshold, const SurrogateSpec& spec) {
  if (spec.slope <= 0.0) throw DomainError("surrogate slope must be positive");
  return fast_sigmoid_derivative(membrane, threshold, spec.slope);
}

void LifLayer::validate() const {
  if (decay < 0.0 || decay > 1.0) throw DomainError("LIF decay must lie in [0,1]");
  if (threshold <= 0.0) throw DomainError("LIF threshold must be positive");
  if (bias.size() != weights.rows()) throw DimensionError("LIF bias width does not match weights");
}

std::pair<LifState, Vector> lif_step(const LifLayer& layer, const LifState& state,
                                     const Vector& input_spikes) {
  layer.validate();
  if (input_spikes.size() != layer.fan_in()) {
    throw DimensionError("lif_step: input width " + std::to_string(input_spikes.size()) +
                         " does not match fan-in " + std::to_string(layer.fan_in()));
  }
  if (state.membrane.size() != layer.width() || state.last_spike.size() != layer.width()) {
    throw DimensionError("lif_step: state width does not match layer");
  }
  if (!((input_spikes.array() == 0.0) || (input_spikes.array() == 1.0)).all()) {
    throw DomainError("lif_step: input spikes must be binary");
  }

  LifState next;
  next.membrane = layer.decay * state.membrane + layer.weights * input_spikes + layer.bias;
  if (layer.spiking) {
    next.membrane -= layer.threshold * state.last_spike;
    next.last_spike = (next.membrane.array() > layer.threshold).cast<double>();
  } else {
    next.last_spike = Vector::Zero(layer.width());
  }
  return {next, next.last_spike};
}

}  // namespace brainleaks
