#pragma once

#include <vector>

#include "brainleaks/lif.hpp"
#include "brainleaks/spike_train.hpp"
#include "brainleaks/tape.hpp"

namespace brainleaks {

// Stack of dense LIF layers; the last layer is the non-spiking readout.
struct SnnNetwork {
  std::vector<LifLayer> layers;
  SurrogateSpec surrogate;

  Index input_width() const { return layers.front().fan_in(); }
  Index output_width() const { return layers.back().width(); }
  void validate() const;
};

struct SnnForwardResult {
  Matrix output_membranes;          // [T x C], readout membrane per step
  std::vector<Matrix> layer_spikes; // per layer: [T x width]
};

// Plain unrolled inference: repeated lif_step from a zero state.
SnnForwardResult snn_forward(const SnnNetwork& net, const SpikeTrain& input);

// Backward passes go through a recorded unroll. Hard mode uses binary spikes
// with the surrogate derivative; soft mode swaps in the smooth fast-sigmoid
// activation end-to-end so gradients can be checked against finite differences.
enum class SpikeMode { kHard, kSoft };

struct SnnRun {
  Tape tape;
  std::vector<int> step_inputs;    // T leaves, each [B x in]
  std::vector<int> weight_nodes;   // per layer
  std::vector<int> bias_nodes;     // per layer
  std::vector<int> readout_steps;  // T nodes, each [B x C]
  int summed_readout = -1;         // [B x C]
  Index batch = 0;
  Index steps = 0;
};

SnnRun snn_forward_tape(const SnnNetwork& net, const std::vector<SpikeTrain>& batch,
                        SpikeMode mode = SpikeMode::kHard);

// Per-sample cumulative softmax cross-entropy node over all readout steps -> [B].
int membrane_ce_node(SnnRun& run, const std::vector<int>& labels);

struct SnnGradients {
  std::vector<Matrix> weight_grads;  // per layer [out x in]
  std::vector<Vector> bias_grads;
  std::vector<Matrix> input_grads;   // per sample [T x in]
};

// Seeds `loss_node` and collects weight and input adjoints from the run.
SnnGradients snn_backward(SnnRun& run, int loss_node, const Tensor& seed);
SnnGradients snn_backward(SnnRun& run, int loss_node);  // scalar seed 1

// Cumulative softmax cross-entropy of recorded readout membranes [T x C].
double membrane_ce_loss(const Matrix& output_membranes, int label);

enum class PosteriorMode { kSummedMembrane, kMeanPerStep };

// Class posterior from readout membranes: softmax of the time-summed
// membranes, or (alternative reading) the mean of per-step softmaxes.
Vector posterior(const Matrix& output_membranes,
                 PosteriorMode mode = PosteriorMode::kSummedMembrane);

}  // namespace brainleaks
