#include "brainleaks/snn.hpp"

#include <cmath>

namespace brainleaks {

void SnnNetwork::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate();
    if (i > 0 && layers[i].fan_in() != layers[i - 1].width()) {
      throw DimensionError("layer " + std::to_string(i) + " fan-in does not match previous width");
    }
  }
  if (surrogate.slope <= 0.0) throw DomainError("surrogate slope must be positive");
}

SnnForwardResult snn_forward(const SnnNetwork& net, const SpikeTrain& input) {
  net.validate();
  input.require_binary("snn_forward");
  if (input.features() != net.input_width()) {
    throw DimensionError("snn_forward: input width " + std::to_string(input.features()) +
                         " does not match network " + std::to_string(net.input_width()));
  }
  const Index T = input.steps();
  if (T < 1) throw DimensionError("snn_forward: need at least one time step");

  SnnForwardResult res;
  res.output_membranes = Matrix::Zero(T, net.output_width());
  res.layer_spikes.reserve(net.layers.size());
  for (const auto& layer : net.layers) res.layer_spikes.emplace_back(Matrix::Zero(T, layer.width()));

  std::vector<LifState> states;
  states.reserve(net.layers.size());
  for (const auto& layer : net.layers) states.push_back(LifState::zero(layer.width()));

  for (Index t = 0; t < T; ++t) {
    Vector x = input.data.row(t).transpose();
    for (size_t l = 0; l < net.layers.size(); ++l) {
      auto [next, spikes] = lif_step(net.layers[l], states[l], x);
      states[l] = std::move(next);
      res.layer_spikes[l].row(t) = spikes.transpose();
      x = spikes;
    }
    res.output_membranes.row(t) = states.back().membrane.transpose();
  }
  return res;
}

SnnRun snn_forward_tape(const SnnNetwork& net, const std::vector<SpikeTrain>& batch, SpikeMode mode) {
  net.validate();
  if (batch.empty()) throw UsageError("snn_forward_tape: empty batch");
  const Index T = batch.front().steps();
  const Index in = net.input_width();
  for (const auto& s : batch) {
    if (mode == SpikeMode::kHard) s.require_binary("snn_forward_tape");
    if (s.steps() != T || s.features() != in) {
      throw DimensionError("snn_forward_tape: inconsistent spike train shapes in batch");
    }
  }
  if (T < 1) throw DimensionError("snn_forward_tape: need at least one time step");

  SnnRun run;
  run.batch = static_cast<Index>(batch.size());
  run.steps = T;
  const Index B = run.batch;

  for (const auto& layer : net.layers) {
    run.weight_nodes.push_back(run.tape.leaf(Tensor::from_matrix(layer.weights)));
    run.bias_nodes.push_back(run.tape.leaf(Tensor::from_vector(layer.bias)));
  }

  const size_t L = net.layers.size();
  std::vector<int> prev_membrane(L, -1);
  std::vector<int> prev_spike(L, -1);

  for (Index t = 0; t < T; ++t) {
    Tensor step({B, in});
    for (Index b = 0; b < B; ++b) step.matrix().row(b) = batch[static_cast<size_t>(b)].data.row(t);
    int x = run.tape.leaf(std::move(step));
    run.step_inputs.push_back(x);

    for (size_t l = 0; l < L; ++l) {
      const LifLayer& layer = net.layers[l];
      const int drive = run.tape.linear(x, run.weight_nodes[l], run.bias_nodes[l]);
      const int reset = layer.spiking ? prev_spike[l] : -1;
      const int mem = run.tape.lif_membrane(drive, prev_membrane[l], reset, layer.decay, layer.threshold);
      prev_membrane[l] = mem;
      if (layer.spiking) {
        const int spk = run.tape.spike(mem, layer.threshold, net.surrogate.slope,
                                       mode == SpikeMode::kSoft);
        prev_spike[l] = spk;
        x = spk;
      } else {
        run.readout_steps.push_back(mem);
        x = mem;  // only meaningful if a (nonstandard) layer follows a readout
      }
    }
  }
  if (run.readout_steps.empty()) {
    throw DimensionError("snn_forward_tape: network has no readout (non-spiking) layer");
  }
  run.summed_readout = run.readout_steps.front();
  for (size_t i = 1; i < run.readout_steps.size(); ++i) {
    run.summed_readout = run.tape.add(run.summed_readout, run.readout_steps[i]);
  }
  return run;
}

int membrane_ce_node(SnnRun& run, const std::vector<int>& labels) {
  int acc = -1;
  for (int step : run.readout_steps) {
    const int ce = run.tape.softmax_cross(step, labels);
    acc = (acc < 0) ? ce : run.tape.add(acc, ce);
  }
  return acc;
}

SnnGradients snn_backward(SnnRun& run, int loss_node, const Tensor& seed) {
  run.tape.backward(loss_node, seed);
  SnnGradients g;
  for (size_t l = 0; l < run.weight_nodes.size(); ++l) {
    g.weight_grads.push_back(run.tape.grad(run.weight_nodes[l]).to_matrix());
    g.bias_grads.push_back(run.tape.grad(run.bias_nodes[l]).data());
  }
  const Index in = run.tape.value(run.step_inputs.front()).extent(1);
  g.input_grads.assign(static_cast<size_t>(run.batch), Matrix::Zero(run.steps, in));
  for (Index t = 0; t < run.steps; ++t) {
    auto gt = run.tape.grad(run.step_inputs[static_cast<size_t>(t)]).matrix();
    for (Index b = 0; b < run.batch; ++b) {
      g.input_grads[static_cast<size_t>(b)].row(t) = gt.row(b);
    }
  }
  return g;
}

SnnGradients snn_backward(SnnRun& run, int loss_node) {
  if (run.tape.value(loss_node).size() != 1) {
    throw UsageError("snn_backward: loss node is not scalar; provide a seed");
  }
  return snn_backward(run, loss_node, Tensor::scalar(1.0));
}

double membrane_ce_loss(const Matrix& output_membranes, int label) {
  const Index T = output_membranes.rows();
  const Index C = output_membranes.cols();
  if (T < 1) throw DimensionError("membrane_ce_loss: need at least one step");
  if (label < 0 || label >= C) throw IndexError("membrane_ce_loss: label out of range");
  double loss = 0.0;
  for (Index t = 0; t < T; ++t) {
    const auto z = output_membranes.row(t);
    const double m = z.maxCoeff();
    loss += std::log((z.array() - m).exp().sum()) - (z[label] - m);
  }
  return loss;
}

Vector posterior(const Matrix& output_membranes, PosteriorMode mode) {
  if (output_membranes.rows() < 1) throw DimensionError("posterior: need at least one step");
  if (mode == PosteriorMode::kSummedMembrane) {
    return softmax(output_membranes.colwise().sum().transpose());
  }
  Vector acc = Vector::Zero(output_membranes.cols());
  for (Index t = 0; t < output_membranes.rows(); ++t) {
    acc += softmax(output_membranes.row(t).transpose());
  }
  return acc / static_cast<double>(output_membranes.rows());
}

}  // namespace brainleaks
