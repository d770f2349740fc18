#pragma once

#include "brainleaks/tensor.hpp"

namespace brainleaks {

// Binary tensor over [time steps x features]; the wire format between
// encoders, spiking networks and attacks.
struct SpikeTrain {
  Matrix data;  // entries in {0,1}

  SpikeTrain() = default;
  explicit SpikeTrain(Matrix d) : data(std::move(d)) {}
  SpikeTrain(Index steps, Index features) : data(Matrix::Zero(steps, features)) {}

  Index steps() const { return data.rows(); }
  Index features() const { return data.cols(); }

  double mean() const { return data.mean(); }

  void require_binary(const char* where) const {
    if (!((data.array() == 0.0) || (data.array() == 1.0)).all()) {
      throw DomainError(std::string(where) + ": spike train is not binary");
    }
  }
};

}  // namespace brainleaks
