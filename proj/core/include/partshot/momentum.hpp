#pragma once

#include "partshot/encoder.hpp"

namespace partshot {

/// Slowly moving copy of the online encoder. Never receives gradients.
struct MomentumEncoder {
  EncoderParams params;
  double m = 0.999;

  static MomentumEncoder copy_of(const EncoderParams& online, double m) { return {online, m}; }
};

/// theta_m <- m * theta_m + (1 - m) * theta_online for every tensor
/// (normalization affine parameters and BatchNorm running statistics included).
void momentum_update(const EncoderParams& online, MomentumEncoder& momentum);

}  // namespace partshot
