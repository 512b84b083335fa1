#include "partshot/momentum.hpp"

#include "partshot/errors.hpp"

namespace partshot {

void momentum_update(const EncoderParams& online, MomentumEncoder& momentum) {
  if (!online.same_layout(momentum.params)) throw ShapeError("momentum encoder layout differs from online encoder");
  const float m = static_cast<float>(momentum.m);
  const float one_minus = static_cast<float>(1.0 - momentum.m);
  for (std::size_t t = 0; t < online.tensors.size(); ++t) {
    auto& dst = momentum.params.tensors[t].data;
    const auto& src = online.tensors[t].data;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = m * dst[i] + one_minus * src[i];
  }
}

}  // namespace partshot
