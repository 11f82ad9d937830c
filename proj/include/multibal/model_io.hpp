#pragma once

#include "multibal/model.hpp"

#include <string>

namespace multibal {

/// Binary model file, all integers u32 and all reals f64, little-endian:
///
///   offset 0   8 bytes  magic "MBALMODL"
///          8   u32      layout version (1)
///         12   u32      head mode (0 multi_head, 1 embed_conditioned)
///         16   u32      K (table rows)
///         20   u32      d_e (table columns)
///         24   u32      network count (1 + number of heads)
///   then per network (phi first, then heads in order):
///              u32      layer count L
///   then per layer:     u32 in, u32 out, u32 activation (0 relu, 1 tanh, 2 identity),
///                       out*in weights row-major, out biases
///   then the table:     K*d_e reals row-major
inline constexpr std::uint32_t kModelFileVersion = 1;

void save_model(const ModelParams &theta, const std::string &path);
ModelParams load_model(const std::string &path);

}  // namespace multibal
