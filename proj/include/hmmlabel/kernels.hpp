#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
//
// Every variant must produce bit-identical output to the scalar reference:
// the same operations are applied in the same order per lane, and min/max
// follow the x86 operand convention (a > b ? a : b) in both.

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "hmmlabel/types.hpp"

namespace hmmlabel::kernels {

enum class Isa : std::uint8_t { scalar, avx2 };

std::string_view to_string(Isa isa);
Isa isa_from_string(std::string_view text);

enum class Axis : std::uint8_t { rows, cols };
enum class Extreme : std::uint8_t { min, max };

struct KernelTable {
  Isa isa;

  // next[k] = max_x(prev[x] + log_trans[x*n + k]) + log_emit[k]; back[k] is the
  // lowest maximizing x.
  void (*max_plus_step)(const double* prev, const double* log_trans, const double* log_emit,
                        std::size_t n, double* next, std::int32_t* back);

  // out[k] = log_emit_by_obs[y0*n+k] then, per later t, out[k] += log_emit_by_obs[yt*n+k]
  // followed by out[k] += log_self[k].
  void (*accumulate_unchanged)(const StateIndex* obs, std::size_t m,
                               const double* log_emit_by_obs, const double* log_self,
                               std::size_t n, double* out);

  // Sliding-window min or max of side 2*radius+1 along one axis of a 0/1
  // image; pixels outside the image count as 0.
  void (*window_extreme)(const std::uint8_t* in, std::uint8_t* out, std::size_t width,
                         std::size_t height, std::size_t radius, Axis axis, Extreme extreme);

  // out[i] = clamp((in[i] - offset) * scale, 0, 1)
  void (*affine_clamp)(const float* in, float* out, std::size_t count, float offset,
                       float scale);

  // out[i] = (invert ? 1 - in[i] : in[i]) > threshold
  void (*threshold_above)(const float* in, std::uint8_t* out, std::size_t count,
                          float threshold, bool invert);
};

bool isa_supported(Isa isa);
/// Best ISA available on this CPU.
Isa detected_isa();

/// Table for a specific ISA. Throws InputError when the CPU lacks it.
const KernelTable& table(Isa isa);

/// Table used by the library; defaults to detected_isa().
const KernelTable& active();
void set_active_isa(Isa isa);

}  // namespace hmmlabel::kernels
