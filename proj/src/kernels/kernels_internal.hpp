#pragma once

#include "hmmlabel/kernels.hpp"

namespace hmmlabel::kernels {

namespace scalar {
void max_plus_step(const double* prev, const double* log_trans, const double* log_emit,
                   std::size_t n, double* next, std::int32_t* back);
void accumulate_unchanged(const StateIndex* obs, std::size_t m, const double* log_emit_by_obs,
                          const double* log_self, std::size_t n, double* out);
void window_extreme(const std::uint8_t* in, std::uint8_t* out, std::size_t width,
                    std::size_t height, std::size_t radius, Axis axis, Extreme extreme);
void affine_clamp(const float* in, float* out, std::size_t count, float offset, float scale);
void threshold_above(const float* in, std::uint8_t* out, std::size_t count, float threshold,
                     bool invert);
}  // namespace scalar

#if defined(HMMLABEL_HAVE_AVX2)
namespace avx2 {
void max_plus_step(const double* prev, const double* log_trans, const double* log_emit,
                   std::size_t n, double* next, std::int32_t* back);
void accumulate_unchanged(const StateIndex* obs, std::size_t m, const double* log_emit_by_obs,
                          const double* log_self, std::size_t n, double* out);
void window_extreme(const std::uint8_t* in, std::uint8_t* out, std::size_t width,
                    std::size_t height, std::size_t radius, Axis axis, Extreme extreme);
void affine_clamp(const float* in, float* out, std::size_t count, float offset, float scale);
void threshold_above(const float* in, std::uint8_t* out, std::size_t count, float threshold,
                     bool invert);
}  // namespace avx2
#endif

}  // namespace hmmlabel::kernels
