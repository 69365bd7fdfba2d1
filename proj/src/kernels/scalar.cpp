#include <algorithm>
#include <limits>
#include <vector>

#include "kernels_internal.hpp"

namespace hmmlabel::kernels::scalar {

namespace {

inline double max_of(double a, double b) { return a > b ? a : b; }
inline float max_of(float a, float b) { return a > b ? a : b; }
inline float min_of(float a, float b) { return a < b ? a : b; }

}  // namespace

void max_plus_step(const double* prev, const double* log_trans, const double* log_emit,
                   std::size_t n, double* next, std::int32_t* back) {
  for (std::size_t k = 0; k < n; ++k) {
    double best = -std::numeric_limits<double>::infinity();
    std::int32_t arg = 0;
    for (std::size_t x = 0; x < n; ++x) {
      const double candidate = prev[x] + log_trans[x * n + k];
      if (candidate > best) {
        best = candidate;
        arg = static_cast<std::int32_t>(x);
      }
    }
    next[k] = best + log_emit[k];
    back[k] = arg;
  }
}

void accumulate_unchanged(const StateIndex* obs, std::size_t m, const double* log_emit_by_obs,
                          const double* log_self, std::size_t n, double* out) {
  const double* first = log_emit_by_obs + obs[0] * n;
  for (std::size_t k = 0; k < n; ++k) out[k] = first[k];
  for (std::size_t t = 1; t < m; ++t) {
    const double* emit = log_emit_by_obs + obs[t] * n;
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = out[k] + emit[k];
      out[k] = out[k] + log_self[k];
    }
  }
}

void window_extreme(const std::uint8_t* in, std::uint8_t* out, std::size_t width,
                    std::size_t height, std::size_t radius, Axis axis, Extreme extreme) {
  const bool take_min = extreme == Extreme::min;
  auto combine = [take_min](std::uint8_t a, std::uint8_t b) {
    return take_min ? std::min(a, b) : std::max(a, b);
  };
  if (axis == Axis::rows) {
    std::vector<std::uint8_t> padded(width + 2 * radius, 0);
    for (std::size_t y = 0; y < height; ++y) {
      std::copy_n(in + y * width, width, padded.begin() + static_cast<std::ptrdiff_t>(radius));
      for (std::size_t x = 0; x < width; ++x) {
        std::uint8_t acc = padded[x];
        for (std::size_t d = 1; d <= 2 * radius; ++d) acc = combine(acc, padded[x + d]);
        out[y * width + x] = acc;
      }
    }
    return;
  }
  for (std::size_t y = 0; y < height; ++y) {
    const bool clipped = y < radius || y + radius >= height;
    std::uint8_t* dst = out + y * width;
    if (clipped && take_min) {
      std::fill_n(dst, width, std::uint8_t{0});
      continue;
    }
    const std::size_t lo = y < radius ? 0 : y - radius;
    const std::size_t hi = std::min(height - 1, y + radius);
    std::copy_n(in + lo * width, width, dst);
    for (std::size_t row = lo + 1; row <= hi; ++row) {
      const std::uint8_t* src = in + row * width;
      for (std::size_t x = 0; x < width; ++x) dst[x] = combine(dst[x], src[x]);
    }
  }
}

void affine_clamp(const float* in, float* out, std::size_t count, float offset, float scale) {
  for (std::size_t i = 0; i < count; ++i) {
    const float v = (in[i] - offset) * scale;
    out[i] = min_of(max_of(v, 0.0f), 1.0f);
  }
}

void threshold_above(const float* in, std::uint8_t* out, std::size_t count, float threshold,
                     bool invert) {
  for (std::size_t i = 0; i < count; ++i) {
    const float v = invert ? 1.0f - in[i] : in[i];
    out[i] = v > threshold ? 1 : 0;
  }
}

}  // namespace hmmlabel::kernels::scalar
