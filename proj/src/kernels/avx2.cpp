// Compiled with -mavx2; only reached through the dispatch table after a
// runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "kernels_internal.hpp"

namespace hmmlabel::kernels::avx2 {

void max_plus_step(const double* prev, const double* log_trans, const double* log_emit,
                   std::size_t n, double* next, std::int32_t* back) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d best = _mm256_set1_pd(neg_inf);
    __m256d arg = _mm256_setzero_pd();
    for (std::size_t x = 0; x < n; ++x) {
      const __m256d cand =
          _mm256_add_pd(_mm256_set1_pd(prev[x]), _mm256_loadu_pd(log_trans + x * n + k));
      const __m256d gt = _mm256_cmp_pd(cand, best, _CMP_GT_OQ);
      best = _mm256_blendv_pd(best, cand, gt);
      arg = _mm256_blendv_pd(arg, _mm256_set1_pd(static_cast<double>(x)), gt);
    }
    _mm256_storeu_pd(next + k, _mm256_add_pd(best, _mm256_loadu_pd(log_emit + k)));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(back + k), _mm256_cvtpd_epi32(arg));
  }
  for (; k < n; ++k) {
    double best = neg_inf;
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
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d acc = _mm256_loadu_pd(log_emit_by_obs + obs[0] * n + k);
    const __m256d self = _mm256_loadu_pd(log_self + k);
    for (std::size_t t = 1; t < m; ++t) {
      acc = _mm256_add_pd(acc, _mm256_loadu_pd(log_emit_by_obs + obs[t] * n + k));
      acc = _mm256_add_pd(acc, self);
    }
    _mm256_storeu_pd(out + k, acc);
  }
  for (; k < n; ++k) {
    double acc = log_emit_by_obs[obs[0] * n + k];
    for (std::size_t t = 1; t < m; ++t) {
      acc = acc + log_emit_by_obs[obs[t] * n + k];
      acc = acc + log_self[k];
    }
    out[k] = acc;
  }
}

namespace {

inline __m256i combine(__m256i a, __m256i b, bool take_min) {
  return take_min ? _mm256_min_epu8(a, b) : _mm256_max_epu8(a, b);
}

inline std::uint8_t combine(std::uint8_t a, std::uint8_t b, bool take_min) {
  return take_min ? std::min(a, b) : std::max(a, b);
}

}  // namespace

void window_extreme(const std::uint8_t* in, std::uint8_t* out, std::size_t width,
                    std::size_t height, std::size_t radius, Axis axis, Extreme extreme) {
  const bool take_min = extreme == Extreme::min;
  if (axis == Axis::rows) {
    std::vector<std::uint8_t> padded(width + 2 * radius, 0);
    for (std::size_t y = 0; y < height; ++y) {
      std::copy_n(in + y * width, width, padded.begin() + static_cast<std::ptrdiff_t>(radius));
      std::uint8_t* dst = out + y * width;
      std::size_t x = 0;
      for (; x + 32 <= width; x += 32) {
        __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(padded.data() + x));
        for (std::size_t d = 1; d <= 2 * radius; ++d) {
          acc = combine(
              acc, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(padded.data() + x + d)),
              take_min);
        }
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + x), acc);
      }
      for (; x < width; ++x) {
        std::uint8_t acc = padded[x];
        for (std::size_t d = 1; d <= 2 * radius; ++d) acc = combine(acc, padded[x + d], take_min);
        dst[x] = acc;
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
    std::size_t x = 0;
    for (; x + 32 <= width; x += 32) {
      __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + lo * width + x));
      for (std::size_t row = lo + 1; row <= hi; ++row) {
        acc = combine(acc,
                      _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + row * width + x)),
                      take_min);
      }
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + x), acc);
    }
    for (; x < width; ++x) {
      std::uint8_t acc = in[lo * width + x];
      for (std::size_t row = lo + 1; row <= hi; ++row) acc = combine(acc, in[row * width + x], take_min);
      dst[x] = acc;
    }
  }
}

void affine_clamp(const float* in, float* out, std::size_t count, float offset, float scale) {
  const __m256 off = _mm256_set1_ps(offset);
  const __m256 sc = _mm256_set1_ps(scale);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= count; i += 8) {
    __m256 v = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(in + i), off), sc);
    v = _mm256_min_ps(_mm256_max_ps(v, zero), one);
    _mm256_storeu_ps(out + i, v);
  }
  for (; i < count; ++i) {
    float v = (in[i] - offset) * scale;
    v = v > 0.0f ? v : 0.0f;
    out[i] = v < 1.0f ? v : 1.0f;
  }
}

void threshold_above(const float* in, std::uint8_t* out, std::size_t count, float threshold,
                     bool invert) {
  const __m256 thr = _mm256_set1_ps(threshold);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256i order = _mm256_setr_epi32(0, 4, 1, 5, 2, 6, 3, 7);
  const __m256i low_bit = _mm256_set1_epi8(1);
  auto mask_of = [&](const float* p) {
    __m256 v = _mm256_loadu_ps(p);
    if (invert) v = _mm256_sub_ps(one, v);
    return _mm256_castps_si256(_mm256_cmp_ps(v, thr, _CMP_GT_OQ));
  };
  std::size_t i = 0;
  for (; i + 32 <= count; i += 32) {
    const __m256i a = _mm256_packs_epi32(mask_of(in + i), mask_of(in + i + 8));
    const __m256i b = _mm256_packs_epi32(mask_of(in + i + 16), mask_of(in + i + 24));
    __m256i bytes = _mm256_permutevar8x32_epi32(_mm256_packs_epi16(a, b), order);
    bytes = _mm256_and_si256(bytes, low_bit);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), bytes);
  }
  for (; i < count; ++i) {
    const float v = invert ? 1.0f - in[i] : in[i];
    out[i] = v > threshold ? 1 : 0;
  }
}

}  // namespace hmmlabel::kernels::avx2
