#include <atomic>
#include <string>

#include "kernels_internal.hpp"

namespace hmmlabel::kernels {

namespace {

constexpr KernelTable kScalarTable{
    Isa::scalar,          scalar::max_plus_step, scalar::accumulate_unchanged,
    scalar::window_extreme, scalar::affine_clamp,  scalar::threshold_above,
};

#if defined(HMMLABEL_HAVE_AVX2)
constexpr KernelTable kAvx2Table{
    Isa::avx2,            avx2::max_plus_step, avx2::accumulate_unchanged,
    avx2::window_extreme, avx2::affine_clamp,  avx2::threshold_above,
};
#endif

const KernelTable* initial_table() { return &table(detected_isa()); }

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa isa_from_string(std::string_view text) {
  if (text == "scalar") return Isa::scalar;
  if (text == "avx2") return Isa::avx2;
  throw InputError("unknown ISA '" + std::string(text) + "'");
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(HMMLABEL_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

const KernelTable& table(Isa isa) {
  if (!isa_supported(isa)) {
    throw InputError("ISA '" + std::string(to_string(isa)) + "' is not available on this CPU");
  }
#if defined(HMMLABEL_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active_isa(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

}  // namespace hmmlabel::kernels
