#include <atomic>
#include <cstdlib>
#include <string>

#include "elm/simd/kernels.hpp"

namespace elm::simd {
namespace {

const KernelTable* pick() {
    if (const char* env = std::getenv("ELM_SIMD")) {
        const std::string want = env;
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2" && avx2_kernels()) return avx2_kernels();
        if (want == "neon" && neon_kernels()) return neon_kernels();
    }
    if (const KernelTable* t = avx2_kernels()) return t;
    if (const KernelTable* t = neon_kernels()) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{pick()};
    return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_release); }

}  // namespace elm::simd
