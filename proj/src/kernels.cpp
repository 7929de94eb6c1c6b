#include "labelprop/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace labelprop::kern {
namespace {

const Ops* capability_default() {
#if defined(LABELPROP_HAVE_AVX2_KERNELS)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return &avx2_ops;
    }
#endif
#if defined(LABELPROP_HAVE_NEON_KERNELS)
    return &neon_ops;
#endif
    return &scalar_ops;
}

const Ops* lookup(std::string_view name) {
    if (name == "auto") return capability_default();
    if (name == "scalar") return &scalar_ops;
#if defined(LABELPROP_HAVE_AVX2_KERNELS)
    if (name == "avx2" && __builtin_cpu_supports("avx2") &&
        __builtin_cpu_supports("fma")) {
        return &avx2_ops;
    }
#endif
#if defined(LABELPROP_HAVE_NEON_KERNELS)
    if (name == "neon") return &neon_ops;
#endif
    return nullptr;
}

const Ops* initial_backend() {
    if (const char* env = std::getenv("LABELPROP_KERNELS")) {
        if (const Ops* ops = lookup(env)) return ops;
    }
    return capability_default();
}

std::atomic<const Ops*>& active_slot() {
    static std::atomic<const Ops*> slot{initial_backend()};
    return slot;
}

}  // namespace

const Ops& active() { return *active_slot().load(std::memory_order_relaxed); }

std::string_view backend_name() {
    const Ops* ops = &active();
#if defined(LABELPROP_HAVE_AVX2_KERNELS)
    if (ops == &avx2_ops) return "avx2";
#endif
#if defined(LABELPROP_HAVE_NEON_KERNELS)
    if (ops == &neon_ops) return "neon";
#endif
    (void)ops;
    return "scalar";
}

bool select_backend(std::string_view name) {
    const Ops* ops = lookup(name);
    if (!ops) return false;
    active_slot().store(ops, std::memory_order_relaxed);
    return true;
}

}  // namespace labelprop::kern
