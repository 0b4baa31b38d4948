#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace mulab::simd {

namespace {

constexpr KernelTable kScalar{&detail::dot_scalar, &detail::axpy_scalar, &detail::adam_scalar};

#if defined(MULAB_HAVE_AVX2_KERNELS)
constexpr KernelTable kAvx2{&detail::dot_avx2, &detail::axpy_avx2, &detail::adam_avx2};
#endif
#if defined(MULAB_HAVE_NEON_KERNELS)
constexpr KernelTable kNeon{&detail::dot_neon, &detail::axpy_neon, &detail::adam_neon};
#endif

const KernelTable* table_for(Backend b) noexcept {
    switch (b) {
        case Backend::Scalar: return &kScalar;
        case Backend::Avx2: return avx2_kernels();
        case Backend::Neon: return neon_kernels();
    }
    return nullptr;
}

Backend detect() noexcept {
    if (const char* env = std::getenv("MULAB_SIMD")) {
        const std::string_view want(env);
        for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
            if (want == backend_name(b) && table_for(b) != nullptr) return b;
        }
    }
    if (avx2_kernels()) return Backend::Avx2;
    if (neon_kernels()) return Backend::Neon;
    return Backend::Scalar;
}

struct Active {
    std::atomic<Backend> backend{detect()};
    std::atomic<const KernelTable*> table{table_for(backend.load())};
};

Active& active() noexcept {
    static Active a;
    return a;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

const KernelTable* avx2_kernels() noexcept {
#if defined(MULAB_HAVE_AVX2_KERNELS)
    static const bool ok = __builtin_cpu_supports("avx2");
    return ok ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* neon_kernels() noexcept {
#if defined(MULAB_HAVE_NEON_KERNELS)
    return &kNeon;  // Advanced SIMD is mandatory on AArch64.
#else
    return nullptr;
#endif
}

Backend active_backend() noexcept { return active().backend.load(std::memory_order_relaxed); }

bool backend_available(Backend backend) noexcept { return table_for(backend) != nullptr; }

bool set_backend(Backend backend) noexcept {
    const KernelTable* t = table_for(backend);
    if (!t) return false;
    active().table.store(t, std::memory_order_relaxed);
    active().backend.store(backend, std::memory_order_relaxed);
    return true;
}

std::string_view backend_name(Backend backend) noexcept {
    switch (backend) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "unknown";
}

const KernelTable& kernels() noexcept { return *active().table.load(std::memory_order_relaxed); }

}  // namespace mulab::simd
