#include "portopt/kernels.hpp"

#include <atomic>
#include <stdexcept>

#include "kernels_impl.hpp"

namespace portopt::kern {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable* pick_default() {
    if (cpu_has_avx2() && avx2_table() != nullptr) {
        g_backend.store(Backend::avx2, std::memory_order_relaxed);
        return avx2_table();
    }
    g_backend.store(Backend::scalar, std::memory_order_relaxed);
    return &scalar_table();
}

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        t = pick_default();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

}  // namespace

bool avx2_supported() { return cpu_has_avx2() && avx2_table() != nullptr; }

Backend active_backend() {
    active();
    return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend b) {
    switch (b) {
        case Backend::scalar:
            g_active.store(&scalar_table(), std::memory_order_release);
            g_backend.store(Backend::scalar, std::memory_order_relaxed);
            return;
        case Backend::avx2:
            if (!avx2_supported()) throw std::runtime_error("AVX2 backend not supported on this CPU/build");
            g_active.store(avx2_table(), std::memory_order_release);
            g_backend.store(Backend::avx2, std::memory_order_relaxed);
            return;
    }
    throw std::runtime_error("unknown kernel backend");
}

std::string backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
void scal(double a, double* x, std::size_t n) { active().scal(a, x, n); }
double sum(const double* x, std::size_t n) { return active().sum(x, n); }
double sum_sq(const double* x, std::size_t n) { return active().sum_sq(x, n); }
double l1_diff(const double* x, const double* y, std::size_t n) { return active().l1_diff(x, y, n); }
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    active().matvec(a, rows, cols, x, y);
}
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    active().matvec_t_acc(a, rows, cols, x, y);
}
void ger_acc(double* a, std::size_t rows, std::size_t cols, const double* x, const double* y) {
    active().ger_acc(a, rows, cols, x, y);
}

}  // namespace portopt::kern
