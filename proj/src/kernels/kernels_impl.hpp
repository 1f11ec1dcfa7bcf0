#pragma once

#include <cstddef>

// Backend function tables. Each backend fills one of these; dispatch lives in
// kernels.cpp.

namespace portopt::kern {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sum_sq)(const double*, std::size_t);
    double (*l1_diff)(const double*, const double*, std::size_t);
    void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*matvec_t_acc)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*ger_acc)(double*, std::size_t, std::size_t, const double*, const double*);
};

const KernelTable& scalar_table();

// Null when the translation unit was built without AVX2 support.
const KernelTable* avx2_table();

}  // namespace portopt::kern
