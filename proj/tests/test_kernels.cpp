#include <doctest.h>

#include <cmath>
#include <vector>

#include "portopt/kernels.hpp"
#include "portopt/rng.hpp"

using namespace portopt;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

}  // namespace

TEST_CASE("scalar kernels: known values") {
    kern::set_backend(kern::Backend::scalar);
    const std::vector<double> x = {1.0, 2.0, 3.0};
    const std::vector<double> y = {4.0, -5.0, 6.0};
    CHECK(kern::dot(x.data(), y.data(), 3) == doctest::Approx(12.0));
    CHECK(kern::sum(x.data(), 3) == doctest::Approx(6.0));
    CHECK(kern::sum_sq(x.data(), 3) == doctest::Approx(14.0));
    CHECK(kern::l1_diff(x.data(), y.data(), 3) == doctest::Approx(3.0 + 7.0 + 3.0));

    std::vector<double> z = y;
    kern::axpy(2.0, x.data(), z.data(), 3);
    CHECK(z[0] == doctest::Approx(6.0));
    CHECK(z[1] == doctest::Approx(-1.0));
    CHECK(z[2] == doctest::Approx(12.0));

    const std::vector<double> a = {1, 0, 1, 0, 2, 0};  // 2x3
    std::vector<double> out(2);
    kern::matvec(a.data(), 2, 3, x.data(), out.data());
    CHECK(out[0] == doctest::Approx(4.0));
    CHECK(out[1] == doctest::Approx(4.0));
}

TEST_CASE("avx2 backend matches the scalar reference") {
    if (!kern::avx2_supported()) {
        MESSAGE("AVX2 not available; equivalence suite skipped");
        return;
    }
    Rng rng(7);
    for (std::size_t trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.next_below(70));
        const auto x = random_vec(n, rng);
        const auto y = random_vec(n, rng);
        const std::size_t rows = 1 + static_cast<std::size_t>(rng.next_below(20));
        const auto a = random_vec(rows * n, rng);
        const auto xr = random_vec(rows, rng);

        kern::set_backend(kern::Backend::scalar);
        const double dot_s = kern::dot(x.data(), y.data(), n);
        const double sum_s = kern::sum(x.data(), n);
        const double ssq_s = kern::sum_sq(x.data(), n);
        const double l1_s = kern::l1_diff(x.data(), y.data(), n);
        std::vector<double> mv_s(rows), mvt_s(n, 0.0), ger_s(rows * n, 0.25), axpy_s = y;
        kern::matvec(a.data(), rows, n, x.data(), mv_s.data());
        kern::matvec_t_acc(a.data(), rows, n, xr.data(), mvt_s.data());
        kern::ger_acc(ger_s.data(), rows, n, xr.data(), x.data());
        kern::axpy(1.7, x.data(), axpy_s.data(), n);

        kern::set_backend(kern::Backend::avx2);
        const double dot_v = kern::dot(x.data(), y.data(), n);
        const double sum_v = kern::sum(x.data(), n);
        const double ssq_v = kern::sum_sq(x.data(), n);
        const double l1_v = kern::l1_diff(x.data(), y.data(), n);
        std::vector<double> mv_v(rows), mvt_v(n, 0.0), ger_v(rows * n, 0.25), axpy_v = y;
        kern::matvec(a.data(), rows, n, x.data(), mv_v.data());
        kern::matvec_t_acc(a.data(), rows, n, xr.data(), mvt_v.data());
        kern::ger_acc(ger_v.data(), rows, n, xr.data(), x.data());
        kern::axpy(1.7, x.data(), axpy_v.data(), n);

        CHECK(dot_v == doctest::Approx(dot_s).epsilon(1e-12));
        CHECK(sum_v == doctest::Approx(sum_s).epsilon(1e-12));
        CHECK(ssq_v == doctest::Approx(ssq_s).epsilon(1e-12));
        CHECK(l1_v == doctest::Approx(l1_s).epsilon(1e-12));
        for (std::size_t i = 0; i < rows; ++i)
            CHECK(mv_v[i] == doctest::Approx(mv_s[i]).epsilon(1e-12));
        for (std::size_t i = 0; i < n; ++i)
            CHECK(mvt_v[i] == doctest::Approx(mvt_s[i]).epsilon(1e-12));
        for (std::size_t i = 0; i < rows * n; ++i)
            CHECK(ger_v[i] == doctest::Approx(ger_s[i]).epsilon(1e-12));
        for (std::size_t i = 0; i < n; ++i)
            CHECK(axpy_v[i] == doctest::Approx(axpy_s[i]).epsilon(1e-12));
    }
    kern::set_backend(kern::Backend::scalar);
}

TEST_CASE("backend selection reports its name") {
    kern::set_backend(kern::Backend::scalar);
    CHECK(kern::active_backend() == kern::Backend::scalar);
    CHECK(kern::backend_name(kern::active_backend()) == "scalar");
    if (kern::avx2_supported()) {
        kern::set_backend(kern::Backend::avx2);
        CHECK(kern::active_backend() == kern::Backend::avx2);
        kern::set_backend(kern::Backend::scalar);
    }
}
