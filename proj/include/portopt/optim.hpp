#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace portopt {

// Adaptive-moment gradient descent with bias correction.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;

    explicit Adam(double learning_rate = 1e-3) : lr(learning_rate) {}

    void step(std::span<double> params, std::span<const double> grads) {
        if (m.size() != params.size()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
            t = 0;
        }
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

}  // namespace portopt
