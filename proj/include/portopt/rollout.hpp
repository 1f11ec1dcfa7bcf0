#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "portopt/matrix.hpp"

namespace portopt {

// Per-step trajectory storage shared by the environment driver and the policy
// updater. Advantages and value targets are populated by compute_gae.
struct Rollout {
    Matrix states;   // n x state_dim
    Matrix actions;  // n x n_assets
    std::vector<double> log_probs;
    std::vector<double> values;
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<double> value_targets;
    std::vector<std::uint8_t> dones;

    std::size_t size() const { return rewards.size(); }

    void reserve(std::size_t n, std::size_t state_dim, std::size_t action_dim) {
        states = Matrix(n, state_dim);
        actions = Matrix(n, action_dim);
        log_probs.reserve(n);
        values.reserve(n);
        rewards.reserve(n);
        dones.reserve(n);
    }

    void clear() {
        states = Matrix();
        actions = Matrix();
        log_probs.clear();
        values.clear();
        rewards.clear();
        advantages.clear();
        value_targets.clear();
        dones.clear();
    }
};

}  // namespace portopt
