#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "groupop/core.hpp"
#include "groupop/moment_key.hpp"
#include "groupop/moment_system.hpp"

namespace groupop {

/// Raised when an integration produces a non-finite value.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::int64_t step)
        : std::runtime_error(what), step_(step)
    {
    }
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

/// Group-level moments, measured as deviations from the initial opinions.
struct MomentState {
    int n_groups = 0;
    std::vector<double> x_self;   // x_II
    std::vector<double> x_cross;  // x_JI at [J * n_groups + I], holder J, target I
    std::vector<double> second;   // aligned with MomentSystem::catalog()
    InitialCondition offsets;     // a_IJ(0)
    double t = 0.0;               // 0.5 after a half-step

    double self(int group) const { return x_self[group]; }
    double cross(int holder, int target) const
    {
        return x_cross[static_cast<std::size_t>(holder) * n_groups + target];
    }
};

/// Linearised influence around the group means; all tables are
/// [I * n_groups + J] for the influence of a J agent on an I agent.
struct InfluenceTable {
    int n_groups = 0;
    std::vector<double> h_bar;
    std::vector<double> h_prime;
    std::vector<double> h_hat;

    double bar(int i, int j) const { return h_bar[static_cast<std::size_t>(i) * n_groups + j]; }
    double prime(int i, int j) const
    {
        return h_prime[static_cast<std::size_t>(i) * n_groups + j];
    }
    double hat(int i, int j) const { return h_hat[static_cast<std::size_t>(i) * n_groups + j]; }
};

class MomentEngine {
public:
    explicit MomentEngine(const ModelParams& params);

    const ModelParams& params() const { return system_->params(); }
    const MomentSystem& system() const { return *system_; }

    /// All moments zero, offsets recorded. Requires every holder group to
    /// share the same initial opinion about each target group.
    MomentState init_moments(const InitialCondition& init) const;

    InfluenceTable influence_table(const MomentState& state) const;

    MomentState interaction_halfstep(const MomentState& state) const;
    /// Same update with an explicit influence table.
    MomentState interaction_halfstep(const MomentState& state, const InfluenceTable& h) const;

    MomentState attraction_fullstep(const MomentState& state) const;

    MomentState step(const MomentState& state) const
    {
        return attraction_fullstep(interaction_halfstep(state));
    }

    /// Records the state at t = 0 and every record_every steps (and at T).
    std::vector<MomentState> integrate(const InitialCondition& init, std::int64_t steps,
                                       std::int64_t record_every = 1) const;

    /// Second moment by key; empty patterns read as 0.
    double second(const MomentState& state, const MomentKey& key) const;

    /// Names of first moments then catalog moments, in storage order.
    std::vector<std::string> first_moment_names() const;
    std::vector<std::string> second_moment_names() const;

private:
    std::shared_ptr<const MomentSystem> system_;
};

}  // namespace groupop
