#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "groupop/core.hpp"
#include "groupop/moment_key.hpp"

namespace groupop {

using Rng = std::mt19937_64;

/// Everything random about one pair interaction.
struct Interaction {
    int first = 0;   // i
    int second = 0;  // j
    /// Noise for a_ii, a_ji, a_jj, a_ij, in that order.
    std::array<double, 4> pair_noise{};
    std::vector<int> gossip_targets;
    /// Two draws per target g: for a_ig then a_jg.
    std::vector<double> gossip_noise;
};

/// Draws an ordered couple uniformly, then noises and distinct gossip targets.
Interaction draw_interaction(const ModelParams& params, Rng& rng);

/// Applies an interaction to an explicit matrix; all right-hand sides read
/// the opinions before the interaction.
void apply_interaction(OpinionMatrix& opinions, const Interaction& interaction,
                       const ModelParams& params);

void pair_step(OpinionMatrix& opinions, const ModelParams& params, Rng& rng);

/// Moves every opinion toward its group-level average (self-opinions toward
/// the group's mean self-opinion, others toward the holder-group/target-group
/// mean excluding self-opinions).
void attraction_step(OpinionMatrix& opinions, const ModelParams& params,
                     const GroupLayout& layout);

struct GroupAggregates {
    int n_groups = 0;
    std::vector<double> x_self;   // mean self-opinion of each group
    std::vector<double> x_cross;  // [J * n_groups + I], holder group J, target group I
    std::vector<MomentKey> keys;
    std::vector<double> second;   // aligned with keys

    double self(int group) const { return x_self[group]; }
    double cross(int holder, int target) const
    {
        return x_cross[static_cast<std::size_t>(holder) * n_groups + target];
    }
};

/// Exact average of the product named by key over all matching agent tuples.
double moment_of(const OpinionMatrix& opinions, const GroupLayout& layout, const MomentKey& key);

GroupAggregates group_aggregates(const OpinionMatrix& opinions, const GroupLayout& layout,
                                 std::span<const MomentKey> keys = {});

/// One stochastic trajectory. Attraction is held lazily as a per-block affine
/// map over stored values, so a step costs O(k) instead of O(N_a^2).
class Simulation {
public:
    Simulation(const ModelParams& params, const InitialCondition& init, std::uint64_t seed);

    const ModelParams& params() const { return params_; }
    const GroupLayout& layout() const { return layout_; }
    std::int64_t step_count() const { return step_; }

    void pair_step();
    void attraction_step();
    void step()
    {
        pair_step();
        attraction_step();
        ++step_;
    }

    double opinion(int holder, int target) const
    {
        const std::size_t e = index(holder, target);
        return alpha_ * stored_[e] + offset_[block_[e]];
    }
    OpinionMatrix opinions() const;
    const OpinionMatrix& initial_opinions() const { return initial_; }

    /// First moments from running block sums.
    void first_moments(std::span<double> x_self, std::span<double> x_cross) const;

    /// Aggregates of a(t), or of a(t) - a(0) when deviations is set.
    GroupAggregates aggregates(std::span<const MomentKey> keys, bool deviations) const;

private:
    std::size_t index(int holder, int target) const
    {
        return static_cast<std::size_t>(holder) * layout_.agents() + target;
    }
    void write(int holder, int target, double value);
    void renormalize();

    ModelParams params_;
    GroupLayout layout_;
    OpinionMatrix initial_;
    Rng rng_;
    std::int64_t step_ = 0;
    int n_blocks_ = 0;
    std::vector<double> stored_;
    std::vector<int> block_;
    double alpha_ = 1.0;
    std::vector<double> offset_;
    std::vector<double> block_sum_;
    std::vector<double> block_count_;
};

struct TrajectoryOptions {
    std::int64_t sample_every = 1;
    bool deviations = false;
    std::vector<MomentKey> second_keys;
};

struct TrajectoryRecord {
    std::int64_t step;
    GroupAggregates aggregates;
};

/// Records at t = 0, at every multiple of sample_every and at the last step.
std::vector<TrajectoryRecord> run_trajectory(const ModelParams& params,
                                             const InitialCondition& init, std::int64_t steps,
                                             std::uint64_t seed,
                                             const TrajectoryOptions& options = {});

/// Seed of run `index` within an ensemble.
std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t index);

struct EnsembleOptions {
    std::int64_t sample_every = 1;
    bool deviations = true;
    std::vector<MomentKey> second_keys;
    int threads = 0;  // 0: GROUPOP_THREADS, else hardware concurrency
};

/// Per-sample mean and standard error of each aggregate across runs.
struct EnsembleStats {
    std::vector<std::int64_t> times;
    std::vector<std::string> names;  // first moments, then second_keys
    std::vector<double> mean;        // [time * names.size() + variable]
    std::vector<double> std_error;
    std::int64_t run_count = 0;

    std::size_t n_vars() const { return names.size(); }
    double mean_at(std::size_t time, std::size_t var) const { return mean[time * n_vars() + var]; }
    double error_at(std::size_t time, std::size_t var) const
    {
        return std_error[time * n_vars() + var];
    }
    std::size_t var_index(const std::string& name) const;
};

EnsembleStats run_ensemble(const ModelParams& params, const InitialCondition& init,
                           std::int64_t steps, std::int64_t n_runs, std::uint64_t base_seed,
                           const EnsembleOptions& options = {});

/// Worker count: explicit request, else GROUPOP_THREADS, else hardware.
int resolve_threads(int requested);

}  // namespace groupop
