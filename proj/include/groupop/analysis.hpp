#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "groupop/moments.hpp"

namespace groupop {

/// Equilibrium opinion about each group under the current influence weights.
struct EquilibriumSummary {
    int n_groups = 0;
    std::vector<double> e;
    std::vector<double> S;
    std::vector<double> weights;  // [I * n_groups + J] = (N_g - d_IJ) hhat_IJ / hhat_JI

    double weight(int i, int j) const
    {
        return weights[static_cast<std::size_t>(i) * n_groups + j];
    }
};

EquilibriumSummary equilibrium(const MomentState& state, const MomentEngine& engine);

/// Second-order drivers of e_I over one step, per pair (I, J).
struct BiasBreakdown {
    int n_groups = 0;
    std::vector<double> positive;   // h'_IJ (IIJI - IIII + IIIJ - IJJI)
    std::vector<double> negative;   // h'_JI (JIJI - IIJI + IIJJ - JJJI)
    std::vector<double> weight;     // hhat_IJ / hhat_JI
    std::vector<double> prefactor;  // 2 (N_g - d_IJ) / (N_c (1 + S_I))
    std::vector<double> gossip;     // per group, see gossip_first_order_term
    std::vector<double> increment;  // per group, predicted e_I(t+1) - e_I(t)

    std::size_t at(int i, int j) const { return static_cast<std::size_t>(i) * n_groups + j; }
    /// Contribution of pair (I, J) to the increment, split by sign of origin.
    double positive_part(int i, int j) const { return prefactor[at(i, j)] * positive[at(i, j)]; }
    double negative_part(int i, int j) const
    {
        return prefactor[at(i, j)] * weight[at(i, j)] * negative[at(i, j)];
    }
};

BiasBreakdown bias_breakdown(const MomentState& state, const MomentEngine& engine);

/// Gossip contribution to the e_I increment (zero without gossip).
std::vector<double> gossip_first_order_term(const MomentState& state, const MomentEngine& engine);

/// e_I computed from next with the weights of prev: the quantity whose change
/// bias_breakdown(prev) predicts.
std::vector<double> frozen_weight_equilibrium(const MomentState& prev, const MomentState& next,
                                              const MomentEngine& engine);

/// Single group only: increment with the h'_II / N_a prefactor, as the
/// closed-form single-group expression is usually quoted.
double single_group_quoted_increment(const MomentState& state, const MomentEngine& engine);

/// sqrt(mean squared error) divided by the sum of |reference|, or by the
/// mean of |reference| when mean_normalised is set.
double rrmse(std::span<const double> approx, std::span<const double> reference,
             bool mean_normalised = false);

/// e series of every group, one entry per state.
std::vector<std::vector<double>> equilibrium_series(std::span<const MomentState> states,
                                                    const MomentEngine& engine);

/// e_I(t*) - e_I(t* - 1) per group, each e with the weights of its own step.
std::vector<double> trend(std::span<const MomentState> states, const MomentEngine& engine,
                          std::int64_t t_star);

enum class GapProfile {
    two_groups,   // levels +gap/2, -gap/2
    evenly_spaced // gap/2 down to -gap/2
};

/// Opinions every holder starts with about each group for a given gap.
InitialCondition gap_initial_condition(int n_groups, double gap, GapProfile profile);

struct SweepRow {
    double gap = 0.0;
    std::vector<double> trend;        // per group
    std::vector<double> pos_in;       // per group, in-group positive part at t*-1
    std::vector<double> pos_out;      // summed over other groups
    std::vector<double> neg_in;
    std::vector<double> neg_out;
    std::vector<double> gossip;
    std::vector<double> weights;      // [I * n_g + J] at t*-1
};

struct SweepResult {
    int n_groups = 0;
    std::vector<SweepRow> rows;
};

SweepResult sweep_initial_gap(const ModelParams& params, std::span<const double> gaps,
                              GapProfile profile, std::int64_t t_star = 1000, int threads = 0);

/// Smallest gap where the trend of group changes from positive to negative,
/// interpolated linearly between the bracketing grid points.
std::optional<double> sign_change(const SweepResult& sweep, int group);
std::optional<double> sign_change(std::span<const double> gaps, std::span<const double> values);

/// Regular grid from first to last inclusive (within rounding) with spacing step.
std::vector<double> gap_grid(double first, double last, double step);

}  // namespace groupop
