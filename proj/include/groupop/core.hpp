#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace groupop {

class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Scalar parameters of the group opinion model.
struct ModelParams {
    int n_groups = 2;      // n_g
    int group_size = 20;   // N_g, agents per group
    double delta = 0.05;   // noise half-width
    double sigma = 0.3;    // influence softness
    double mu = 0.995;     // attraction retention
    int gossip = 0;        // k, third parties discussed per interaction
    bool clamp_opinions = true;

    int agents() const { return n_groups * group_size; }
    /// N_a (N_a - 1), ordered couples.
    std::int64_t couples() const
    {
        const std::int64_t n = agents();
        return n * (n - 1);
    }
    /// N_a (N_a - 1) (N_a - 2).
    std::int64_t triples() const
    {
        const std::int64_t n = agents();
        return n * (n - 1) * (n - 2);
    }
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

ValidationReport validate(const ModelParams& params);

/// Throws ParameterError listing every violated invariant.
void require_valid(const ModelParams& params);

/// Logistic influence H(u) = 1 / (1 + exp(u / sigma)), u = a_ii - a_ij.
double influence(double u, double sigma);

/// dH/du, always negative.
double influence_derivative(double u, double sigma);

/// Agents are laid out contiguously: group g owns [g * size, (g + 1) * size).
class GroupLayout {
public:
    GroupLayout(int n_groups, int group_size);
    explicit GroupLayout(const ModelParams& params)
        : GroupLayout(params.n_groups, params.group_size)
    {
    }

    int n_groups() const { return n_groups_; }
    int group_size() const { return group_size_; }
    int agents() const { return n_groups_ * group_size_; }
    int group_of(int agent) const { return agent / group_size_; }
    int begin(int group) const { return group * group_size_; }
    int end(int group) const { return (group + 1) * group_size_; }

private:
    int n_groups_;
    int group_size_;
};

/// Square array of opinions; entry (i, j) is the opinion of agent i about j.
class OpinionMatrix {
public:
    OpinionMatrix() = default;
    explicit OpinionMatrix(int side, double value = 0.0)
        : side_(side), values_(static_cast<std::size_t>(side) * side, value)
    {
    }

    int side() const { return side_; }
    double& operator()(int holder, int target)
    {
        return values_[static_cast<std::size_t>(holder) * side_ + target];
    }
    double operator()(int holder, int target) const
    {
        return values_[static_cast<std::size_t>(holder) * side_ + target];
    }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    friend bool operator==(const OpinionMatrix&, const OpinionMatrix&) = default;

private:
    int side_ = 0;
    std::vector<double> values_;
};

/// Initial opinion a_IJ(0) held by every agent of group I about every agent
/// of group J (entry (I, I) also sets self-opinions).
class InitialCondition {
public:
    InitialCondition() = default;
    explicit InitialCondition(int n_groups, double value = 0.0);
    InitialCondition(int n_groups, std::vector<double> row_major);

    /// Every holder shares the same opinion about group J: a_IJ(0) = level[J].
    static InitialCondition shared_levels(std::span<const double> level);

    int n_groups() const { return n_groups_; }
    double operator()(int holder_group, int target_group) const
    {
        return values_[static_cast<std::size_t>(holder_group) * n_groups_ + target_group];
    }
    double& operator()(int holder_group, int target_group)
    {
        return values_[static_cast<std::size_t>(holder_group) * n_groups_ + target_group];
    }
    std::span<const double> values() const { return values_; }

    /// True when a_IJ(0) depends on J only.
    bool shared_by_holders() const;

    OpinionMatrix expand(const GroupLayout& layout) const;

private:
    int n_groups_ = 0;
    std::vector<double> values_;
};

}  // namespace groupop
