#include "groupop/core.hpp"

#include <cmath>
#include <sstream>

namespace groupop {

ValidationReport validate(const ModelParams& p)
{
    ValidationReport report;
    auto& err = report.errors;
    if (p.n_groups < 1)
        err.push_back("n_groups must be at least 1");
    if (p.group_size < 1)
        err.push_back("group_size must be at least 1");
    if (p.n_groups >= 1 && p.group_size >= 1 && p.agents() < 2)
        err.push_back("at least two agents are required for pair interactions");
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma))
        err.push_back("sigma must be positive");
    if (!(p.delta >= 0.0) || !std::isfinite(p.delta))
        err.push_back("delta must be non-negative");
    if (!(p.mu > 0.0 && p.mu <= 1.0))
        err.push_back("mu must lie in (0, 1]");
    if (p.gossip < 0)
        err.push_back("gossip fan-out k must be non-negative");
    if (p.gossip > 0 && p.agents() < p.gossip + 2) {
        std::ostringstream os;
        os << "gossip fan-out k=" << p.gossip << " needs at least " << p.gossip + 2
           << " agents, got " << p.agents();
        err.push_back(os.str());
    }
    if (p.gossip > 0 && p.group_size < 4)
        report.warnings.push_back(
            "group_size < 4 with gossip: some moment patterns are empty and held at 0");
    return report;
}

void require_valid(const ModelParams& params)
{
    const auto report = validate(params);
    if (report.ok())
        return;
    std::string msg = "invalid model parameters:";
    for (const auto& e : report.errors)
        msg += " " + e + ";";
    throw ParameterError(msg);
}

namespace {

void check_influence_args(double u, double sigma)
{
    if (!std::isfinite(u))
        throw ParameterError("influence: opinion difference must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ParameterError("sigma must be positive");
}

}  // namespace

double influence(double u, double sigma)
{
    check_influence_args(u, sigma);
    return 1.0 / (1.0 + std::exp(u / sigma));
}

double influence_derivative(double u, double sigma)
{
    check_influence_args(u, sigma);
    // H'(u) = -H(u) (1 - H(u)) / sigma, written so neither factor overflows.
    const double h = 1.0 / (1.0 + std::exp(u / sigma));
    const double g = 1.0 / (1.0 + std::exp(-u / sigma));
    return -h * g / sigma;
}

GroupLayout::GroupLayout(int n_groups, int group_size)
    : n_groups_(n_groups), group_size_(group_size)
{
    if (n_groups < 1 || group_size < 1)
        throw ParameterError("group layout needs at least one group of one agent");
}

InitialCondition::InitialCondition(int n_groups, double value)
    : n_groups_(n_groups), values_(static_cast<std::size_t>(n_groups) * n_groups, value)
{
}

InitialCondition::InitialCondition(int n_groups, std::vector<double> row_major)
    : n_groups_(n_groups), values_(std::move(row_major))
{
    if (values_.size() != static_cast<std::size_t>(n_groups) * n_groups)
        throw ParameterError("initial condition must have n_groups^2 entries");
    for (double v : values_)
        if (!(v >= -1.0 && v <= 1.0))
            throw ParameterError("initial opinions must lie in [-1, 1]");
}

InitialCondition InitialCondition::shared_levels(std::span<const double> level)
{
    const int n = static_cast<int>(level.size());
    std::vector<double> values;
    values.reserve(level.size() * level.size());
    for (int holder = 0; holder < n; ++holder)
        for (int target = 0; target < n; ++target)
            values.push_back(level[target]);
    return InitialCondition(n, std::move(values));
}

bool InitialCondition::shared_by_holders() const
{
    for (int holder = 1; holder < n_groups_; ++holder)
        for (int target = 0; target < n_groups_; ++target)
            if ((*this)(holder, target) != (*this)(0, target))
                return false;
    return true;
}

OpinionMatrix InitialCondition::expand(const GroupLayout& layout) const
{
    if (layout.n_groups() != n_groups_)
        throw ParameterError("initial condition and layout disagree on group count");
    const int n = layout.agents();
    OpinionMatrix m(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = (*this)(layout.group_of(i), layout.group_of(j));
    return m;
}

}  // namespace groupop
