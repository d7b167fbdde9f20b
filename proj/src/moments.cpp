#include "groupop/moments.hpp"

#include <cmath>

namespace groupop {

MomentEngine::MomentEngine(const ModelParams& params)
    : system_(std::make_shared<const MomentSystem>(params))
{
}

MomentState MomentEngine::init_moments(const InitialCondition& init) const
{
    const auto& p = params();
    if (init.n_groups() != p.n_groups)
        throw ParameterError("initial condition and parameters disagree on group count");
    if (!init.shared_by_holders())
        throw ParameterError(
            "moment engine needs initial opinions shared by all holders (a_IJ(0) = level of J)");
    MomentState s;
    s.n_groups = p.n_groups;
    s.x_self.assign(p.n_groups, 0.0);
    s.x_cross.assign(static_cast<std::size_t>(p.n_groups) * p.n_groups, 0.0);
    s.second.assign(system_->catalog().size(), 0.0);
    s.offsets = init;
    s.t = 0.0;
    return s;
}

InfluenceTable MomentEngine::influence_table(const MomentState& s) const
{
    const int ng = s.n_groups;
    const double sigma = params().sigma;
    InfluenceTable h;
    h.n_groups = ng;
    const std::size_t n = static_cast<std::size_t>(ng) * ng;
    h.h_bar.resize(n);
    h.h_prime.resize(n);
    h.h_hat.resize(n);
    for (int i = 0; i < ng; ++i) {
        for (int j = 0; j < ng; ++j) {
            const std::size_t ij = static_cast<std::size_t>(i) * ng + j;
            // x_IJ is the opinion of I about J; for J = I it is the in-group
            // cross average.
            const double u =
                (s.self(i) + s.offsets(i, i)) - (s.cross(i, j) + s.offsets(i, j));
            const double z = s.self(i) - s.cross(i, j);
            h.h_bar[ij] = influence(u, sigma);
            h.h_prime[ij] = influence_derivative(u, sigma);
            h.h_hat[ij] = h.h_bar[ij] - h.h_prime[ij] * z;
        }
    }
    return h;
}

MomentState MomentEngine::interaction_halfstep(const MomentState& s) const
{
    return interaction_halfstep(s, influence_table(s));
}

MomentState MomentEngine::interaction_halfstep(const MomentState& s,
                                               const InfluenceTable& h) const
{
    const auto& p = params();
    const int ng = p.n_groups;
    const int n = p.group_size;
    const double nc = static_cast<double>(p.couples());
    const double nt = static_cast<double>(p.triples());
    const auto& sys = *system_;

    MomentState out = s;
    out.t = s.t + 0.5;

    auto sec = [&](int idx) { return idx < 0 ? 0.0 : s.second[idx]; };

    for (int i = 0; i < ng; ++i) {
        double d_self = 0.0;
        for (int j = 0; j < ng; ++j) {
            const int partners = n - (i == j ? 1 : 0);
            if (partners <= 0)
                continue;
            const auto& l = sys.links(i, j);
            const double second_order = sec(l.self_times_cross) - sec(l.self_squared) +
                                        sec(l.self_times_own) - sec(l.reciprocal);
            d_self += 2.0 * partners / nc *
                      (h.hat(i, j) * (s.cross(j, i) - s.self(i)) + h.prime(i, j) * second_order);
        }
        out.x_self[i] = s.self(i) + d_self;
    }

    for (int holder = 0; holder < ng; ++holder) {
        for (int target = 0; target < ng; ++target) {
            if (holder == target && n < 2)
                continue;
            // links(I = target, J = holder): row agent i of I, j of J.
            const auto& l = sys.links(target, holder);
            const double second_order = sec(l.cross_squared) - sec(l.self_times_cross) +
                                        sec(l.self_times_self) - sec(l.holder_self_cross);
            double d = 2.0 / nc *
                       (h.hat(holder, target) * (s.self(target) - s.cross(holder, target)) +
                        h.prime(holder, target) * second_order);
            if (p.gossip > 0) {
                double g = 0.0;
                for (int q = 0; q < ng; ++q) {
                    const int third = n - (q == target ? 1 : 0) - (q == holder ? 1 : 0);
                    if (third <= 0)
                        continue;
                    g += third * h.hat(holder, q) * (s.cross(q, target) - s.cross(holder, target));
                }
                d += 2.0 * p.gossip / nt * g;
            }
            out.x_cross[static_cast<std::size_t>(holder) * ng + target] =
                s.cross(holder, target) + d;
        }
    }

    // Second moments: compiled terms, the extra slots hold the constant 1.
    std::vector<double> hv(h.h_hat);
    hv.push_back(1.0);
    std::vector<double> src(s.second);
    src.push_back(1.0);
    for (const auto& t : sys.interaction_program())
        out.second[t.target] += t.factor * hv[t.h1] * hv[t.h2] * src[t.source];
    return out;
}

MomentState MomentEngine::attraction_fullstep(const MomentState& s) const
{
    MomentState out = s;
    out.t = s.t + 0.5;
    std::fill(out.second.begin(), out.second.end(), 0.0);
    for (const auto& t : system_->attraction_program())
        out.second[t.target] += t.coeff * s.second[t.source];
    return out;
}

std::vector<MomentState> MomentEngine::integrate(const InitialCondition& init,
                                                 std::int64_t steps,
                                                 std::int64_t record_every) const
{
    if (steps < 0)
        throw ParameterError("integrate: step count must be non-negative");
    if (record_every < 1)
        throw ParameterError("integrate: record_every must be at least 1");
    std::vector<MomentState> out;
    auto state = init_moments(init);
    out.push_back(state);
    for (std::int64_t t = 1; t <= steps; ++t) {
        state = step(state);
        auto finite = [](const std::vector<double>& v) {
            for (double x : v)
                if (!std::isfinite(x))
                    return false;
            return true;
        };
        if (!finite(state.x_self) || !finite(state.x_cross) || !finite(state.second))
            throw NumericalError("moment integration produced a non-finite value at step " +
                                     std::to_string(t),
                                 t);
        if (t % record_every == 0 || t == steps)
            out.push_back(state);
    }
    return out;
}

double MomentEngine::second(const MomentState& s, const MomentKey& key) const
{
    if (const auto idx = system_->index_of(key))
        return s.second[*idx];
    if (key.member_count(params().group_size) == 0)
        return 0.0;
    throw std::out_of_range("moment " + key.name() + " is not in the catalog");
}

std::vector<std::string> MomentEngine::first_moment_names() const
{
    std::vector<std::string> names;
    const int ng = params().n_groups;
    for (int i = 0; i < ng; ++i)
        names.push_back(self_moment_name(i));
    for (int j = 0; j < ng; ++j)
        for (int i = 0; i < ng; ++i)
            names.push_back(cross_moment_name(j, i));
    return names;
}

std::vector<std::string> MomentEngine::second_moment_names() const
{
    std::vector<std::string> names;
    for (const auto& k : system_->catalog())
        names.push_back(k.name());
    return names;
}

}  // namespace groupop
