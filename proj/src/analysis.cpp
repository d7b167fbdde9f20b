#include "groupop/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "groupop/simulator.hpp"

namespace groupop {

namespace {

std::vector<double> weight_table(const InfluenceTable& h, int group_size)
{
    const int ng = h.n_groups;
    std::vector<double> w(static_cast<std::size_t>(ng) * ng);
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < ng; ++j) {
            const double back = h.hat(j, i);
            if (back == 0.0 || !std::isfinite(back))
                throw NumericalError("influence of group " + std::to_string(j) + " on group " +
                                         std::to_string(i) + " underflowed to zero",
                                     -1);
            w[static_cast<std::size_t>(i) * ng + j] =
                (group_size - (i == j ? 1 : 0)) * h.hat(i, j) / back;
        }
    return w;
}

std::vector<double> e_with(const MomentState& s, std::span<const double> w)
{
    const int ng = s.n_groups;
    std::vector<double> e(ng);
    for (int i = 0; i < ng; ++i) {
        double num = s.self(i);
        double S = 0.0;
        for (int j = 0; j < ng; ++j) {
            num += w[static_cast<std::size_t>(i) * ng + j] * s.cross(j, i);
            S += w[static_cast<std::size_t>(i) * ng + j];
        }
        e[i] = num / (1.0 + S);
    }
    return e;
}

std::vector<double> gossip_term(const MomentState& s, const InfluenceTable& h,
                                std::span<const double> w, const ModelParams& p)
{
    const int ng = s.n_groups;
    std::vector<double> out(ng, 0.0);
    if (p.gossip == 0)
        return out;
    const int n = p.group_size;
    const double nt = static_cast<double>(p.triples());
    for (int i = 0; i < ng; ++i) {
        double S = 0.0;
        double sum = 0.0;
        for (int j = 0; j < ng; ++j) {
            const double wij = w[static_cast<std::size_t>(i) * ng + j];
            S += wij;
            double inner = 0.0;
            for (int q = 0; q < ng; ++q) {
                const int third = n - (q == i ? 1 : 0) - (q == j ? 1 : 0);
                if (third > 0)
                    inner += third * h.hat(j, q) * (s.cross(q, i) - s.cross(j, i));
            }
            sum += wij * 2.0 * p.gossip / nt * inner;
        }
        out[i] = sum / (1.0 + S);
    }
    return out;
}

}  // namespace

EquilibriumSummary equilibrium(const MomentState& state, const MomentEngine& engine)
{
    const auto h = engine.influence_table(state);
    EquilibriumSummary out;
    out.n_groups = state.n_groups;
    out.weights = weight_table(h, engine.params().group_size);
    out.e = e_with(state, out.weights);
    out.S.assign(state.n_groups, 0.0);
    for (int i = 0; i < state.n_groups; ++i)
        for (int j = 0; j < state.n_groups; ++j)
            out.S[i] += out.weight(i, j);
    return out;
}

std::vector<double> gossip_first_order_term(const MomentState& state, const MomentEngine& engine)
{
    const auto h = engine.influence_table(state);
    const auto w = weight_table(h, engine.params().group_size);
    return gossip_term(state, h, w, engine.params());
}

BiasBreakdown bias_breakdown(const MomentState& s, const MomentEngine& engine)
{
    const auto& p = engine.params();
    const auto& sys = engine.system();
    const int ng = s.n_groups;
    const int n = p.group_size;
    const double nc = static_cast<double>(p.couples());
    const auto h = engine.influence_table(s);
    const auto w = weight_table(h, n);
    auto sec = [&](int idx) { return idx < 0 ? 0.0 : s.second[idx]; };

    BiasBreakdown b;
    b.n_groups = ng;
    const std::size_t cells = static_cast<std::size_t>(ng) * ng;
    b.positive.assign(cells, 0.0);
    b.negative.assign(cells, 0.0);
    b.weight.assign(cells, 0.0);
    b.prefactor.assign(cells, 0.0);
    b.gossip = gossip_term(s, h, w, p);
    b.increment.assign(ng, 0.0);
    for (int i = 0; i < ng; ++i) {
        double S = 0.0;
        for (int j = 0; j < ng; ++j)
            S += w[b.at(i, j)];
        for (int j = 0; j < ng; ++j) {
            const std::size_t c = b.at(i, j);
            const int partners = n - (i == j ? 1 : 0);
            b.weight[c] = h.hat(i, j) / h.hat(j, i);
            if (partners <= 0)
                continue;
            const auto& l = sys.links(i, j);
            b.positive[c] = h.prime(i, j) * (sec(l.self_times_cross) - sec(l.self_squared) +
                                             sec(l.self_times_own) - sec(l.reciprocal));
            b.negative[c] = h.prime(j, i) * (sec(l.cross_squared) - sec(l.self_times_cross) +
                                             sec(l.self_times_self) - sec(l.holder_self_cross));
            b.prefactor[c] = 2.0 * partners / nc / (1.0 + S);
            b.increment[i] += b.positive_part(i, j) + b.negative_part(i, j);
        }
        b.increment[i] += b.gossip[i];
    }
    return b;
}

std::vector<double> frozen_weight_equilibrium(const MomentState& prev, const MomentState& next,
                                              const MomentEngine& engine)
{
    const auto w = weight_table(engine.influence_table(prev), engine.params().group_size);
    return e_with(next, w);
}

double single_group_quoted_increment(const MomentState& s, const MomentEngine& engine)
{
    const auto& p = engine.params();
    if (p.n_groups != 1)
        throw ParameterError("single_group_quoted_increment needs exactly one group");
    const auto h = engine.influence_table(s);
    const auto& l = engine.system().links(0, 0);
    auto sec = [&](int idx) { return idx < 0 ? 0.0 : s.second[idx]; };
    // x_ij x_ij - x_ii^2 + x_ii x_jj - x_ij x_ji
    const double bracket = sec(l.cross_squared) - sec(l.self_squared) + sec(l.self_times_self) -
                           sec(l.reciprocal);
    return h.prime(0, 0) / p.agents() * bracket;
}

double rrmse(std::span<const double> approx, std::span<const double> reference,
             bool mean_normalised)
{
    if (approx.size() != reference.size())
        throw ParameterError("rrmse: series lengths differ");
    if (reference.empty())
        throw ParameterError("rrmse: empty series");
    double sq = 0.0;
    double abs_sum = 0.0;
    for (std::size_t t = 0; t < reference.size(); ++t) {
        const double d = approx[t] - reference[t];
        sq += d * d;
        abs_sum += std::abs(reference[t]);
    }
    if (abs_sum == 0.0)
        throw ParameterError("rrmse: reference series is identically zero");
    const double T = static_cast<double>(reference.size());
    const double denom = mean_normalised ? abs_sum / T : abs_sum;
    return std::sqrt(sq / T) / denom;
}

std::vector<std::vector<double>> equilibrium_series(std::span<const MomentState> states,
                                                    const MomentEngine& engine)
{
    const int ng = engine.params().n_groups;
    std::vector<std::vector<double>> out(ng);
    for (const auto& s : states) {
        const auto e = equilibrium(s, engine).e;
        for (int g = 0; g < ng; ++g)
            out[g].push_back(e[g]);
    }
    return out;
}

std::vector<double> trend(std::span<const MomentState> states, const MomentEngine& engine,
                          std::int64_t t_star)
{
    if (t_star < 1)
        throw ParameterError("trend: t* must be at least 1");
    const MomentState* a = nullptr;
    const MomentState* b = nullptr;
    for (const auto& s : states) {
        if (s.t == static_cast<double>(t_star - 1))
            a = &s;
        if (s.t == static_cast<double>(t_star))
            b = &s;
    }
    if (!a || !b)
        throw ParameterError("trend: states at t* - 1 and t* are required");
    const auto ea = equilibrium(*a, engine).e;
    const auto eb = equilibrium(*b, engine).e;
    std::vector<double> out(ea.size());
    for (std::size_t g = 0; g < ea.size(); ++g)
        out[g] = eb[g] - ea[g];
    return out;
}

InitialCondition gap_initial_condition(int n_groups, double gap, GapProfile profile)
{
    std::vector<double> level(n_groups, 0.0);
    if (profile == GapProfile::two_groups && n_groups != 2)
        throw ParameterError("two-group gap profile needs exactly two groups");
    if (n_groups > 1)
        for (int g = 0; g < n_groups; ++g)
            level[g] = gap / 2.0 - gap * g / (n_groups - 1);
    return InitialCondition::shared_levels(level);
}

SweepResult sweep_initial_gap(const ModelParams& params, std::span<const double> gaps,
                              GapProfile profile, std::int64_t t_star, int threads)
{
    if (t_star < 1)
        throw ParameterError("sweep: t* must be at least 1");
    for (std::size_t g = 1; g < gaps.size(); ++g)
        if (!(gaps[g] > gaps[g - 1]))
            throw ParameterError("sweep: gap grid must be strictly increasing");
    const MomentEngine engine(params);
    const int ng = params.n_groups;
    SweepResult out;
    out.n_groups = ng;
    out.rows.resize(gaps.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= gaps.size())
                return;
            auto s = engine.init_moments(gap_initial_condition(ng, gaps[r], profile));
            for (std::int64_t t = 1; t < t_star; ++t)
                s = engine.step(s);
            const auto after = engine.step(s);
            for (const MomentState* st : {static_cast<const MomentState*>(&s), &after})
                for (double v : st->second)
                    if (!std::isfinite(v))
                        throw NumericalError("sweep produced a non-finite moment", t_star);
            SweepRow row;
            row.gap = gaps[r];
            const auto e0 = equilibrium(s, engine);
            const auto e1 = equilibrium(after, engine);
            const auto b = bias_breakdown(s, engine);
            row.weights = e0.weights;
            row.gossip = b.gossip;
            for (int i = 0; i < ng; ++i) {
                row.trend.push_back(e1.e[i] - e0.e[i]);
                double pi = 0, po = 0, ni = 0, no = 0;
                for (int j = 0; j < ng; ++j) {
                    (i == j ? pi : po) += b.positive_part(i, j);
                    (i == j ? ni : no) += b.negative_part(i, j);
                }
                row.pos_in.push_back(pi);
                row.pos_out.push_back(po);
                row.neg_in.push_back(ni);
                row.neg_out.push_back(no);
            }
            out.rows[r] = std::move(row);
        }
    };
    const int n_threads =
        std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(gaps.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex m;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                try {
                    worker();
                } catch (...) {
                    std::lock_guard lock(m);
                    failure = std::current_exception();
                    next = gaps.size();
                }
            });
        for (auto& th : pool)
            th.join();
        if (failure)
            std::rethrow_exception(failure);
    }
    return out;
}

std::optional<double> sign_change(std::span<const double> gaps, std::span<const double> values)
{
    if (gaps.size() != values.size() || gaps.empty())
        throw ParameterError("sign_change: gaps and values must be aligned and nonempty");
    for (std::size_t r = 1; r < gaps.size(); ++r) {
        const double a = values[r - 1];
        const double b = values[r];
        if (a > 0.0 && b <= 0.0) {
            if (b == 0.0)
                return gaps[r];
            return gaps[r - 1] + (gaps[r] - gaps[r - 1]) * a / (a - b);
        }
    }
    return std::nullopt;
}

std::optional<double> sign_change(const SweepResult& sweep, int group)
{
    std::vector<double> g, v;
    for (const auto& row : sweep.rows) {
        g.push_back(row.gap);
        v.push_back(row.trend.at(group));
    }
    return sign_change(g, v);
}

std::vector<double> gap_grid(double first, double last, double step)
{
    if (!(step > 0.0) || last < first)
        throw ParameterError("gap_grid: need step > 0 and last >= first");
    std::vector<double> out;
    const auto count = static_cast<std::int64_t>(std::floor((last - first) / step + 1e-9));
    for (std::int64_t r = 0; r <= count; ++r)
        out.push_back(first + step * r);
    return out;
}

}  // namespace groupop
