#include "groupop/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace groupop {

namespace {

double clamp_if(double v, bool on) { return on ? std::clamp(v, -1.0, 1.0) : v; }

/// The pair and gossip updates, written once for any opinion store.
template <class Get, class Set>
void interact(const Interaction& x, const ModelParams& p, Get&& get, Set&& set)
{
    const int i = x.first;
    const int j = x.second;
    const double a_ii = get(i, i);
    const double a_ij = get(i, j);
    const double a_ji = get(j, i);
    const double a_jj = get(j, j);
    const double h_ij = influence(a_ii - a_ij, p.sigma);
    const double h_ji = influence(a_jj - a_ji, p.sigma);
    const auto& th = x.pair_noise;
    set(i, i, a_ii + h_ij * (a_ji - a_ii + th[0]));
    set(j, i, a_ji + h_ji * (a_ii - a_ji + th[1]));
    set(j, j, a_jj + h_ji * (a_ij - a_jj + th[2]));
    set(i, j, a_ij + h_ij * (a_jj - a_ij + th[3]));
    for (std::size_t n = 0; n < x.gossip_targets.size(); ++n) {
        const int g = x.gossip_targets[n];
        const double a_ig = get(i, g);
        const double a_jg = get(j, g);
        set(i, g, a_ig + h_ij * (a_jg - a_ig + x.gossip_noise[2 * n]));
        set(j, g, a_jg + h_ji * (a_ig - a_jg + x.gossip_noise[2 * n + 1]));
    }
}

/// Block ids: self-opinions of group I are block I, opinions of holder
/// group J about target group I (excluding self) are n_g + J * n_g + I.
int block_of(const GroupLayout& layout, int holder, int target)
{
    const int ng = layout.n_groups();
    const int gh = layout.group_of(holder);
    if (holder == target)
        return gh;
    return ng + gh * ng + layout.group_of(target);
}

void enumerate_tuples(const OpinionMatrix& m, const GroupLayout& layout, const MomentKey& key,
                      std::array<int, 4>& agent, int role, double& sum)
{
    const int roles = key.role_count();
    if (role == roles) {
        const auto& pat = key.pattern();
        sum += m(agent[pat[0]], agent[pat[1]]) * m(agent[pat[2]], agent[pat[3]]);
        return;
    }
    const int g = key.group_of_role(role);
    for (int a = layout.begin(g); a < layout.end(g); ++a) {
        bool used = false;
        for (int r = 0; r < role; ++r)
            used = used || agent[r] == a;
        if (used)
            continue;
        agent[role] = a;
        enumerate_tuples(m, layout, key, agent, role + 1, sum);
    }
}

}  // namespace

Interaction draw_interaction(const ModelParams& p, Rng& rng)
{
    const int n = p.agents();
    Interaction x;
    std::uniform_int_distribution<int> pick_first(0, n - 1);
    std::uniform_int_distribution<int> pick_second(0, n - 2);
    x.first = pick_first(rng);
    x.second = pick_second(rng);
    if (x.second >= x.first)
        ++x.second;
    std::uniform_real_distribution<double> noise(-p.delta, p.delta);
    for (auto& t : x.pair_noise)
        t = p.delta > 0.0 ? noise(rng) : 0.0;
    if (p.gossip > 0) {
        std::uniform_int_distribution<int> pick(0, n - 1);
        x.gossip_targets.reserve(p.gossip);
        while (static_cast<int>(x.gossip_targets.size()) < p.gossip) {
            const int g = pick(rng);
            if (g == x.first || g == x.second ||
                std::find(x.gossip_targets.begin(), x.gossip_targets.end(), g) !=
                    x.gossip_targets.end())
                continue;
            x.gossip_targets.push_back(g);
        }
        x.gossip_noise.resize(2 * x.gossip_targets.size());
        for (auto& t : x.gossip_noise)
            t = p.delta > 0.0 ? noise(rng) : 0.0;
    }
    return x;
}

void apply_interaction(OpinionMatrix& m, const Interaction& x, const ModelParams& p)
{
    interact(
        x, p, [&](int a, int b) { return m(a, b); },
        [&](int a, int b, double v) { m(a, b) = clamp_if(v, p.clamp_opinions); });
}

void pair_step(OpinionMatrix& m, const ModelParams& p, Rng& rng)
{
    if (m.side() < 2)
        throw ParameterError("pair_step needs at least two agents");
    apply_interaction(m, draw_interaction(p, rng), p);
}

void attraction_step(OpinionMatrix& m, const ModelParams& p, const GroupLayout& layout)
{
    const int ng = layout.n_groups();
    const int n = layout.agents();
    const int nb = ng + ng * ng;
    std::vector<double> sum(nb, 0.0), count(nb, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int b = block_of(layout, i, j);
            sum[b] += m(i, j);
            count[b] += 1.0;
        }
    const double mu = p.mu;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int b = block_of(layout, i, j);
            m(i, j) = mu * m(i, j) + (1.0 - mu) * sum[b] / count[b];
        }
}

double moment_of(const OpinionMatrix& m, const GroupLayout& layout, const MomentKey& key)
{
    const auto members = key.member_count(layout.group_size());
    if (members == 0)
        return 0.0;
    std::array<int, 4> agent{};
    double sum = 0.0;
    enumerate_tuples(m, layout, key, agent, 0, sum);
    return sum / static_cast<double>(members);
}

GroupAggregates group_aggregates(const OpinionMatrix& m, const GroupLayout& layout,
                                 std::span<const MomentKey> keys)
{
    const int ng = layout.n_groups();
    const int n = layout.agents();
    GroupAggregates g;
    g.n_groups = ng;
    g.x_self.assign(ng, 0.0);
    g.x_cross.assign(static_cast<std::size_t>(ng) * ng, 0.0);
    std::vector<double> cross_count(g.x_cross.size(), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                g.x_self[layout.group_of(i)] += m(i, i);
                continue;
            }
            const std::size_t c =
                static_cast<std::size_t>(layout.group_of(i)) * ng + layout.group_of(j);
            g.x_cross[c] += m(i, j);
            cross_count[c] += 1.0;
        }
    for (auto& v : g.x_self)
        v /= layout.group_size();
    for (std::size_t c = 0; c < g.x_cross.size(); ++c)
        g.x_cross[c] = cross_count[c] > 0.0 ? g.x_cross[c] / cross_count[c] : 0.0;
    g.keys.assign(keys.begin(), keys.end());
    for (const auto& k : keys)
        g.second.push_back(moment_of(m, layout, k));
    return g;
}

Simulation::Simulation(const ModelParams& params, const InitialCondition& init,
                       std::uint64_t seed)
    : params_(params), layout_(params.n_groups > 0 ? params.n_groups : 1,
                               params.group_size > 0 ? params.group_size : 1),
      rng_(seed)
{
    require_valid(params_);
    initial_ = init.expand(layout_);
    const int n = layout_.agents();
    const int ng = layout_.n_groups();
    n_blocks_ = ng + ng * ng;
    stored_.assign(initial_.values().begin(), initial_.values().end());
    if (params_.clamp_opinions)
        for (auto& v : stored_)
            v = std::clamp(v, -1.0, 1.0);
    block_.resize(stored_.size());
    offset_.assign(n_blocks_, 0.0);
    block_sum_.assign(n_blocks_, 0.0);
    block_count_.assign(n_blocks_, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const std::size_t e = index(i, j);
            block_[e] = block_of(layout_, i, j);
            block_sum_[block_[e]] += stored_[e];
            block_count_[block_[e]] += 1.0;
        }
}

void Simulation::write(int holder, int target, double value)
{
    const std::size_t e = index(holder, target);
    const int b = block_[e];
    value = clamp_if(value, params_.clamp_opinions);
    block_sum_[b] += value - (alpha_ * stored_[e] + offset_[b]);
    stored_[e] = (value - offset_[b]) / alpha_;
}

void Simulation::pair_step()
{
    const auto x = draw_interaction(params_, rng_);
    interact(
        x, params_, [&](int a, int b) { return opinion(a, b); },
        [&](int a, int b, double v) { write(a, b, v); });
}

void Simulation::attraction_step()
{
    const double mu = params_.mu;
    if (mu == 1.0)
        return;
    for (int b = 0; b < n_blocks_; ++b) {
        if (block_count_[b] == 0.0)
            continue;
        offset_[b] = mu * offset_[b] + (1.0 - mu) * block_sum_[b] / block_count_[b];
    }
    alpha_ *= mu;
    if (alpha_ < 0.5)
        renormalize();
}

void Simulation::renormalize()
{
    std::fill(block_sum_.begin(), block_sum_.end(), 0.0);
    for (std::size_t e = 0; e < stored_.size(); ++e) {
        stored_[e] = alpha_ * stored_[e] + offset_[block_[e]];
        block_sum_[block_[e]] += stored_[e];
    }
    std::fill(offset_.begin(), offset_.end(), 0.0);
    alpha_ = 1.0;
}

OpinionMatrix Simulation::opinions() const
{
    const int n = layout_.agents();
    OpinionMatrix m(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = opinion(i, j);
    return m;
}

void Simulation::first_moments(std::span<double> x_self, std::span<double> x_cross) const
{
    const int ng = layout_.n_groups();
    for (int g = 0; g < ng; ++g)
        x_self[g] = block_sum_[g] / block_count_[g];
    for (int c = 0; c < ng * ng; ++c) {
        const double cnt = block_count_[ng + c];
        x_cross[c] = cnt > 0.0 ? block_sum_[ng + c] / cnt : 0.0;
    }
}

GroupAggregates Simulation::aggregates(std::span<const MomentKey> keys, bool deviations) const
{
    auto m = opinions();
    if (deviations) {
        auto v = m.values();
        auto v0 = initial_.values();
        for (std::size_t e = 0; e < v.size(); ++e)
            v[e] -= v0[e];
    }
    return group_aggregates(m, layout_, keys);
}

std::vector<TrajectoryRecord> run_trajectory(const ModelParams& params,
                                             const InitialCondition& init, std::int64_t steps,
                                             std::uint64_t seed, const TrajectoryOptions& options)
{
    if (steps < 0)
        throw ParameterError("run_trajectory: step count must be non-negative");
    if (options.sample_every < 1)
        throw ParameterError("run_trajectory: sample_every must be at least 1");
    Simulation sim(params, init, seed);
    std::vector<TrajectoryRecord> out;
    out.push_back({0, sim.aggregates(options.second_keys, options.deviations)});
    for (std::int64_t t = 1; t <= steps; ++t) {
        sim.step();
        if (t % options.sample_every == 0 || t == steps)
            out.push_back({t, sim.aggregates(options.second_keys, options.deviations)});
    }
    return out;
}

std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t index)
{
    // splitmix64 finaliser over base ^ index.
    std::uint64_t z = (base_seed ^ index) + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int resolve_threads(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("GROUPOP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::size_t EnsembleStats::var_index(const std::string& name) const
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        throw std::out_of_range("ensemble has no variable " + name);
    return static_cast<std::size_t>(it - names.begin());
}

namespace {

/// Welford accumulators for every (time, variable) cell.
struct Accumulator {
    double count = 0.0;
    std::vector<double> mean;
    std::vector<double> m2;

    explicit Accumulator(std::size_t cells) : mean(cells, 0.0), m2(cells, 0.0) {}

    void add(std::span<const double> sample, std::size_t offset)
    {
        for (std::size_t v = 0; v < sample.size(); ++v) {
            const std::size_t c = offset + v;
            const double d = sample[v] - mean[c];
            mean[c] += d / count;
            m2[c] += d * (sample[v] - mean[c]);
        }
    }

    void merge(const Accumulator& o)
    {
        if (o.count == 0.0)
            return;
        const double n = count + o.count;
        for (std::size_t c = 0; c < mean.size(); ++c) {
            const double d = o.mean[c] - mean[c];
            mean[c] += d * o.count / n;
            m2[c] += o.m2[c] + d * d * count * o.count / n;
        }
        count = n;
    }
};

}  // namespace

EnsembleStats run_ensemble(const ModelParams& params, const InitialCondition& init,
                           std::int64_t steps, std::int64_t n_runs, std::uint64_t base_seed,
                           const EnsembleOptions& options)
{
    require_valid(params);
    if (n_runs < 1)
        throw ParameterError("run_ensemble: at least one run is required");
    if (steps < 0)
        throw ParameterError("run_ensemble: step count must be non-negative");
    if (options.sample_every < 1)
        throw ParameterError("run_ensemble: sample_every must be at least 1");

    const int ng = params.n_groups;
    EnsembleStats stats;
    for (std::int64_t t = 0; t <= steps; t += options.sample_every)
        stats.times.push_back(t);
    if (stats.times.back() != steps)
        stats.times.push_back(steps);
    for (int g = 0; g < ng; ++g)
        stats.names.push_back(self_moment_name(g));
    for (int j = 0; j < ng; ++j)
        for (int i = 0; i < ng; ++i)
            stats.names.push_back(cross_moment_name(j, i));
    for (const auto& k : options.second_keys)
        stats.names.push_back(k.name());
    stats.run_count = n_runs;

    const std::size_t nv = stats.names.size();
    const std::size_t cells = stats.times.size() * nv;
    const std::size_t n_first = static_cast<std::size_t>(ng + ng * ng);

    // Reference first moments for the deviation convention.
    const GroupLayout layout(params);
    const auto base = group_aggregates(init.expand(layout), layout);

    // Fixed blocks of runs, merged in block order: results do not depend on
    // the number of workers or their scheduling.
    const std::int64_t n_blocks = std::min<std::int64_t>(n_runs, 32);
    std::vector<Accumulator> blocks(static_cast<std::size_t>(n_blocks), Accumulator(cells));
    std::atomic<std::int64_t> next{0};

    auto worker = [&] {
        std::vector<double> sample(nv);
        for (;;) {
            const std::int64_t b = next.fetch_add(1);
            if (b >= n_blocks)
                return;
            auto& acc = blocks[static_cast<std::size_t>(b)];
            const std::int64_t lo = b * n_runs / n_blocks;
            const std::int64_t hi = (b + 1) * n_runs / n_blocks;
            for (std::int64_t r = lo; r < hi; ++r) {
                Simulation sim(params, init, run_seed(base_seed, static_cast<std::uint64_t>(r)));
                acc.count += 1.0;
                std::size_t ti = 0;
                auto probe = [&] {
                    std::span<double> s(sample);
                    sim.first_moments(s.subspan(0, ng), s.subspan(ng, ng * ng));
                    if (options.deviations) {
                        for (int g = 0; g < ng; ++g)
                            sample[g] -= base.x_self[g];
                        for (int c = 0; c < ng * ng; ++c)
                            sample[ng + c] -= base.x_cross[c];
                    }
                    if (!options.second_keys.empty()) {
                        const auto agg = sim.aggregates(options.second_keys, options.deviations);
                        std::copy(agg.second.begin(), agg.second.end(),
                                  sample.begin() + static_cast<std::ptrdiff_t>(n_first));
                    }
                    acc.add(sample, ti * nv);
                    ++ti;
                };
                probe();
                for (std::int64_t t = 1; t <= steps; ++t) {
                    sim.step();
                    if (ti < stats.times.size() && stats.times[ti] == t)
                        probe();
                }
            }
        }
    };

    const int n_threads =
        std::max(1, std::min<int>(resolve_threads(options.threads), static_cast<int>(n_blocks)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    Accumulator total(cells);
    for (const auto& b : blocks)
        total.merge(b);
    stats.mean = total.mean;
    stats.std_error.resize(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        const double n = total.count;
        stats.std_error[c] = n > 1.0 ? std::sqrt(std::max(0.0, total.m2[c] / (n - 1.0)) / n) : 0.0;
    }
    return stats;
}

}  // namespace groupop
