#include "groupop/moment_system.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

namespace groupop {

namespace {

int count_in_group(std::span<const int> role_groups, int group)
{
    return static_cast<int>(std::count(role_groups.begin(), role_groups.end(), group));
}

std::vector<int> roles_of(const MomentKey& key)
{
    std::vector<int> groups;
    for (int r = 0; r < key.role_count(); ++r)
        groups.push_back(key.group_of_role(r));
    return groups;
}

/// Accumulates interaction terms, merging identical (source, h1, h2).
class TermSink {
public:
    TermSink(const ModelParams& params) : params_(params) {}

    void add(RoleEntry a, RoleEntry b, std::span<const int> role_groups, double factor,
             int h1, int h2 = -1)
    {
        if (factor == 0.0)
            return;
        const auto key = MomentKey::of_product(a, b, role_groups);
        if (key.member_count(params_.group_size) == 0)
            return;
        if (h1 > h2)
            std::swap(h1, h2);
        terms_[{key, h1, h2}] += factor;
    }

    void add_constant(double factor, int h1, int h2)
    {
        if (factor == 0.0)
            return;
        if (h1 > h2)
            std::swap(h1, h2);
        constants_[{h1, h2}] += factor;
    }

    std::vector<InteractionTerm> take() const
    {
        std::vector<InteractionTerm> out;
        for (const auto& [k, f] : terms_)
            if (f != 0.0)
                out.push_back({std::get<0>(k), f, std::get<1>(k), std::get<2>(k)});
        for (const auto& [k, f] : constants_)
            if (f != 0.0)
                out.push_back({std::nullopt, f, k.first, k.second});
        return out;
    }

private:
    const ModelParams& params_;
    std::map<std::tuple<MomentKey, int, int>, double> terms_;
    std::map<std::pair<int, int>, double> constants_;
};

enum class Change { none, direct, gossip };

struct EntryChange {
    Change kind = Change::none;
    RoleEntry moved{};  // partner's opinion about the same target
    int h = -1;
};

/// An entry (x, y) with x in the interacting pair {u, v} and partner o moves
/// toward x_{o y}: directly when y is in the pair, through gossip otherwise.
EntryChange classify(RoleEntry e, int u, int v, std::span<const int> groups, int n_groups)
{
    EntryChange c;
    if (e.holder != u && e.holder != v)
        return c;
    const int partner = e.holder == u ? v : u;
    c.kind = (e.target == u || e.target == v) ? Change::direct : Change::gossip;
    c.moved = {partner, e.target};
    c.h = groups[e.holder] * n_groups + groups[partner];
    return c;
}

struct Slot {
    int group;
};

struct SlotBinding {
    std::vector<int> role_of_slot;
    std::vector<int> role_groups;  // existing roles followed by fresh ones
    double count;
};

/// Every way of mapping slots onto existing roles or fresh distinct agents,
/// with the number of concrete agent choices realising each mapping.
void bind_slots(std::vector<int>& role_groups, std::size_t n_existing,
                std::span<const Slot> slots, std::span<const std::pair<int, int>> differ,
                int group_size, std::vector<int>& current, double count,
                std::vector<SlotBinding>& out)
{
    const std::size_t s = current.size();
    if (s == slots.size()) {
        for (const auto& [a, b] : differ)
            if (current[a] == current[b])
                return;
        out.push_back({current, role_groups, count});
        return;
    }
    const int g = slots[s].group;
    for (std::size_t r = 0; r < role_groups.size(); ++r) {
        if (role_groups[r] != g)
            continue;
        current.push_back(static_cast<int>(r));
        bind_slots(role_groups, n_existing, slots, differ, group_size, current, count, out);
        current.pop_back();
    }
    const int available = group_size - count_in_group(role_groups, g);
    if (available <= 0)
        return;
    role_groups.push_back(g);
    current.push_back(static_cast<int>(role_groups.size()) - 1);
    bind_slots(role_groups, n_existing, slots, differ, group_size, current,
               count * available, out);
    current.pop_back();
    role_groups.pop_back();
}

std::vector<SlotBinding> bind_slots(std::vector<int> existing, std::span<const Slot> slots,
                              std::span<const std::pair<int, int>> differ, int group_size)
{
    std::vector<SlotBinding> out;
    std::vector<int> current;
    const auto n = existing.size();
    bind_slots(existing, n, slots, differ, group_size, current, 1.0, out);
    return out;
}

/// Size of the averaging class of an entry (self-opinions or cross opinions).
double class_size(bool self, int holder_group, int target_group, int group_size)
{
    if (self)
        return group_size;
    return static_cast<double>(group_size) *
           (group_size - (holder_group == target_group ? 1 : 0));
}

/// Slots of a generic member of an entry's averaging class.
void class_slots(bool self, int holder_group, int target_group, std::vector<Slot>& slots,
                 std::vector<std::pair<int, int>>& differ, std::vector<int>& holder_slot,
                 std::vector<int>& target_slot)
{
    const int first = static_cast<int>(slots.size());
    if (self) {
        slots.push_back({holder_group});
        holder_slot.push_back(first);
        target_slot.push_back(first);
    } else {
        slots.push_back({holder_group});
        slots.push_back({target_group});
        differ.emplace_back(first, first + 1);
        holder_slot.push_back(first);
        target_slot.push_back(first + 1);
    }
}

}  // namespace

std::vector<InteractionTerm> derive_interaction_terms(const MomentKey& key,
                                                      const ModelParams& p)
{
    if (key.member_count(p.group_size) == 0)
        return {};
    const int ng = p.n_groups;
    const std::vector<int> groups = roles_of(key);
    const int m = static_cast<int>(groups.size());
    const RoleEntry a = key.first();
    const RoleEntry b = key.second();
    const bool same_entry = a.holder == b.holder && a.target == b.target;

    const double pair_prob = 2.0 / static_cast<double>(p.couples());
    const double others = p.agents() - 2;
    const double one_target = p.gossip > 0 ? p.gossip / others : 0.0;
    const double two_targets =
        (p.gossip > 1 && others > 1) ? p.gossip * (p.gossip - 1.0) / (others * (others - 1.0))
                                     : 0.0;
    const double noise = p.delta * p.delta / 3.0;

    TermSink sink(p);

    auto handle_pair = [&](int u, int v, std::span<const int> g, double weight) {
        const auto ca = classify(a, u, v, g, ng);
        const auto cb = classify(b, u, v, g, ng);
        auto prob = [&](Change c) {
            return c == Change::direct ? 1.0 : c == Change::gossip ? one_target : 0.0;
        };
        const double pa = prob(ca.kind);
        const double pb = prob(cb.kind);
        double pab = 0.0;
        if (ca.kind != Change::none && cb.kind != Change::none) {
            if (ca.kind == Change::direct && cb.kind == Change::direct)
                pab = 1.0;
            else if (ca.kind == Change::direct || cb.kind == Change::direct)
                pab = one_target;
            else
                pab = a.target == b.target ? one_target : two_targets;
        }
        const double base = pair_prob * weight;
        if (pa > 0.0) {
            sink.add(ca.moved, b, g, base * pa, ca.h);
            sink.add(a, b, g, -base * pa, ca.h);
        }
        if (pb > 0.0) {
            sink.add(a, cb.moved, g, base * pb, cb.h);
            sink.add(a, b, g, -base * pb, cb.h);
        }
        if (pab > 0.0) {
            const double c = base * pab;
            sink.add(ca.moved, cb.moved, g, c, ca.h, cb.h);
            sink.add(ca.moved, b, g, -c, ca.h, cb.h);
            sink.add(a, cb.moved, g, -c, ca.h, cb.h);
            sink.add(a, b, g, c, ca.h, cb.h);
            if (same_entry)
                sink.add_constant(c * noise, ca.h, cb.h);
        }
    };

    std::set<int> holders{a.holder, b.holder};
    for (int u : holders) {
        for (int v = 0; v < m; ++v) {
            if (v == u || (holders.count(v) && v < u))
                continue;
            handle_pair(u, v, groups, 1.0);
        }
        for (int g = 0; g < ng; ++g) {
            const int fresh = p.group_size - count_in_group(groups, g);
            if (fresh <= 0)
                continue;
            std::vector<int> extended = groups;
            extended.push_back(g);
            handle_pair(u, m, extended, fresh);
        }
    }
    return sink.take();
}

std::vector<AttractionTerm> derive_attraction_terms(const MomentKey& key, const ModelParams& p)
{
    if (key.member_count(p.group_size) == 0)
        return {};
    const double mu = p.mu;
    const int n = p.group_size;
    const std::vector<int> groups = roles_of(key);
    const RoleEntry entries[2] = {key.first(), key.second()};

    std::map<MomentKey, double> acc;
    auto add = [&](RoleEntry x, RoleEntry y, std::span<const int> g, double c) {
        if (c == 0.0)
            return;
        const auto k = MomentKey::of_product(x, y, g);
        if (k.member_count(n) == 0)
            return;
        acc[k] += c;
    };

    add(entries[0], entries[1], groups, mu * mu);

    auto is_self = [](RoleEntry e) { return e.holder == e.target; };

    // x_A times the class average of B, and symmetrically.
    for (int side = 0; side < 2; ++side) {
        const RoleEntry kept = entries[side];
        const RoleEntry avg = entries[1 - side];
        const bool avg_self = is_self(avg);
        const int gh = groups[avg.holder];
        const int gt = groups[avg.target];

        // Local roles: only the kept entry's agents survive marginalisation.
        std::vector<int> local_groups;
        RoleEntry local{};
        local_groups.push_back(groups[kept.holder]);
        local.holder = 0;
        if (kept.target == kept.holder) {
            local.target = 0;
        } else {
            local_groups.push_back(groups[kept.target]);
            local.target = 1;
        }

        std::vector<Slot> slots;
        std::vector<std::pair<int, int>> differ;
        std::vector<int> hs, ts;
        class_slots(avg_self, gh, gt, slots, differ, hs, ts);
        const double norm = mu * (1.0 - mu) / class_size(avg_self, gh, gt, n);
        for (const auto& bnd : bind_slots(local_groups, slots, differ, n)) {
            const RoleEntry e{bnd.role_of_slot[hs[0]], bnd.role_of_slot[ts[0]]};
            add(local, e, bnd.role_groups, norm * bnd.count);
        }
    }

    // Product of the two class averages.
    {
        std::vector<Slot> slots;
        std::vector<std::pair<int, int>> differ;
        std::vector<int> hs, ts;
        double norm = (1.0 - mu) * (1.0 - mu);
        for (const auto& e : entries) {
            const bool self = is_self(e);
            const int gh = groups[e.holder];
            const int gt = groups[e.target];
            class_slots(self, gh, gt, slots, differ, hs, ts);
            norm /= class_size(self, gh, gt, n);
        }
        for (const auto& bnd : bind_slots({}, slots, differ, n)) {
            const RoleEntry e{bnd.role_of_slot[hs[0]], bnd.role_of_slot[ts[0]]};
            const RoleEntry f{bnd.role_of_slot[hs[1]], bnd.role_of_slot[ts[1]]};
            add(e, f, bnd.role_groups, norm * bnd.count);
        }
    }

    std::vector<AttractionTerm> out;
    for (const auto& [k, c] : acc)
        if (c != 0.0)
            out.push_back({k, c});
    return out;
}

namespace {

struct PairProducts {
    std::optional<MomentKey> self_times_cross, self_squared, self_times_own, reciprocal,
        cross_squared, self_times_self, holder_self_cross;
};

/// Second moments used when a self group I meets a partner group J. Role 0 is
/// an agent i of I, role 1 an agent j of J.
PairProducts pair_products(int self_group, int partner_group, int group_size)
{
    const int g[2] = {self_group, partner_group};
    auto mk = [&](RoleEntry a, RoleEntry b) -> std::optional<MomentKey> {
        auto k = MomentKey::of_product(a, b, g);
        if (k.member_count(group_size) == 0)
            return std::nullopt;
        return k;
    };
    PairProducts out;
    out.self_times_cross = mk({0, 0}, {1, 0});
    out.self_squared = mk({0, 0}, {0, 0});
    out.self_times_own = mk({0, 0}, {0, 1});
    out.reciprocal = mk({0, 1}, {1, 0});
    out.cross_squared = mk({1, 0}, {1, 0});
    out.self_times_self = mk({0, 0}, {1, 1});
    out.holder_self_cross = mk({1, 1}, {1, 0});
    return out;
}

}  // namespace

std::vector<MomentReference> first_moment_references(const ModelParams& p)
{
    std::vector<MomentReference> refs;
    const int ng = p.n_groups;
    for (int i = 0; i < ng; ++i) {
        for (int j = 0; j < ng; ++j) {
            if (i == j && p.group_size < 2)
                continue;
            const auto pp = pair_products(i, j, p.group_size);
            const std::string self_eq = self_moment_name(i);
            for (const auto* k : {&pp.self_times_cross, &pp.self_squared, &pp.self_times_own,
                                  &pp.reciprocal})
                if (*k)
                    refs.push_back({self_eq, **k});
            const std::string cross_eq = cross_moment_name(j, i);
            for (const auto* k : {&pp.cross_squared, &pp.self_times_cross, &pp.self_times_self,
                                  &pp.holder_self_cross})
                if (*k)
                    refs.push_back({cross_eq, **k});
        }
    }
    return refs;
}

std::vector<MomentKey> build_catalog(const ModelParams& p)
{
    std::set<MomentKey> seen;
    std::deque<MomentKey> queue;
    auto push = [&](const MomentKey& k) {
        if (seen.insert(k).second)
            queue.push_back(k);
    };
    for (const auto& r : first_moment_references(p))
        push(r.key);
    while (!queue.empty()) {
        const auto k = queue.front();
        queue.pop_front();
        for (const auto& t : derive_interaction_terms(k, p))
            if (t.source)
                push(*t.source);
        for (const auto& t : derive_attraction_terms(k, p))
            push(t.source);
    }
    return {seen.begin(), seen.end()};
}

ClosureReport closure_check(const ModelParams& p, std::span<const MomentKey> catalog)
{
    const std::set<MomentKey> members(catalog.begin(), catalog.end());
    ClosureReport report;
    std::set<std::pair<std::string, std::string>> reported;
    auto check = [&](const MomentKey& k, const std::string& equation) {
        if (members.count(k))
            return;
        if (reported.insert({k.name(), equation}).second)
            report.orphans.push_back({equation, k});
    };
    for (const auto& r : first_moment_references(p))
        check(r.key, r.equation);
    for (const auto& k : catalog) {
        const std::string half = k.name() + "(t+0.5)";
        for (const auto& t : derive_interaction_terms(k, p))
            if (t.source)
                check(*t.source, half);
        const std::string full = k.name() + "(t+1)";
        for (const auto& t : derive_attraction_terms(k, p))
            check(t.source, full);
    }
    return report;
}

ClosureReport closure_check(const ModelParams& p)
{
    const auto catalog = build_catalog(p);
    return closure_check(p, catalog);
}

MomentSystem::MomentSystem(const ModelParams& params) : params_(params)
{
    require_valid(params_);
    catalog_ = build_catalog(params_);
    for (std::size_t i = 0; i < catalog_.size(); ++i)
        index_.emplace(catalog_[i], static_cast<int>(i));

    const int ng = params_.n_groups;
    const int no_h = ng * ng;
    const int constant = static_cast<int>(catalog_.size());
    auto lookup = [&](const MomentKey& k) {
        const auto it = index_.find(k);
        if (it == index_.end())
            throw std::logic_error("moment closure violated: " + k.name() + " is not tracked");
        return it->second;
    };
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        const int target = static_cast<int>(i);
        for (const auto& t : derive_interaction_terms(catalog_[i], params_))
            interaction_.push_back({target, t.source ? lookup(*t.source) : constant, t.factor,
                                    t.h1 < 0 ? no_h : t.h1, t.h2 < 0 ? no_h : t.h2});
        for (const auto& t : derive_attraction_terms(catalog_[i], params_))
            attraction_.push_back({target, lookup(t.source), t.coeff});
    }

    links_.resize(static_cast<std::size_t>(ng) * ng);
    for (int i = 0; i < ng; ++i) {
        for (int j = 0; j < ng; ++j) {
            const auto pp = pair_products(i, j, params_.group_size);
            auto idx = [&](const std::optional<MomentKey>& k) { return k ? lookup(*k) : -1; };
            links_[static_cast<std::size_t>(i) * ng + j] = {
                idx(pp.self_times_cross), idx(pp.self_squared), idx(pp.self_times_own),
                idx(pp.reciprocal),       idx(pp.cross_squared), idx(pp.self_times_self),
                idx(pp.holder_self_cross)};
        }
    }
}

std::optional<int> MomentSystem::index_of(const MomentKey& key) const
{
    const auto it = index_.find(key);
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

}  // namespace groupop
