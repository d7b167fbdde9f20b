#include "groupop/moment_key.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <vector>

namespace groupop {

namespace {

constexpr std::string_view kRoleLetters = "IJQR";

struct Labelled {
    std::array<std::int8_t, 4> pattern{};
    std::array<std::int8_t, 4> groups{-1, -1, -1, -1};
};

Labelled relabel(const std::array<int, 4>& slots, std::span<const int> role_groups)
{
    Labelled out;
    std::array<int, 4> seen{};
    int n_seen = 0;
    for (int s = 0; s < 4; ++s) {
        int id = -1;
        for (int r = 0; r < n_seen; ++r)
            if (seen[r] == slots[s])
                id = r;
        if (id < 0) {
            id = n_seen;
            seen[n_seen++] = slots[s];
            const int g = role_groups[slots[s]];
            if (g < 0 || g > 127)
                throw std::out_of_range("MomentKey: group label out of range");
            out.groups[id] = static_cast<std::int8_t>(g);
        }
        out.pattern[s] = static_cast<std::int8_t>(id);
    }
    return out;
}

}  // namespace

MomentKey MomentKey::of_product(RoleEntry a, RoleEntry b, std::span<const int> role_groups)
{
    const auto ab = relabel({a.holder, a.target, b.holder, b.target}, role_groups);
    const auto ba = relabel({b.holder, b.target, a.holder, a.target}, role_groups);
    const auto& best =
        std::tie(ab.pattern, ab.groups) <= std::tie(ba.pattern, ba.groups) ? ab : ba;
    MomentKey key;
    key.pattern_ = best.pattern;
    key.groups_ = best.groups;
    return key;
}

int MomentKey::role_count() const
{
    return 1 + *std::max_element(pattern_.begin(), pattern_.end());
}

std::string MomentKey::name() const
{
    std::string out = "x2_";
    for (auto r : pattern_)
        out += kRoleLetters[r];
    for (int r = 0; r < role_count(); ++r)
        out += "[" + std::to_string(groups_[r]) + "]";
    return out;
}

std::optional<MomentKey> MomentKey::parse(std::string_view name)
{
    if (name.size() < 7 || name.substr(0, 3) != "x2_")
        return std::nullopt;
    std::array<int, 4> slots{};
    int roles = 0;
    for (int s = 0; s < 4; ++s) {
        const auto pos = kRoleLetters.find(name[3 + s]);
        if (pos == std::string_view::npos)
            return std::nullopt;
        slots[s] = static_cast<int>(pos);
        roles = std::max(roles, slots[s] + 1);
    }
    std::vector<int> groups;
    std::string_view rest = name.substr(7);
    while (!rest.empty()) {
        if (rest.front() != '[')
            return std::nullopt;
        const auto close = rest.find(']');
        if (close == std::string_view::npos)
            return std::nullopt;
        int g = -1;
        const auto digits = rest.substr(1, close - 1);
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), g);
        if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size() || g < 0)
            return std::nullopt;
        groups.push_back(g);
        rest.remove_prefix(close + 1);
    }
    if (static_cast<int>(groups.size()) != roles)
        return std::nullopt;
    // Letters must appear in first-use order, as name() prints them.
    int next = 0;
    for (int s = 0; s < 4; ++s) {
        if (slots[s] > next)
            return std::nullopt;
        if (slots[s] == next)
            ++next;
    }
    auto key = of_product({slots[0], slots[1]}, {slots[2], slots[3]}, groups);
    if (key.name() != name)
        return std::nullopt;
    return key;
}

std::int64_t MomentKey::member_count(int group_size) const
{
    std::array<int, 128> per_group{};
    std::int64_t count = 1;
    for (int r = 0; r < role_count(); ++r) {
        const int already = per_group[groups_[r]]++;
        const std::int64_t left = group_size - already;
        if (left <= 0)
            return 0;
        count *= left;
    }
    return count;
}

std::size_t MomentKeyHash::operator()(const MomentKey& key) const noexcept
{
    std::size_t h = 0;
    for (auto v : key.pattern())
        h = h * 31 + static_cast<std::size_t>(v);
    for (int r = 0; r < 4; ++r)
        h = h * 131 + static_cast<std::size_t>(r < key.role_count() ? key.group_of_role(r) : 0);
    return h;
}

std::string self_moment_name(int group)
{
    return "x_II[" + std::to_string(group) + "]";
}

std::string cross_moment_name(int holder_group, int target_group)
{
    return "x_JI[" + std::to_string(holder_group) + "][" + std::to_string(target_group) + "]";
}

}  // namespace groupop
