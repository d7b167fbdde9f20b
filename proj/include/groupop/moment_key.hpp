#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace groupop {

/// One opinion inside a product, expressed with abstract agent roles.
struct RoleEntry {
    int holder;
    int target;
};

/// Canonical label of a group-level second moment.
///
/// A second moment is the average of x_{h1 t1} x_{h2 t2} over every tuple of
/// distinct agents matching the key: the four slots (h1, t1, h2, t2) are
/// mapped to roles by a restricted-growth pattern (slots sharing a role are
/// the same agent, different roles are different agents) and every role
/// carries a group label. Of the two slot orders the lexicographically smaller
/// (pattern, groups) pair is kept, so x_A x_B and x_B x_A share a key.
class MomentKey {
public:
    MomentKey() = default;

    /// Builds the canonical key of x_a x_b; role_groups[r] is the group of role r.
    static MomentKey of_product(RoleEntry a, RoleEntry b, std::span<const int> role_groups);

    /// Parses names produced by name(); returns nullopt when malformed.
    static std::optional<MomentKey> parse(std::string_view name);

    const std::array<std::int8_t, 4>& pattern() const { return pattern_; }
    int role_count() const;
    int group_of_role(int role) const { return groups_[role]; }
    int slot_group(int slot) const { return groups_[pattern_[slot]]; }
    RoleEntry first() const { return {pattern_[0], pattern_[1]}; }
    RoleEntry second() const { return {pattern_[2], pattern_[3]}; }

    /// e.g. "x2_IIJI[0][1]": role letters per slot, then the group of each role.
    std::string name() const;

    /// Number of distinct-agent tuples the average runs over (0 if empty).
    std::int64_t member_count(int group_size) const;

    auto operator<=>(const MomentKey&) const = default;

private:
    std::array<std::int8_t, 4> pattern_{};
    std::array<std::int8_t, 4> groups_{-1, -1, -1, -1};
};

struct MomentKeyHash {
    std::size_t operator()(const MomentKey& key) const noexcept;
};

/// Column names of the first moments.
std::string self_moment_name(int group);
std::string cross_moment_name(int holder_group, int target_group);

}  // namespace groupop
