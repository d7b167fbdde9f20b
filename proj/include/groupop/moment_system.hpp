#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "groupop/core.hpp"
#include "groupop/moment_key.hpp"

namespace groupop {

/// One term of a second-moment increment over a pair interaction:
/// factor * hhat[h1] * hhat[h2] * value(source). A missing source stands for
/// the constant 1 (squared-noise contributions); h1 / h2 = -1 means no factor.
struct InteractionTerm {
    std::optional<MomentKey> source;
    double factor = 0.0;
    int h1 = -1;
    int h2 = -1;
};

/// One term of the attraction identity: value(t+1) += coeff * value(source).
struct AttractionTerm {
    MomentKey source;
    double coeff = 0.0;
};

/// Expected change of the moment during the interaction half-step, with the
/// influence of a holder of group G on a partner of group P frozen at
/// hhat[G * n_groups + P]. Terms on empty patterns are dropped.
std::vector<InteractionTerm> derive_interaction_terms(const MomentKey& key,
                                                      const ModelParams& params);

/// Exact value at t+1 as a combination of values at t+0.5.
std::vector<AttractionTerm> derive_attraction_terms(const MomentKey& key,
                                                    const ModelParams& params);

/// Second moments appearing in the first-moment equations, tagged with the
/// equation that uses them ("x_II[0]", "x_JI[1][0]").
struct MomentReference {
    std::string equation;
    MomentKey key;
};
std::vector<MomentReference> first_moment_references(const ModelParams& params);

/// Closure of the first-moment references under both derivations, sorted.
std::vector<MomentKey> build_catalog(const ModelParams& params);

struct ClosureReport {
    std::vector<MomentReference> orphans;  // referenced key, referencing equation
    bool closed() const { return orphans.empty(); }
};

/// Walks every equation's right-hand side and lists keys missing from catalog.
ClosureReport closure_check(const ModelParams& params, std::span<const MomentKey> catalog);
ClosureReport closure_check(const ModelParams& params);

/// Catalog plus the equations compiled against catalog indices.
class MomentSystem {
public:
    explicit MomentSystem(const ModelParams& params);

    struct CompiledInteraction {
        int target;
        int source;  // == catalog size for the constant 1
        double factor;
        int h1;      // == n_groups^2 for "no factor"
        int h2;
    };
    struct CompiledAttraction {
        int target;
        int source;
        double coeff;
    };
    /// Catalog indices of the second moments used by the first-moment
    /// equations for holder/target pair (I, J); -1 for empty patterns.
    struct FirstMomentLinks {
        int self_times_cross;   // x_ii x_ji
        int self_squared;       // x_ii x_ii
        int self_times_own;     // x_ii x_ij
        int reciprocal;         // x_ij x_ji
        int cross_squared;      // x_ji x_ji
        int self_times_self;    // x_ii x_jj
        int holder_self_cross;  // x_jj x_ji
    };

    const ModelParams& params() const { return params_; }
    std::span<const MomentKey> catalog() const { return catalog_; }
    std::optional<int> index_of(const MomentKey& key) const;
    std::span<const CompiledInteraction> interaction_program() const { return interaction_; }
    std::span<const CompiledAttraction> attraction_program() const { return attraction_; }
    /// links(I, J) with I the self group and J the partner group.
    const FirstMomentLinks& links(int self_group, int partner_group) const
    {
        return links_[static_cast<std::size_t>(self_group) * params_.n_groups + partner_group];
    }

private:
    ModelParams params_;
    std::vector<MomentKey> catalog_;
    std::unordered_map<MomentKey, int, MomentKeyHash> index_;
    std::vector<CompiledInteraction> interaction_;
    std::vector<CompiledAttraction> attraction_;
    std::vector<FirstMomentLinks> links_;
};

}  // namespace groupop
