#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kge {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triplet {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    auto operator<=>(const Triplet&) const = default;
};

enum class Side : std::uint8_t { Head, Tail };
enum class Split : std::uint8_t { Train, Valid, Test };

std::string_view to_string(Side side);
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view name);

/// Name <-> dense index map; indices follow first insertion.
class Dictionary {
public:
    std::int32_t insert(std::string_view name);
    std::optional<std::int32_t> find(std::string_view name) const;
    const std::string& name(std::int32_t index) const;
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct PositiveBatch {
    std::vector<Triplet> triplets;
    std::vector<Side> sides; // parallel to triplets; the end to corrupt

    std::size_t size() const { return triplets.size(); }
};

/// Mean-aggregation structure for one directed relation: for each target with
/// at least one in-neighbor, the neighbor list and its 1/|N| weight.
struct RelationAdjacency {
    std::vector<EntityId> targets;      // distinct entities i with N_i^r nonempty
    std::vector<EntityId> sources;      // flattened neighbor lists, one per edge
    std::vector<std::int32_t> slot;     // edge -> position in `targets`
    std::vector<float> weight;          // edge -> 1 / |N_i^r|
    std::vector<std::int32_t> offsets;  // targets.size() + 1 CSR offsets into sources
    std::vector<std::int32_t> position; // entity -> index in `targets`, -1 if absent
};

/// Immutable after construction; safe for concurrent reads.
class TripletStore {
public:
    using NamedTriplet = std::array<std::string, 3>;

    /// Reads train.txt, valid.txt, test.txt (head TAB relation TAB tail).
    static TripletStore load(const std::filesystem::path& dir);
    /// In-memory construction with the same indexing rules as load().
    static TripletStore from_named(const std::vector<NamedTriplet>& train,
                                   const std::vector<NamedTriplet>& valid = {},
                                   const std::vector<NamedTriplet>& test = {});

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    /// Relations seen by the encoder: forward r and inverse r + |R|.
    std::size_t num_directed_relations() const { return 2 * relations_.size(); }

    const Dictionary& entities() const { return entities_; }
    const Dictionary& relations() const { return relations_; }

    const std::vector<Triplet>& train() const { return train_; }
    const std::vector<Triplet>& valid() const { return valid_; }
    const std::vector<Triplet>& test() const { return test_; }
    const std::vector<Triplet>& split(Split s) const;

    /// N_i^r. For r < |R| the heads j of train triplets (j, r, i); for
    /// r >= |R| the tails j of train triplets (i, r - |R|, j).
    std::span<const EntityId> neighbors(EntityId entity, RelationId directed_relation) const;
    const RelationAdjacency& adjacency(RelationId directed_relation) const { return adjacency_.at(directed_relation); }

    bool is_known(const Triplet& t) const;
    /// Entities e with (head, relation, e) anywhere in the filter index.
    std::span<const EntityId> known_tails(EntityId head, RelationId relation) const;
    /// Entities e with (e, relation, tail) anywhere in the filter index.
    std::span<const EntityId> known_heads(RelationId relation, EntityId tail) const;

    const std::vector<std::int64_t>& degree() const { return degree_; }
    /// p(i) proportional to degree(i)^exponent; uniform if all degrees are 0.
    std::vector<double> popularity_distribution(double exponent) const;

    /// Seeded shuffle of the train split chunked into batches, with a
    /// uniformly drawn corruption side per triplet.
    std::vector<PositiveBatch> batches(std::size_t batch_size, std::uint64_t seed) const;

private:
    void index();
    std::uint64_t key(const Triplet& t) const;
    std::uint64_t pair_key(std::int64_t a, std::int64_t b) const;

    Dictionary entities_;
    Dictionary relations_;
    std::vector<Triplet> train_, valid_, test_;
    std::vector<RelationAdjacency> adjacency_;
    std::unordered_set<std::uint64_t> filter_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_by_head_rel_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_by_rel_tail_;
    std::vector<std::int64_t> degree_;
};

} // namespace kge
