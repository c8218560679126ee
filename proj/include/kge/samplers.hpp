#pragma once

#include "kge/dans.hpp"
#include "kge/decoders.hpp"
#include "kge/kg_store.hpp"
#include "kge/rng.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace kge {

enum class Strategy : std::uint8_t { Rand, Pop, Dans };

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);

struct SamplerConfig {
    Strategy strategy = Strategy::Dans;
    std::size_t num_negatives = 20;  // N_s per positive
    std::size_t generated_count = 10; // of N_s, split evenly between G_E and G_R
    double pop_exponent = 0.75;
    float sigma = 1.0f;

    void validate() const;
    /// Generated negatives actually used by this strategy.
    std::size_t effective_generated() const { return strategy == Strategy::Dans ? generated_count : 0; }
};

/// `count` entities drawn uniformly with replacement from all entities other
/// than the one being replaced.
std::vector<EntityId> sample_uniform(const Triplet& positive, Side side, std::size_t count,
                                     const TripletStore& store, SeedStream& rng);

/// Draws from the degree^exponent distribution with the replaced entity
/// excluded (rejection, equivalent to renormalising over the rest).
class PopularitySampler {
public:
    PopularitySampler(const TripletStore& store, double exponent);

    std::vector<EntityId> sample(const Triplet& positive, Side side, std::size_t count, SeedStream& rng) const;
    const std::vector<double>& probabilities() const { return probabilities_; }

private:
    const TripletStore* store_;
    std::vector<double> probabilities_;
    std::vector<double> cumulative_;
};

std::vector<EntityId> sample_popularity(const Triplet& positive, Side side, std::size_t count,
                                        const TripletStore& store, const SamplerConfig& config, SeedStream& rng);

/// Per-positive generator inputs taken from a detached embedding snapshot.
struct CorruptionContext {
    Tensor entity_conditions;   // B x d: e_h for tail corruption, e_t for head corruption
    Tensor relation_conditions; // B x d: entity condition * relation vector
    Tensor reals;               // B x d: embedding of the entity being replaced
};

CorruptionContext corruption_context(const PositiveBatch& batch, const Tensor& embeddings,
                                     const RelationParams& decoder);

struct GeneratorHandle {
    const GeneratorParams* generator = nullptr;
    const Tensor* embeddings = nullptr; // |V| x d snapshot
    const RelationParams* decoder = nullptr;
    SeedStream* noise = nullptr;
};

struct NegativeBatch {
    std::vector<Side> sides;
    std::size_t uniform_per_positive = 0;
    std::vector<EntityId> uniform_ids; // positive-major
    Tensor generated;                  // constant rows; pathway E block then pathway R block
    std::vector<Pathway> pathways;     // per generated row
    std::vector<std::int32_t> owners;  // per generated row: index of its positive

    std::span<const EntityId> uniform_for(std::size_t positive) const {
        return std::span<const EntityId>(uniform_ids).subspan(positive * uniform_per_positive, uniform_per_positive);
    }
    std::size_t generated_rows() const { return pathways.size(); }
};

/// Negatives for every positive of the batch, corrupting only its flagged
/// side. DANS draws generated_count/2 fakes per pathway and fills the rest
/// of N_s uniformly; Rand and Pop draw N_s entity ids.
NegativeBatch compose_negatives(const PositiveBatch& batch, const SamplerConfig& config, const TripletStore& store,
                                SeedStream& rng, const PopularitySampler* popularity = nullptr,
                                const GeneratorHandle* generator = nullptr);

} // namespace kge
