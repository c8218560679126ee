#include "kge/samplers.hpp"

#include "kge/errors.hpp"
#include "kge/ops.hpp"

#include <algorithm>

namespace kge {

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::Rand: return "rand";
    case Strategy::Pop: return "pop";
    case Strategy::Dans: return "dans";
    }
    return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    if (name == "rand") return Strategy::Rand;
    if (name == "pop") return Strategy::Pop;
    if (name == "dans") return Strategy::Dans;
    return std::nullopt;
}

void SamplerConfig::validate() const {
    if (generated_count > num_negatives) {
        throw ConfigError("generated_count (" + std::to_string(generated_count) + ") exceeds num_negatives (" +
                          std::to_string(num_negatives) + ")");
    }
    if (generated_count % 2 != 0) {
        throw ConfigError("generated_count must be even to split between the two pathways");
    }
    if (pop_exponent < 0.0) throw ConfigError("pop_exponent must be >= 0");
    if (!(sigma > 0.0f)) throw ConfigError("sigma must be > 0");
}

namespace {

EntityId replaced_entity(const Triplet& positive, Side side) {
    return side == Side::Tail ? positive.tail : positive.head;
}

} // namespace

std::vector<EntityId> sample_uniform(const Triplet& positive, Side side, std::size_t count,
                                     const TripletStore& store, SeedStream& rng) {
    const auto n = static_cast<std::int32_t>(store.num_entities());
    if (n < 2) throw DataError("uniform sampling needs at least two entities");
    const EntityId excluded = replaced_entity(positive, side);
    std::vector<EntityId> out(count);
    for (auto& e : out) {
        EntityId draw = rng.uniform_int(0, n - 2);
        if (draw >= excluded) ++draw;
        e = draw;
    }
    return out;
}

PopularitySampler::PopularitySampler(const TripletStore& store, double exponent)
    : store_(&store), probabilities_(store.popularity_distribution(exponent)) {
    cumulative_.resize(probabilities_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities_.size(); ++i) {
        acc += probabilities_[i];
        cumulative_[i] = acc;
    }
}

std::vector<EntityId> PopularitySampler::sample(const Triplet& positive, Side side, std::size_t count,
                                                SeedStream& rng) const {
    const EntityId excluded = replaced_entity(positive, side);
    const double remaining = 1.0 - probabilities_[static_cast<std::size_t>(excluded)];
    if (remaining <= 1e-12) {
        // All mass on the replaced entity: nothing else is reachable by popularity.
        return sample_uniform(positive, side, count, *store_, rng);
    }
    const double total = cumulative_.back();
    std::vector<EntityId> out;
    out.reserve(count);
    std::uniform_real_distribution<double> unit(0.0, total);
    while (out.size() < count) {
        const double u = unit(rng.engine());
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        auto idx = static_cast<EntityId>(it - cumulative_.begin());
        // Skip zero-probability entries that upper_bound can land on at a boundary.
        while (probabilities_[static_cast<std::size_t>(idx)] == 0.0 && idx > 0) --idx;
        if (idx == excluded || probabilities_[static_cast<std::size_t>(idx)] == 0.0) continue;
        out.push_back(idx);
    }
    return out;
}

std::vector<EntityId> sample_popularity(const Triplet& positive, Side side, std::size_t count,
                                        const TripletStore& store, const SamplerConfig& config, SeedStream& rng) {
    return PopularitySampler(store, config.pop_exponent).sample(positive, side, count, rng);
}

CorruptionContext corruption_context(const PositiveBatch& batch, const Tensor& embeddings,
                                     const RelationParams& decoder) {
    NoGradScope no_grad;
    std::vector<ops::Index> anchors, replaced;
    std::vector<RelationId> relations;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Triplet& t = batch.triplets[k];
        const bool tail = batch.sides[k] == Side::Tail;
        anchors.push_back(tail ? t.head : t.tail);
        replaced.push_back(tail ? t.tail : t.head);
        relations.push_back(t.relation);
    }
    CorruptionContext ctx;
    ctx.entity_conditions = ops::gather_rows(embeddings, anchors).detach();
    ctx.relation_conditions = ops::mul(ctx.entity_conditions, relation_vectors(decoder, relations)).detach();
    ctx.reals = ops::gather_rows(embeddings, replaced).detach();
    return ctx;
}

NegativeBatch compose_negatives(const PositiveBatch& batch, const SamplerConfig& config, const TripletStore& store,
                                SeedStream& rng, const PopularitySampler* popularity,
                                const GeneratorHandle* generator) {
    config.validate();
    const std::size_t generated = config.effective_generated();
    if (generated > 0 && (generator == nullptr || generator->generator == nullptr ||
                          generator->embeddings == nullptr || generator->decoder == nullptr ||
                          generator->noise == nullptr)) {
        throw ConfigError("DANS sampling requires a generator and an embedding snapshot");
    }

    NegativeBatch out;
    out.sides = batch.sides;
    out.uniform_per_positive = config.num_negatives - generated;
    out.uniform_ids.reserve(batch.size() * out.uniform_per_positive);

    std::optional<PopularitySampler> local_pop;
    if (config.strategy == Strategy::Pop && popularity == nullptr) {
        local_pop.emplace(store, config.pop_exponent);
        popularity = &*local_pop;
    }
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto ids = config.strategy == Strategy::Pop
                             ? popularity->sample(batch.triplets[k], batch.sides[k], out.uniform_per_positive, rng)
                             : sample_uniform(batch.triplets[k], batch.sides[k], out.uniform_per_positive, store, rng);
        out.uniform_ids.insert(out.uniform_ids.end(), ids.begin(), ids.end());
    }

    if (generated == 0) return out;

    NoGradScope no_grad;
    const std::size_t per_pathway = generated / 2;
    CorruptionContext ctx = corruption_context(batch, *generator->embeddings, *generator->decoder);
    GeneratedFakes fe = generate(Pathway::Entity, *generator->generator, ctx.entity_conditions, per_pathway,
                                 config.sigma, *generator->noise);
    GeneratedFakes fr = generate(Pathway::Relation, *generator->generator, ctx.relation_conditions, per_pathway,
                                 config.sigma, *generator->noise);
    out.generated = ops::concat_rows({fe.embeddings, fr.embeddings}).detach();
    for (Pathway p : {Pathway::Entity, Pathway::Relation}) {
        for (std::size_t k = 0; k < batch.size(); ++k) {
            for (std::size_t j = 0; j < per_pathway; ++j) {
                out.pathways.push_back(p);
                out.owners.push_back(static_cast<std::int32_t>(k));
            }
        }
    }
    return out;
}

} // namespace kge
