#pragma once

#include "kge/kg_store.hpp"
#include "kge/rng.hpp"
#include "kge/tensor.hpp"

#include <optional>
#include <span>
#include <string_view>

namespace kge {

enum class DecoderMode : std::uint8_t { DistMult, ComplEx, RotatE };

std::string_view to_string(DecoderMode mode);
std::optional<DecoderMode> parse_decoder(std::string_view name);

/// Relation-side decoder parameters.
///   DistMult: |R| x d real diagonal.
///   ComplEx:  |R| x d, columns [0, d/2) real part, [d/2, d) imaginary part.
///   RotatE:   |R| x d/2 phases; the rotation is (cos, sin) per coordinate.
/// Entity embeddings use the same real-then-imaginary split for the complex
/// decoders.
struct RelationParams {
    DecoderMode mode = DecoderMode::DistMult;
    std::size_t dim = 0;
    Tensor relations;
    float rotate_margin = 12.0f;
    // Score Re(<h, r, conj(t)>); false uses Re(<h, r, t>).
    bool complex_conjugate = true;

    static RelationParams init(DecoderMode mode, std::size_t num_relations, std::size_t dim, SeedStream& rng,
                               float rotate_margin = 12.0f, bool complex_conjugate = true);

    ParameterList parameters() const { return {{"decoder.relations", relations}}; }
};

struct ScoredTriplet {
    float raw_score = 0.0f;
    float probability = 0.0f;
};

/// Raw scores for n triplets: heads and tails are n x d rows, one relation
/// per row. Returns n x 1.
Tensor score_raw(const Tensor& heads, std::span<const RelationId> relations, const Tensor& tails,
                 const RelationParams& params);

/// Logit whose sigmoid is the triplet probability: raw for DistMult/ComplEx,
/// margin + raw for RotatE.
Tensor score_logits(const Tensor& raw, const RelationParams& params);

ScoredTriplet score(std::span<const float> head, RelationId relation, std::span<const float> tail,
                    const RelationParams& params);

/// Per-row d-vector standing for the relation in element-wise products with
/// entity embeddings (the e_r of the relation-conditioned generator prior).
Tensor relation_vectors(const RelationParams& params, std::span<const RelationId> relations);

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels.
Tensor binary_cross_entropy(const Tensor& logits, std::span<const float> labels);

/// Base link-prediction loss over scored positives and negatives.
inline Tensor base_loss(const Tensor& logits, std::span<const float> labels) {
    return binary_cross_entropy(logits, labels);
}

/// Raw scores of every entity in the corrupted position of (anchor, relation)
/// against a fixed |V| x d embedding table; no gradient. For Side::Tail the
/// anchor is the head, for Side::Head it is the tail.
void score_all_candidates(const RelationParams& params, std::span<const float> embeddings, std::size_t num_entities,
                          EntityId anchor, RelationId relation, Side corrupted, std::span<float> out);

} // namespace kge
