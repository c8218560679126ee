#pragma once

#include "kge/kg_store.hpp"
#include "kge/rng.hpp"
#include "kge/tensor.hpp"

#include <vector>

namespace kge {

/// Encoder parameters: free input embeddings plus, per layer, one weight per
/// directed relation (forward and inverse) and a self-loop weight.
struct RgcnParams {
    std::vector<std::size_t> layer_dims; // d^0 .. d^L
    Tensor input_embeddings;             // |V| x d^0
    std::vector<std::vector<Tensor>> relation_weights; // [layer][directed relation], d^l x d^{l+1}
    std::vector<Tensor> self_weights;                  // [layer], d^l x d^{l+1}

    /// Every entry drawn from U(-1/sqrt(d^0), 1/sqrt(d^0)) for the input
    /// table and U(-1/sqrt(d^l), 1/sqrt(d^l)) for layer-l weights.
    static RgcnParams init(std::size_t num_entities, std::size_t num_directed_relations,
                           std::vector<std::size_t> layer_dims, SeedStream& rng);

    std::size_t num_layers() const { return layer_dims.size() - 1; }
    std::size_t output_dim() const { return layer_dims.back(); }
    ParameterList parameters() const;
};

/// One relational graph convolution with mean aggregation per relation:
/// row i = ReLU(sum_r sum_{j in N_i^r} prev_j W_r / |N_i^r| + prev_i W_0).
Tensor layer_forward(const Tensor& prev, std::size_t layer, const TripletStore& store, const RgcnParams& params);

/// Full-graph forward through all layers; |V| x d^L.
Tensor encode_all(const TripletStore& store, const RgcnParams& params);

} // namespace kge
