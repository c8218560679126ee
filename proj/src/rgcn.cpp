#include "kge/rgcn.hpp"

#include "kge/errors.hpp"
#include "kge/ops.hpp"

#include <cmath>

namespace kge {

RgcnParams RgcnParams::init(std::size_t num_entities, std::size_t num_directed_relations,
                            std::vector<std::size_t> layer_dims, SeedStream& rng) {
    if (layer_dims.empty()) throw ConfigError("rgcn: layer_dims must list at least the input dimension");
    for (std::size_t d : layer_dims) {
        if (d == 0) throw ConfigError("rgcn: layer dimensions must be positive");
    }
    RgcnParams p;
    p.layer_dims = std::move(layer_dims);
    const float input_bound = 1.0f / std::sqrt(static_cast<float>(p.layer_dims[0]));
    p.input_embeddings = uniform_parameter({num_entities, p.layer_dims[0]}, input_bound, rng);
    for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
        const std::size_t in = p.layer_dims[l], out = p.layer_dims[l + 1];
        const float bound = 1.0f / std::sqrt(static_cast<float>(in));
        p.self_weights.push_back(uniform_parameter({in, out}, bound, rng));
        std::vector<Tensor> rel;
        rel.reserve(num_directed_relations);
        for (std::size_t r = 0; r < num_directed_relations; ++r) rel.push_back(uniform_parameter({in, out}, bound, rng));
        p.relation_weights.push_back(std::move(rel));
    }
    return p;
}

ParameterList RgcnParams::parameters() const {
    ParameterList out;
    out.push_back({"rgcn.input", input_embeddings});
    for (std::size_t l = 0; l < self_weights.size(); ++l) {
        const std::string prefix = "rgcn.layer" + std::to_string(l);
        out.push_back({prefix + ".self", self_weights[l]});
        for (std::size_t r = 0; r < relation_weights[l].size(); ++r) {
            out.push_back({prefix + ".rel" + std::to_string(r), relation_weights[l][r]});
        }
    }
    return out;
}

Tensor layer_forward(const Tensor& prev, std::size_t layer, const TripletStore& store, const RgcnParams& params) {
    if (layer >= params.num_layers()) throw IndexError("rgcn: layer " + std::to_string(layer) + " out of range");
    const Tensor& self_weight = params.self_weights[layer];
    if (prev.dim() != 2 || prev.rows() != store.num_entities() || prev.cols() != self_weight.rows()) {
        throw ShapeError("rgcn layer_forward: input " + shape_string(prev.shape()) + " vs self weight " +
                         shape_string(self_weight.shape()));
    }
    const auto& rel_weights = params.relation_weights[layer];
    if (rel_weights.size() != store.num_directed_relations()) {
        throw ShapeError("rgcn layer_forward: " + std::to_string(rel_weights.size()) + " relation weights for " +
                         std::to_string(store.num_directed_relations()) + " directed relations");
    }

    std::vector<Tensor> messages;
    std::vector<ops::Index> targets;
    for (std::size_t r = 0; r < rel_weights.size(); ++r) {
        const auto& adj = store.adjacency(static_cast<RelationId>(r));
        if (adj.targets.empty()) continue;
        Tensor gathered = ops::gather_rows(prev, adj.sources);
        Tensor weights = Tensor::from({adj.weight.size(), 1}, adj.weight);
        Tensor aggregated = ops::scatter_add_rows(ops::mul_col(gathered, weights), adj.slot, adj.targets.size());
        messages.push_back(ops::matmul(aggregated, rel_weights[r]));
        targets.insert(targets.end(), adj.targets.begin(), adj.targets.end());
    }

    Tensor pre = ops::matmul(prev, self_weight);
    if (!messages.empty()) {
        Tensor neighborhood = ops::scatter_add_rows(ops::concat_rows(messages), targets, store.num_entities());
        pre = ops::add(neighborhood, pre);
    }
    return ops::relu(pre);
}

Tensor encode_all(const TripletStore& store, const RgcnParams& params) {
    Tensor h = params.input_embeddings;
    if (h.rows() != store.num_entities()) {
        throw ShapeError("rgcn: input embeddings " + shape_string(h.shape()) + " for " +
                         std::to_string(store.num_entities()) + " entities");
    }
    for (std::size_t l = 0; l < params.num_layers(); ++l) h = layer_forward(h, l, store, params);
    return h;
}

} // namespace kge
