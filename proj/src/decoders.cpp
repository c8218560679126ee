#include "kge/decoders.hpp"

#include "kge/errors.hpp"
#include "kge/ops.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace kge {

std::string_view to_string(DecoderMode mode) {
    switch (mode) {
    case DecoderMode::DistMult: return "distmult";
    case DecoderMode::ComplEx: return "complex";
    case DecoderMode::RotatE: return "rotate";
    }
    return "?";
}

std::optional<DecoderMode> parse_decoder(std::string_view name) {
    if (name == "distmult") return DecoderMode::DistMult;
    if (name == "complex") return DecoderMode::ComplEx;
    if (name == "rotate") return DecoderMode::RotatE;
    return std::nullopt;
}

RelationParams RelationParams::init(DecoderMode mode, std::size_t num_relations, std::size_t dim, SeedStream& rng,
                                    float rotate_margin, bool complex_conjugate) {
    if (dim == 0) throw ConfigError("decoder: dimension must be positive");
    if (mode != DecoderMode::DistMult && dim % 2 != 0) {
        throw ConfigError(std::string("decoder ") + std::string(to_string(mode)) + " needs an even dimension, got " +
                          std::to_string(dim));
    }
    RelationParams p;
    p.mode = mode;
    p.dim = dim;
    p.rotate_margin = rotate_margin;
    p.complex_conjugate = complex_conjugate;
    if (mode == DecoderMode::RotatE) {
        p.relations = uniform_parameter({num_relations, dim / 2}, std::numbers::pi_v<float>, rng);
    } else {
        p.relations = uniform_parameter({num_relations, dim}, 1.0f / std::sqrt(static_cast<float>(dim)), rng);
    }
    return p;
}

namespace {

void check_rows(const Tensor& heads, std::span<const RelationId> relations, const Tensor& tails,
                const RelationParams& params) {
    if (heads.dim() != 2 || tails.dim() != 2 || heads.shape() != tails.shape() || heads.cols() != params.dim ||
        heads.rows() != relations.size()) {
        throw ShapeError("score: heads " + shape_string(heads.shape()) + " vs tails " + shape_string(tails.shape()) +
                         " for " + std::to_string(relations.size()) + " relations of dim " +
                         std::to_string(params.dim));
    }
}

} // namespace

Tensor score_raw(const Tensor& heads, std::span<const RelationId> relations, const Tensor& tails,
                 const RelationParams& params) {
    check_rows(heads, relations, tails, params);
    Tensor rel = ops::gather_rows(params.relations, relations);
    const std::size_t half = params.dim / 2;
    switch (params.mode) {
    case DecoderMode::DistMult:
        return ops::row_sum(ops::mul(ops::mul(heads, rel), tails));
    case DecoderMode::ComplEx: {
        Tensor hr = ops::slice_cols(heads, 0, half), hi = ops::slice_cols(heads, half, params.dim);
        Tensor tr = ops::slice_cols(tails, 0, half), ti = ops::slice_cols(tails, half, params.dim);
        Tensor rr = ops::slice_cols(rel, 0, half), ri = ops::slice_cols(rel, half, params.dim);
        // Re(h * r) and Im(h * r)
        Tensor re = ops::sub(ops::mul(hr, rr), ops::mul(hi, ri));
        Tensor im = ops::add(ops::mul(hr, ri), ops::mul(hi, rr));
        Tensor terms = params.complex_conjugate ? ops::add(ops::mul(re, tr), ops::mul(im, ti))
                                                : ops::sub(ops::mul(re, tr), ops::mul(im, ti));
        return ops::row_sum(terms);
    }
    case DecoderMode::RotatE: {
        Tensor hr = ops::slice_cols(heads, 0, half), hi = ops::slice_cols(heads, half, params.dim);
        Tensor tr = ops::slice_cols(tails, 0, half), ti = ops::slice_cols(tails, half, params.dim);
        Tensor c = ops::cos(rel), s = ops::sin(rel);
        Tensor re = ops::sub(ops::sub(ops::mul(hr, c), ops::mul(hi, s)), tr);
        Tensor im = ops::sub(ops::add(ops::mul(hr, s), ops::mul(hi, c)), ti);
        return ops::scale(ops::row_sum(ops::add(ops::square(re), ops::square(im))), -1.0f);
    }
    }
    throw ConfigError("score: unknown decoder");
}

Tensor score_logits(const Tensor& raw, const RelationParams& params) {
    if (params.mode == DecoderMode::RotatE) return ops::add_scalar(raw, params.rotate_margin);
    return raw;
}

ScoredTriplet score(std::span<const float> head, RelationId relation, std::span<const float> tail,
                    const RelationParams& params) {
    if (head.size() != params.dim || tail.size() != params.dim) {
        throw ShapeError("score: embedding sizes " + std::to_string(head.size()) + " and " +
                         std::to_string(tail.size()) + " for dim " + std::to_string(params.dim));
    }
    NoGradScope no_grad;
    Tensor h = Tensor::from({1, params.dim}, std::vector<float>(head.begin(), head.end()));
    Tensor t = Tensor::from({1, params.dim}, std::vector<float>(tail.begin(), tail.end()));
    const RelationId rel[] = {relation};
    Tensor raw = score_raw(h, rel, t, params);
    Tensor p = ops::sigmoid(score_logits(raw, params));
    return {raw.item(), p.item()};
}

Tensor relation_vectors(const RelationParams& params, std::span<const RelationId> relations) {
    Tensor rel = ops::gather_rows(params.relations, relations);
    if (params.mode == DecoderMode::RotatE) return ops::concat_cols(ops::cos(rel), ops::sin(rel));
    return rel;
}

Tensor binary_cross_entropy(const Tensor& logits, std::span<const float> labels) {
    if (logits.numel() == 0) throw ContractError("binary_cross_entropy: empty batch");
    if (labels.size() != logits.numel()) {
        throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits.shape()));
    }
    Tensor y = Tensor::from(logits.shape(), std::vector<float>(labels.begin(), labels.end()));
    Tensor not_y = Tensor::from(logits.shape(), std::vector<float>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) not_y.data()[i] = 1.0f - labels[i];
    // log(1 - sigmoid(z)) == log_sigmoid(-z)
    Tensor positive = ops::mul(y, ops::log_sigmoid(logits));
    Tensor negative = ops::mul(not_y, ops::log_sigmoid(ops::scale(logits, -1.0f)));
    return ops::scale(ops::mean(ops::add(positive, negative)), -1.0f);
}

void score_all_candidates(const RelationParams& params, std::span<const float> embeddings, std::size_t num_entities,
                          EntityId anchor, RelationId relation, Side corrupted, std::span<float> out) {
    const std::size_t d = params.dim;
    if (embeddings.size() != num_entities * d || out.size() != num_entities) {
        throw ShapeError("score_all_candidates: embedding table or output size mismatch");
    }
    const float* a = embeddings.data() + static_cast<std::size_t>(anchor) * d;
    const std::size_t half = d / 2;
    auto rel_data = params.relations.data();

    // Reduce each decoder to a per-candidate dot product or distance against a
    // query vector derived from the anchor and relation.
    std::vector<float> query(d);
    switch (params.mode) {
    case DecoderMode::DistMult: {
        const float* r = rel_data.data() + static_cast<std::size_t>(relation) * d;
        for (std::size_t k = 0; k < d; ++k) query[k] = a[k] * r[k];
        for (std::size_t e = 0; e < num_entities; ++e) {
            const float* c = embeddings.data() + e * d;
            float acc = 0.0f;
            for (std::size_t k = 0; k < d; ++k) acc += query[k] * c[k];
            out[e] = acc;
        }
        return;
    }
    case DecoderMode::ComplEx: {
        const float* r = rel_data.data() + static_cast<std::size_t>(relation) * d;
        const float* rr = r;
        const float* ri = r + half;
        // score = sum_k wr_k * c_re_k + wi_k * c_im_k for candidate c.
        for (std::size_t k = 0; k < half; ++k) {
            const float ar = a[k], ai = a[half + k];
            if (corrupted == Side::Tail) {
                const float re = ar * rr[k] - ai * ri[k];
                const float im = ar * ri[k] + ai * rr[k];
                query[k] = re;
                query[half + k] = params.complex_conjugate ? im : -im;
            } else if (params.complex_conjugate) {
                // Re(c * r * conj(a)) as a function of candidate head c.
                query[k] = rr[k] * ar + ri[k] * ai;
                query[half + k] = rr[k] * ai - ri[k] * ar;
            } else {
                // Re(c * r * a)
                query[k] = rr[k] * ar - ri[k] * ai;
                query[half + k] = -(ri[k] * ar + rr[k] * ai);
            }
        }
        for (std::size_t e = 0; e < num_entities; ++e) {
            const float* c = embeddings.data() + e * d;
            float acc = 0.0f;
            for (std::size_t k = 0; k < d; ++k) acc += query[k] * c[k];
            out[e] = acc;
        }
        return;
    }
    case DecoderMode::RotatE: {
        const float* phase = rel_data.data() + static_cast<std::size_t>(relation) * half;
        if (corrupted == Side::Tail) {
            for (std::size_t k = 0; k < half; ++k) {
                const float cs = std::cos(phase[k]), sn = std::sin(phase[k]);
                query[k] = a[k] * cs - a[half + k] * sn;
                query[half + k] = a[k] * sn + a[half + k] * cs;
            }
            for (std::size_t e = 0; e < num_entities; ++e) {
                const float* c = embeddings.data() + e * d;
                float acc = 0.0f;
                for (std::size_t k = 0; k < half; ++k) {
                    const float dr = query[k] - c[k];
                    const float di = query[half + k] - c[half + k];
                    acc += dr * dr + di * di;
                }
                out[e] = -acc;
            }
        } else {
            std::vector<float> cs(half), sn(half);
            for (std::size_t k = 0; k < half; ++k) {
                cs[k] = std::cos(phase[k]);
                sn[k] = std::sin(phase[k]);
            }
            for (std::size_t e = 0; e < num_entities; ++e) {
                const float* c = embeddings.data() + e * d;
                float acc = 0.0f;
                for (std::size_t k = 0; k < half; ++k) {
                    const float dr = c[k] * cs[k] - c[half + k] * sn[k] - a[k];
                    const float di = c[k] * sn[k] + c[half + k] * cs[k] - a[half + k];
                    acc += dr * dr + di * di;
                }
                out[e] = -acc;
            }
        }
        return;
    }
    }
}

} // namespace kge
