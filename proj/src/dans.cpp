#include "kge/dans.hpp"

#include "kge/decoders.hpp"
#include "kge/errors.hpp"
#include "kge/ops.hpp"

#include <cmath>
#include <iostream>

namespace kge {

std::string_view to_string(Pathway pathway) { return pathway == Pathway::Entity ? "G_E" : "G_R"; }

Linear Linear::init(std::size_t in, std::size_t out, SeedStream& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(in));
    Linear l;
    l.weight = uniform_parameter({in, out}, bound, rng);
    l.bias = uniform_parameter({out}, bound, rng);
    return l;
}

Tensor Linear::forward(const Tensor& x) const {
    return ops::linear(x, weight, bias);
}

namespace {

FilmNetwork init_film(std::size_t dim, std::size_t width, SeedStream& rng) {
    FilmNetwork f;
    f.hidden = Linear::init(dim, dim, rng);
    f.alpha = Linear{Tensor::zeros({dim, width}, true), Tensor::full({width}, 1.0f, true)};
    f.beta = Linear{Tensor::zeros({dim, width}, true), Tensor::zeros({width}, true)};
    return f;
}

GeneratorPathway init_pathway(std::size_t dim, std::size_t hidden_layers, SeedStream& rng) {
    GeneratorPathway p;
    for (std::size_t m = 0; m < hidden_layers; ++m) {
        p.hidden.push_back(Linear::init(dim, dim, rng));
        p.film.push_back(init_film(dim, dim, rng));
    }
    p.output = Linear::init(dim, dim, rng);
    return p;
}

void append_linear(ParameterList& out, const std::string& name, const Linear& l) {
    out.push_back({name + ".weight", l.weight});
    out.push_back({name + ".bias", l.bias});
}

void append_pathway(ParameterList& out, const std::string& prefix, const GeneratorPathway& p) {
    for (std::size_t m = 0; m < p.hidden.size(); ++m) {
        const std::string layer = prefix + ".layer" + std::to_string(m);
        append_linear(out, layer, p.hidden[m]);
        append_linear(out, layer + ".film.hidden", p.film[m].hidden);
        append_linear(out, layer + ".film.alpha", p.film[m].alpha);
        append_linear(out, layer + ".film.beta", p.film[m].beta);
    }
    append_linear(out, prefix + ".output", p.output);
}

} // namespace

GeneratorParams GeneratorParams::init(std::size_t dim, std::size_t hidden_layers, SeedStream& rng) {
    if (dim == 0) throw ConfigError("generator: dimension must be positive");
    GeneratorParams g;
    g.dim = dim;
    g.entity = init_pathway(dim, hidden_layers, rng);
    g.relation = init_pathway(dim, hidden_layers, rng);
    return g;
}

ParameterList GeneratorParams::parameters() const {
    ParameterList out;
    append_pathway(out, "generator.entity", entity);
    append_pathway(out, "generator.relation", relation);
    return out;
}

DiscriminatorParams DiscriminatorParams::init(std::size_t dim, SeedStream& rng) {
    if (dim == 0) throw ConfigError("discriminator: dimension must be positive");
    DiscriminatorParams d;
    d.trunk = Linear::init(dim, dim, rng);
    d.adv_head = Linear::init(dim, 1, rng);
    d.aux_head = Linear::init(dim, 1, rng);
    return d;
}

ParameterList DiscriminatorParams::parameters() const {
    ParameterList out;
    append_linear(out, "discriminator.trunk", trunk);
    append_linear(out, "discriminator.adv", adv_head);
    append_linear(out, "discriminator.aux", aux_head);
    return out;
}

Tensor sample_noise(const Tensor& conditions, std::size_t per_condition, float sigma, SeedStream& rng) {
    if (!(sigma >= 0.0f)) throw ConfigError("sample_noise: sigma must be non-negative");
    const std::size_t n = conditions.rows(), d = conditions.cols();
    Tensor out = Tensor::zeros({n * per_condition, d});
    auto src = conditions.data();
    auto dst = out.data();
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < per_condition; ++j) {
            float* row = dst.data() + (k * per_condition + j) * d;
            for (std::size_t c = 0; c < d; ++c) row[c] = src[k * d + c] + sigma * normal(rng.engine());
        }
    }
    return out;
}

GeneratedFakes generate(const GeneratorPathway& pathway, const Tensor& conditions, const Tensor& noise,
                        std::size_t per_condition) {
    const std::size_t d = pathway.output.weight.rows();
    if (conditions.dim() != 2 || conditions.cols() != d || noise.dim() != 2 || noise.cols() != d ||
        noise.rows() != conditions.rows() * per_condition) {
        throw ShapeError("generate: conditions " + shape_string(conditions.shape()) + " vs noise " +
                         shape_string(noise.shape()) + " at dim " + std::to_string(d));
    }
    GeneratedFakes out;
    out.coeffs.condition = conditions;
    Tensor x = noise;
    for (std::size_t m = 0; m < pathway.hidden.size(); ++m) {
        const FilmNetwork& film = pathway.film[m];
        Tensor film_hidden = ops::relu(film.hidden.forward(conditions));
        Tensor alpha = film.alpha.forward(film_hidden);
        Tensor beta = film.beta.forward(film_hidden);
        x = ops::relu(pathway.hidden[m].forward(x));
        x = ops::group_affine(x, alpha, beta, per_condition);
        out.coeffs.alpha.push_back(alpha);
        out.coeffs.beta.push_back(beta);
    }
    out.embeddings = pathway.output.forward(x);
    return out;
}

GeneratedFakes generate(Pathway which, const GeneratorParams& params, const Tensor& conditions,
                        std::size_t per_condition, float sigma, SeedStream& rng) {
    Tensor noise = sample_noise(conditions, per_condition, sigma, rng);
    return generate(params.pathway(which), conditions, noise, per_condition);
}

DiscriminatorOutput discriminate(const Tensor& embeddings, const DiscriminatorParams& params) {
    if (embeddings.dim() != 2 || embeddings.cols() != params.trunk.weight.rows()) {
        throw ShapeError("discriminate: input " + shape_string(embeddings.shape()) + " vs trunk " +
                         shape_string(params.trunk.weight.shape()));
    }
    Tensor shared = ops::relu(params.trunk.forward(embeddings));
    return {params.adv_head.forward(shared), params.aux_head.forward(shared)};
}

Tensor discriminator_loss(const Tensor& reals, const Tensor& fakes, std::span<const Pathway> pathways,
                          const DiscriminatorParams& params) {
    const std::size_t n_fake = fakes.defined() ? fakes.rows() : 0;
    if (pathways.size() != n_fake) {
        throw ShapeError("discriminator_loss: " + std::to_string(pathways.size()) + " pathway labels for " +
                         std::to_string(n_fake) + " fakes");
    }
    std::vector<Tensor> parts;
    if (reals.defined() && reals.rows() > 0) parts.push_back(reals);
    if (n_fake > 0) parts.push_back(fakes);
    if (parts.empty()) throw ContractError("discriminator_loss: no samples");

    Tensor all = parts.size() == 1 ? parts.front() : ops::concat_rows(parts);
    const std::size_t n_real = all.rows() - n_fake;
    DiscriminatorOutput out = discriminate(all, params);

    std::vector<float> adv_labels(all.rows(), 0.0f);
    std::fill(adv_labels.begin(), adv_labels.begin() + static_cast<std::ptrdiff_t>(n_real), 1.0f);
    Tensor loss = binary_cross_entropy(out.adv_logit, adv_labels);

    if (n_fake == 0) {
        std::clog << "warning: discriminator_loss without fakes; auxiliary term is 0\n";
        return loss;
    }
    // Auxiliary supervision sees fake rows only.
    std::vector<float> aux_labels(n_fake);
    for (std::size_t i = 0; i < n_fake; ++i) aux_labels[i] = pathways[i] == Pathway::Entity ? 1.0f : 0.0f;
    Tensor aux_logits = ops::slice_rows(out.aux_logit, n_real, all.rows());
    return ops::add(loss, binary_cross_entropy(aux_logits, aux_labels));
}

Tensor film_penalty(const FilmCoefficients& coeffs) {
    Tensor total = Tensor::scalar(0.0f);
    for (std::size_t m = 0; m < coeffs.alpha.size(); ++m) {
        const float n = static_cast<float>(coeffs.alpha[m].rows());
        Tensor layer = ops::add(ops::sq_l2(ops::add_scalar(coeffs.alpha[m], -1.0f)), ops::sq_l2(coeffs.beta[m]));
        total = ops::add(total, ops::scale(layer, 1.0f / n));
    }
    return total;
}

Tensor generator_loss(const std::vector<Tensor>& fakes, const std::vector<FilmCoefficients>& coeffs,
                      const DiscriminatorParams& disc, float lambda) {
    if (lambda < 0.0f) throw ConfigError("generator_loss: lambda must be >= 0");
    if (fakes.empty()) throw ContractError("generator_loss: no fakes");
    Tensor all = fakes.size() == 1 ? fakes.front() : ops::concat_rows(fakes);
    DiscriminatorOutput out = discriminate(all, disc);
    // -log D_adv(fake), i.e. cross-entropy against the "real" label.
    Tensor loss = binary_cross_entropy(out.adv_logit, std::vector<float>(all.rows(), 1.0f));
    if (lambda > 0.0f) {
        for (const auto& c : coeffs) loss = ops::add(loss, ops::scale(film_penalty(c), lambda));
    }
    return loss;
}

} // namespace kge
