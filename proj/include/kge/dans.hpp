#pragma once

#include "kge/rng.hpp"
#include "kge/tensor.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace kge {

/// Generator pathway that produced a fake entity: conditioned on the entity
/// alone (E) or on the entity-relation product (R).
enum class Pathway : std::uint8_t { Entity, Relation };

std::string_view to_string(Pathway pathway); // "G_E" / "G_R"

struct Linear {
    Tensor weight; // in x out
    Tensor bias;   // out

    static Linear init(std::size_t in, std::size_t out, SeedStream& rng);
    Tensor forward(const Tensor& x) const;
};

/// Produces the per-layer scale and shift from a condition vector.
struct FilmNetwork {
    Linear hidden;
    Linear alpha;
    Linear beta;
};

struct GeneratorPathway {
    std::vector<Linear> hidden;     // M layers, d -> d
    std::vector<FilmNetwork> film;  // one per hidden layer
    Linear output;                  // d -> d, no activation
};

struct GeneratorParams {
    std::size_t dim = 0;
    GeneratorPathway entity;
    GeneratorPathway relation;

    /// Linear layers use U(-1/sqrt(in), 1/sqrt(in)). FiLM heads start at the
    /// identity modulation: zero weights, alpha bias 1, beta bias 0.
    static GeneratorParams init(std::size_t dim, std::size_t hidden_layers, SeedStream& rng);

    std::size_t hidden_layers() const { return entity.hidden.size(); }
    const GeneratorPathway& pathway(Pathway p) const { return p == Pathway::Entity ? entity : relation; }
    ParameterList parameters() const;
};

struct DiscriminatorParams {
    Linear trunk;    // d -> d, ReLU; shared by both heads
    Linear adv_head; // real vs fake
    Linear aux_head; // pathway E vs pathway R

    static DiscriminatorParams init(std::size_t dim, SeedStream& rng);
    ParameterList parameters() const;
};

struct FilmCoefficients {
    std::vector<Tensor> alpha; // per hidden layer, conditions x width
    std::vector<Tensor> beta;
    Tensor condition;
};

struct GeneratedFakes {
    Tensor embeddings; // (conditions * per_condition) x d
    FilmCoefficients coeffs;
};

/// per_condition draws from N(condition_k, sigma^2 I) for every condition row
/// k; output row k * per_condition + j. Constant (no gradient).
Tensor sample_noise(const Tensor& conditions, std::size_t per_condition, float sigma, SeedStream& rng);

/// Runs the noise through a FiLM-modulated pathway. Noise row i belongs to
/// condition row i / per_condition.
GeneratedFakes generate(const GeneratorPathway& pathway, const Tensor& conditions, const Tensor& noise,
                        std::size_t per_condition);

GeneratedFakes generate(Pathway which, const GeneratorParams& params, const Tensor& conditions,
                        std::size_t per_condition, float sigma, SeedStream& rng);

struct DiscriminatorOutput {
    Tensor adv_logit; // n x 1; sigmoid is P(real)
    Tensor aux_logit; // n x 1; sigmoid is P(pathway E)
};

DiscriminatorOutput discriminate(const Tensor& embeddings, const DiscriminatorParams& params);

/// Adversarial cross-entropy averaged over reals (label 1) and fakes (label
/// 0), plus auxiliary cross-entropy averaged over fakes only (label 1 for
/// pathway E, 0 for R).
Tensor discriminator_loss(const Tensor& reals, const Tensor& fakes, std::span<const Pathway> pathways,
                          const DiscriminatorParams& params);

/// Sum over layers of the condition-mean of |alpha - 1|^2 + |beta|^2.
Tensor film_penalty(const FilmCoefficients& coeffs);

/// Minimised by the generator: -mean log D_adv(fake) over all fakes, plus
/// lambda times the FiLM penalty of every pathway.
Tensor generator_loss(const std::vector<Tensor>& fakes, const std::vector<FilmCoefficients>& coeffs,
                      const DiscriminatorParams& disc, float lambda);

} // namespace kge
