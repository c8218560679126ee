#pragma once

#include "kge/checkpoint.hpp"
#include "kge/config.hpp"
#include "kge/dans.hpp"
#include "kge/decoders.hpp"
#include "kge/kg_store.hpp"
#include "kge/optim.hpp"
#include "kge/rgcn.hpp"
#include "kge/samplers.hpp"

#include <functional>
#include <optional>

namespace kge {

/// Seed-stream ids; each consumer draws from its own stream so that enabling
/// one part of the pipeline never shifts the draws of another.
enum class StreamId : std::uint64_t { BaseInit = 1, GanInit = 2, Batches = 3, Negatives = 4, Noise = 5 };

struct Model {
    RgcnParams encoder;
    RelationParams decoder;
    std::optional<GeneratorParams> generator;
    std::optional<DiscriminatorParams> discriminator;

    /// Base model always; generator and discriminator only when the config
    /// uses them.
    static Model init(const TripletStore& store, const TrainConfig& config);

    ParameterList base_parameters() const;
    ParameterList generator_parameters() const;
    ParameterList discriminator_parameters() const;
    ParameterList all_parameters() const;

    /// Detached |V| x d entity embeddings from the encoder.
    Tensor embeddings(const TripletStore& store) const;
};

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, const TripletStore& store);

/// Rebuilds the model stored in `checkpoint`; ConfigError on a dictionary
/// mismatch with `store` or a missing/misshapen tensor.
Model model_from_checkpoint(const Checkpoint& checkpoint, const TripletStore& store,
                            TrainConfig* config_out = nullptr);

enum class Phase : std::uint8_t { Generator, Discriminator, Base };

struct StepReport {
    std::size_t step = 0;
    bool pretraining = false;
    std::optional<float> gen_loss;  // mean over the generator sub-steps
    std::optional<float> disc_loss; // mean over the discriminator sub-steps
    float base_loss = 0.0f;
};

struct FitOptions {
    std::function<void(const StepReport&)> on_step = {};
    /// Called every checkpoint_every epochs (not for the final epoch).
    std::function<void(std::size_t epoch, const Checkpoint&)> on_checkpoint = {};
};

class Trainer {
public:
    Trainer(const TripletStore& store, TrainConfig config);

    /// Base-model training with uniform negatives only, for
    /// config.pretrain_epochs epochs. Optimizer moments are reset afterwards.
    void pretrain(const std::function<void(const StepReport&)>& on_step = {});

    /// Generator sub-steps, then discriminator sub-steps, then one base step.
    StepReport train_step(const PositiveBatch& batch);
    /// One base step with uniform negatives and no adversarial parties.
    StepReport pretrain_step(const PositiveBatch& batch);

    std::vector<StepReport> run_epoch(const std::function<void(const StepReport&)>& on_step = {});

    /// pretrain + config.epochs epochs; returns the final checkpoint.
    Checkpoint fit(const FitOptions& options = {});

    Checkpoint checkpoint() const { return make_checkpoint(model_, config_, *store_); }

    const Model& model() const { return model_; }
    const TrainConfig& config() const { return config_; }
    std::size_t steps() const { return step_; }
    std::size_t generator_updates() const { return gen_updates_; }
    std::size_t discriminator_updates() const { return disc_updates_; }
    std::size_t base_updates() const { return base_updates_; }

    /// Invoked after every parameter update with the phase that ran.
    void set_phase_observer(std::function<void(Phase)> observer) { observer_ = std::move(observer); }

private:
    float base_update(const PositiveBatch& batch, const NegativeBatch& negatives, const Tensor& embeddings);
    void notify(Phase phase) const;
    std::vector<PositiveBatch> next_epoch_batches();

    const TripletStore* store_;
    TrainConfig config_;
    Model model_;
    SeedStream batch_rng_;
    SeedStream negative_rng_;
    SeedStream noise_rng_;
    std::optional<PopularitySampler> popularity_;
    Adam base_opt_;
    Adam gen_opt_;
    Adam disc_opt_;
    std::size_t step_ = 0;
    std::size_t gen_updates_ = 0;
    std::size_t disc_updates_ = 0;
    std::size_t base_updates_ = 0;
    std::function<void(Phase)> observer_;
};

} // namespace kge
