#include "kge/trainer.hpp"

#include "kge/errors.hpp"
#include "kge/fpenv.hpp"
#include "kge/ops.hpp"

#include <cmath>

namespace kge {

namespace {

std::uint64_t stream(StreamId id) { return static_cast<std::uint64_t>(id); }

void append(ParameterList& out, const ParameterList& more) { out.insert(out.end(), more.begin(), more.end()); }

void check_finite(const Tensor& loss, std::size_t step, std::string_view what) {
    if (!std::isfinite(loss.item())) {
        throw TrainingDiverged(step, std::string(what) + " loss is " + std::to_string(loss.item()));
    }
}

} // namespace

Model Model::init(const TripletStore& store, const TrainConfig& config) {
    config.validate();
    Model m;
    SeedStream base(config.seed, stream(StreamId::BaseInit));
    std::vector<std::size_t> dims(config.num_layers + 1, config.dim);
    m.encoder = RgcnParams::init(store.num_entities(), store.num_directed_relations(), dims, base);
    m.decoder = RelationParams::init(config.decoder, store.num_relations(), config.dim, base, config.rotate_margin,
                                     config.complex_conjugate);
    if (config.uses_gan()) {
        SeedStream gan(config.seed, stream(StreamId::GanInit));
        m.generator = GeneratorParams::init(config.dim, config.generator_layers, gan);
        m.discriminator = DiscriminatorParams::init(config.dim, gan);
    }
    return m;
}

ParameterList Model::base_parameters() const {
    ParameterList out = encoder.parameters();
    append(out, decoder.parameters());
    return out;
}

ParameterList Model::generator_parameters() const { return generator ? generator->parameters() : ParameterList{}; }

ParameterList Model::discriminator_parameters() const {
    return discriminator ? discriminator->parameters() : ParameterList{};
}

ParameterList Model::all_parameters() const {
    ParameterList out = base_parameters();
    append(out, generator_parameters());
    append(out, discriminator_parameters());
    return out;
}

Tensor Model::embeddings(const TripletStore& store) const {
    NoGradScope no_grad;
    return encode_all(store, encoder).detach();
}

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, const TripletStore& store) {
    Checkpoint ck;
    ck.config = to_key_values(config);
    ck.entities = store.entities().names();
    ck.relations = store.relations().names();
    for (const auto& p : model.all_parameters()) ck.tensors.push_back({p.name, p.tensor.detach()});
    return ck;
}

Model model_from_checkpoint(const Checkpoint& checkpoint, const TripletStore& store, TrainConfig* config_out) {
    check_dictionaries(checkpoint, store);
    TrainConfig config = from_key_values(checkpoint.config);
    Model model = Model::init(store, config);
    const ParameterList params = model.all_parameters();
    if (params.size() != checkpoint.tensors.size()) {
        throw ConfigError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                          " tensors, the configured model has " + std::to_string(params.size()));
    }
    for (const auto& p : params) {
        const Tensor& src = checkpoint.get(p.name);
        if (src.shape() != p.tensor.shape()) {
            throw ConfigError("checkpoint tensor " + p.name + " has shape " + shape_string(src.shape()) +
                              ", expected " + shape_string(p.tensor.shape()));
        }
        Tensor dst = p.tensor;
        std::copy(src.data().begin(), src.data().end(), dst.data().begin());
    }
    if (config_out != nullptr) *config_out = config;
    return model;
}

Trainer::Trainer(const TripletStore& store, TrainConfig config)
    : store_(&store),
      config_(std::move(config)),
      model_(Model::init(store, config_)),
      batch_rng_(config_.seed, stream(StreamId::Batches)),
      negative_rng_(config_.seed, stream(StreamId::Negatives)),
      noise_rng_(config_.seed, stream(StreamId::Noise)) {
    base_opt_ = Adam(model_.base_parameters(), {.lr = config_.lr_base});
    if (config_.uses_gan()) {
        gen_opt_ = Adam(model_.generator_parameters(), {.lr = config_.lr_gen});
        disc_opt_ = Adam(model_.discriminator_parameters(), {.lr = config_.lr_disc});
    }
    if (config_.sampler.strategy == Strategy::Pop) popularity_.emplace(store, config_.sampler.pop_exponent);
}

void Trainer::notify(Phase phase) const {
    if (observer_) observer_(phase);
}

std::vector<PositiveBatch> Trainer::next_epoch_batches() {
    return store_->batches(config_.batch_size, batch_rng_.next());
}

float Trainer::base_update(const PositiveBatch& batch, const NegativeBatch& negatives, const Tensor& embeddings) {
    const auto n_entities = static_cast<ops::Index>(store_->num_entities());
    std::vector<ops::Index> heads, tails;
    std::vector<RelationId> relations;
    std::vector<float> labels;
    const std::size_t total = batch.size() * (1 + negatives.uniform_per_positive) + negatives.generated_rows();
    heads.reserve(total);
    tails.reserve(total);
    relations.reserve(total);
    labels.reserve(total);
    auto add = [&](ops::Index h, RelationId r, ops::Index t, float y) {
        heads.push_back(h);
        relations.push_back(r);
        tails.push_back(t);
        labels.push_back(y);
    };
    for (const Triplet& t : batch.triplets) add(t.head, t.relation, t.tail, 1.0f);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Triplet& t = batch.triplets[k];
        for (EntityId e : negatives.uniform_for(k)) {
            if (negatives.sides[k] == Side::Tail) {
                add(t.head, t.relation, e, 0.0f);
            } else {
                add(e, t.relation, t.tail, 0.0f);
            }
        }
    }
    // Generated rows are appended to the entity table as constants.
    for (std::size_t g = 0; g < negatives.generated_rows(); ++g) {
        const auto k = static_cast<std::size_t>(negatives.owners[g]);
        const Triplet& t = batch.triplets[k];
        const auto fake = n_entities + static_cast<ops::Index>(g);
        if (negatives.sides[k] == Side::Tail) {
            add(t.head, t.relation, fake, 0.0f);
        } else {
            add(fake, t.relation, t.tail, 0.0f);
        }
    }
    Tensor table = negatives.generated_rows() > 0 ? ops::concat_rows({embeddings, negatives.generated}) : embeddings;
    Tensor raw = score_raw(ops::gather_rows(table, heads), relations, ops::gather_rows(table, tails), model_.decoder);
    Tensor loss = base_loss(score_logits(raw, model_.decoder), labels);
    check_finite(loss, step_, "base");
    backward(loss);
    base_opt_.step();
    base_opt_.zero_grad();
    ++base_updates_;
    return loss.item();
}

StepReport Trainer::pretrain_step(const PositiveBatch& batch) {
    FlushDenormals flush;
    StepReport report;
    report.step = ++step_;
    report.pretraining = true;
    SamplerConfig uniform = config_.sampler;
    uniform.strategy = Strategy::Rand;
    Tape tape;
    TapeScope scope(tape);
    Tensor embeddings = encode_all(*store_, model_.encoder);
    NegativeBatch negatives = compose_negatives(batch, uniform, *store_, negative_rng_);
    report.base_loss = base_update(batch, negatives, embeddings);
    notify(Phase::Base);
    return report;
}

StepReport Trainer::train_step(const PositiveBatch& batch) {
    FlushDenormals flush;
    StepReport report;
    report.step = ++step_;
    const ParameterList base = model_.base_parameters();
    const ParameterList gen = model_.generator_parameters();
    const ParameterList disc = model_.discriminator_parameters();

    // Forward pass for the base step; the GAN sub-steps only read a detached
    // copy, and the base parameters do not change before the base update.
    Tape base_tape;
    Tensor embeddings;
    {
        TapeScope scope(base_tape);
        embeddings = encode_all(*store_, model_.encoder);
    }
    const Tensor snapshot = embeddings.detach();

    const std::size_t per_pathway = config_.sampler.effective_generated() / 2;
    if (config_.uses_gan() && per_pathway > 0) {
        const CorruptionContext ctx = corruption_context(batch, snapshot, model_.decoder);
        const float sigma = config_.sampler.sigma;

        if (config_.gen_steps_per_batch > 0) {
            double sum = 0.0;
            for (std::size_t i = 0; i < config_.gen_steps_per_batch; ++i) {
                FreezeGuard freeze_base(base), freeze_disc(disc);
                Tape tape;
                TapeScope scope(tape);
                GeneratedFakes fe = generate(Pathway::Entity, *model_.generator, ctx.entity_conditions,
                                             per_pathway, sigma, noise_rng_);
                GeneratedFakes fr = generate(Pathway::Relation, *model_.generator, ctx.relation_conditions,
                                             per_pathway, sigma, noise_rng_);
                Tensor loss = generator_loss({fe.embeddings, fr.embeddings}, {fe.coeffs, fr.coeffs},
                                             *model_.discriminator, config_.lambda);
                check_finite(loss, step_, "generator");
                backward(loss);
                gen_opt_.step();
                gen_opt_.zero_grad();
                ++gen_updates_;
                sum += loss.item();
                notify(Phase::Generator);
            }
            report.gen_loss = static_cast<float>(sum / static_cast<double>(config_.gen_steps_per_batch));
        }

        if (config_.disc_steps_per_batch > 0) {
            std::vector<Pathway> pathways(batch.size() * per_pathway, Pathway::Entity);
            pathways.resize(2 * batch.size() * per_pathway, Pathway::Relation);
            double sum = 0.0;
            for (std::size_t i = 0; i < config_.disc_steps_per_batch; ++i) {
                FreezeGuard freeze_base(base), freeze_gen(gen);
                Tensor fakes;
                {
                    NoGradScope no_grad;
                    GeneratedFakes fe = generate(Pathway::Entity, *model_.generator, ctx.entity_conditions,
                                                 per_pathway, sigma, noise_rng_);
                    GeneratedFakes fr = generate(Pathway::Relation, *model_.generator, ctx.relation_conditions,
                                                 per_pathway, sigma, noise_rng_);
                    fakes = ops::concat_rows({fe.embeddings, fr.embeddings}).detach();
                }
                Tape tape;
                TapeScope scope(tape);
                Tensor loss = discriminator_loss(ctx.reals, fakes, pathways, *model_.discriminator);
                check_finite(loss, step_, "discriminator");
                backward(loss);
                disc_opt_.step();
                disc_opt_.zero_grad();
                ++disc_updates_;
                sum += loss.item();
                notify(Phase::Discriminator);
            }
            report.disc_loss = static_cast<float>(sum / static_cast<double>(config_.disc_steps_per_batch));
        }
    }

    std::optional<GeneratorHandle> handle;
    if (config_.uses_gan()) handle = GeneratorHandle{&*model_.generator, &snapshot, &model_.decoder, &noise_rng_};
    NegativeBatch negatives = compose_negatives(batch, config_.sampler, *store_, negative_rng_,
                                                popularity_ ? &*popularity_ : nullptr, handle ? &*handle : nullptr);
    {
        FreezeGuard freeze_gen(gen), freeze_disc(disc);
        TapeScope scope(base_tape);
        report.base_loss = base_update(batch, negatives, embeddings);
    }
    notify(Phase::Base);
    return report;
}

void Trainer::pretrain(const std::function<void(const StepReport&)>& on_step) {
    for (std::size_t epoch = 0; epoch < config_.pretrain_epochs; ++epoch) {
        for (const auto& batch : next_epoch_batches()) {
            StepReport r = pretrain_step(batch);
            if (on_step) on_step(r);
        }
    }
    // The main phase starts with fresh moment estimates.
    base_opt_.reset();
}

std::vector<StepReport> Trainer::run_epoch(const std::function<void(const StepReport&)>& on_step) {
    std::vector<StepReport> reports;
    for (const auto& batch : next_epoch_batches()) {
        reports.push_back(train_step(batch));
        if (on_step) on_step(reports.back());
    }
    return reports;
}

Checkpoint Trainer::fit(const FitOptions& options) {
    pretrain(options.on_step);
    for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
        run_epoch(options.on_step);
        if (config_.checkpoint_every > 0 && epoch % config_.checkpoint_every == 0 && epoch < config_.epochs &&
            options.on_checkpoint) {
            options.on_checkpoint(epoch, checkpoint());
        }
    }
    return checkpoint();
}

} // namespace kge
