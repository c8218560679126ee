// kge: train, evaluate and export knowledge-graph embedding models.

#include "kge/checkpoint.hpp"
#include "kge/config.hpp"
#include "kge/errors.hpp"
#include "kge/evaluator.hpp"
#include "kge/kg_store.hpp"
#include "kge/ops.hpp"
#include "kge/samplers.hpp"
#include "kge/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 1, kData = 2, kDiverged = 3 };

struct TrainArgs {
    std::string config_path;
    std::string data;
    std::string out;
    std::map<std::string, std::string> overrides;
    std::size_t log_every = 0;
};

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::string per_query;
    std::string select = "final";
    bool raw = false;
};

struct ExportArgs {
    std::string checkpoint;
    std::string data;
    std::string what;
    std::string relation;
    std::size_t count = 10;
    std::uint64_t seed = 1;
    std::string out;
};

struct OracleArgs {
    std::string data;
    std::string out;
};

std::string format_loss(const std::optional<float>& v) {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(*v));
    return buf;
}

void write_row(std::ostream& out, std::string_view source, std::span<const float> values) {
    out << source;
    char buf[32];
    for (float v : values) {
        std::snprintf(buf, sizeof buf, "\t%.7g", static_cast<double>(v));
        out << buf;
    }
    out << '\n';
}

kge::TrainConfig build_train_config(const TrainArgs& args) {
    kge::TrainConfig config = args.config_path.empty() ? kge::TrainConfig{} : kge::load_config_file(args.config_path);
    kge::apply_seed_environment(config);
    for (const auto& [key, value] : args.overrides) kge::set_config_value(config, key, value);
    config.validate();
    return config;
}

int run_train(const TrainArgs& args) {
    const kge::TrainConfig config = build_train_config(args);
    const kge::TripletStore store = kge::TripletStore::load(args.data);
    fs::create_directories(args.out);

    {
        std::ofstream cfg(fs::path(args.out) / "config.txt");
        for (const auto& [k, v] : kge::to_key_values(config)) cfg << k << " = " << v << '\n';
    }
    std::ofstream log(fs::path(args.out) / "steps.tsv");
    log << "step\tgen_loss\tdisc_loss\tbase_loss\n";

    kge::Trainer trainer(store, config);
    const auto start = std::chrono::steady_clock::now();
    const std::size_t batches_per_epoch = (store.train().size() + config.batch_size - 1) / config.batch_size;
    kge::FitOptions options;
    options.on_step = [&](const kge::StepReport& r) {
        log << r.step << '\t' << format_loss(r.gen_loss) << '\t' << format_loss(r.disc_loss) << '\t'
            << format_loss(r.base_loss) << '\n';
        if (args.log_every > 0 && batches_per_epoch > 0 && r.step % (args.log_every * batches_per_epoch) == 0) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cerr << "step " << r.step << (r.pretraining ? " (pretrain)" : "") << " base_loss "
                      << format_loss(r.base_loss) << " gen_loss " << format_loss(r.gen_loss) << " disc_loss "
                      << format_loss(r.disc_loss) << " elapsed " << static_cast<long>(secs) << "s\n";
        }
    };
    options.on_checkpoint = [&](std::size_t epoch, const kge::Checkpoint& ck) {
        ck.save(fs::path(args.out) / ("checkpoint-epoch" + std::to_string(epoch) + ".kge"));
    };
    try {
        const kge::Checkpoint final_checkpoint = trainer.fit(options);
        final_checkpoint.save(fs::path(args.out) / kge::kCheckpointFile);
    } catch (const kge::TrainingDiverged&) {
        log.flush();
        throw;
    }
    return kOk;
}

// Every checkpoint in a training output directory, scored on the validation
// split; the highest MRR wins (earliest on ties).
kge::Checkpoint select_best_valid(const std::string& dir, const kge::TripletStore& store,
                                  const kge::EvalOptions& options) {
    if (!fs::is_directory(dir)) throw kge::ConfigError("--select best-valid needs a training output directory");
    std::vector<std::pair<std::size_t, fs::path>> candidates;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "checkpoint.kge") {
            candidates.emplace_back(std::numeric_limits<std::size_t>::max(), entry.path());
        } else if (name.starts_with("checkpoint-epoch") && name.ends_with(".kge")) {
            const std::string digits = name.substr(16, name.size() - 16 - 4);
            candidates.emplace_back(std::stoul(digits), entry.path());
        }
    }
    if (candidates.empty()) throw kge::DataError("no checkpoints in " + dir);
    std::sort(candidates.begin(), candidates.end());
    std::optional<kge::Checkpoint> best;
    double best_mrr = -1.0;
    fs::path best_path;
    for (const auto& [epoch, path] : candidates) {
        kge::Checkpoint ck = kge::Checkpoint::load(path);
        const double mrr = kge::evaluate(ck, store, kge::Split::Valid, options).mrr;
        std::cerr << "valid mrr " << mrr << "\t" << path.filename().string() << "\n";
        if (mrr > best_mrr) {
            best_mrr = mrr;
            best = std::move(ck);
            best_path = path;
        }
    }
    std::cerr << "selected " << best_path.filename().string() << "\n";
    return std::move(*best);
}

int run_eval(const EvalArgs& args, const std::string& usage) {
    const auto split = kge::parse_split(args.split);
    if (!split) {
        std::cerr << "error: unknown split '" << args.split << "' (expected train, valid or test)\n" << usage;
        return kConfig;
    }
    if (args.select != "final" && args.select != "best-valid") {
        std::cerr << "error: --select must be final or best-valid\n" << usage;
        return kConfig;
    }
    const kge::TripletStore store = kge::TripletStore::load(args.data);
    kge::EvalOptions options;
    options.filtered = !args.raw;
    const kge::Checkpoint checkpoint = args.select == "final" ? kge::Checkpoint::load(args.checkpoint)
                                                              : select_best_valid(args.checkpoint, store, options);
    const kge::RankingReport report = kge::evaluate(checkpoint, store, *split, options);
    std::cout << kge::format_report(report);
    if (!args.per_query.empty()) {
        std::ofstream out(args.per_query);
        if (!out) throw kge::DataError("cannot write " + args.per_query);
        kge::write_per_query(report, store, out);
    }
    return kOk;
}

int run_export(const ExportArgs& args) {
    const kge::TripletStore store = kge::TripletStore::load(args.data);
    const kge::Checkpoint checkpoint = kge::Checkpoint::load(args.checkpoint);
    const kge::Model model = kge::model_from_checkpoint(checkpoint, store);
    const kge::Tensor embeddings = model.embeddings(store);

    std::ofstream file;
    if (!args.out.empty()) {
        file.open(args.out);
        if (!file) throw kge::DataError("cannot write " + args.out);
    }
    std::ostream& out = args.out.empty() ? std::cout : file;
    const std::size_t d = embeddings.cols();
    auto row_of = [&](kge::EntityId e) { return embeddings.data().subspan(static_cast<std::size_t>(e) * d, d); };

    if (args.what == "embeddings") {
        for (std::size_t e = 0; e < store.num_entities(); ++e) {
            write_row(out, store.entities().name(static_cast<kge::EntityId>(e)), row_of(static_cast<kge::EntityId>(e)));
        }
        return kOk;
    }
    if (args.what != "negatives") throw kge::ConfigError("--what must be embeddings or negatives");

    const auto relation = store.relations().find(args.relation);
    if (!relation) {
        std::string valid;
        for (const auto& name : store.relations().names()) valid += "  " + name + "\n";
        throw kge::ConfigError("unknown relation '" + args.relation + "'; valid relations:\n" + valid);
    }
    if (args.count % 2 != 0) throw kge::ConfigError("--count must be even (split between G_E and G_R)");

    // Anchor: head of the first training triplet with this relation.
    std::optional<kge::Triplet> anchor;
    for (const auto& t : store.train()) {
        if (t.relation == *relation) {
            anchor = t;
            break;
        }
    }
    if (!anchor) throw kge::DataError("relation '" + args.relation + "' has no training triplets");

    for (kge::EntityId tail : store.known_tails(anchor->head, *relation)) write_row(out, "positive", row_of(tail));
    if (args.count == 0) return kOk;
    if (!model.generator) throw kge::ConfigError("checkpoint has no generator; train with strategy=dans");

    kge::PositiveBatch batch{{*anchor}, {kge::Side::Tail}};
    const kge::CorruptionContext ctx = kge::corruption_context(batch, embeddings, model.decoder);
    kge::TrainConfig config = kge::from_key_values(checkpoint.config);
    kge::SeedStream noise(args.seed, static_cast<std::uint64_t>(kge::StreamId::Noise));
    kge::NoGradScope no_grad;
    const std::size_t per = args.count / 2;
    const kge::GeneratedFakes fe = kge::generate(kge::Pathway::Entity, *model.generator, ctx.entity_conditions, per,
                                                 config.sampler.sigma, noise);
    const kge::GeneratedFakes fr = kge::generate(kge::Pathway::Relation, *model.generator, ctx.relation_conditions,
                                                 per, config.sampler.sigma, noise);
    for (std::size_t i = 0; i < per; ++i) write_row(out, "G_E", fe.embeddings.data().subspan(i * d, d));
    for (std::size_t i = 0; i < per; ++i) write_row(out, "G_R", fr.embeddings.data().subspan(i * d, d));
    kge::SeedStream uniform_rng(args.seed, static_cast<std::uint64_t>(kge::StreamId::Negatives));
    for (kge::EntityId e : kge::sample_uniform(*anchor, kge::Side::Tail, args.count, store, uniform_rng)) {
        write_row(out, "uniform", row_of(e));
    }
    return kOk;
}

int run_oracle(const OracleArgs& args) {
    const kge::TripletStore store = kge::TripletStore::load(args.data);
    fs::path out(args.out);
    if (fs::is_directory(out)) out /= kge::kCheckpointFile;
    kge::make_oracle_checkpoint(store).save(out);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Training allocates and frees the same multi-megabyte buffers every
    // step; keep them on the heap instead of round-tripping through mmap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"Knowledge-graph embedding training with adversarial negative sampling"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model and write checkpoints");
    train->add_option("--config", train_args.config_path, "key = value config file");
    train->add_option("--data", train_args.data, "Dataset directory (train.txt, valid.txt, test.txt)")->required();
    train->add_option("--out", train_args.out, "Output directory")->required();
    train->add_option("--log_every", train_args.log_every, "Print progress every N epochs (0 = silent)");
    static const std::map<std::string, std::string> aliases = {
        {"gen_steps", "gen_steps_per_batch"}, {"disc_steps", "disc_steps_per_batch"}, {"sampler", "strategy"},
        {"lr", "lr_base"}, {"negatives", "num_negatives"}};
    std::map<std::string, std::string> raw_overrides;
    for (const auto& key : kge::config_keys()) {
        train->add_option("--" + key, raw_overrides[key], "Override config key " + key);
    }
    for (const auto& [alias, key] : aliases) {
        train->add_option("--" + alias, raw_overrides[alias], "Alias of --" + key);
    }

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (filtered setting)");
    eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file or directory")->required();
    eval->add_option("--data", eval_args.data, "Dataset directory")->required();
    eval->add_option("--split", eval_args.split, "train, valid or test");
    eval->add_option("--per-query", eval_args.per_query, "Write per-query ranks as TSV");
    eval->add_option("--select", eval_args.select,
                     "final, or best-valid: every checkpoint in the directory, chosen by validation MRR");
    eval->add_flag("--raw", eval_args.raw, "Unfiltered ranking (debug)");

    ExportArgs export_args;
    auto* exp = app.add_subcommand("export", "Export embeddings or negative samples as TSV");
    exp->add_option("--checkpoint", export_args.checkpoint, "Checkpoint file or directory")->required();
    exp->add_option("--data", export_args.data, "Dataset directory")->required();
    exp->add_option("--what", export_args.what, "embeddings or negatives")->required();
    exp->add_option("--relation", export_args.relation, "Relation name (negatives)");
    exp->add_option("--count", export_args.count, "Generated negatives, split evenly between G_E and G_R");
    exp->add_option("--seed", export_args.seed, "Seed for the generated and uniform rows");
    exp->add_option("--out", export_args.out, "Output file (default stdout)");

    OracleArgs oracle_args;
    auto* oracle = app.add_subcommand("debug-oracle", "Write a checkpoint that scores with the filter index");
    oracle->add_option("--data", oracle_args.data, "Dataset directory")->required();
    oracle->add_option("--out", oracle_args.out, "Output checkpoint path or directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (train->parsed()) {
            for (const auto& [key, value] : raw_overrides) {
                if (train->count("--" + key) == 0) continue;
                const auto alias = aliases.find(key);
                train_args.overrides[alias == aliases.end() ? key : alias->second] = value;
            }
            return run_train(train_args);
        }
        if (eval->parsed()) return run_eval(eval_args, eval->help());
        if (exp->parsed()) return run_export(export_args);
        if (oracle->parsed()) return run_oracle(oracle_args);
    } catch (const kge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const kge::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const kge::TrainingDiverged& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const kge::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
