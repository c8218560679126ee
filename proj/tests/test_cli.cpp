#include "kge/checkpoint.hpp"
#include "kge/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

using namespace kge;
using kge::test::read_file;
using kge::test::run_command;
using kge::test::shell_quote;
using kge::test::TempDir;
using kge::test::write_file;

namespace {

std::string cli() { return shell_quote(KGE_CLI_PATH); }
std::string q(const std::filesystem::path& p) { return shell_quote(p.string()); }
std::string umls() { return shell_quote(KGE_UMLS_DIR); }

void write_toy_dataset(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto store = kge::test::toy_store();
    auto dump = [&](const std::vector<Triplet>& split) {
        std::string text;
        for (const auto& t : split) {
            text += store.entities().name(t.head) + "\t" + store.relations().name(t.relation) + "\t" +
                    store.entities().name(t.tail) + "\n";
        }
        return text;
    };
    write_file(dir / "train.txt", dump(store.train()));
    write_file(dir / "valid.txt", dump(store.valid()));
    write_file(dir / "test.txt", dump(store.test()));
}

std::vector<std::vector<std::string>> tsv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream cell_in(line);
        std::string cell;
        while (std::getline(cell_in, cell, '\t')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

/// UMLS checkpoint of the default configuration with zero training epochs.
const std::filesystem::path& umls_default_checkpoint() {
    static TempDir dir;
    static bool built = false;
    if (!built) {
        const auto r = run_command(cli() + " train --data " + umls() + " --out " + q(dir.path()) + " --epochs 0");
        REQUIRE(r.exit_code == 0);
        built = true;
    }
    return dir.path();
}

} // namespace

TEST_CASE("train with a missing train.txt exits 2 naming the file") {
    TempDir dir;
    write_file(dir.path() / "valid.txt", "");
    write_file(dir.path() / "test.txt", "");
    const auto r = run_command(cli() + " train --data " + q(dir.path()) + " --out " + q(dir.path() / "out"));
    CHECK(r.exit_code == 2);
    CHECK(r.error.find("train.txt") != std::string::npos);
}

TEST_CASE("malformed dataset and config errors map to exit codes 2 and 1") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    write_file(dir.path() / "data" / "valid.txt", "only two\tfields\n");
    auto r = run_command(cli() + " train --data " + q(dir.path() / "data") + " --out " + q(dir.path() / "o"));
    CHECK(r.exit_code == 2);
    CHECK(r.error.find("valid.txt:1") != std::string::npos);

    write_toy_dataset(dir.path() / "data");
    write_file(dir.path() / "bad.cfg", "epochs = 1\nnot_a_key = 3\n");
    r = run_command(cli() + " train --config " + q(dir.path() / "bad.cfg") + " --data " + q(dir.path() / "data") +
                    " --out " + q(dir.path() / "o"));
    CHECK(r.exit_code == 1);
    CHECK(r.error.find("not_a_key") != std::string::npos);

    r = run_command(cli() + " train --data " + q(dir.path() / "data") + " --out " + q(dir.path() / "o") +
                    " --generated_count 30");
    CHECK(r.exit_code == 1);
    r = run_command(cli() + " frobnicate");
    CHECK(r.exit_code == 1);
}

TEST_CASE("a diverging run exits 3") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    const auto r = run_command(cli() + " train --data " + q(dir.path() / "data") + " --out " + q(dir.path() / "o") +
                               " --strategy rand --dim 4 --batch_size 20 --epochs 50 --lr_base 1e37");
    CHECK(r.exit_code == 3);
    CHECK(r.error.find("diverged") != std::string::npos);
}

TEST_CASE("train writes config, step log and checkpoints") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    const auto out = dir.path() / "run";
    const auto r = run_command("KGE_SEED=11 " + cli() + " train --data " + q(dir.path() / "data") + " --out " +
                               q(out) + " --dim 8 --batch_size 10 --epochs 4 --checkpoint_every 2 --negatives 4 " +
                               "--generated_count 2");
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(out / "checkpoint.kge"));
    CHECK(std::filesystem::exists(out / "checkpoint-epoch2.kge"));
    CHECK(read_file(out / "config.txt").find("seed = 11\n") != std::string::npos);
    const auto rows = tsv_rows(read_file(out / "steps.tsv"));
    REQUIRE(rows.size() == 1 + 4 * 2);
    CHECK(rows[0] == std::vector<std::string>{"step", "gen_loss", "disc_loss", "base_loss"});
    CHECK(rows[1][0] == "1");
    CHECK(rows[1][1] != "NA");
    CHECK(rows[1][2] != "NA");

    const auto rand_out = dir.path() / "rand";
    REQUIRE(run_command(cli() + " train --data " + q(dir.path() / "data") + " --out " + q(rand_out) +
                        " --dim 8 --batch_size 10 --epochs 1 --sampler rand")
                .exit_code == 0);
    for (const auto& row : tsv_rows(read_file(rand_out / "steps.tsv"))) {
        if (row[0] == "step") continue;
        CHECK(row[1] == "NA");
        CHECK(row[2] == "NA");
    }
}

TEST_CASE("rand sampler with no generator steps never constructs the GAN") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    const auto r = run_command(cli() + " train --data " + q(dir.path() / "data") + " --out " + q(dir.path() / "o") +
                               " --sampler rand --gen_steps 0 --dim 8 --epochs 1");
    REQUIRE(r.exit_code == 0);
    const auto ck = Checkpoint::load(dir.path() / "o");
    for (const auto& t : ck.tensors) {
        CHECK_FALSE(t.name.starts_with("generator"));
        CHECK_FALSE(t.name.starts_with("discriminator"));
    }
    CHECK(ck.find("rgcn.input") != nullptr);
    CHECK(ck.find("decoder.relations") != nullptr);
}

TEST_CASE("default config on UMLS writes every base, generator and discriminator tensor") {
    const auto ck = Checkpoint::load(umls_default_checkpoint());
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    const Model expected = Model::init(store, TrainConfig{});
    std::set<std::string> names;
    for (const auto& t : ck.tensors) CHECK(names.insert(t.name).second);
    const auto all = expected.all_parameters();
    CHECK(names.size() == all.size());
    for (const auto& p : all) {
        INFO(p.name);
        REQUIRE(ck.find(p.name) != nullptr);
        CHECK(ck.get(p.name).shape() == p.tensor.shape());
    }
    CHECK(!expected.generator_parameters().empty());
    CHECK(!expected.discriminator_parameters().empty());
    const std::string text = read_file(umls_default_checkpoint() / "checkpoint.kge");
    CHECK(text.starts_with("KGE-CKPT v1\n"));
}

TEST_CASE("eval: oracle checkpoint, bogus split, determinism, dictionary mismatch") {
    TempDir dir;
    REQUIRE(run_command(cli() + " debug-oracle --data " + umls() + " --out " + q(dir.path() / "oracle.kge"))
                .exit_code == 0);
    auto r = run_command(cli() + " eval --checkpoint " + q(dir.path() / "oracle.kge") + " --data " + umls() +
                         " --split test");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.starts_with("mrr\t1.00000\n"));

    r = run_command(cli() + " eval --checkpoint " + q(dir.path() / "oracle.kge") + " --data " + umls() +
                    " --split bogus");
    CHECK(r.exit_code == 1);
    CHECK(r.error.find("bogus") != std::string::npos);
    CHECK(r.error.find("Usage") != std::string::npos);

    const std::string eval = cli() + " eval --checkpoint " + q(umls_default_checkpoint()) + " --data " + umls() +
                             " --split valid --per-query " + q(dir.path() / "pq.tsv");
    const auto first = run_command(eval), second = run_command(eval);
    REQUIRE(first.exit_code == 0);
    CHECK(first.output == second.output);
    CHECK(tsv_rows(first.output).size() == 5);
    CHECK(tsv_rows(read_file(dir.path() / "pq.tsv")).size() == 1 + 2 * 652);

    write_toy_dataset(dir.path() / "toy");
    r = run_command(cli() + " eval --checkpoint " + q(dir.path() / "oracle.kge") + " --data " +
                    q(dir.path() / "toy"));
    CHECK(r.exit_code == 1);
}

TEST_CASE("export embeddings: one row per entity with d floats") {
    const auto r = run_command(cli() + " export --checkpoint " + q(umls_default_checkpoint()) + " --data " + umls() +
                               " --what embeddings");
    REQUIRE(r.exit_code == 0);
    const auto rows = tsv_rows(r.output);
    CHECK(rows.size() == 135);
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].size() == 101);
        CHECK(rows[i][0] == store.entities().name(static_cast<EntityId>(i)));
    }
}

TEST_CASE("export negatives: positive rows only for count 0, G_E/G_R halves otherwise") {
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    const std::string relation = store.relations().name(0);
    const std::string base = cli() + " export --checkpoint " + q(umls_default_checkpoint()) + " --data " + umls() +
                             " --what negatives --relation " + shell_quote(relation);

    auto r = run_command(base + " --count 0");
    REQUIRE(r.exit_code == 0);
    const auto positives = tsv_rows(r.output);
    CHECK(!positives.empty());
    for (const auto& row : positives) CHECK(row[0] == "positive");

    TempDir dir;
    r = run_command(base + " --count 10 --seed 3 --out " + q(dir.path() / "neg.tsv"));
    REQUIRE(r.exit_code == 0);
    std::map<std::string, std::size_t> counts;
    for (const auto& row : tsv_rows(read_file(dir.path() / "neg.tsv"))) {
        ++counts[row[0]];
        CHECK(row.size() == 101);
    }
    CHECK(counts["G_E"] == 5);
    CHECK(counts["G_R"] == 5);
    CHECK(counts["uniform"] == 10);
    CHECK(counts["positive"] == positives.size());
    CHECK(counts.size() == 4);

    const auto again = run_command(base + " --count 10 --seed 3");
    CHECK(again.output == read_file(dir.path() / "neg.tsv"));
    CHECK(run_command(base + " --count 10 --seed 4").output != again.output);
    CHECK(run_command(base + " --count 3").exit_code == 1);
}

TEST_CASE("export negatives with an unknown relation exits 1 listing the valid names") {
    const auto r = run_command(cli() + " export --checkpoint " + q(umls_default_checkpoint()) + " --data " + umls() +
                               " --what negatives --relation no_such_relation");
    CHECK(r.exit_code == 1);
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    for (const auto& name : store.relations().names()) CHECK(r.error.find(name) != std::string::npos);
}

TEST_CASE("export negatives from a checkpoint without a generator is a config error") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    REQUIRE(run_command(cli() + " train --data " + q(dir.path() / "data") + " --out " + q(dir.path() / "o") +
                        " --sampler rand --dim 4 --epochs 0")
                .exit_code == 0);
    const auto r = run_command(cli() + " export --checkpoint " + q(dir.path() / "o") + " --data " +
                               q(dir.path() / "data") + " --what negatives --relation r0 --count 2");
    CHECK(r.exit_code == 1);
    CHECK(r.error.find("generator") != std::string::npos);
}

TEST_CASE("eval --select best-valid picks the checkpoint with the highest validation MRR") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    const auto data = q(dir.path() / "data");
    const auto out = dir.path() / "run";
    REQUIRE(run_command(cli() + " train --data " + data + " --out " + q(out) +
                        " --dim 8 --batch_size 10 --epochs 3 --checkpoint_every 1 --negatives 4 --generated_count 2")
                .exit_code == 0);
    const auto r = run_command(cli() + " eval --checkpoint " + q(out) + " --data " + data + " --select best-valid");
    REQUIRE(r.exit_code == 0);
    // Two intermediate checkpoints plus the final one are considered.
    std::map<std::string, double> valid_mrr;
    std::string selected;
    std::istringstream err(r.error);
    std::string line;
    while (std::getline(err, line)) {
        if (line.starts_with("valid mrr ")) {
            const auto tab = line.find('\t');
            valid_mrr[line.substr(tab + 1)] = std::stod(line.substr(10, tab - 10));
        } else if (line.starts_with("selected ")) {
            selected = line.substr(9);
        }
    }
    REQUIRE(valid_mrr.size() == 3);
    REQUIRE(valid_mrr.count(selected) == 1);
    for (const auto& [name, mrr] : valid_mrr) CHECK(mrr <= valid_mrr[selected]);
    const auto direct = run_command(cli() + " eval --checkpoint " + q(out / selected) + " --data " + data);
    CHECK(direct.output == r.output);

    CHECK(run_command(cli() + " eval --checkpoint " + q(out) + " --data " + data + " --select newest").exit_code == 1);
}
