#include "kge/config.hpp"
#include "kge/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <map>

using namespace kge;
using kge::test::TempDir;
using kge::test::run_command;
using kge::test::shell_quote;
using kge::test::write_file;

namespace {

std::map<std::string, std::string> read_config_txt(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : parse_key_values(kge::test::read_file(path), path.string())) out[k] = v;
    return out;
}

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

} // namespace

TEST_CASE("defaults are the reference operating point") {
    const TrainConfig c;
    CHECK(c.lr_base == 1e-3f);
    CHECK(c.batch_size == 1000);
    CHECK(c.sampler.num_negatives == 20);
    CHECK(c.sampler.generated_count == 10);
    CHECK(c.gen_steps_per_batch == 5);
    CHECK(c.disc_steps_per_batch == 1);
    CHECK(c.lr_gen == 1e-3f);
    CHECK(c.lr_disc == 1e-4f);
    CHECK(c.lambda == 1e-4f);
    CHECK(c.dim == 100);
    CHECK(c.sampler.strategy == Strategy::Dans);
    CHECK(c.decoder == DecoderMode::DistMult);
}

TEST_CASE("every key round-trips through text") {
    TrainConfig c;
    c.epochs = 17;
    c.lr_disc = 3.5e-5f;
    c.sampler.strategy = Strategy::Pop;
    c.sampler.sigma = 0.3f;
    c.decoder = DecoderMode::RotatE;
    c.complex_conjugate = false;
    const KeyValues kv = to_key_values(c);
    CHECK(kv.size() == config_keys().size());
    for (std::size_t i = 0; i < kv.size(); ++i) CHECK(kv[i].first == config_keys()[i]);
    const TrainConfig back = from_key_values(kv);
    CHECK(to_key_values(back) == kv);
    CHECK(back.lr_disc == c.lr_disc);
    CHECK(back.sampler.sigma == c.sampler.sigma);
    CHECK(get_config_value(back, "decoder") == "rotate");
    CHECK(get_config_value(back, "strategy") == "pop");
}

TEST_CASE("unknown keys and bad values are rejected") {
    TrainConfig c;
    try {
        set_config_value(c, "learning_rate", "0.1");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("lr_base") != std::string::npos);
    }
    CHECK_THROWS_AS(set_config_value(c, "epochs", "-3"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "epochs", "3x"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "lr_base", "fast"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "strategy", "mcns"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "decoder", "transe"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "complex_conjugate", "maybe"), ConfigError);
    CHECK_THROWS_AS(get_config_value(c, "nope"), ConfigError);
}

TEST_CASE("config text: comments, blanks, duplicates, missing separators") {
    const auto kv = parse_key_values("# comment\n\nepochs = 3  # trailing\n  seed=9\n", "t");
    CHECK(kv == KeyValues{{"epochs", "3"}, {"seed", "9"}});
    CHECK_THROWS_AS(parse_key_values("epochs = 3\nepochs = 4\n", "t"), ConfigError);
    CHECK_THROWS_AS(parse_key_values("epochs 3\n", "t"), ConfigError);

    TempDir dir;
    write_file(dir.path() / "a.cfg", "epochs = 3\nbogus = 1\n");
    CHECK_THROWS_AS(load_config_file(dir.path() / "a.cfg"), ConfigError);
    write_file(dir.path() / "b.cfg", "epochs = 3\ndim = 16\n");
    const auto c = load_config_file(dir.path() / "b.cfg");
    CHECK(c.epochs == 3);
    CHECK(c.dim == 16);
    CHECK(c.batch_size == 1000);
    CHECK_THROWS_AS(load_config_file(dir.path() / "missing.cfg"), ConfigError);
}

TEST_CASE("KGE_SEED overrides the configured seed") {
    TrainConfig c;
    c.seed = 5;
    ::setenv("KGE_SEED", "77", 1);
    apply_seed_environment(c);
    ::unsetenv("KGE_SEED");
    CHECK(c.seed == 77);
    apply_seed_environment(c);
    CHECK(c.seed == 77);
}

TEST_CASE("flags win over the config file for every combination of three keys") {
    TempDir dir;
    write_toy_dataset(dir.path() / "data");
    struct Key {
        std::string name, file_value, flag_value, default_value;
    };
    const std::vector<Key> keys = {
        {"lr_base", "0.005", "0.25", "0.00100000005"},
        {"num_negatives", "6", "8", "20"},
        {"strategy", "pop", "rand", "dans"},
    };
    for (int file_mask = 0; file_mask < 8; ++file_mask) {
        for (int flag_mask = 0; flag_mask < 8; ++flag_mask) {
            std::string cfg = "epochs = 0\ndim = 4\ngenerated_count = 2\n";
            std::string flags;
            for (std::size_t i = 0; i < keys.size(); ++i) {
                if (file_mask & (1 << i)) cfg += keys[i].name + " = " + keys[i].file_value + "\n";
                if (flag_mask & (1 << i)) flags += " --" + keys[i].name + " " + keys[i].flag_value;
            }
            const auto cfg_path = dir.path() / "run.cfg";
            const auto out = dir.path() / ("out" + std::to_string(file_mask) + std::to_string(flag_mask));
            write_file(cfg_path, cfg);
            const auto r = run_command(shell_quote(KGE_CLI_PATH) + " train --config " + shell_quote(cfg_path) +
                                       " --data " + shell_quote((dir.path() / "data").string()) + " --out " +
                                       shell_quote(out.string()) + flags);
            INFO("file mask " << file_mask << " flag mask " << flag_mask << ": " << r.error);
            REQUIRE(r.exit_code == 0);
            const auto written = read_config_txt(out / "config.txt");
            for (std::size_t i = 0; i < keys.size(); ++i) {
                const std::string expected = (flag_mask & (1 << i))   ? keys[i].flag_value
                                             : (file_mask & (1 << i)) ? keys[i].file_value
                                                                      : keys[i].default_value;
                TrainConfig parsed, reference;
                set_config_value(parsed, keys[i].name, written.at(keys[i].name));
                set_config_value(reference, keys[i].name, expected);
                CHECK(get_config_value(parsed, keys[i].name) == get_config_value(reference, keys[i].name));
            }
        }
    }
}
