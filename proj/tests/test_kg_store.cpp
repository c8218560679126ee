#include "kge/errors.hpp"
#include "kge/kg_store.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace kge;
using kge::test::TempDir;
using kge::test::write_file;

namespace {

std::vector<EntityId> sorted(std::span<const EntityId> s) {
    std::vector<EntityId> v(s.begin(), s.end());
    std::sort(v.begin(), v.end());
    return v;
}

void write_dataset(const std::filesystem::path& dir, const std::string& train, const std::string& valid = "",
                   const std::string& test = "") {
    write_file(dir / "train.txt", train);
    write_file(dir / "valid.txt", valid);
    write_file(dir / "test.txt", test);
}

} // namespace

TEST_CASE("one-line train file") {
    TempDir dir;
    write_dataset(dir.path(), "a\tr\tb\n");
    const auto store = TripletStore::load(dir.path());
    CHECK(store.num_entities() == 2);
    CHECK(store.num_relations() == 1);
    CHECK(store.train().size() == 1);
    CHECK(store.valid().empty());
}

TEST_CASE("UMLS statistics") {
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    CHECK(store.num_entities() == 135);
    CHECK(store.num_relations() == 46);
    CHECK(store.train().size() == 5216);
    CHECK(store.valid().size() == 652);
    CHECK(store.test().size() == 661);
}

TEST_CASE("dictionaries follow first appearance across train, valid, test") {
    TempDir dir;
    write_dataset(dir.path(), "b\tr\ta\n", "c\ts\tb\n", "d\tr\te\n");
    const auto store = TripletStore::load(dir.path());
    CHECK(store.entities().names() == std::vector<std::string>{"b", "a", "c", "d", "e"});
    CHECK(store.relations().names() == std::vector<std::string>{"r", "s"});
}

TEST_CASE("CRLF line endings are accepted") {
    TempDir dir;
    write_dataset(dir.path(), "a\tr\tb\r\nb\tr\tc\r\n");
    const auto store = TripletStore::load(dir.path());
    CHECK(store.train().size() == 2);
    CHECK(store.entities().find("b").has_value());
    CHECK_FALSE(store.entities().find("b\r").has_value());
    CHECK(store.entities().find("c").has_value());
}

TEST_CASE("malformed line reports file and line number") {
    TempDir dir;
    write_dataset(dir.path(), "a\tr\tb\nbroken line\n");
    try {
        TripletStore::load(dir.path());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.file().find("train.txt") != std::string::npos);
    }
    write_dataset(dir.path(), "a\tr\tb\n", "x\ty\tz\tw\n");
    CHECK_THROWS_AS(TripletStore::load(dir.path()), ParseError);
}

TEST_CASE("empty train split is a data error") {
    TempDir dir;
    write_dataset(dir.path(), "", "a\tr\tb\n");
    CHECK_THROWS_AS(TripletStore::load(dir.path()), DataError);
}

TEST_CASE("missing split file is a data error") {
    TempDir dir;
    write_file(dir.path() / "valid.txt", "");
    write_file(dir.path() / "test.txt", "");
    CHECK_THROWS_AS(TripletStore::load(dir.path()), DataError);
}

TEST_CASE("neighbors are incoming heads under a relation") {
    auto store = TripletStore::from_named({{"a", "r", "b"}});
    const EntityId a = *store.entities().find("a"), b = *store.entities().find("b");
    CHECK(sorted(store.neighbors(b, 0)) == std::vector<EntityId>{a});
    CHECK(store.neighbors(a, 0).empty());
    // The inverse relation carries the edge the other way.
    CHECK(sorted(store.neighbors(a, 1)) == std::vector<EntityId>{b});

    store = TripletStore::from_named({{"a", "r", "b"}, {"c", "r", "b"}, {"a", "unused", "a"}});
    const EntityId a2 = *store.entities().find("a"), b2 = *store.entities().find("b"),
                   c2 = *store.entities().find("c");
    CHECK(sorted(store.neighbors(b2, 0)) == std::vector<EntityId>{a2, c2});
    CHECK(store.neighbors(b2, 1).empty());
}

TEST_CASE("neighbors of an out-of-range index is an index error") {
    const auto store = TripletStore::from_named({{"a", "r", "b"}});
    CHECK_THROWS_AS(store.neighbors(2, 0), IndexError);
    CHECK_THROWS_AS(store.neighbors(0, 2), IndexError);
    CHECK_THROWS_AS(store.neighbors(-1, 0), IndexError);
}

TEST_CASE("adjacency ignores valid and test triplets") {
    const auto store = TripletStore::from_named({{"a", "r", "b"}}, {{"c", "r", "b"}}, {{"a", "r", "c"}});
    const EntityId b = *store.entities().find("b"), c = *store.entities().find("c");
    CHECK(store.neighbors(b, 0).size() == 1);
    CHECK(store.neighbors(c, 0).empty());
    CHECK(store.degree()[static_cast<std::size_t>(c)] == 0);
}

TEST_CASE("UMLS batches: 6 chunks of 1000 x 5 + 216") {
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    const auto batches = store.batches(1000, 7);
    REQUIRE(batches.size() == 6);
    for (std::size_t i = 0; i < 5; ++i) CHECK(batches[i].size() == 1000);
    CHECK(batches[5].size() == 216);
    for (const auto& b : batches) CHECK(b.sides.size() == b.triplets.size());

    std::multiset<Triplet> seen, expected(store.train().begin(), store.train().end());
    for (const auto& b : batches) seen.insert(b.triplets.begin(), b.triplets.end());
    CHECK(seen == expected);
}

TEST_CASE("batch size at least the train size gives one batch") {
    const auto store = kge::test::toy_store();
    CHECK(store.batches(store.train().size(), 1).size() == 1);
    CHECK(store.batches(1000, 1).size() == 1);
    CHECK_THROWS_AS(store.batches(0, 1), ConfigError);
}

TEST_CASE("same seed gives the same batches and sides") {
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    const auto a = store.batches(1000, 42), b = store.batches(1000, 42), c = store.batches(1000, 43);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].triplets == b[i].triplets);
        CHECK(a[i].sides == b[i].sides);
    }
    CHECK(a[0].triplets != c[0].triplets);
    // Both sides actually occur.
    const auto heads = std::count(a[0].sides.begin(), a[0].sides.end(), Side::Head);
    CHECK(heads > 400);
    CHECK(heads < 600);
}

TEST_CASE("popularity distribution examples") {
    // Degrees a=1, b=1, c=2.
    auto store = TripletStore::from_named({{"a", "r", "c"}, {"b", "r", "c"}});
    const auto a = *store.entities().find("a"), b = *store.entities().find("b"), c = *store.entities().find("c");
    auto p = store.popularity_distribution(1.0);
    CHECK(p[a] == doctest::Approx(0.25));
    CHECK(p[b] == doctest::Approx(0.25));
    CHECK(p[c] == doctest::Approx(0.5));

    p = store.popularity_distribution(0.0);
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));

    // Degrees a=4, b=0 (b only appears outside train).
    store = TripletStore::from_named({{"a", "r", "a"}, {"a", "s", "a"}, {"a", "t", "a"}, {"a", "u", "a"}},
                                     {{"a", "r", "b"}});
    CHECK(store.degree() == std::vector<std::int64_t>{4, 0});
    p = store.popularity_distribution(0.75);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == 0.0);
    CHECK(store.popularity_distribution(0.0) == std::vector<double>{1.0, 0.0});
    CHECK_THROWS_AS(store.popularity_distribution(-1.0), ConfigError);
}

TEST_CASE("UMLS invariants: round trip, filter membership, degree, normalisation") {
    TempDir dir;
    const auto store = TripletStore::load(KGE_UMLS_DIR);

    std::ifstream in(std::filesystem::path(KGE_UMLS_DIR) / "train.txt");
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const Triplet& t = store.train().at(i++);
        CHECK(line == store.entities().name(t.head) + "\t" + store.relations().name(t.relation) + "\t" +
                          store.entities().name(t.tail));
    }
    CHECK(i == store.train().size());

    for (Split s : {Split::Train, Split::Valid, Split::Test}) {
        for (const auto& t : store.split(s)) {
            CHECK(t.head >= 0);
            CHECK(static_cast<std::size_t>(t.head) < store.num_entities());
            CHECK(static_cast<std::size_t>(t.relation) < store.num_relations());
            CHECK(store.is_known(t));
        }
    }
    std::size_t absent = 0;
    for (EntityId e = 0; e < static_cast<EntityId>(store.num_entities()) && absent < 10; ++e) {
        const Triplet t{store.test()[0].head, store.test()[0].relation, e};
        bool in_splits = false;
        for (Split s : {Split::Train, Split::Valid, Split::Test}) {
            in_splits |= std::find(store.split(s).begin(), store.split(s).end(), t) != store.split(s).end();
        }
        CHECK(store.is_known(t) == in_splits);
        absent += in_splits ? 0 : 1;
    }
    CHECK(absent > 0);

    std::vector<std::int64_t> degree(store.num_entities(), 0);
    for (const auto& t : store.train()) {
        ++degree[static_cast<std::size_t>(t.head)];
        if (t.tail != t.head) ++degree[static_cast<std::size_t>(t.tail)];
    }
    CHECK(degree == store.degree());

    for (double exponent : {0.0, 0.75, 1.0}) {
        const auto p = store.popularity_distribution(exponent);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("split names parse") {
    CHECK(parse_split("train") == Split::Train);
    CHECK(parse_split("valid") == Split::Valid);
    CHECK(parse_split("test") == Split::Test);
    CHECK_FALSE(parse_split("bogus").has_value());
}
