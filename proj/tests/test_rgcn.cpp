#include "kge/errors.hpp"
#include "kge/gradcheck.hpp"
#include "kge/ops.hpp"
#include "kge/rgcn.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace kge;
using kge::test::values;

namespace {

void set_identity(Tensor& t) {
    auto d = t.data();
    std::fill(d.begin(), d.end(), 0.0f);
    for (std::size_t i = 0; i < std::min(t.rows(), t.cols()); ++i) d[i * t.cols() + i] = 1.0f;
}

void set_rows(Tensor& t, const std::vector<std::pair<EntityId, std::vector<float>>>& rows) {
    for (const auto& [row, v] : rows) std::copy(v.begin(), v.end(), t.data().begin() + row * t.cols());
}

RgcnParams identity_params(const TripletStore& store, std::size_t dim) {
    SeedStream rng(1);
    auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {dim, dim}, rng);
    set_identity(p.self_weights[0]);
    for (auto& w : p.relation_weights[0]) set_identity(w);
    std::fill(p.input_embeddings.data().begin(), p.input_embeddings.data().end(), 0.0f);
    return p;
}

std::vector<float> row(const Tensor& t, EntityId i) {
    auto d = t.data().subspan(static_cast<std::size_t>(i) * t.cols(), t.cols());
    return {d.begin(), d.end()};
}

} // namespace

TEST_CASE("an entity without edges passes only its self-loop through ReLU") {
    // c appears only in the validation split, so it has no train edges.
    const auto store = TripletStore::from_named({{"a", "r", "b"}}, {{"c", "r", "a"}});
    auto p = identity_params(store, 2);
    const EntityId c = *store.entities().find("c");
    set_rows(p.input_embeddings, {{c, {1, -2}}});
    CHECK(row(layer_forward(p.input_embeddings, 0, store, p), c) == std::vector<float>{1, 0});
}

TEST_CASE("single edge with identity weights sums neighbor and self") {
    const auto store = TripletStore::from_named({{"a", "r", "b"}});
    auto p = identity_params(store, 2);
    set_rows(p.input_embeddings, {{0, {1, 0}}, {1, {0, 1}}});
    CHECK(row(layer_forward(p.input_embeddings, 0, store, p), 1) == std::vector<float>{1, 1});
}

TEST_CASE("two in-neighbors are averaged") {
    const auto store = TripletStore::from_named({{"a", "r", "b"}, {"c", "r", "b"}});
    auto p = identity_params(store, 2);
    const EntityId a = *store.entities().find("a"), b = *store.entities().find("b"),
                   c = *store.entities().find("c");
    set_rows(p.input_embeddings, {{a, {2, 0}}, {c, {0, 2}}, {b, {0, 0}}});
    CHECK(row(layer_forward(p.input_embeddings, 0, store, p), b) == std::vector<float>{1, 1});
}

TEST_CASE("zero layers return the input embeddings") {
    const auto store = kge::test::toy_store();
    SeedStream rng(3);
    auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {6}, rng);
    CHECK(p.num_layers() == 0);
    CHECK(values(encode_all(store, p)) == values(p.input_embeddings));
}

TEST_CASE("two layers of width 100 on UMLS give 135 x 100, deterministically") {
    const auto store = TripletStore::load(KGE_UMLS_DIR);
    SeedStream rng(1);
    auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {100, 100, 100}, rng);
    CHECK(p.relation_weights[0].size() == 92);
    CHECK(p.relation_weights[1].size() == 92);
    const Tensor a = encode_all(store, p), b = encode_all(store, p);
    CHECK(a.shape() == Shape{135, 100});
    CHECK(values(a) == values(b));
    for (float v : a.data()) CHECK(std::isfinite(v));
}

TEST_CASE("initialisation bounds follow the fan-in") {
    SeedStream rng(2);
    auto p = RgcnParams::init(10, 4, {16, 25}, rng);
    for (float v : p.input_embeddings.data()) CHECK(std::abs(v) <= 0.25f);
    for (float v : p.self_weights[0].data()) CHECK(std::abs(v) <= 0.25f);
    CHECK(p.self_weights[0].shape() == Shape{16, 25});
    CHECK_THROWS_AS(RgcnParams::init(10, 4, {16, 0}, rng), ConfigError);
    CHECK_THROWS_AS(RgcnParams::init(10, 4, {}, rng), ConfigError);
}

TEST_CASE("dimension mismatch is a shape error") {
    const auto store = kge::test::toy_store();
    SeedStream rng(4);
    auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {4, 4}, rng);
    CHECK_THROWS_AS(layer_forward(Tensor::zeros({store.num_entities(), 3}), 0, store, p), ShapeError);
    auto wrong = RgcnParams::init(store.num_entities() + 1, store.num_directed_relations(), {4, 4}, rng);
    CHECK_THROWS_AS(encode_all(store, wrong), ShapeError);
}

TEST_CASE("output shape is |V| x d^L for varied graphs") {
    for (std::size_t dim_out : {1u, 3u, 7u}) {
        const auto store = kge::test::toy_store();
        SeedStream rng(dim_out);
        auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {5, 4, dim_out}, rng);
        CHECK(encode_all(store, p).shape() == Shape{store.num_entities(), dim_out});
    }
}

TEST_CASE("an isolated entity depends only on its own input row") {
    const auto store = TripletStore::from_named({{"a", "r", "b"}, {"b", "s", "c"}}, {{"z", "r", "a"}});
    const EntityId z = *store.entities().find("z");
    SeedStream rng(5);
    auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {3, 3, 3}, rng);
    const auto before = row(encode_all(store, p), z);
    for (EntityId e = 0; e < static_cast<EntityId>(store.num_entities()); ++e) {
        if (e == z) continue;
        set_rows(p.input_embeddings, {{e, {5.0f, -3.0f, 2.0f}}});
    }
    CHECK(row(encode_all(store, p), z) == before);
}

TEST_CASE("gradient check of the encoder on a small graph") {
    const auto store = TripletStore::from_named({{"a", "r", "b"}, {"c", "r", "b"}, {"b", "s", "d"}, {"d", "s", "a"}});
    CHECK(store.num_entities() <= 5);
    std::mt19937_64 weights_rng(9);
    Tensor projection = kge::test::random_tensor({store.num_entities(), 3}, weights_rng, -1, 1, false);
    std::size_t checked_seeds = 0;
    for (std::uint64_t seed = 1; seed <= 100 && checked_seeds < 20; ++seed) {
        SeedStream rng(seed);
        auto p = RgcnParams::init(store.num_entities(), store.num_directed_relations(), {3, 3, 3}, rng);
        std::vector<Tensor> checked = {p.input_embeddings};
        for (const auto& layer : p.relation_weights) checked.insert(checked.end(), layer.begin(), layer.end());
        checked.insert(checked.end(), p.self_weights.begin(), p.self_weights.end());
        auto f = [&]() { return ops::sum(ops::mul(encode_all(store, p), projection)); };
        {
            Tape tape;
            TapeScope scope(tape);
            f();
            // A ReLU input this close to 0 can be straddled by the finite difference.
            if (min_relu_margin(tape) < 1e-2) continue;
        }
        auto report = gradient_check(f, checked, 1e-3, 1e-3);
        INFO("seed " << seed << " max error " << report.max_relative_error);
        CHECK(report.passed());
        ++checked_seeds;
    }
    CHECK(checked_seeds >= 5);
}
