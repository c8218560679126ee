#include "kge/kg_store.hpp"

#include "kge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace kge {

std::string_view to_string(Side side) { return side == Side::Head ? "head" : "tail"; }

std::string_view to_string(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "valid") return Split::Valid;
    if (name == "test") return Split::Test;
    return std::nullopt;
}

std::int32_t Dictionary::insert(std::string_view name) {
    auto [it, inserted] = index_.try_emplace(std::string(name), static_cast<std::int32_t>(names_.size()));
    if (inserted) names_.emplace_back(name);
    return it->second;
}

std::optional<std::int32_t> Dictionary::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Dictionary::name(std::int32_t index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= names_.size()) {
        throw IndexError("dictionary index " + std::to_string(index) + " out of range " +
                         std::to_string(names_.size()));
    }
    return names_[static_cast<std::size_t>(index)];
}

namespace {

std::vector<TripletStore::NamedTriplet> read_split(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file.string());
    std::vector<TripletStore::NamedTriplet> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto first = line.find('\t');
        const auto second = first == std::string::npos ? first : line.find('\t', first + 1);
        if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
            throw ParseError(file.string(), line_no, "expected exactly two TAB separators");
        }
        TripletStore::NamedTriplet t{line.substr(0, first), line.substr(first + 1, second - first - 1),
                                     line.substr(second + 1)};
        if (t[0].empty() || t[1].empty() || t[2].empty()) {
            throw ParseError(file.string(), line_no, "empty field");
        }
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace

TripletStore TripletStore::load(const std::filesystem::path& dir) {
    for (const char* name : {"train.txt", "valid.txt", "test.txt"}) {
        if (!std::filesystem::is_regular_file(dir / name)) {
            throw DataError("missing dataset file " + (dir / name).string());
        }
    }
    return from_named(read_split(dir / "train.txt"), read_split(dir / "valid.txt"), read_split(dir / "test.txt"));
}

TripletStore TripletStore::from_named(const std::vector<NamedTriplet>& train, const std::vector<NamedTriplet>& valid,
                                      const std::vector<NamedTriplet>& test) {
    if (train.empty()) throw DataError("train split is empty");
    TripletStore store;
    auto convert = [&store](const std::vector<NamedTriplet>& named, std::vector<Triplet>& out) {
        out.reserve(named.size());
        for (const auto& t : named) {
            const EntityId h = store.entities_.insert(t[0]);
            const RelationId r = store.relations_.insert(t[1]);
            const EntityId tail = store.entities_.insert(t[2]);
            out.push_back({h, r, tail});
        }
    };
    convert(train, store.train_);
    convert(valid, store.valid_);
    convert(test, store.test_);
    store.index();
    return store;
}

std::uint64_t TripletStore::key(const Triplet& t) const {
    const auto nv = static_cast<std::uint64_t>(entities_.size());
    const auto nr = static_cast<std::uint64_t>(relations_.size());
    return (static_cast<std::uint64_t>(t.head) * nr + static_cast<std::uint64_t>(t.relation)) * nv +
           static_cast<std::uint64_t>(t.tail);
}

std::uint64_t TripletStore::pair_key(std::int64_t a, std::int64_t b) const {
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(entities_.size() + relations_.size()) +
           static_cast<std::uint64_t>(b);
}

void TripletStore::index() {
    const std::size_t nv = entities_.size();
    const std::size_t nr = relations_.size();

    degree_.assign(nv, 0);
    for (const auto& t : train_) {
        ++degree_[static_cast<std::size_t>(t.head)];
        if (t.tail != t.head) ++degree_[static_cast<std::size_t>(t.tail)];
    }

    // In-neighbor sets per directed relation, ordered for determinism.
    std::vector<std::map<EntityId, std::vector<EntityId>>> incoming(2 * nr);
    for (const auto& t : train_) {
        incoming[static_cast<std::size_t>(t.relation)][t.tail].push_back(t.head);
        incoming[static_cast<std::size_t>(t.relation) + nr][t.head].push_back(t.tail);
    }
    adjacency_.assign(2 * nr, RelationAdjacency{});
    for (std::size_t r = 0; r < 2 * nr; ++r) {
        auto& adj = adjacency_[r];
        adj.position.assign(nv, -1);
        adj.offsets.push_back(0);
        for (auto& [target, sources] : incoming[r]) {
            std::sort(sources.begin(), sources.end());
            sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
            const auto slot = static_cast<std::int32_t>(adj.targets.size());
            adj.position[static_cast<std::size_t>(target)] = slot;
            adj.targets.push_back(target);
            const float w = 1.0f / static_cast<float>(sources.size());
            for (EntityId s : sources) {
                adj.sources.push_back(s);
                adj.slot.push_back(slot);
                adj.weight.push_back(w);
            }
            adj.offsets.push_back(static_cast<std::int32_t>(adj.sources.size()));
        }
    }

    for (const auto* split : {&train_, &valid_, &test_}) {
        for (const auto& t : *split) {
            if (filter_.insert(key(t)).second) {
                tails_by_head_rel_[pair_key(t.head, t.relation)].push_back(t.tail);
                heads_by_rel_tail_[pair_key(t.relation, t.tail)].push_back(t.head);
            }
        }
    }
    for (auto& [k, v] : tails_by_head_rel_) std::sort(v.begin(), v.end());
    for (auto& [k, v] : heads_by_rel_tail_) std::sort(v.begin(), v.end());
}

const std::vector<Triplet>& TripletStore::split(Split s) const {
    switch (s) {
    case Split::Train: return train_;
    case Split::Valid: return valid_;
    case Split::Test: return test_;
    }
    return train_;
}

std::span<const EntityId> TripletStore::neighbors(EntityId entity, RelationId directed_relation) const {
    if (entity < 0 || static_cast<std::size_t>(entity) >= entities_.size()) {
        throw IndexError("entity index " + std::to_string(entity) + " out of range");
    }
    if (directed_relation < 0 || static_cast<std::size_t>(directed_relation) >= adjacency_.size()) {
        throw IndexError("relation index " + std::to_string(directed_relation) + " out of range");
    }
    const auto& adj = adjacency_[static_cast<std::size_t>(directed_relation)];
    const std::int32_t pos = adj.position[static_cast<std::size_t>(entity)];
    if (pos < 0) return {};
    const auto begin = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(pos)]);
    const auto end = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(pos) + 1]);
    return std::span<const EntityId>(adj.sources).subspan(begin, end - begin);
}

bool TripletStore::is_known(const Triplet& t) const {
    if (t.head < 0 || t.tail < 0 || t.relation < 0 || static_cast<std::size_t>(t.head) >= entities_.size() ||
        static_cast<std::size_t>(t.tail) >= entities_.size() ||
        static_cast<std::size_t>(t.relation) >= relations_.size()) {
        return false;
    }
    return filter_.contains(key(t));
}

std::span<const EntityId> TripletStore::known_tails(EntityId head, RelationId relation) const {
    auto it = tails_by_head_rel_.find(pair_key(head, relation));
    if (it == tails_by_head_rel_.end()) return {};
    return it->second;
}

std::span<const EntityId> TripletStore::known_heads(RelationId relation, EntityId tail) const {
    auto it = heads_by_rel_tail_.find(pair_key(relation, tail));
    if (it == heads_by_rel_tail_.end()) return {};
    return it->second;
}

std::vector<double> TripletStore::popularity_distribution(double exponent) const {
    if (exponent < 0.0) throw ConfigError("popularity exponent must be >= 0");
    std::vector<double> p(degree_.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < degree_.size(); ++i) {
        if (degree_[i] > 0) p[i] = std::pow(static_cast<double>(degree_[i]), exponent);
        total += p[i];
    }
    if (total <= 0.0) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
        return p;
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<PositiveBatch> TripletStore::batches(std::size_t batch_size, std::uint64_t seed) const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<PositiveBatch> out;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(order.size(), begin + batch_size);
        PositiveBatch batch;
        batch.triplets.reserve(end - begin);
        batch.sides.reserve(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
            batch.triplets.push_back(train_[order[k]]);
            batch.sides.push_back((rng() >> 63) != 0 ? Side::Head : Side::Tail);
        }
        out.push_back(std::move(batch));
    }
    return out;
}

} // namespace kge
