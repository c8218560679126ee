#include "kge/evaluator.hpp"

#include "kge/errors.hpp"
#include "kge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace kge {

EmbeddingScorer::EmbeddingScorer(RelationParams decoder, Tensor embeddings)
    : decoder_(std::move(decoder)), embeddings_(std::move(embeddings)) {
    if (embeddings_.dim() != 2 || embeddings_.cols() != decoder_.dim) {
        throw ShapeError("EmbeddingScorer: embeddings " + shape_string(embeddings_.shape()) + " for decoder dim " +
                         std::to_string(decoder_.dim));
    }
}

void EmbeddingScorer::score_all(EntityId anchor, RelationId relation, Side corrupted, std::span<float> out) const {
    score_all_candidates(decoder_, embeddings_.data(), embeddings_.rows(), anchor, relation, corrupted, out);
}

void OracleScorer::score_all(EntityId anchor, RelationId relation, Side corrupted, std::span<float> out) const {
    std::fill(out.begin(), out.end(), 0.0f);
    const auto known = corrupted == Side::Tail ? store_->known_tails(anchor, relation)
                                               : store_->known_heads(relation, anchor);
    for (EntityId e : known) out[static_cast<std::size_t>(e)] = 1.0f;
}

void ConstantScorer::score_all(EntityId, RelationId, Side, std::span<float> out) const {
    std::fill(out.begin(), out.end(), value_);
}

namespace {

EntityId truth_of(const Triplet& q, Side side) { return side == Side::Tail ? q.tail : q.head; }
EntityId anchor_of(const Triplet& q, Side side) { return side == Side::Tail ? q.head : q.tail; }

std::span<const EntityId> known_for(const Triplet& q, Side side, const TripletStore& store) {
    return side == Side::Tail ? store.known_tails(q.head, q.relation) : store.known_heads(q.relation, q.tail);
}

} // namespace

CandidateList build_candidates(const Triplet& query, Side side, const TripletStore& store, bool filtered) {
    CandidateList list;
    list.query = query;
    list.side = side;
    list.truth = truth_of(query, side);
    const auto n = store.num_entities();
    std::vector<char> excluded(n, 0);
    if (filtered) {
        for (EntityId e : known_for(query, side, store)) excluded[static_cast<std::size_t>(e)] = 1;
    }
    excluded[static_cast<std::size_t>(list.truth)] = 0;
    for (std::size_t e = 0; e < n; ++e) {
        if (!excluded[e]) list.candidates.push_back(static_cast<EntityId>(e));
    }
    return list;
}

double rank_of_positive(const CandidateList& list) {
    if (list.scores.size() != list.candidates.size()) {
        throw ContractError("rank_of_positive: " + std::to_string(list.scores.size()) + " scores for " +
                            std::to_string(list.candidates.size()) + " candidates");
    }
    const auto it = std::find(list.candidates.begin(), list.candidates.end(), list.truth);
    if (it == list.candidates.end()) throw ContractError("rank_of_positive: true entity missing from candidates");
    const float truth = list.scores[static_cast<std::size_t>(it - list.candidates.begin())];
    std::size_t greater = 0, ties = 0;
    for (std::size_t i = 0; i < list.candidates.size(); ++i) {
        if (list.candidates[i] == list.truth) continue;
        if (list.scores[i] > truth) {
            ++greater;
        } else if (list.scores[i] == truth) {
            ++ties;
        }
    }
    return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

RankingReport metrics(std::span<const double> ranks, std::span<const int> hits_ks, std::span<const int> ndcg_ks) {
    if (ranks.empty()) throw ContractError("metrics: no ranks");
    RankingReport report;
    double rr = 0.0;
    std::map<int, double> hits, ndcg;
    for (int k : hits_ks) hits[k] = 0.0;
    for (int k : ndcg_ks) ndcg[k] = 0.0;
    for (double r : ranks) {
        rr += 1.0 / r;
        for (auto& [k, v] : hits) v += r <= k ? 1.0 : 0.0;
        for (auto& [k, v] : ndcg) v += r <= k ? 1.0 / std::log2(r + 1.0) : 0.0;
    }
    const auto n = static_cast<double>(ranks.size());
    report.mrr = rr / n;
    for (auto& [k, v] : hits) report.hits[k] = v / n;
    for (auto& [k, v] : ndcg) report.ndcg[k] = v / n;
    return report;
}

RankingReport evaluate(const Scorer& scorer, const TripletStore& store, Split split, const EvalOptions& options) {
    const auto& triplets = store.split(split);
    const std::size_t n = store.num_entities();
    std::vector<float> scores(n);
    std::vector<char> excluded(n, 0);
    std::vector<double> ranks;
    std::vector<QueryRank> queries;
    ranks.reserve(2 * triplets.size());
    for (const Triplet& q : triplets) {
        for (Side side : {Side::Head, Side::Tail}) {
            scorer.score_all(anchor_of(q, side), q.relation, side, scores);
            const auto known = options.filtered ? known_for(q, side, store) : std::span<const EntityId>{};
            for (EntityId e : known) excluded[static_cast<std::size_t>(e)] = 1;
            const EntityId truth = truth_of(q, side);
            excluded[static_cast<std::size_t>(truth)] = 0;
            const float t = scores[static_cast<std::size_t>(truth)];
            std::size_t greater = 0, ties = 0;
            for (std::size_t e = 0; e < n; ++e) {
                if (excluded[e] || static_cast<EntityId>(e) == truth) continue;
                greater += scores[e] > t;
                ties += scores[e] == t;
            }
            for (EntityId e : known) excluded[static_cast<std::size_t>(e)] = 0;
            const double rank = 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
            ranks.push_back(rank);
            queries.push_back({q, side, rank});
        }
    }
    RankingReport report = metrics(ranks);
    report.ranks = std::move(queries);
    return report;
}

RankingReport evaluate(const Checkpoint& checkpoint, const TripletStore& store, Split split,
                       const EvalOptions& options) {
    check_dictionaries(checkpoint, store);
    if (checkpoint.find(kOracleMarker) != nullptr) return evaluate(OracleScorer(store), store, split, options);
    const Model model = model_from_checkpoint(checkpoint, store);
    return evaluate(EmbeddingScorer(model.decoder, model.embeddings(store)), store, split, options);
}

Checkpoint make_oracle_checkpoint(const TripletStore& store) {
    Checkpoint ck;
    ck.config = to_key_values(TrainConfig{});
    ck.entities = store.entities().names();
    ck.relations = store.relations().names();
    ck.tensors.push_back({std::string(kOracleMarker), Tensor::scalar(1.0f)});
    return ck;
}

std::string format_report(const RankingReport& report) {
    std::string out;
    char buf[64];
    auto line = [&](const std::string& name, double v) {
        std::snprintf(buf, sizeof buf, "%s\t%.5f\n", name.c_str(), v);
        out += buf;
    };
    line("mrr", report.mrr);
    for (const auto& [k, v] : report.hits) line("hits@" + std::to_string(k), v);
    for (const auto& [k, v] : report.ndcg) line("ndcg@" + std::to_string(k), v);
    return out;
}

void write_per_query(const RankingReport& report, const TripletStore& store, std::ostream& out) {
    out << "head\trelation\ttail\tside\trank\n";
    char buf[32];
    for (const auto& q : report.ranks) {
        std::snprintf(buf, sizeof buf, "%.1f", q.rank);
        out << store.entities().name(q.query.head) << '\t' << store.relations().name(q.query.relation) << '\t'
            << store.entities().name(q.query.tail) << '\t' << to_string(q.side) << '\t' << buf << '\n';
    }
}

} // namespace kge
