#pragma once

#include "kge/checkpoint.hpp"
#include "kge/decoders.hpp"
#include "kge/kg_store.hpp"
#include "kge/tensor.hpp"

#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kge {

/// Scores every entity placed in the corrupted position of a query; higher
/// is more plausible. For Side::Tail the anchor is the head, otherwise the tail.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual void score_all(EntityId anchor, RelationId relation, Side corrupted, std::span<float> out) const = 0;
};

/// Decoder scores over a fixed entity embedding table.
class EmbeddingScorer final : public Scorer {
public:
    EmbeddingScorer(RelationParams decoder, Tensor embeddings);
    void score_all(EntityId anchor, RelationId relation, Side corrupted, std::span<float> out) const override;

private:
    RelationParams decoder_;
    Tensor embeddings_;
};

/// 1 for triplets in the filter index, 0 otherwise.
class OracleScorer final : public Scorer {
public:
    explicit OracleScorer(const TripletStore& store) : store_(&store) {}
    void score_all(EntityId anchor, RelationId relation, Side corrupted, std::span<float> out) const override;

private:
    const TripletStore* store_;
};

class ConstantScorer final : public Scorer {
public:
    explicit ConstantScorer(float value = 0.0f) : value_(value) {}
    void score_all(EntityId, RelationId, Side, std::span<float> out) const override;

private:
    float value_;
};

struct CandidateList {
    Triplet query;
    Side side = Side::Tail;
    EntityId truth = 0;
    std::vector<EntityId> candidates; // includes truth exactly once
    std::vector<float> scores;        // parallel to candidates
};

/// Filtered candidates: the true entity plus every entity whose corrupted
/// triplet is not in the filter index. With filtered=false, all entities.
CandidateList build_candidates(const Triplet& query, Side side, const TripletStore& store, bool filtered = true);

/// 1 + #{score > true} + #{other candidates tied with true} / 2.
double rank_of_positive(const CandidateList& list);

struct QueryRank {
    Triplet query;
    Side side = Side::Tail;
    double rank = 0.0;
};

struct RankingReport {
    double mrr = 0.0;
    std::map<int, double> hits;
    std::map<int, double> ndcg;
    std::vector<QueryRank> ranks;
};

inline const std::vector<int> kDefaultHits = {1, 5, 10};
inline const std::vector<int> kDefaultNdcg = {5};

/// ContractError on an empty rank list.
RankingReport metrics(std::span<const double> ranks, std::span<const int> hits_ks = kDefaultHits,
                      std::span<const int> ndcg_ks = kDefaultNdcg);

struct EvalOptions {
    bool filtered = true;
};

/// Head- and tail-corrupted rank for every triplet of the split, pooled.
RankingReport evaluate(const Scorer& scorer, const TripletStore& store, Split split, const EvalOptions& options = {});

/// Rebuilds the model from the checkpoint (ConfigError on a dictionary
/// mismatch) and evaluates it. Debug checkpoints carrying the oracle marker
/// tensor are scored with OracleScorer.
RankingReport evaluate(const Checkpoint& checkpoint, const TripletStore& store, Split split,
                       const EvalOptions& options = {});

inline constexpr std::string_view kOracleMarker = "debug.oracle_scorer";

/// Checkpoint that evaluates with the filter-index indicator as its score.
Checkpoint make_oracle_checkpoint(const TripletStore& store);

/// "name<TAB>value" lines with five decimals: mrr, hits@K..., ndcg@K...
std::string format_report(const RankingReport& report);

/// head, relation, tail, side, rank.
void write_per_query(const RankingReport& report, const TripletStore& store, std::ostream& out);

} // namespace kge
