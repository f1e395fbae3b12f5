#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "landreuse/classifier.hpp"
#include "landreuse/labels.hpp"
#include "landreuse/metrics.hpp"
#include "landreuse/random.hpp"

namespace landreuse::al {

enum class Strategy { uncertainty, random };
enum class Aggregation { mean, max, sum };

std::string_view to_string(Strategy s);
std::string_view to_string(Aggregation a);
Strategy parse_strategy(std::string_view name);
Aggregation parse_aggregation(std::string_view name);

struct ALConfig {
    std::size_t batch_size = 10;
    int iterations = 50;
    std::size_t subsample_size = 4096;
    std::uint64_t seed = 0;
    LabelSpace space = LabelSpace::topics;
    Strategy strategy = Strategy::uncertainty;
    Aggregation aggregation = Aggregation::mean;
    double threshold = 0.5;
    classifier::TrainConfig train;

    void check() const;
    static ALConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Texts and cached features for every sentence the loop may touch.
class SentenceStore {
public:
    explicit SentenceStore(const classifier::Backend& backend) : backend_(&backend) {}

    void add(const std::string& id, const std::string& text);
    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const std::string& text(const std::string& id) const;
    const classifier::FeatureVector& features(const std::string& id) const;
    std::size_t size() const { return texts_.size(); }
    const classifier::Backend& backend() const { return *backend_; }

private:
    std::size_t at(const std::string& id) const;

    const classifier::Backend* backend_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> texts_;
    std::vector<classifier::FeatureVector> features_;
};

struct LabeledItem {
    std::string sentence_id;
    MultiHot labels;
};

struct EvalSets {
    std::vector<LabeledItem> validation;
    std::vector<LabeledItem> test;
};

struct Candidate {
    std::string sentence_id;
    classifier::Prediction prediction;
    double score = 0.0;
};

struct QueryBatch {
    int iteration = 0;  // the round this batch belongs to
    std::vector<Candidate> items;

    std::vector<std::string> ids() const;
    nlohmann::json to_json() const;
    static QueryBatch from_json(const nlohmann::json& j);
};

struct HistoryRecord {
    int iteration = 0;  // 0 is the initial model
    std::vector<std::string> batch;
    std::vector<MultiHot> labels;
    std::vector<double> scores;
    std::uint64_t model_version = 0;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    std::optional<metrics::EvalReport> test;

    nlohmann::json to_json(LabelSpace space) const;
};

struct ALState {
    ALConfig config;
    std::vector<LabeledItem> labeled;
    std::vector<std::string> unlabeled;  // ascending
    classifier::ModelSnapshot model;
    int iteration = 0;
    std::vector<HistoryRecord> history;
    std::optional<QueryBatch> pending;
    bool needs_retrain = false;
    // Opaque description of where the store and eval sets come from, kept so
    // that a checkpoint can be resumed by the CLI.
    nlohmann::json inputs = nlohmann::json::object();
};

// Uniform sample without replacement of min(n, |unlabeled|) ids, returned in
// pool order.
std::vector<std::string> subsample_pool(std::span<const std::string> unlabeled, std::size_t n, Rng& rng);

// Aggregated binary entropy in bits; mean by default.
double uncertainty_score(const classifier::Prediction& prediction, Aggregation aggregation = Aggregation::mean);

// Round-robin over predicted-label buckets in label order, each bucket
// giving its most uncertain unchosen candidate, then fill by uncertainty.
// Ties keep candidate order.
QueryBatch balanced_select(std::span<const Candidate> candidates, std::size_t k, double threshold = 0.5);

metrics::EvalReport evaluate(const classifier::ModelSnapshot& model, const SentenceStore& store,
                             std::span<const LabeledItem> items, double threshold = 0.5);

// Records iteration 0. Without an initial model the first one is trained
// from scratch on `train`.
ALState initialize(const ALConfig& config, const SentenceStore& store, std::vector<LabeledItem> train,
                   std::vector<std::string> unlabeled, const EvalSets& eval,
                   std::optional<classifier::ModelSnapshot> initial = std::nullopt);

// Next batch for the current round; does not modify the state.
QueryBatch select_batch(const ALState& state, const SentenceStore& store);

// Moves the batch into the labeled pool and advances the round. Labels must
// cover exactly the batch, in batch order.
void commit_batch(ALState& state, const QueryBatch& batch, std::span<const MultiHot> labels);

struct RetrainOutcome {
    classifier::ModelSnapshot model;
    std::optional<metrics::EvalReport> test;
};

// Split so that training can run outside a lock on a copy of the state.
RetrainOutcome compute_retrain(const ALState& state, const SentenceStore& store, const EvalSets& eval);
void apply_retrain(ALState& state, RetrainOutcome outcome);
void retrain(ALState& state, const SentenceStore& store, const EvalSets& eval);

class Annotator {
public:
    virtual ~Annotator() = default;
    // One label vector per batch item, or nullopt to stop the session.
    virtual std::optional<std::vector<MultiHot>> annotate(const QueryBatch& batch, const SentenceStore& store,
                                                          LabelSpace space) = 0;
};

// Returns gold labels, each bit flipped with probability flip_rate. The flips
// depend only on (seed, sentence id).
class OracleAnnotator final : public Annotator {
public:
    OracleAnnotator(std::map<std::string, MultiHot> gold, double flip_rate = 0.0, std::uint64_t seed = 0);

    std::optional<std::vector<MultiHot>> annotate(const QueryBatch& batch, const SentenceStore& store,
                                                  LabelSpace space) override;
    MultiHot label(const std::string& sentence_id) const;

private:
    std::map<std::string, MultiHot> gold_;
    double flip_rate_;
    std::uint64_t seed_;
};

using CheckpointFn = std::function<void(const ALState&)>;

// Runs rounds until config.iterations or the pool is exhausted. Returns false
// when the annotator stopped the session; the pending batch is kept so that a
// resumed run presents it again.
bool run_loop(ALState& state, const SentenceStore& store, const EvalSets& eval, Annotator& annotator,
              const CheckpointFn& checkpoint = {});

// Checkpoint directory layout: state.json, history.jsonl and one model file
// per version. Every file is written atomically, the state file last.
void save_checkpoint(const ALState& state, const std::filesystem::path& dir);
ALState load_checkpoint(const std::filesystem::path& dir);
void write_history(const ALState& state, const std::filesystem::path& path);

}  // namespace landreuse::al
