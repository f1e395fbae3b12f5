#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "landreuse/labels.hpp"

namespace landreuse::classifier {

// Sparse vector, indices strictly ascending and < dimension.
struct FeatureVector {
    std::uint32_t dimension = 0;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    std::size_t nnz() const { return indices.size(); }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeaturizerConfig {
    std::uint32_t dimension = 1u << 16;
    std::size_t min_char_ngram = 3;
    std::size_t max_char_ngram = 5;
};

// Hashed word unigrams and character n-grams of the lowercased sentence,
// term-frequency weighted and L2-normalized. Throws on empty input.
FeatureVector featurize(std::string_view sentence, const FeaturizerConfig& config = {});

enum class Optimizer { sgd, adagrad };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
    Optimizer optimizer = Optimizer::adagrad;
    int max_epochs = 40;
    double learning_rate = 5e-5;
    // The linear backend multiplies learning_rate by this factor.
    double lr_scale = 1000.0;
    int patience = 5;
    double min_delta = 1e-6;
    std::size_t batch_size = 1;  // 0 means full batch
    double adagrad_epsilon = 1e-8;
    std::uint64_t seed = 0;

    double effective_learning_rate() const { return learning_rate * lr_scale; }
    void check() const;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Parameters of one label space's classifier. For the linear backend the
// parameter block is labels x dimension weights followed by labels biases.
struct ModelSnapshot {
    std::string backend = "linear-bce";
    LabelSpace space = LabelSpace::restrictions;
    std::uint32_t dimension = 0;
    std::vector<double> parameters;
    std::uint64_t version = 0;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t labels() const { return label_count(space); }

    static ModelSnapshot zeros(LabelSpace space, std::uint32_t dimension);

    // Versioned CBOR container.
    void save(const std::filesystem::path& path) const;
    static ModelSnapshot load(const std::filesystem::path& path);
    std::vector<std::uint8_t> to_bytes() const;
    static ModelSnapshot from_bytes(std::span<const std::uint8_t> bytes);

    friend bool operator==(const ModelSnapshot&, const ModelSnapshot&) = default;
};

using Prediction = std::vector<double>;

struct Example {
    FeatureVector features;
    MultiHot labels;
};

// Mean binary cross-entropy over examples and labels.
double loss(const ModelSnapshot& model, std::span<const Example> examples);

// Exact gradient of loss() with respect to ModelSnapshot::parameters.
std::vector<double> loss_gradient(const ModelSnapshot& model, std::span<const Example> examples);

struct TrainResult {
    ModelSnapshot model;
    int epochs_run = 0;
    int best_epoch = 0;  // 0 means the warm start was never improved on
    std::vector<double> train_loss;       // after each epoch
    std::vector<double> validation_loss;  // index 0 is the warm start
};

// Gradient descent on loss(), warm-started, either plain or with AdaGrad
// per-coordinate step sizes (accumulators start at zero on every call). Stops once validation loss has
// not improved by more than min_delta for more than `patience` epochs and
// returns the best-validation parameters with version + 1.
TrainResult train(const ModelSnapshot& warm_start, std::span<const Example> labeled,
                  std::span<const Example> validation, const TrainConfig& config);

Prediction predict_one(const ModelSnapshot& model, const FeatureVector& x);
std::vector<Prediction> predict(const ModelSnapshot& model, std::span<const FeatureVector> batch);

// Label set iff probability >= threshold; threshold must lie in (0,1).
MultiHot decide(const Prediction& prediction, double threshold = 0.5);

// Backend seam for the active learning loop.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual FeatureVector featurize(std::string_view sentence) const = 0;
    virtual ModelSnapshot initial(LabelSpace space) const = 0;
    virtual TrainResult train(const ModelSnapshot& warm_start, std::span<const Example> labeled,
                              std::span<const Example> validation, const TrainConfig& config) const = 0;
    virtual std::vector<Prediction> predict(const ModelSnapshot& model, std::span<const FeatureVector> batch) const = 0;
};

class LinearBackend final : public Backend {
public:
    explicit LinearBackend(FeaturizerConfig config = {}) : config_(config) {}

    std::string id() const override { return "linear-bce"; }
    FeatureVector featurize(std::string_view sentence) const override {
        return classifier::featurize(sentence, config_);
    }
    ModelSnapshot initial(LabelSpace space) const override { return ModelSnapshot::zeros(space, config_.dimension); }
    TrainResult train(const ModelSnapshot& warm_start, std::span<const Example> labeled,
                      std::span<const Example> validation, const TrainConfig& config) const override {
        return classifier::train(warm_start, labeled, validation, config);
    }
    std::vector<Prediction> predict(const ModelSnapshot& model, std::span<const FeatureVector> batch) const override {
        return classifier::predict(model, batch);
    }

    const FeaturizerConfig& featurizer() const { return config_; }

private:
    FeaturizerConfig config_;
};

}  // namespace landreuse::classifier
