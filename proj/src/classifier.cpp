#include "landreuse/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"
#include "landreuse/random.hpp"
#include "landreuse/utf8.hpp"

namespace landreuse::classifier {

namespace fs = std::filesystem;

FeatureVector featurize(std::string_view sentence, const FeaturizerConfig& config) {
    if (config.dimension == 0) throw Error("feature dimension must be positive");
    const std::u32string cps = utf8::decode(sentence);
    std::u32string lowered;
    lowered.reserve(cps.size() + 2);
    lowered.push_back(' ');
    for (char32_t c : cps) {
        const char32_t l = utf8::is_space(c) ? U' ' : utf8::to_lower(c);
        if (l == ' ' && lowered.back() == ' ') continue;
        lowered.push_back(l);
    }
    if (lowered.back() != ' ') lowered.push_back(' ');
    if (lowered.size() <= 1) throw Error("cannot featurize an empty sentence");

    std::map<std::uint32_t, double> counts;
    auto add = [&](std::string_view prefix, std::u32string_view gram) {
        std::string key(prefix);
        key += utf8::encode(gram);
        counts[static_cast<std::uint32_t>(io::fnv1a(key) % config.dimension)] += 1.0;
    };

    std::size_t start = 0;
    for (std::size_t i = 0; i <= lowered.size(); ++i) {
        if (i == lowered.size() || !utf8::is_alnum(lowered[i])) {
            if (i > start) add("w:", std::u32string_view(lowered).substr(start, i - start));
            start = i + 1;
        }
    }
    for (std::size_t n = config.min_char_ngram; n <= config.max_char_ngram; ++n) {
        for (std::size_t i = 0; i + n <= lowered.size(); ++i) add("c:", std::u32string_view(lowered).substr(i, n));
    }

    FeatureVector fv;
    fv.dimension = config.dimension;
    double norm2 = 0.0;
    for (const auto& [idx, c] : counts) norm2 += c * c;
    const double inv = 1.0 / std::sqrt(norm2);
    for (const auto& [idx, c] : counts) {
        fv.indices.push_back(idx);
        fv.values.push_back(c * inv);
    }
    return fv;
}

std::string_view to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adagrad"; }

Optimizer parse_optimizer(std::string_view name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "adagrad") return Optimizer::adagrad;
    throw Error("unknown optimizer '" + std::string(name) + "' (expected sgd or adagrad)");
}

void TrainConfig::check() const {
    if (max_epochs < 1) throw Error("max_epochs must be >= 1");
    if (patience < 0) throw Error("patience must be >= 0");
    if (!(learning_rate > 0.0) || !(lr_scale > 0.0)) throw Error("learning rate must be positive");
    if (!(adagrad_epsilon > 0.0)) throw Error("adagrad_epsilon must be positive");
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    c.adagrad_epsilon = j.value("adagrad_epsilon", c.adagrad_epsilon);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_scale = j.value("lr_scale", c.lr_scale);
    c.patience = j.value("patience", c.patience);
    c.min_delta = j.value("min_delta", c.min_delta);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.check();
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"optimizer", to_string(optimizer)}, {"adagrad_epsilon", adagrad_epsilon}, {"max_epochs", max_epochs}, {"learning_rate", learning_rate}, {"lr_scale", lr_scale},
            {"patience", patience},     {"min_delta", min_delta},         {"batch_size", batch_size},
            {"seed", seed}};
}

ModelSnapshot ModelSnapshot::zeros(LabelSpace space, std::uint32_t dimension) {
    ModelSnapshot m;
    m.space = space;
    m.dimension = dimension;
    m.parameters.assign(label_count(space) * (static_cast<std::size_t>(dimension) + 1), 0.0);
    return m;
}

namespace {

constexpr int kFormatVersion = 1;

std::size_t expected_parameters(const ModelSnapshot& m) {
    return m.labels() * (static_cast<std::size_t>(m.dimension) + 1);
}

void check_model(const ModelSnapshot& m) {
    if (m.backend != "linear-bce") throw Error("model backend '" + m.backend + "' is not linear-bce");
    if (m.parameters.size() != expected_parameters(m)) throw Error("model parameter block has the wrong size");
}

void check_features(const ModelSnapshot& m, const FeatureVector& x) {
    if (x.dimension != m.dimension) {
        throw Error("feature dimension " + std::to_string(x.dimension) + " does not match model dimension " +
                    std::to_string(m.dimension));
    }
}

void check_examples(const ModelSnapshot& m, std::span<const Example> examples) {
    for (const auto& e : examples) {
        check_features(m, e.features);
        if (e.labels.size() != m.labels()) {
            throw Error("label vector of length " + std::to_string(e.labels.size()) + " for a " +
                        std::string(to_string(m.space)) + " model");
        }
    }
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Binary cross-entropy of sigmoid(z) against y, computed from the logit.
double bce_logit(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

double logit(const std::vector<double>& params, std::size_t dim, std::size_t bias_offset, std::size_t label,
             const FeatureVector& x) {
    const double* w = params.data() + label * dim;
    double z = params[bias_offset + label];
    for (std::size_t k = 0; k < x.indices.size(); ++k) z += w[x.indices[k]] * x.values[k];
    return z;
}

std::uint64_t data_hash(std::span<const Example> examples) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : examples) {
        h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(e.features.indices.data()),
                                       e.features.indices.size() * sizeof(std::uint32_t)),
                      h);
        h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(e.features.values.data()),
                                       e.features.values.size() * sizeof(double)),
                      h);
        h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(e.labels.data()), e.labels.size()), h);
    }
    return h;
}

}  // namespace

double loss(const ModelSnapshot& model, std::span<const Example> examples) {
    check_model(model);
    check_examples(model, examples);
    if (examples.empty()) return 0.0;
    const std::size_t dim = model.dimension, L = model.labels(), bias = L * dim;
    double total = 0.0;
    for (const auto& e : examples) {
        for (std::size_t l = 0; l < L; ++l) total += bce_logit(logit(model.parameters, dim, bias, l, e.features), e.labels[l]);
    }
    return total / static_cast<double>(examples.size() * L);
}

std::vector<double> loss_gradient(const ModelSnapshot& model, std::span<const Example> examples) {
    check_model(model);
    check_examples(model, examples);
    std::vector<double> grad(model.parameters.size(), 0.0);
    if (examples.empty()) return grad;
    const std::size_t dim = model.dimension, L = model.labels(), bias = L * dim;
    const double scale = 1.0 / static_cast<double>(examples.size() * L);
    for (const auto& e : examples) {
        for (std::size_t l = 0; l < L; ++l) {
            const double r = (sigmoid(logit(model.parameters, dim, bias, l, e.features)) - e.labels[l]) * scale;
            for (std::size_t k = 0; k < e.features.indices.size(); ++k) {
                grad[l * dim + e.features.indices[k]] += r * e.features.values[k];
            }
            grad[bias + l] += r;
        }
    }
    return grad;
}

TrainResult train(const ModelSnapshot& warm_start, std::span<const Example> labeled,
                  std::span<const Example> validation, const TrainConfig& config) {
    config.check();
    check_model(warm_start);
    if (labeled.empty()) throw Error("cannot train on an empty labeled set");
    check_examples(warm_start, labeled);
    check_examples(warm_start, validation);

    const std::size_t dim = warm_start.dimension, L = warm_start.labels(), bias = L * dim;
    const std::size_t n = labeled.size();
    const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
    const double lr = config.effective_learning_rate();

    TrainResult result;
    ModelSnapshot current = warm_start;
    ModelSnapshot best = warm_start;
    double best_val = std::numeric_limits<double>::infinity();
    if (!validation.empty()) {
        best_val = loss(current, validation);
        result.validation_loss.push_back(best_val);
    }

    Rng rng({config.seed, warm_start.version});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> residual(batch * L);
    // Gradient scratch over the coordinates a mini-batch touches.
    std::vector<double> grad(current.parameters.size(), 0.0);
    std::vector<char> touched(current.parameters.size(), 0);
    std::vector<std::size_t> touched_list;
    std::vector<double> accum;
    if (config.optimizer == Optimizer::adagrad) accum.assign(current.parameters.size(), 0.0);
    int since_improvement = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(start + batch, n);
            const double scale = 1.0 / static_cast<double>((end - start) * L);
            // Residuals first so that a mini-batch sees one parameter state.
            for (std::size_t i = start; i < end; ++i) {
                const auto& e = labeled[order[i]];
                for (std::size_t l = 0; l < L; ++l) {
                    residual[(i - start) * L + l] =
                        sigmoid(logit(current.parameters, dim, bias, l, e.features)) - e.labels[l];
                }
            }
            auto add = [&](std::size_t p, double g) {
                if (!touched[p]) {
                    touched[p] = 1;
                    touched_list.push_back(p);
                }
                grad[p] += g;
            };
            for (std::size_t i = start; i < end; ++i) {
                const auto& x = labeled[order[i]].features;
                for (std::size_t l = 0; l < L; ++l) {
                    const double r = scale * residual[(i - start) * L + l];
                    for (std::size_t k = 0; k < x.indices.size(); ++k) add(l * dim + x.indices[k], r * x.values[k]);
                    add(bias + l, r);
                }
            }
            for (std::size_t p : touched_list) {
                const double g = grad[p];
                if (config.optimizer == Optimizer::adagrad) {
                    accum[p] += g * g;
                    current.parameters[p] -= lr * g / (std::sqrt(accum[p]) + config.adagrad_epsilon);
                } else {
                    current.parameters[p] -= lr * g;
                }
                grad[p] = 0.0;
                touched[p] = 0;
            }
            touched_list.clear();
        }
        result.epochs_run = epoch;
        result.train_loss.push_back(loss(current, labeled));

        if (validation.empty()) {
            best.parameters = current.parameters;
            result.best_epoch = epoch;
            continue;
        }
        const double v = loss(current, validation);
        result.validation_loss.push_back(v);
        if (v < best_val - config.min_delta) {
            best_val = v;
            best.parameters = current.parameters;
            result.best_epoch = epoch;
            since_improvement = 0;
        } else if (++since_improvement > config.patience) {
            break;
        }
    }

    best.version = warm_start.version + 1;
    best.provenance = {{"data_hash", io::hex64(data_hash(labeled))},
                       {"train_examples", labeled.size()},
                       {"validation_examples", validation.size()},
                       {"epochs_run", result.epochs_run},
                       {"best_epoch", result.best_epoch},
                       {"config", config.to_json()},
                       {"warm_start_version", warm_start.version}};
    result.model = std::move(best);
    return result;
}

Prediction predict_one(const ModelSnapshot& model, const FeatureVector& x) {
    check_model(model);
    check_features(model, x);
    const std::size_t dim = model.dimension, L = model.labels(), bias = L * dim;
    Prediction p(L);
    for (std::size_t l = 0; l < L; ++l) p[l] = sigmoid(logit(model.parameters, dim, bias, l, x));
    return p;
}

std::vector<Prediction> predict(const ModelSnapshot& model, std::span<const FeatureVector> batch) {
    std::vector<Prediction> out;
    out.reserve(batch.size());
    for (const auto& x : batch) out.push_back(predict_one(model, x));
    return out;
}

MultiHot decide(const Prediction& prediction, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("decision threshold must lie in (0,1)");
    MultiHot out(prediction.size(), 0);
    for (std::size_t i = 0; i < prediction.size(); ++i) out[i] = prediction[i] >= threshold ? 1 : 0;
    return out;
}

std::vector<std::uint8_t> ModelSnapshot::to_bytes() const {
    static_assert(std::endian::native == std::endian::little, "model container assumes little-endian doubles");
    std::vector<std::uint8_t> blob(parameters.size() * sizeof(double));
    if (!blob.empty()) std::memcpy(blob.data(), parameters.data(), blob.size());
    nlohmann::json j = {{"format", "landreuse-model"},
                        {"format_version", kFormatVersion},
                        {"backend", backend},
                        {"space", to_string(space)},
                        {"labels", label_names(space)},
                        {"dimension", dimension},
                        {"version", version},
                        {"provenance", provenance},
                        {"parameters", nlohmann::json::binary(std::move(blob))}};
    return nlohmann::json::to_cbor(j);
}

ModelSnapshot ModelSnapshot::from_bytes(std::span<const std::uint8_t> bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::from_cbor(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("model container is not valid CBOR: ") + e.what());
    }
    if (j.value("format", std::string{}) != "landreuse-model") throw Error("not a model container");
    if (j.value("format_version", 0) != kFormatVersion) throw Error("unsupported model container version");
    ModelSnapshot m;
    m.backend = j.at("backend").get<std::string>();
    m.space = parse_label_space(j.at("space").get<std::string>());
    m.dimension = j.at("dimension").get<std::uint32_t>();
    m.version = j.at("version").get<std::uint64_t>();
    m.provenance = j.value("provenance", nlohmann::json::object());
    const auto& blob = j.at("parameters").get_binary();
    if (blob.size() % sizeof(double) != 0) throw Error("model parameter blob is truncated");
    m.parameters.resize(blob.size() / sizeof(double));
    if (!blob.empty()) std::memcpy(m.parameters.data(), blob.data(), blob.size());
    if (m.backend == "linear-bce") check_model(m);
    return m;
}

void ModelSnapshot::save(const fs::path& path) const {
    const auto bytes = to_bytes();
    io::write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

ModelSnapshot ModelSnapshot::load(const fs::path& path) {
    const auto data = io::read_file(path);
    return from_bytes(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

}  // namespace landreuse::classifier
