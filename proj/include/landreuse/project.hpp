#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "landreuse/active_learning.hpp"
#include "landreuse/classifier.hpp"
#include "landreuse/geograph.hpp"
#include "landreuse/textprep.hpp"

namespace landreuse::project {

// File layout of a project directory. project.json may override any entry
// with a path relative to the root.
struct Layout {
    std::filesystem::path root;
    std::filesystem::path documents, pages, sentences, areas, weather, graph, models, al;

    static Layout open(const std::filesystem::path& root);
    std::filesystem::path split(std::string_view name) const { return root / "split" / (std::string(name) + ".jsonl"); }
    std::filesystem::path baseline_model(LabelSpace space) const {
        return models / ("baseline_" + std::string(to_string(space)) + ".cbor");
    }
    std::filesystem::path al_dir(LabelSpace space) const { return al / std::string(to_string(space)); }
};

// Where an AL session reads its data from. Paths are absolute once resolved.
struct SessionInputs {
    std::filesystem::path sentences;  // textprep output or any file of {sentence_id, text}
    std::filesystem::path train, validation, test;
    std::optional<std::filesystem::path> initial_model;
    std::optional<std::filesystem::path> gold;
    double flip_rate = 0.0;
    std::uint64_t annotator_seed = 0;

    static SessionInputs from_json(const nlohmann::json& j, const std::filesystem::path& base);
    nlohmann::json to_json() const;
};

struct Session {
    std::unique_ptr<al::SentenceStore> store;
    al::EvalSets eval;
    al::ALState state;
};

// New session: pool = every sentence not in the train, validation or test file.
Session create_session(const al::ALConfig& config, const SessionInputs& inputs, const classifier::Backend& backend);

// Reopens a checkpoint directory written by save_checkpoint.
Session open_session(const std::filesystem::path& dir, const classifier::Backend& backend);

// Gold labels of one space from a file of labeled sentences.
std::map<std::string, MultiHot> read_gold(const std::filesystem::path& path, LabelSpace space);

// One entry per predicted restriction label of each sentence, with the
// predicted probability of that label as confidence.
std::vector<geo::ClassifiedSentence> classify_sentences(std::span<const textprep::SentenceRecord> sentences,
                                                        const classifier::ModelSnapshot& restrictions,
                                                        const classifier::ModelSnapshot& topics,
                                                        const classifier::Backend& backend, double threshold = 0.5);

}  // namespace landreuse::project
