#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "landreuse/active_learning.hpp"
#include "landreuse/bootstrap.hpp"
#include "landreuse/classifier.hpp"
#include "landreuse/error.hpp"
#include "landreuse/geograph.hpp"
#include "landreuse/io.hpp"
#include "landreuse/ocr_ingest.hpp"
#include "landreuse/project.hpp"
#include "landreuse/report.hpp"
#include "landreuse/service.hpp"
#include "landreuse/synth.hpp"
#include "landreuse/textprep.hpp"

namespace fs = std::filesystem;
using namespace landreuse;

namespace {

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::vector<double> parse_ratios(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw Error("bad ratio '" + part + "' in --ratios");
        }
    }
    if (out.size() != 3) throw Error("--ratios needs three values: train,validation,test");
    return out;
}

std::vector<LabelSpace> spaces_of(const std::string& name) {
    if (name == "both") return {LabelSpace::restrictions, LabelSpace::topics};
    return {parse_label_space(name)};
}

// ---- ingest / textprep / bootstrap / split / synth ----

struct IngestArgs {
    std::string ocr, meta, out;
    double threshold = ocr::kDefaultPageThreshold;
};

void run_ingest(const IngestArgs& a) {
    const auto r = ocr::ingest_corpus(a.ocr, a.meta, a.threshold);
    for (const auto& w : r.warnings) log("warning: " + w);
    for (const auto& e : r.errors) log("skipped: " + e);
    ocr::write_ingest_output(r, a.out);
    std::cout << ocr::to_json(r.stats).dump(2) << '\n';
}

struct TextprepArgs {
    std::string in, pages, rules, out, rejected;
};

void run_textprep(TextprepArgs a) {
    if (a.pages.empty()) {
        if (a.in.empty()) throw Error("textprep needs --in <ingest dir> or --pages <pages.jsonl>");
        a.pages = (fs::path(a.in) / "pages.jsonl").string();
    }
    const auto rules = a.rules.empty() ? textprep::Rules{} : textprep::Rules::load(a.rules);
    std::vector<textprep::SentenceRecord> kept;
    std::vector<nlohmann::json> rejected;
    std::map<std::string, std::size_t> reasons;
    for (const auto& page : ocr::read_pages(a.pages)) {
        auto outcome = textprep::prepare_page(page, rules);
        for (auto& s : outcome.kept) kept.push_back(std::move(s));
        for (auto& [s, why] : outcome.rejected) {
            ++reasons[std::string(textprep::to_string(why.code))];
            auto j = textprep::to_json(s);
            j["reason"] = textprep::to_string(why.code);
            j["detail"] = why.detail;
            rejected.push_back(std::move(j));
        }
    }
    textprep::write_sentences(a.out, kept);
    if (!a.rejected.empty()) io::write_jsonl_atomic(a.rejected, rejected);
    nlohmann::json summary = {{"kept", kept.size()}, {"rejected", rejected.size()}, {"reasons", reasons}};
    std::cout << summary.dump(2) << '\n';
}

struct BootstrapArgs {
    std::string sentences, keywords, out;
    std::size_t size = 2000;
    std::uint64_t seed = 0;
};

void run_bootstrap(const BootstrapArgs& a) {
    const auto table = a.keywords.empty() ? bootstrap::KeywordTable::defaults() : bootstrap::KeywordTable::load(a.keywords);
    const auto records = textprep::read_sentences(a.sentences);
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.text);
    bootstrap::CandidatePoolConfig cfg;
    cfg.target_size = a.size;
    const auto pool = bootstrap::build_candidate_pool(texts, table, a.seed, cfg);
    std::vector<nlohmann::json> rows;
    for (auto i : pool.selected) rows.push_back(textprep::to_json(records[i]));
    io::write_jsonl_atomic(a.out, rows);
    nlohmann::json topics = nlohmann::json::array();
    for (const auto& t : pool.topics) {
        topics.push_back({{"topic", t.topic}, {"matched", t.matched}, {"quota", t.quota}, {"selected", t.selected}});
    }
    std::cout << nlohmann::json{{"selected", pool.selected.size()},
                                {"restriction_candidates", pool.restriction_candidates},
                                {"topic_selected", pool.topic_selected},
                                {"random_fill", pool.random_fill},
                                {"topics", topics}}
                     .dump(2)
              << '\n';
}

struct SplitArgs {
    std::string sentences, annotations, labeled, out;
    std::string ratios = "1,1,2";
    std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a) {
    std::vector<bootstrap::LabeledSentence> dataset;
    fs::create_directories(a.out);
    if (!a.labeled.empty()) {
        dataset = bootstrap::read_labeled(a.labeled);
    } else {
        if (a.annotations.empty() || a.sentences.empty()) {
            throw Error("split needs --labeled, or --annotations together with --sentences");
        }
        const auto records = bootstrap::read_annotations(a.annotations);
        const auto grouped = bootstrap::group_annotations(records);
        const auto sentences = textprep::read_sentences(a.sentences);
        std::vector<bootstrap::AnnotationRecord> used;
        std::size_t missing = 0;
        for (const auto& s : sentences) {
            auto it = grouped.find(s.sentence_id);
            if (it == grouped.end()) {
                ++missing;
                continue;
            }
            dataset.push_back({s.sentence_id, s.text, bootstrap::majority_vote(it->second)});
            used.insert(used.end(), it->second.begin(), it->second.end());
        }
        if (missing) log("warning: " + std::to_string(missing) + " sentences have no annotations and were left out");
        const auto rows = report::agreement(used);
        io::write_json_atomic(fs::path(a.out) / "agreement.json", report::to_json(rows));
        std::cout << report::render_agreement(rows);
    }
    const auto ratios = parse_ratios(a.ratios);
    const auto split = bootstrap::split_dataset(dataset, ratios, a.seed);
    bootstrap::write_labeled(fs::path(a.out) / "train.jsonl", split.train);
    bootstrap::write_labeled(fs::path(a.out) / "validation.jsonl", split.validation);
    bootstrap::write_labeled(fs::path(a.out) / "test.jsonl", split.test);
    std::cout << nlohmann::json{{"train", split.train.size()},
                                {"validation", split.validation.size()},
                                {"test", split.test.size()}}
                     .dump()
              << '\n';
}

struct SynthArgs {
    std::string config, out;
    std::optional<std::size_t> size;
    std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
    auto cfg = a.config.empty() ? bootstrap::SynthConfig{} : bootstrap::SynthConfig::from_json(io::read_json(a.config));
    if (a.size) cfg.size = *a.size;
    if (a.seed) cfg.seed = *a.seed;
    const auto corpus = bootstrap::generate_synthetic_corpus(cfg);
    bootstrap::write_synthetic_corpus(corpus, cfg, a.out);
    std::cout << nlohmann::json{{"sentences", corpus.sentences.size()},
                                {"documents", corpus.documents.size()},
                                {"areas", corpus.areas.size()},
                                {"isobands", corpus.isobands.size()},
                                {"annotations", corpus.annotations.size()}}
                     .dump()
              << '\n';
}

// ---- training / AL ----

std::vector<classifier::Example> examples_from(const std::vector<bootstrap::LabeledSentence>& rows, LabelSpace space,
                                               const classifier::Backend& backend) {
    std::vector<classifier::Example> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({backend.featurize(r.text), r.labels.space(space)});
    return out;
}

struct TrainArgs {
    std::string train, validation, out_dir, config;
    std::string space = "both";
    std::uint64_t seed = 0;
};

void run_train_baseline(const TrainArgs& a) {
    auto cfg = a.config.empty() ? classifier::TrainConfig{} : classifier::TrainConfig::from_json(io::read_json(a.config));
    cfg.seed = a.seed;
    const classifier::LinearBackend backend;
    const auto train = bootstrap::read_labeled(a.train);
    const auto val = a.validation.empty() ? std::vector<bootstrap::LabeledSentence>{} : bootstrap::read_labeled(a.validation);
    fs::create_directories(a.out_dir);
    for (auto space : spaces_of(a.space)) {
        const auto tr = examples_from(train, space, backend);
        const auto va = examples_from(val, space, backend);
        const auto result = backend.train(backend.initial(space), tr, va, cfg);
        const auto path = fs::path(a.out_dir) / ("baseline_" + std::string(to_string(space)) + ".cbor");
        result.model.save(path);
        log(std::string(to_string(space)) + ": " + std::to_string(result.epochs_run) + " epochs, best " +
            std::to_string(result.best_epoch) + ", wrote " + path.string());
    }
}

// Reads label names per sentence from stdin; "q" stops the session.
class InteractiveAnnotator final : public al::Annotator {
public:
    std::optional<std::vector<MultiHot>> annotate(const al::QueryBatch& batch, const al::SentenceStore& store,
                                                  LabelSpace space) override {
        const auto names = label_names(space);
        std::cout << "Round " << batch.iteration << ". Labels:";
        for (std::size_t i = 0; i < names.size(); ++i) std::cout << ' ' << i << '=' << names[i];
        std::cout << "\nEnter numbers separated by spaces (empty for none), q to stop.\n";
        std::vector<MultiHot> out;
        for (const auto& c : batch.items) {
            std::cout << "\n" << store.text(c.sentence_id) << "\n> " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line) || line == "q") return std::nullopt;
            MultiHot hot(names.size(), 0);
            std::stringstream ss(line);
            std::string tok;
            while (ss >> tok) {
                std::size_t idx = names.size();
                try {
                    idx = std::stoul(tok);
                } catch (const std::exception&) {
                    if (auto l = label_index(space, tok)) idx = *l;
                }
                if (idx >= names.size()) {
                    std::cout << "ignoring '" << tok << "'\n";
                    continue;
                }
                hot[idx] = 1;
            }
            out.push_back(std::move(hot));
        }
        return out;
    }
};

void print_history_tail(const al::ALState& state) {
    const auto& h = state.history.back();
    std::string msg = "round " + std::to_string(h.iteration) + ": labeled " + std::to_string(h.labeled) +
                      ", model v" + std::to_string(h.model_version);
    if (h.test) msg += ", test macro-F1 " + std::to_string(h.test->macro_f1) + " micro-F1 " + std::to_string(h.test->micro_f1);
    log(msg);
}

int serve_project(const fs::path& project_dir, const std::string& host, int port,
                  std::optional<std::pair<project::Session, fs::path>> session = std::nullopt);

int drive_session(project::Session session, const fs::path& state_dir, const std::string& annotator_kind,
                  const std::string& host, int port) {
    if (annotator_kind == "http") {
        // The server owns the session from here on; serve from the directory
        // holding the al/ checkpoints if it follows the project layout.
        return serve_project(state_dir.parent_path().parent_path(), host, port,
                             std::make_pair(std::move(session), state_dir));
    }
    std::unique_ptr<al::Annotator> annotator;
    if (annotator_kind == "oracle") {
        const auto inputs = project::SessionInputs::from_json(session.state.inputs, state_dir);
        if (!inputs.gold) throw Error("the oracle annotator needs \"gold\" in the AL config");
        annotator = std::make_unique<al::OracleAnnotator>(project::read_gold(*inputs.gold, session.state.config.space),
                                                          inputs.flip_rate, inputs.annotator_seed);
    } else if (annotator_kind == "interactive") {
        annotator = std::make_unique<InteractiveAnnotator>();
    } else {
        throw Error("unknown annotator '" + annotator_kind + "' (expected oracle, interactive or http)");
    }
    int last_logged = -1;
    const bool finished = al::run_loop(session.state, *session.store, session.eval, *annotator, [&](const al::ALState& st) {
        al::save_checkpoint(st, state_dir);
        if (!st.needs_retrain && st.iteration != last_logged) {
            last_logged = st.iteration;
            print_history_tail(st);
        }
    });
    al::save_checkpoint(session.state, state_dir);
    if (!finished) {
        log("stopped at round " + std::to_string(session.state.iteration) + "; resume with: al resume --state " +
            state_dir.string());
        return 3;
    }
    session.state.model.save(state_dir / "final_model.cbor");
    log("finished " + std::to_string(session.state.iteration) + " rounds; final model " +
        (state_dir / "final_model.cbor").string());
    return 0;
}

struct AlArgs {
    std::string config, state, annotator = "oracle", host = "127.0.0.1";
    int port = 8080;
};

int run_al(const AlArgs& a) {
    const auto cfg_path = fs::absolute(a.config);
    const auto j = io::read_json(cfg_path);
    const auto base = cfg_path.parent_path();
    const auto config = al::ALConfig::from_json(j.at("al"));
    const auto inputs = project::SessionInputs::from_json(j, base);
    fs::path state_dir = j.contains("state_dir") ? fs::path(j.at("state_dir").get<std::string>())
                                                 : fs::path("al") / std::string(to_string(config.space));
    if (state_dir.is_relative()) state_dir = base / state_dir;
    if (fs::exists(state_dir / "state.json")) {
        throw Conflict(state_dir.string() + " already holds a session; use al resume --state " + state_dir.string());
    }
    static const classifier::LinearBackend backend;
    auto session = project::create_session(config, inputs, backend);
    al::save_checkpoint(session.state, state_dir);
    print_history_tail(session.state);
    return drive_session(std::move(session), state_dir, a.annotator, a.host, a.port);
}

int run_al_resume(const AlArgs& a) {
    fs::path dir = a.state;
    if (dir.filename() == "state.json") dir = dir.parent_path();
    static const classifier::LinearBackend backend;
    auto session = project::open_session(dir, backend);
    log("resuming at round " + std::to_string(session.state.iteration));
    return drive_session(std::move(session), dir, a.annotator, a.host, a.port);
}

// ---- eval ----

struct EvalArgs {
    std::string baseline, test, out;
    std::vector<std::string> challengers;  // name=path or path
    double threshold = 0.5;
};

void run_eval(const EvalArgs& a) {
    const classifier::LinearBackend backend;
    const auto test = bootstrap::read_labeled(a.test);
    std::vector<classifier::FeatureVector> xs;
    for (const auto& r : test) xs.push_back(backend.featurize(r.text));

    std::map<LabelSpace, std::string> baselines;
    for (const auto& path : std::vector<std::string>{a.baseline}) {
        std::stringstream ss(path);
        std::string part;
        while (std::getline(ss, part, ',')) {
            const auto m = classifier::ModelSnapshot::load(part);
            if (baselines.count(m.space)) throw Error("two baseline models for " + std::string(to_string(m.space)));
            baselines[m.space] = part;
        }
    }
    struct Named {
        std::string name;
        classifier::ModelSnapshot model;
    };
    std::map<LabelSpace, std::vector<Named>> challengers;
    for (const auto& spec : a.challengers) {
        const auto eq = spec.find('=');
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        auto model = classifier::ModelSnapshot::load(path);
        auto& list = challengers[model.space];
        const std::string name = eq == std::string::npos ? "A" + std::to_string(list.size() + 1) : spec.substr(0, eq);
        list.push_back({name, std::move(model)});
    }

    auto predict_all = [&](const classifier::ModelSnapshot& m) {
        std::vector<MultiHot> out;
        for (const auto& p : backend.predict(m, xs)) out.push_back(classifier::decide(p, a.threshold));
        return out;
    };
    std::vector<report::SpaceTable> tables;
    for (const auto& [space, path] : baselines) {
        std::vector<MultiHot> gold;
        for (const auto& r : test) gold.push_back(r.labels.space(space));
        const auto base = predict_all(classifier::ModelSnapshot::load(path));
        std::vector<report::NamedPredictions> preds;
        for (const auto& c : challengers[space]) preds.push_back({c.name, predict_all(c.model)});
        tables.push_back(report::compare(space, gold, base, preds));
    }
    for (const auto& [space, list] : challengers) {
        if (!baselines.count(space)) log("warning: no baseline for " + std::string(to_string(space)) + "; challengers skipped");
    }
    const auto text = report::render_table(tables);
    std::cout << text;
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        io::write_file_atomic(fs::path(a.out) / "eval_table.txt", text);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& t : tables) j.push_back(report::to_json(t));
        io::write_json_atomic(fs::path(a.out) / "eval.json", j);
    }
}

// ---- graph / reports / serve ----

struct GraphArgs {
    std::string documents, areas, sentences, restrictions_model, topics_model, out;
    double threshold = 0.5;
};

void run_graph_build(const GraphArgs& a) {
    const classifier::LinearBackend backend;
    const auto sentences = textprep::read_sentences(a.sentences);
    const auto classified = project::classify_sentences(sentences, classifier::ModelSnapshot::load(a.restrictions_model),
                                                        classifier::ModelSnapshot::load(a.topics_model), backend,
                                                        a.threshold);
    const auto graph = geo::Graph::build(ocr::read_documents(a.documents), geo::read_features(a.areas), classified);
    for (const auto& w : graph.warnings()) log("warning: " + w);
    io::write_json_atomic(a.out, graph.dump(), -1);
    std::cout << nlohmann::json{{"documents", graph.documents().size()},
                                {"areas", graph.areas().size()},
                                {"restriction_edges", graph.restriction_edges().size()},
                                {"area_doc_edges", graph.area_doc_edges().size()},
                                {"version", graph.version()}}
                     .dump()
              << '\n';
}

struct AreaReportArgs {
    std::string graph, weather, pages, area;
};

void run_area_report(const AreaReportArgs& a) {
    project::Layout layout;
    layout.root = fs::current_path();
    service::Service svc(layout, std::make_shared<classifier::LinearBackend>());
    svc.set_graph(geo::Graph::load(io::read_json(a.graph)));
    if (!a.weather.empty()) svc.set_isobands(geo::read_isobands(a.weather));
    std::cout << svc.area_report(a.area, {!a.weather.empty()}).dump(2) << '\n';
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int serve_project(const fs::path& project_dir, const std::string& host, int port,
                  std::optional<std::pair<project::Session, fs::path>> session) {
    auto layout = project::Layout::open(project_dir);
    service::Service svc(layout, std::make_shared<classifier::LinearBackend>());
    svc.load();
    if (session) svc.attach_session(std::move(session->first), session->second);
    service::HttpServer server(svc);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    log("listening on http://" + host + ":" + std::to_string(bound));
    server.listen();
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restriction extraction, active learning and map queries for land-reuse documents"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Score OCR pages and keep those above the threshold");
    c_ingest->add_option("--ocr", ingest.ocr, "Word confidence TSV")->required();
    c_ingest->add_option("--meta", ingest.meta, "Document metadata JSONL")->required();
    c_ingest->add_option("--out", ingest.out, "Output directory")->required();
    c_ingest->add_option("--threshold", ingest.threshold, "Page acceptance threshold")->capture_default_str();

    TextprepArgs tp;
    auto* c_tp = app.add_subcommand("textprep", "Segment accepted pages into valid sentences");
    c_tp->add_option("--in", tp.in, "Ingest output directory");
    c_tp->add_option("--pages", tp.pages, "pages.jsonl from ingest");
    c_tp->add_option("--rules", tp.rules, "Rules JSON");
    c_tp->add_option("--out", tp.out, "Output sentences JSONL")->required();
    c_tp->add_option("--rejected", tp.rejected, "Where to write rejected sentences");

    BootstrapArgs bs;
    auto* c_bs = app.add_subcommand("bootstrap", "Select the keyword-bootstrapped annotation candidates");
    c_bs->add_option("--sentences", bs.sentences, "Sentences JSONL")->required();
    c_bs->add_option("--keywords", bs.keywords, "Keyword table JSON");
    c_bs->add_option("--size", bs.size, "Number of sentences")->capture_default_str();
    c_bs->add_option("--seed", bs.seed)->capture_default_str();
    c_bs->add_option("--out", bs.out, "Output JSONL")->required();

    SplitArgs sp;
    auto* c_sp = app.add_subcommand("split", "Majority-vote annotations and split by iterative stratification");
    c_sp->add_option("--sentences", sp.sentences, "Selected sentences JSONL");
    c_sp->add_option("--annotations", sp.annotations, "Annotations JSONL");
    c_sp->add_option("--labeled", sp.labeled, "Already labeled sentences JSONL");
    c_sp->add_option("--ratios", sp.ratios, "train,validation,test")->capture_default_str();
    c_sp->add_option("--seed", sp.seed)->capture_default_str();
    c_sp->add_option("--out", sp.out, "Output directory")->required();

    SynthArgs sy;
    auto* c_sy = app.add_subcommand("synth", "Generate a synthetic corpus");
    c_sy->add_option("--config", sy.config, "Synthetic corpus config JSON");
    c_sy->add_option("--size", sy.size, "Number of sentences");
    c_sy->add_option("--seed", sy.seed);
    c_sy->add_option("--out", sy.out, "Output directory")->required();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train-baseline", "Train classifiers on the train split");
    c_tr->add_option("--train", tr.train)->required();
    c_tr->add_option("--validation", tr.validation);
    c_tr->add_option("--space", tr.space, "restrictions, topics or both")->capture_default_str();
    c_tr->add_option("--config", tr.config, "Training config JSON");
    c_tr->add_option("--seed", tr.seed)->capture_default_str();
    c_tr->add_option("--out", tr.out_dir, "Model directory")->required();

    AlArgs al_args;
    auto* c_al = app.add_subcommand("al", "Active learning sessions");
    c_al->require_subcommand(1);
    auto* c_al_run = c_al->add_subcommand("run", "Start a session");
    c_al_run->add_option("--config", al_args.config, "Session config JSON")->required();
    auto* c_al_resume = c_al->add_subcommand("resume", "Continue a checkpointed session");
    c_al_resume->add_option("--state", al_args.state, "Checkpoint directory or its state.json")->required();
    for (auto* c : {c_al_run, c_al_resume}) {
        c->add_option("--annotator", al_args.annotator, "oracle, interactive or http")->capture_default_str();
        c->add_option("--host", al_args.host)->capture_default_str();
        c->add_option("--port", al_args.port)->capture_default_str();
    }

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Compare challengers with the baseline on the test split");
    c_ev->add_option("--baseline", ev.baseline, "Baseline model(s), comma separated")->required();
    c_ev->add_option("--challenger", ev.challengers, "[name=]model, repeatable")->required();
    c_ev->add_option("--test", ev.test, "Test split JSONL")->required();
    c_ev->add_option("--threshold", ev.threshold)->capture_default_str();
    c_ev->add_option("--out", ev.out, "Directory for eval_table.txt and eval.json");

    GraphArgs gr;
    auto* c_graph = app.add_subcommand("graph", "Document/area/topic graph");
    c_graph->require_subcommand(1);
    auto* c_gb = c_graph->add_subcommand("build", "Classify sentences and build the graph");
    c_gb->add_option("--documents", gr.documents)->required();
    c_gb->add_option("--areas", gr.areas)->required();
    c_gb->add_option("--sentences", gr.sentences)->required();
    c_gb->add_option("--restrictions-model", gr.restrictions_model)->required();
    c_gb->add_option("--topics-model", gr.topics_model)->required();
    c_gb->add_option("--threshold", gr.threshold)->capture_default_str();
    c_gb->add_option("--out", gr.out)->required();

    AreaReportArgs ar;
    auto* c_ar = app.add_subcommand("area-report", "Grouped restrictions, weather and similar areas for one area");
    c_ar->add_option("--graph", ar.graph)->required();
    c_ar->add_option("--area", ar.area)->required();
    c_ar->add_option("--weather", ar.weather, "Isobands GeoJSON; adds the weather section");

    std::string project_dir = ".", host = "127.0.0.1";
    int port = 8080;
    auto* c_serve = app.add_subcommand("serve", "Serve the HTTP JSON API for a project directory");
    c_serve->add_option("--project", project_dir)->capture_default_str();
    c_serve->add_option("--host", host)->capture_default_str();
    c_serve->add_option("--port", port)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_ingest) run_ingest(ingest);
        else if (*c_tp) run_textprep(tp);
        else if (*c_bs) run_bootstrap(bs);
        else if (*c_sp) run_split(sp);
        else if (*c_sy) run_synth(sy);
        else if (*c_tr) run_train_baseline(tr);
        else if (*c_al_run) return run_al(al_args);
        else if (*c_al_resume) return run_al_resume(al_args);
        else if (*c_ev) run_eval(ev);
        else if (*c_gb) run_graph_build(gr);
        else if (*c_ar) run_area_report(ar);
        else if (*c_serve) return serve_project(project_dir, host, port);
    } catch (const Error& e) {
        log("error: " + std::string(e.what()));
        return 1;
    } catch (const std::exception& e) {
        log("error: " + std::string(e.what()));
        return 1;
    }
    return 0;
}
