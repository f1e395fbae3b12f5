#include "landreuse/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"
#include "landreuse/random.hpp"
#include "landreuse/textprep.hpp"
#include "landreuse/utf8.hpp"

namespace landreuse::bootstrap {

namespace fs = std::filesystem;

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.size = j.value("size", c.size);
    if (j.contains("priors")) {
        const auto& p = j.at("priors");
        const auto names = all_label_names();
        if (p.is_object()) {
            for (const auto& [key, value] : p.items()) {
                const auto it = std::find(names.begin(), names.end(), key);
                if (it == names.end()) throw Error("synth config: unknown label '" + key + "' in priors");
                c.priors[static_cast<std::size_t>(it - names.begin())] = value.get<double>();
            }
        } else {
            const auto v = p.get<std::vector<double>>();
            if (v.size() != kAllLabelCount) throw Error("synth config: priors needs 9 values");
            std::copy(v.begin(), v.end(), c.priors.begin());
        }
    }
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    c.noise_rate = j.value("noise_rate", c.noise_rate);
    c.seed = j.value("seed", c.seed);
    c.sentences_per_page = j.value("sentences_per_page", c.sentences_per_page);
    c.pages_per_document = j.value("pages_per_document", c.pages_per_document);
    c.documents_per_area = j.value("documents_per_area", c.documents_per_area);
    c.bad_page_rate = j.value("bad_page_rate", c.bad_page_rate);
    c.empty_page_rate = j.value("empty_page_rate", c.empty_page_rate);
    c.annotator_flip_rates = j.value("annotator_flip_rates", c.annotator_flip_rates);
    return c;
}

nlohmann::json SynthConfig::to_json() const {
    nlohmann::json pri = nlohmann::json::object();
    const auto names = all_label_names();
    for (std::size_t i = 0; i < names.size(); ++i) pri[names[i]] = priors[i];
    return {{"size", size},
            {"priors", pri},
            {"signal_strength", signal_strength},
            {"noise_rate", noise_rate},
            {"seed", seed},
            {"sentences_per_page", sentences_per_page},
            {"pages_per_document", pages_per_document},
            {"documents_per_area", documents_per_area},
            {"bad_page_rate", bad_page_rate},
            {"empty_page_rate", empty_page_rate},
            {"annotator_flip_rates", annotator_flip_rates}};
}

const PhraseBank& phrase_bank() {
    static const PhraseBank bank{
        // Keyword phrases: each contains a stem of its own label only.
        {
            {"ist verboten", "ist nicht gestattet", "ist nicht erlaubt", "ist untersagt", "ist für Unbefugte gesperrt"},
            {"muss vorher gemeldet werden", "ist zu beachten", "ist nur mit Genehmigung möglich",
             "ist maximal einmal jährlich zulässig", "müssen dokumentiert werden"},
            {"bei Starkniederschlag", "bei Sturm", "bei Frost", "bei Nebel", "nach längerer Trockenheit",
             "bei Regen", "bei Schnee", "bei hoher Temperatur"},
            {"die Bebauung der Fläche", "das Errichten von Gebäuden", "eine Überbauung der Trasse",
             "der Einbau neuer Fenster", "die Mauer am Ufer"},
            {"auf dem Gelände", "wegen Risse im Damm", "bei Absenkung der Kippe", "auf weichem Boden",
             "an der Sohle des Tagebaus", "laut geotechnischem Befund"},
            {"das Betreten der Kippe", "das Befahren der Wege", "der Aufenthalt am Ufer", "das Anlegen von Booten",
             "uferseitig"},
            {"das Fällen von Bäumen", "das Pflanzen von Sträuchern", "die Baumreihe am Weg", "im Forst"},
            {"zum Schutz der Nester", "seltener Arten", "zum Schutz der Umwelt", "geschützter Biotope"},
            {"die Lagerung von Aushub", "die Entsorgung von Bauschutt", "der Abfall aus dem Betrieb",
             "das Verbringen von Erdstoffen", "das Verklappen von Schlamm"},
        },
        // Paraphrases: no stem of any label.
        {
            {"ist ausgeschlossen", "hat zu unterbleiben", "ist unzulässig", "wird nicht geduldet"},
            {"ist vorab anzuzeigen", "ist vorher abzustimmen", "ist sicherzustellen", "hat schriftlich zu erfolgen",
             "ist zwingend einzuholen"},
            {"bei heftigen Schauern", "bei Glatteis", "bei Gewitter", "bei starken Böen", "bei Hagel"},
            {"der Neubau von Hallen", "die Errichtung von Gebäuden", "das Aufstellen von Containern",
             "der Hochbau am Hafen"},
            {"wegen Setzungsfließen", "an der rutschgefährdeten Böschung", "im Bereich instabiler Kippenmassen",
             "wegen Hangrutschungen"},
            {"der Zugang zur Sperrzone", "das Begehen der Uferzone", "das Passieren der Absperrung",
             "der Zutritt zum Hang"},
            {"die Begrünung der Hänge", "die Aussaat von Gräsern", "die Gehölzpflege", "das Setzen junger Eichen"},
            {"während der Brutzeit", "im Vogelschutzgebiet", "zum Schutz der Amphibien", "im Biotop"},
            {"das Deponieren von Schutt", "das Abkippen von Material", "die Beseitigung kontaminierter Erde",
             "das Zwischenspeichern von Aushub"},
        },
        {"Im Jahr 1987", "Laut Protokoll", "Im Rahmen der Sanierung", "Nach Abschluss der Arbeiten",
         "Im Zuge der Flutung", "Gemäß Gutachten", "Im Bereich der Kippe", "Am Nordufer", "Seit der Stilllegung",
         "Nach Auskunft des Betreibers"},
        {"der Pegel", "die Zufahrt", "das Flurstück", "der Abschnitt", "die Leitung", "der Damm", "die Halde",
         "das Wehr", "die Messstelle", "der Graben"},
        {"wurde vermessen", "wurde kartiert", "wurde dokumentiert", "wurde untersucht", "wurde saniert",
         "wurde begutachtet", "wurde freigegeben", "ist im Plan verzeichnet"},
    };
    return bank;
}

namespace {

const std::vector<std::string> kTitles = {"Gutachten", "Bohrprotokoll", "Stellungnahme", "Abschlussbericht",
                                          "Sanierungsplan", "Bauantrag", "Schriftverkehr"};
const std::vector<std::string> kCategories = {"active dismantling", "dump", "shore", "lake", "forest"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[rng.index(v.size())];
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void set_label(LabelSet& ls, std::size_t l, std::uint8_t v) {
    if (l < kRestrictionCount) {
        ls.restrictions[l] = v;
    } else {
        ls.topics[l - kRestrictionCount] = v;
    }
}

bool get_label(const LabelSet& ls, std::size_t l) {
    return l < kRestrictionCount ? ls.restrictions[l] : ls.topics[l - kRestrictionCount];
}

SynthSentence make_sentence(Rng& rng, const SynthConfig& config) {
    const auto& bank = phrase_bank();
    SynthSentence s;
    for (std::size_t l = 0; l < kAllLabelCount; ++l) set_label(s.gold, l, rng.bernoulli(config.priors[l]) ? 1 : 0);
    const bool labeled = !s.gold.empty();
    s.keyword_free = labeled && rng.bernoulli(config.noise_rate);

    auto phrase_for = [&](std::size_t l) {
        const bool keyword = !s.keyword_free && rng.bernoulli(config.signal_strength);
        return pick(rng, keyword ? bank.keyword_phrases[l] : bank.paraphrases[l]);
    };
    std::vector<std::string> subject, predicate;
    for (std::size_t l = kRestrictionCount; l < kAllLabelCount; ++l)
        if (get_label(s.gold, l)) subject.push_back(phrase_for(l));
    for (std::size_t l = 0; l < kRestrictionCount; ++l)
        if (get_label(s.gold, l)) predicate.push_back(phrase_for(l));
    if (subject.empty()) subject.push_back(pick(rng, bank.neutral_subjects));
    if (predicate.empty()) predicate.push_back(pick(rng, bank.neutral_predicates));

    s.text = pick(rng, bank.openers);
    if (rng.bernoulli(0.5)) s.text += " im Abschnitt " + std::to_string(1 + rng.index(40));
    s.text += " " + join(subject, " und ") + " " + join(predicate, " und ") + ".";
    return s;
}

geo::Polygon star_polygon(Rng& rng, geo::Point center, double r_min, double r_max) {
    const std::size_t n = 6 + rng.index(5);
    geo::Ring ring;
    for (std::size_t i = 0; i < n; ++i) {
        const double angle = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.2 + 0.6 * rng.uniform()) /
                             static_cast<double>(n);
        const double r = r_min + (r_max - r_min) * rng.uniform();
        ring.push_back({center.x + r * std::cos(angle), center.y + r * std::sin(angle)});
    }
    return geo::make_polygon(std::move(ring));
}

// Breaks page text into OCR words with line numbers, hyphenating some wraps.
void emit_words(Rng& rng, const std::string& doc_id, int page_no, const std::string& text, bool bad,
                std::vector<ocr::WordConfidenceRecord>& out) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ') {
            if (i > start) tokens.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    auto conf = [&] { return bad ? 20.0 + 55.0 * rng.uniform() : 78.0 + 21.0 * rng.uniform(); };
    int line = 1;
    std::size_t on_line = 0;
    const std::size_t width = 10 + rng.index(5);
    for (const auto& tok : tokens) {
        if (on_line + 1 == width) {
            const auto cps = utf8::decode(tok);
            bool all_alpha = cps.size() >= 6;
            for (char32_t c : cps) all_alpha = all_alpha && utf8::is_alpha(c);
            const std::size_t cut = cps.size() / 2;
            if (all_alpha && utf8::is_lower(cps[cut]) && rng.bernoulli(0.3)) {
                out.push_back({doc_id, page_no, utf8::encode(cps.substr(0, cut)) + "-", conf(), line});
                ++line;
                out.push_back({doc_id, page_no, utf8::encode(cps.substr(cut)), conf(), line});
                on_line = 1;
                continue;
            }
        }
        if (on_line == width) {
            ++line;
            on_line = 0;
        }
        out.push_back({doc_id, page_no, tok, conf(), line});
        ++on_line;
    }
}

}  // namespace

SynthCorpus generate_synthetic_corpus(const SynthConfig& config) {
    for (double p : config.priors) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("synth config: priors must lie in [0,1]");
    }
    if (!(config.noise_rate >= 0.0 && config.noise_rate <= 1.0)) throw Error("synth config: noise_rate must lie in [0,1]");
    if (!(config.signal_strength >= 0.0 && config.signal_strength <= 1.0)) {
        throw Error("synth config: signal_strength must lie in [0,1]");
    }
    if (config.sentences_per_page == 0 || config.pages_per_document == 0 || config.documents_per_area == 0) {
        throw Error("synth config: page, document and area sizes must be positive");
    }
    for (double f : config.annotator_flip_rates) {
        if (!(f >= 0.0 && f <= 1.0)) throw Error("synth config: annotator flip rates must lie in [0,1]");
    }

    SynthCorpus corpus;
    Rng text_rng({config.seed, 1});
    Rng ocr_rng({config.seed, 2});
    Rng ann_rng({config.seed, 3});
    Rng geo_rng({config.seed, 4});

    std::size_t produced = 0;
    std::size_t doc_no = 0;
    while (produced < config.size) {
        ++doc_no;
        char id[32];
        std::snprintf(id, sizeof id, "D%05zu", doc_no);
        ocr::DocumentMeta doc{id, pick(geo_rng, kTitles) + " " + std::to_string(doc_no),
                              doc_no % 2 ? "Lausitz" : "Mitteldeutschland", {}};
        for (int page = 1; page <= static_cast<int>(config.pages_per_document) && produced < config.size; ++page) {
            if (ocr_rng.bernoulli(config.empty_page_rate)) {
                corpus.words.push_back({doc.doc_id, page, "", -1.0, 0});
                continue;
            }
            const bool bad = ocr_rng.bernoulli(config.bad_page_rate);
            std::string page_text;
            for (std::size_t k = 0; k < config.sentences_per_page && produced < config.size; ++k, ++produced) {
                auto s = make_sentence(text_rng, config);
                s.doc_id = doc.doc_id;
                s.page_no = page;
                s.sentence_id = textprep::make_sentence_id(doc.doc_id, page, k);
                if (!page_text.empty()) page_text += ' ';
                page_text += s.text;
                corpus.sentences.push_back(std::move(s));
            }
            emit_words(ocr_rng, doc.doc_id, page, page_text, bad, corpus.words);
        }
        corpus.documents.push_back(std::move(doc));
    }

    // Areas on a grid of 1 km cells; documents attach to their block's area
    // and sometimes to a second one.
    const std::size_t n_areas = (corpus.documents.size() + config.documents_per_area - 1) / config.documents_per_area;
    const std::size_t cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(n_areas))));
    const double origin_x = 300000.0, origin_y = 5700000.0, cell = 1000.0;
    for (std::size_t a = 0; a < n_areas; ++a) {
        char id[32];
        std::snprintf(id, sizeof id, "A%04zu", a + 1);
        const geo::Point center{origin_x + cell * (static_cast<double>(a % cols) + 0.5),
                                origin_y + cell * (static_cast<double>(a / cols) + 0.5)};
        geo::GeoFeature f{id, pick(geo_rng, kCategories), star_polygon(geo_rng, center, 200.0, 450.0), {}};
        f.properties["name"] = "Fläche " + std::to_string(a + 1);
        corpus.areas.push_back(std::move(f));
    }
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        auto& doc = corpus.documents[d];
        const std::size_t home = d / config.documents_per_area;
        doc.area_ids.push_back(corpus.areas[home].area_id);
        if (n_areas > 1 && geo_rng.bernoulli(0.2)) {
            const std::size_t other = (home + 1 + geo_rng.index(n_areas - 1)) % n_areas;
            doc.area_ids.push_back(corpus.areas[other].area_id);
        }
    }

    // Horizontal precipitation bands, offset against the grid so that some
    // areas straddle two bands.
    const std::size_t rows = (n_areas + cols - 1) / cols;
    const double height = cell * static_cast<double>(std::max<std::size_t>(rows, 1));
    const double width = cell * static_cast<double>(cols);
    const std::vector<double> values = {2.0, 5.0, 10.0, 25.0};
    const double strip = height / static_cast<double>(values.size());
    auto boundary = [&](std::size_t b) {
        if (b == 0) return origin_y;
        if (b == values.size()) return origin_y + height;
        return origin_y + strip * (static_cast<double>(b) + 0.3);
    };
    for (std::size_t b = 0; b < values.size(); ++b) {
        const double y0 = boundary(b), y1 = boundary(b + 1);
        corpus.isobands.push_back({geo::make_polygon({{origin_x, y0}, {origin_x + width, y0},
                                                      {origin_x + width, y1}, {origin_x, y1}}),
                                   values[b]});
    }

    for (const auto& s : corpus.sentences) {
        for (std::size_t k = 0; k < config.annotator_flip_rates.size(); ++k) {
            AnnotationRecord r{s.sentence_id, "A" + std::to_string(k + 1), s.gold};
            for (std::size_t l = 0; l < kAllLabelCount; ++l) {
                if (ann_rng.bernoulli(config.annotator_flip_rates[k])) set_label(r.labels, l, get_label(r.labels, l) ? 0 : 1);
            }
            corpus.annotations.push_back(std::move(r));
        }
    }
    return corpus;
}

void write_synthetic_corpus(const SynthCorpus& corpus, const SynthConfig& config, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::string tsv = "doc_id\tpage_no\tword\tconfidence\tline_no\n";
        char buf[64];
        for (const auto& w : corpus.words) {
            std::snprintf(buf, sizeof buf, "%.2f", w.confidence);
            tsv += w.doc_id + '\t' + std::to_string(w.page_no) + '\t' + w.word + '\t' + buf + '\t' +
                   std::to_string(w.line_no) + '\n';
        }
        io::write_file_atomic(dir / "ocr.tsv", tsv);
    }
    std::vector<nlohmann::json> rows;
    for (const auto& d : corpus.documents) rows.push_back(ocr::to_json(d));
    io::write_jsonl_atomic(dir / "documents.jsonl", rows);
    rows.clear();
    for (const auto& s : corpus.sentences) {
        auto j = landreuse::to_json(s.gold);
        j["sentence_id"] = s.sentence_id;
        j["text"] = s.text;
        j["keyword_free"] = s.keyword_free;
        rows.push_back(std::move(j));
    }
    io::write_jsonl_atomic(dir / "gold.jsonl", rows);
    rows.clear();
    for (const auto& a : corpus.annotations) rows.push_back(to_json(a));
    io::write_jsonl_atomic(dir / "annotations.jsonl", rows);
    io::write_json_atomic(dir / "areas.geojson", geo::features_to_geojson(corpus.areas), -1);
    io::write_json_atomic(dir / "weather.geojson", geo::isobands_to_geojson(corpus.isobands), -1);
    io::write_json_atomic(dir / "synth_config.json", config.to_json());
}

}  // namespace landreuse::bootstrap
