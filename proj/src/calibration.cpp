#include "rankstab/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <boost/tokenizer.hpp>
#include <fmt/format.h>

#include "rankstab/error.hpp"

namespace rankstab {

namespace {

std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(a, b - a + 1));
}

int parse_int_field(const std::string& field, const char* name, int lo, int hi) {
    int v = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw DataError(fmt::format("{} '{}' is not an integer", name, field));
    if (v < lo || v > hi) throw DataError(fmt::format("{} {} outside [{}, {}]", name, v, lo, hi));
    return v;
}

std::map<std::string, std::vector<const AnnotationRecord*>> by_dialogue(std::span<const AnnotationRecord> records) {
    std::map<std::string, std::vector<const AnnotationRecord*>> out;
    for (const auto& r : records) out[r.dialogue_id].push_back(&r);
    return out;
}

KappaSummary kappa_for(const std::vector<std::vector<const AnnotationRecord*>>& items, int n_raters,
                       std::size_t n_categories, int AnnotationRecord::*field) {
    KappaSummary k;
    k.n_items = items.size();
    k.n_raters = n_raters;
    if (items.empty()) {
        k.note = "no dialogue with at least two raters";
        return k;
    }
    std::vector<std::vector<int>> table;
    for (const auto& raters : items) {
        std::vector<int> row(n_categories, 0);
        for (const auto* r : raters) ++row[static_cast<std::size_t>(r->*field)];
        table.push_back(std::move(row));
    }
    try {
        k.kappa = fleiss_kappa(table, n_raters);
        k.band = classify_agreement(*k.kappa);
    } catch (const DataError& e) {
        k.note = e.what();
    }
    return k;
}

} // namespace

LoadResult<AnnotationRecord> read_annotation_csv(const std::filesystem::path& path) {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    LoadResult<AnnotationRecord> out;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        std::string line = lines[i];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
            std::vector<std::string> fields;
            Tokenizer tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
            for (const auto& f : tok) fields.push_back(f);
            if (i == 0 && !fields.empty() && trim(fields[0]) == "dialogue_id") continue;
            if (fields.size() < 4 || fields.size() > 5) {
                throw DataError(fmt::format("expected 4 or 5 fields, found {}", fields.size()));
            }
            AnnotationRecord r;
            r.dialogue_id = trim(fields[0]);
            r.annotator_id = trim(fields[1]);
            if (r.dialogue_id.empty() || r.annotator_id.empty()) throw DataError("empty dialogue or annotator id");
            r.coherence = parse_int_field(trim(fields[2]), "coherence", 0, 1);
            r.fluency = parse_int_field(trim(fields[3]), "fluency", 0, 3);
            if (fields.size() == 5 && !trim(fields[4]).empty()) r.feedback = fields[4];
            out.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            out.errors.push_back({i + 1, e.what()});
        }
    }
    return out;
}

AnnotationSet ingest_annotations(const std::filesystem::path& path) {
    LoadResult<AnnotationRecord> loaded = path.extension() == ".csv" ? read_annotation_csv(path)
                                                                      : load_records<AnnotationRecord>(path);
    AnnotationSet set = summarize_annotations(std::move(loaded.records));
    set.errors.insert(set.errors.begin(), loaded.errors.begin(), loaded.errors.end());
    return set;
}

AnnotationSet summarize_annotations(std::vector<AnnotationRecord> records) {
    AnnotationSet set;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        if (!seen.insert({r.dialogue_id, r.annotator_id}).second) {
            set.errors.push_back({0, fmt::format("duplicate rating of {} by {}", r.dialogue_id, r.annotator_id)});
            continue;
        }
        set.records.push_back(std::move(r));
    }

    const auto groups = by_dialogue(set.records);
    std::map<std::size_t, std::size_t> count_freq;
    for (const auto& [id, raters] : groups) {
        if (raters.size() >= 2) ++count_freq[raters.size()];
    }
    std::size_t n_raters = 0, best = 0;
    for (const auto& [count, freq] : count_freq) {
        if (freq >= best) {
            best = freq;
            n_raters = count;
        }
    }
    std::vector<std::vector<const AnnotationRecord*>> items;
    for (const auto& [id, raters] : groups) {
        if (raters.size() < 2) {
            set.excluded.push_back(fmt::format("{}: fewer than 2 raters", id));
        } else if (raters.size() != n_raters) {
            set.excluded.push_back(
                fmt::format("{}: {} raters, agreement uses dialogues with {}", id, raters.size(), n_raters));
        } else {
            items.push_back(raters);
        }
    }
    set.coherence = kappa_for(items, static_cast<int>(n_raters), 2, &AnnotationRecord::coherence);
    set.fluency = kappa_for(items, static_cast<int>(n_raters), 4, &AnnotationRecord::fluency);
    return set;
}

ReferenceSet reference_labels(std::span<const AnnotationRecord> records) {
    ReferenceSet out;
    std::vector<double> coherence, fluency;
    for (const auto& [id, raters] : by_dialogue(records)) {
        if (raters.size() < 2) {
            out.excluded.push_back(fmt::format("{}: fewer than 2 raters", id));
            continue;
        }
        ReferenceLabel label;
        label.dialogue_id = id;
        label.n_raters = static_cast<int>(raters.size());
        int ones = 0;
        std::vector<int> f;
        for (const auto* r : raters) {
            ones += r->coherence;
            f.push_back(r->fluency);
        }
        const int zeros = label.n_raters - ones;
        if (ones != zeros) {
            label.coherence_ref = ones > zeros ? 1 : 0;
            coherence.push_back(*label.coherence_ref);
        } else {
            out.excluded.push_back(fmt::format("{}: coherence tie", id));
        }
        std::sort(f.begin(), f.end());
        label.fluency_ref = f[(f.size() - 1) / 2];
        fluency.push_back(label.fluency_ref);
        out.labels.push_back(std::move(label));
    }
    out.coherence = mean_sd(coherence);
    out.fluency = mean_sd(fluency);
    return out;
}

AlignmentResult judge_human_alignment(std::span<const JudgeScoreRecord> judge_scores,
                                      std::span<const ReferenceLabel> refs,
                                      const std::map<std::string, std::string>& dialogue_model) {
    std::map<std::string, const JudgeScoreRecord*> judged;
    for (const auto& r : judge_scores) {
        if (r.judge_model != judge_scores.front().judge_model) {
            throw DataError("alignment expects scores from a single judge");
        }
        if (!judged.emplace(r.dialogue_id, &r).second) {
            throw DataError(fmt::format("dialogue {} judged more than once", r.dialogue_id));
        }
    }

    AlignmentResult out;
    std::vector<double> jc, hc, jf, hf;
    struct Sums {
        double jc = 0, hc = 0, jf = 0, hf = 0;
        std::size_t nc = 0, nf = 0;
    };
    std::map<std::string, Sums> per_model;
    for (const auto& ref : refs) {
        auto it = judged.find(ref.dialogue_id);
        if (it == judged.end()) continue;
        ++out.n_overlap;
        const auto& s = *it->second;
        jf.push_back(s.fluency);
        hf.push_back(ref.fluency_ref);
        Sums* m = nullptr;
        if (auto mit = dialogue_model.find(ref.dialogue_id); mit != dialogue_model.end()) m = &per_model[mit->second];
        if (m) {
            m->jf += s.fluency;
            m->hf += ref.fluency_ref;
            ++m->nf;
        }
        if (ref.coherence_ref) {
            jc.push_back(s.coherence);
            hc.push_back(*ref.coherence_ref);
            if (m) {
                m->jc += s.coherence;
                m->hc += *ref.coherence_ref;
                ++m->nc;
            }
        }
    }
    if (out.n_overlap < 10) {
        throw DataError(fmt::format("insufficient calibration sample: {} overlapping dialogues, need 10", out.n_overlap));
    }
    out.n_coherence = jc.size();
    out.rho_fluency = spearman(jf, hf);
    out.rho_coherence = jc.size() >= 2 ? spearman(jc, hc) : 0.0;

    out.n_models = per_model.size();
    if (per_model.size() >= 2) {
        std::vector<double> mjc, mhc, mjf, mhf;
        for (const auto& [model, s] : per_model) {
            mjf.push_back(s.jf / static_cast<double>(s.nf));
            mhf.push_back(s.hf / static_cast<double>(s.nf));
            if (s.nc > 0) {
                mjc.push_back(s.jc / static_cast<double>(s.nc));
                mhc.push_back(s.hc / static_cast<double>(s.nc));
            }
        }
        out.tau_fluency = kendall_tau_b(mjf, mhf);
        if (mjc.size() >= 2) out.tau_coherence = kendall_tau_b(mjc, mhc);
    }
    return out;
}

GateVerdict stability_gate(std::span<const CorpusMetrics> surface, const std::optional<AlignmentResult>& alignment,
                           const GateThresholds& thresholds) {
    GateVerdict v;
    std::map<std::string, std::vector<const CorpusMetrics*>> per_model;
    for (const auto& m : surface) per_model[m.generator_model].push_back(&m);

    bool ok = !per_model.empty();
    if (per_model.empty()) v.stage1_evidence.push_back("no surface metrics available");
    for (const auto& [model, cells] : per_model) {
        std::vector<std::pair<std::string, double>> sims;
        for (const auto* c : cells) {
            if (!c->intra_sim_mean.value) {
                v.stage1_evidence.push_back(
                    fmt::format("{} {}: similarity unavailable ({})", model, to_string(c->language), c->intra_sim_mean.note));
                ok = false;
                continue;
            }
            sims.emplace_back(std::string(to_string(c->language)), *c->intra_sim_mean.value);
        }
        if (sims.size() < 2) {
            v.stage1_evidence.push_back(fmt::format("{}: fewer than two languages with similarity", model));
            ok = false;
            continue;
        }
        const auto [lo, hi] = std::minmax_element(sims.begin(), sims.end(),
                                                  [](const auto& a, const auto& b) { return a.second < b.second; });
        const double delta = hi->second - lo->second;
        const bool pass = delta <= thresholds.max_similarity_delta;
        v.stage1_evidence.push_back(fmt::format("{}: similarity delta {:.4f} ({} {:.4f} vs {} {:.4f}) {} {:.2f}", model,
                                                delta, hi->first, hi->second, lo->first, lo->second,
                                                pass ? "<=" : ">", thresholds.max_similarity_delta));
        ok = ok && pass;
    }
    v.stage1_generation_ok = ok;

    std::string stage3;
    if (alignment) {
        v.stage2_sample_size = alignment->n_overlap;
        v.stage3_rho["coherence"] = alignment->rho_coherence;
        v.stage3_rho["fluency"] = alignment->rho_fluency;
        if (alignment->tau_coherence) v.stage3_tau["coherence"] = *alignment->tau_coherence;
        if (alignment->tau_fluency) v.stage3_tau["fluency"] = *alignment->tau_fluency;
        v.stage3_alignment_ok = alignment->rho_coherence >= thresholds.min_rho && alignment->rho_fluency >= thresholds.min_rho;
        stage3 = fmt::format("judge-human rho is {:.2f} for coherence and {:.2f} for fluency against a threshold of {:.2f}",
                             alignment->rho_coherence, alignment->rho_fluency, thresholds.min_rho);
    } else {
        v.stage3_alignment_ok = false;
        stage3 = "judge-human alignment was not measured";
    }
    v.stage4_calibration_required = !v.stage3_alignment_ok;

    v.narrative = fmt::format(
        "Stage 1 (generation consistency): {}. Stage 2 (human sample): {} annotated dialogues overlap the judge sample. "
        "Stage 3 (alignment): {}, so it {}. Stage 4: {}.",
        v.stage1_generation_ok ? "passed, similarity deltas stay within the threshold"
                               : "failed, see the similarity evidence",
        v.stage2_sample_size, stage3, v.stage3_alignment_ok ? "passes" : "fails",
        v.stage4_calibration_required ? "language-specific judge calibration is required before use"
                                      : "no extra calibration required");
    return v;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const KappaSummary& k) {
    j = nlohmann::json{{"n_items", k.n_items}, {"n_raters", k.n_raters}, {"note", k.note}};
    j["kappa"] = k.kappa ? nlohmann::json(*k.kappa) : nlohmann::json(nullptr);
    j["band"] = k.band ? nlohmann::json(to_string(*k.band)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, KappaSummary& k) {
    k.n_items = j.at("n_items").get<std::size_t>();
    k.n_raters = j.at("n_raters").get<int>();
    k.note = j.at("note").get<std::string>();
    k.kappa.reset();
    k.band.reset();
    if (!j.at("kappa").is_null()) {
        k.kappa = j.at("kappa").get<double>();
        k.band = classify_agreement(*k.kappa);
    }
}

void to_json(nlohmann::json& j, const ReferenceLabel& r) {
    j = nlohmann::json{{"dialogue_id", r.dialogue_id}, {"fluency_ref", r.fluency_ref}, {"n_raters", r.n_raters}};
    j["coherence_ref"] = r.coherence_ref ? nlohmann::json(*r.coherence_ref) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const AlignmentResult& a) {
    j = nlohmann::json{{"n_overlap", a.n_overlap},         {"n_coherence", a.n_coherence},
                       {"rho_coherence", a.rho_coherence}, {"rho_fluency", a.rho_fluency},
                       {"n_models", a.n_models}};
    j["tau_coherence"] = a.tau_coherence ? nlohmann::json(*a.tau_coherence) : nlohmann::json(nullptr);
    j["tau_fluency"] = a.tau_fluency ? nlohmann::json(*a.tau_fluency) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, AlignmentResult& a) {
    a.n_overlap = j.at("n_overlap").get<std::size_t>();
    a.n_coherence = j.at("n_coherence").get<std::size_t>();
    a.rho_coherence = j.at("rho_coherence").get<double>();
    a.rho_fluency = j.at("rho_fluency").get<double>();
    a.n_models = j.at("n_models").get<std::size_t>();
    a.tau_coherence.reset();
    a.tau_fluency.reset();
    if (!j.at("tau_coherence").is_null()) a.tau_coherence = j.at("tau_coherence").get<double>();
    if (!j.at("tau_fluency").is_null()) a.tau_fluency = j.at("tau_fluency").get<double>();
}

void to_json(nlohmann::json& j, const GateVerdict& g) {
    j = nlohmann::json{{"stage1_generation_ok", g.stage1_generation_ok},
                       {"stage1_evidence", g.stage1_evidence},
                       {"stage2_sample_size", g.stage2_sample_size},
                       {"stage3_rho", g.stage3_rho},
                       {"stage3_tau", g.stage3_tau},
                       {"stage3_alignment_ok", g.stage3_alignment_ok},
                       {"stage4_calibration_required", g.stage4_calibration_required},
                       {"narrative", g.narrative}};
}

void from_json(const nlohmann::json& j, GateVerdict& g) {
    g.stage1_generation_ok = j.at("stage1_generation_ok").get<bool>();
    g.stage1_evidence = j.at("stage1_evidence").get<std::vector<std::string>>();
    g.stage2_sample_size = j.at("stage2_sample_size").get<std::size_t>();
    g.stage3_rho = j.at("stage3_rho").get<std::map<std::string, double>>();
    g.stage3_tau = j.at("stage3_tau").get<std::map<std::string, double>>();
    g.stage3_alignment_ok = j.at("stage3_alignment_ok").get<bool>();
    g.stage4_calibration_required = j.at("stage4_calibration_required").get<bool>();
    g.narrative = j.at("narrative").get<std::string>();
}

} // namespace rankstab
