#include "rankstab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "rankstab/calibration.hpp"
#include "rankstab/error.hpp"
#include "rankstab/judge.hpp"
#include "rankstab/records.hpp"
#include "rankstab/surface_metrics.hpp"

namespace rankstab {

std::string format_corr(double x) {
    auto s = fmt::format("{:.2f}", x);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string format_score(double x) {
    auto s = format_corr(x);
    if (s.starts_with("0.")) return s.substr(1);
    if (s.starts_with("-0.")) return "-" + s.substr(2);
    return s;
}

std::string format_mean_sd(double mean, double sd) { return fmt::format("{} ±{}", format_score(mean), format_score(sd)); }

std::string format_ci(double point, std::pair<double, double> ci) {
    return fmt::format("{} [{}, {}]", format_corr(point), format_corr(ci.first), format_corr(ci.second));
}

std::string format_p(double p) { return format_corr(p); }

std::string metric_title(const std::string& metric) {
    if (metric == "lra") return "LRA";
    if (metric.empty()) return metric;
    std::string out = metric;
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

std::string pair_title(const LanguagePair& pair) { return fmt::format("{}–{}", pair.first, pair.second); }

std::string stability_row(const StabilityResult& r) {
    return fmt::format("| {} | {} | {} | {} | {} | {}, {} |", metric_title(r.metric), pair_title(r.pair),
                       format_corr(r.tau_point), format_ci(r.tau_boot_mean, r.tau_ci),
                       format_ci(r.rho_boot_mean, r.rho_ci), r.inversions, format_p(r.p_value));
}

std::string stability_csv(std::span<const StabilityResult> results) {
    std::string out = "pair,metric,tau,ci_lo,ci_hi,inversions,p\n";
    for (const auto& r : results) {
        out += fmt::format("{}-{},{},{:.6f},{:.6f},{:.6f},{},{:.6f}\n", r.pair.first, r.pair.second, r.metric,
                           r.tau_boot_mean, r.tau_ci.first, r.tau_ci.second, r.inversions, r.p_value);
    }
    return out;
}

namespace {

std::string notice(std::string_view what, const std::filesystem::path& path, const Workspace& ws) {
    return fmt::format("_Not available: no {} found at `{}`._\n",
                       what, std::filesystem::relative(path, ws.root()).generic_string());
}

template <class T>
std::optional<LoadResult<T>> try_load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    return load_records<T>(path);
}

std::string skipped_lines(std::size_t n) {
    return n == 0 ? std::string{} : fmt::format("\n_{} malformed record line(s) were skipped._\n", n);
}

std::vector<Language> languages_of(const std::set<Language>& present) {
    std::vector<Language> out;
    for (auto l : kLanguages) {
        if (present.contains(l)) out.push_back(l);
    }
    return out;
}

/// Markdown table from a header and rows of cells.
std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out = "|";
    for (const auto& h : header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? "---|" : "---:|";
    out += "\n";
    for (const auto& row : rows) {
        out += "|";
        for (const auto& c : row) out += " " + c + " |";
        out += "\n";
    }
    return out;
}

struct Cell {
    std::optional<double> value;
    std::optional<double> sd;
    bool flag = false;
};

/// Renders one column of cells, bolding the best displayed value(s).
std::vector<std::string> render_column(const std::vector<Cell>& cells, bool higher_is_better) {
    std::optional<double> best;
    for (const auto& c : cells) {
        if (!c.value) continue;
        const double shown = std::round(*c.value * 100.0) / 100.0;
        if (!best || (higher_is_better ? shown > *best : shown < *best)) best = shown;
    }
    std::vector<std::string> out;
    for (const auto& c : cells) {
        if (!c.value) {
            out.push_back("n/a");
            continue;
        }
        const double shown = std::round(*c.value * 100.0) / 100.0;
        std::string s = format_score(*c.value);
        if (best && shown == *best) s = "**" + s + "**";
        if (c.sd) s += " ±" + format_score(*c.sd);
        if (c.flag) s += " †";
        out.push_back(std::move(s));
    }
    return out;
}

/// Assembles rows × (column groups × languages) from per-column cells.
std::string grid(const std::vector<std::string>& models, const std::vector<std::string>& column_names,
                 const std::vector<std::vector<Cell>>& columns, const std::vector<bool>& higher_is_better) {
    std::vector<std::string> header{"Model"};
    header.insert(header.end(), column_names.begin(), column_names.end());
    std::vector<std::vector<std::string>> rendered;
    for (std::size_t c = 0; c < columns.size(); ++c) rendered.push_back(render_column(columns[c], higher_is_better[c]));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t m = 0; m < models.size(); ++m) {
        std::vector<std::string> row{models[m]};
        for (const auto& col : rendered) row.push_back(col[m]);
        rows.push_back(std::move(row));
    }
    return table(header, rows);
}

std::string judge_section(const Workspace& ws) {
    std::string out = "## Judge scores\n\n";
    auto judged = try_load<AggregateScores>(ws.judge_summary());
    auto lra = try_load<LRASummary>(ws.lra_summary());
    if (!judged && !lra) return out + notice("judge or LRA summaries", ws.judge_summary(), ws);

    using Key = std::pair<std::string, Language>; // judge, prompt language
    std::map<Key, std::map<std::pair<std::string, Language>, const AggregateScores*>> groups;
    if (judged) {
        for (const auto& a : judged->records) groups[{a.judge_model, a.prompt_language}][{a.generator_model, a.language}] = &a;
    }
    std::map<Key, std::map<std::pair<std::string, Language>, const AggregateScores*>> lra_groups;
    if (lra) {
        for (const auto& s : lra->records) {
            const auto& a = s.aggregate;
            lra_groups[{a.judge_model, a.prompt_language}][{a.generator_model, a.language}] = &a;
            groups[{a.judge_model, a.prompt_language}];
        }
    }

    bool any_flag = false;
    for (const auto& [key, cells] : groups) {
        std::set<std::string> model_set;
        std::set<Language> lang_set;
        for (const auto& [cell, _] : cells) {
            model_set.insert(cell.first);
            lang_set.insert(cell.second);
        }
        for (const auto& [cell, _] : lra_groups[key]) {
            model_set.insert(cell.first);
            lang_set.insert(cell.second);
        }
        const std::vector<std::string> models(model_set.begin(), model_set.end());
        const auto langs = languages_of(lang_set);

        std::vector<std::string> names;
        std::vector<std::vector<Cell>> columns;
        for (auto metric : kScoreMetrics) {
            const auto& source = metric == ScoreMetric::lra ? lra_groups[key] : cells;
            for (auto lang : langs) {
                names.push_back(fmt::format("{} {}", short_name(metric), to_string(lang)));
                std::vector<Cell> col;
                for (const auto& model : models) {
                    Cell c;
                    if (auto it = source.find({model, lang}); it != source.end()) {
                        if (auto mit = it->second->metrics.find(metric); mit != it->second->metrics.end() && mit->second.n > 0) {
                            c.value = mit->second.mean;
                            c.sd = mit->second.sd;
                            c.flag = it->second->unreliable;
                            any_flag = any_flag || c.flag;
                        }
                    }
                    col.push_back(c);
                }
                columns.push_back(std::move(col));
            }
        }
        out += fmt::format("Judge `{}`, {} meta-prompt. Mean ±sd per dialogue; best per column in bold.\n\n", key.first,
                           to_string(key.second));
        out += grid(models, names, columns, std::vector<bool>(columns.size(), true));
        out += "\n";
    }
    if (any_flag) out += "† more than 20% of judge calls for this cell failed to parse; the cell is unreliable.\n\n";
    if (judged) out += skipped_lines(judged->errors.size());
    if (lra) out += skipped_lines(lra->errors.size());
    if (!judged) out += notice("rubric score summaries", ws.judge_summary(), ws);
    if (!lra) out += notice("LRA summaries", ws.lra_summary(), ws);
    return out;
}

std::string lra_section(const Workspace& ws) {
    std::string out = "## Label recovery by category\n\n";
    auto lra = try_load<LRASummary>(ws.lra_summary());
    if (!lra) return out + notice("LRA summaries", ws.lra_summary(), ws);
    std::vector<const LRASummary*> rows;
    for (const auto& s : lra->records) rows.push_back(&s);
    std::sort(rows.begin(), rows.end(), [](const LRASummary* a, const LRASummary* b) {
        return std::tie(a->aggregate.judge_model, a->aggregate.generator_model, a->aggregate.language) <
               std::tie(b->aggregate.judge_model, b->aggregate.generator_model, b->aggregate.language);
    });
    std::vector<std::string> header{"Judge", "Model", "Lang"};
    for (auto c : kCategories) header.emplace_back(to_string(c));
    header.emplace_back("Overall");
    std::vector<std::vector<std::string>> body;
    for (const auto* s : rows) {
        std::vector<std::string> row{s->aggregate.judge_model, s->aggregate.generator_model,
                                     std::string(to_string(s->aggregate.language))};
        for (auto c : kCategories) {
            auto it = s->accuracy.find(c);
            row.push_back(it == s->accuracy.end() ? "n/a" : format_score(it->second));
        }
        row.push_back(format_score(s->overall));
        body.push_back(std::move(row));
    }
    out += table(header, body) + skipped_lines(lra->errors.size());

    const auto cmp_path = ws.judge_comparison();
    if (std::filesystem::exists(cmp_path)) {
        const auto cmp = read_json_file(cmp_path).get<JudgeComparison>();
        out += "\nInter-judge Spearman correlation over model-category accuracies:\n\n";
        std::vector<std::string> h{"Judge"};
        h.insert(h.end(), cmp.judges.begin(), cmp.judges.end());
        std::vector<std::vector<std::string>> b;
        for (std::size_t i = 0; i < cmp.judges.size(); ++i) {
            std::vector<std::string> row{cmp.judges[i]};
            for (std::size_t k = 0; k < cmp.judges.size(); ++k) row.push_back(format_corr(cmp.rho[i][k]));
            b.push_back(std::move(row));
        }
        out += table(h, b);
        out += fmt::format("\nMean correlation: {}\n", format_corr(cmp.mean_rho));
    }
    return out;
}

std::string metrics_section(const Workspace& ws) {
    std::string out = "## Automatic metrics\n\n";
    auto loaded = try_load<CorpusMetrics>(ws.metrics_summary());
    if (!loaded) return out + notice("metric summaries", ws.metrics_summary(), ws);

    std::map<std::pair<std::string, Language>, const CorpusMetrics*> cells;
    std::set<std::string> model_set;
    std::set<Language> lang_set;
    for (const auto& m : loaded->records) {
        cells[{m.generator_model, m.language}] = &m;
        model_set.insert(m.generator_model);
        lang_set.insert(m.language);
    }
    const std::vector<std::string> models(model_set.begin(), model_set.end());
    const auto langs = languages_of(lang_set);

    struct Spec {
        const char* name;
        bool higher;
        std::function<Cell(const CorpusMetrics&)> get;
    };
    auto opt = [](const OptionalValue& v) {
        Cell c;
        c.value = v.value;
        return c;
    };
    const std::vector<Spec> specs{
        {"TTR", true, [](const CorpusMetrics& m) { return Cell{m.ttr_mean, m.ttr_sd, false}; }},
        {"MATTR", true, [](const CorpusMetrics& m) { return Cell{m.mattr_mean, m.mattr_sd, false}; }},
        {"Full Self-BLEU", false, [&](const CorpusMetrics& m) { return opt(m.self_bleu_full); }},
        {"Agent Self-BLEU", false, [&](const CorpusMetrics& m) { return opt(m.self_bleu_agent); }},
        {"Client Self-BLEU", false, [&](const CorpusMetrics& m) { return opt(m.self_bleu_client); }},
        {"Intra Model Sim", true,
         [](const CorpusMetrics& m) {
             Cell c;
             c.value = m.intra_sim_mean.value;
             c.sd = m.intra_sim_sd.value;
             return c;
         }},
    };
    std::vector<std::string> names;
    std::vector<std::vector<Cell>> columns;
    std::vector<bool> higher;
    std::vector<std::string> notes;
    for (const auto& spec : specs) {
        for (auto lang : langs) {
            names.push_back(fmt::format("{} {}", spec.name, to_string(lang)));
            std::vector<Cell> col;
            for (const auto& model : models) {
                auto it = cells.find({model, lang});
                col.push_back(it == cells.end() ? Cell{} : spec.get(*it->second));
            }
            columns.push_back(std::move(col));
            higher.push_back(spec.higher);
        }
    }
    for (const auto& [key, m] : cells) {
        for (const auto* v : {&m->self_bleu_full, &m->self_bleu_agent, &m->self_bleu_client, &m->intra_sim_mean}) {
            if (!v->value && !v->note.empty()) {
                notes.push_back(fmt::format("- {} {}: {}", key.first, to_string(key.second), v->note));
            }
        }
    }
    out += "Mean ±sd over dialogues for TTR, MATTR and similarity; Self-BLEU is corpus level. Best per column in bold "
           "(lowest for Self-BLEU).\n\n";
    out += grid(models, names, columns, higher);
    if (!notes.empty()) {
        notes.erase(std::unique(notes.begin(), notes.end()), notes.end());
        out += "\nAbsent values:\n\n";
        for (const auto& n : notes) out += n + "\n";
    }
    return out + skipped_lines(loaded->errors.size());
}

std::string stability_section(const Workspace& ws, std::string& csv) {
    std::string out = "## Ranking stability\n\n";
    auto loaded = try_load<StabilityResult>(ws.stability());
    csv = stability_csv({});
    if (!loaded) return out + notice("stability results", ws.stability(), ws);
    const auto& rs = loaded->records;
    csv = stability_csv(rs);
    if (rs.empty()) return out + "_No stability results were stored._\n";
    out += "| Metric | Pair | τ (point) | Kendall τ [95% CI] | Spearman ρ [95% CI] | Inversions (obs, p) |\n";
    out += "|---|---|---:|---:|---:|---:|\n";
    for (const auto& r : rs) out += stability_row(r) + "\n";
    std::set<std::string> meta;
    for (const auto& r : rs) {
        meta.insert(fmt::format("{} models, at most {} inversions; {} bootstrap replicates; {} permutation test over {} "
                                "assignments",
                                r.n_models, r.max_inversions, r.n_bootstrap, to_string(r.permutation_mode),
                                r.n_assignments));
    }
    out += "\nτ and ρ are bootstrap means with percentile intervals; τ (point) uses the full-sample means.\n";
    for (const auto& m : meta) out += "- " + m + "\n";
    return out + skipped_lines(loaded->errors.size());
}

std::string calibration_section(const Workspace& ws) {
    std::string out = "## Human calibration\n\n";
    const auto path = ws.calibration();
    if (!std::filesystem::exists(path)) {
        return out + notice("calibration summary", path, ws) + "\n## Validity gate\n\n" + notice("gate verdict", path, ws);
    }
    const auto doc = read_json_file(path);
    const auto& ann = doc.at("annotations");
    std::vector<std::vector<std::string>> rows;
    for (const char* q : {"coherence", "fluency"}) {
        const auto k = ann.at(q).get<KappaSummary>();
        rows.push_back({q, k.kappa ? format_score(*k.kappa) : "n/a",
                        k.band ? std::string(to_string(*k.band)) : (k.note.empty() ? "n/a" : k.note),
                        std::to_string(k.n_items), std::to_string(k.n_raters)});
    }
    out += fmt::format("{} annotation rows ingested, {} rejected, {} dialogues excluded from agreement.\n\n",
                       ann.at("n_records").get<std::size_t>(), ann.at("errors").size(), ann.at("excluded").size());
    out += table({"Question", "Fleiss κ", "Band", "Dialogues", "Raters"}, rows);

    const auto& ref = doc.at("references");
    out += fmt::format("\nReference labels over {} dialogues: coherence {} (binary), fluency {} (0-3).\n",
                       ref.at("n_labels").get<std::size_t>(),
                       format_mean_sd(ref.at("coherence").at("mean").get<double>(), ref.at("coherence").at("sd").get<double>()),
                       format_mean_sd(ref.at("fluency").at("mean").get<double>(), ref.at("fluency").at("sd").get<double>()));

    if (doc.at("alignment").is_null()) {
        out += fmt::format("\nJudge-human alignment not available: {}\n", doc.at("alignment_note").get<std::string>());
    } else {
        const auto a = doc.at("alignment").get<AlignmentResult>();
        out += fmt::format("\nJudge-human alignment over {} dialogues: Spearman ρ {} (coherence, n = {}), {} (fluency).",
                           a.n_overlap, format_corr(a.rho_coherence), a.n_coherence, format_corr(a.rho_fluency));
        if (a.tau_coherence || a.tau_fluency) {
            out += fmt::format(" Model-level Kendall τ over {} models: {} (coherence), {} (fluency).", a.n_models,
                               a.tau_coherence ? format_corr(*a.tau_coherence) : "n/a",
                               a.tau_fluency ? format_corr(*a.tau_fluency) : "n/a");
        }
        out += "\n";
    }

    out += "\n## Validity gate\n\n";
    const auto g = doc.at("gate").get<GateVerdict>();
    out += table({"Stage", "Outcome"},
                 {{"1 generation consistency", g.stage1_generation_ok ? "pass" : "fail"},
                  {"2 human sample", std::to_string(g.stage2_sample_size)},
                  {"3 judge-human alignment", g.stage3_alignment_ok ? "pass" : "fail"},
                  {"4 calibration required", g.stage4_calibration_required ? "yes" : "no"}});
    out += "\n" + g.narrative + "\n";
    if (!g.stage1_evidence.empty()) {
        out += "\n";
        for (const auto& e : g.stage1_evidence) out += "- " + e + "\n";
    }
    return out;
}

std::string simulation_section(const Workspace& ws) {
    const auto path = ws.power();
    if (!std::filesystem::exists(path)) return {};
    const auto lines = detail::read_lines(path);
    if (lines.empty()) return {};
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        std::vector<std::string> cells;
        std::stringstream ss(lines[i]);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (header.empty()) {
            header = std::move(cells);
        } else {
            rows.push_back(std::move(cells));
        }
    }
    return "## Power analysis\n\nDetection rate of the permutation test on planted synthetic worlds.\n\n" +
           table(header, rows);
}

} // namespace

Report render_report(const Workspace& ws) {
    Report r;
    std::string csv;
    std::vector<std::string> sections{judge_section(ws), lra_section(ws), metrics_section(ws),
                                      stability_section(ws, csv), calibration_section(ws), simulation_section(ws)};
    r.markdown = "# Evaluation report\n";
    for (const auto& s : sections) {
        if (!s.empty()) r.markdown += "\n" + s;
    }
    r.plot_csv = std::move(csv);
    return r;
}

Report build_report(const Workspace& ws) {
    auto r = render_report(ws);
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw DataError("cannot write " + p.string());
    };
    write(ws.report(), r.markdown);
    write(ws.plot_data(), r.plot_csv);
    return r;
}

} // namespace rankstab
