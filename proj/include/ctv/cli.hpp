#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctv/eval.hpp"
#include "ctv/ingest.hpp"
#include "ctv/stats.hpp"
#include "ctv/synth.hpp"

namespace ctv::cli {

namespace fs = std::filesystem;

struct InputPaths {
    std::string answers;
    std::string profiles;  // optional
    std::string holidays;  // optional
    std::string remap;     // optional
};

struct LoadedData {
    std::vector<AnswerRecord> records;
    std::vector<UserProfile> profiles;
    HolidayCalendar holidays;
    std::vector<ViewingEvent> events;
    std::vector<ParseIssue> issues;
};

inline LoadedData load(const InputPaths& in, bool lenient) {
    LoadedData data;
    RemapConfig remap;
    if (!in.remap.empty()) {
        std::ifstream f(in.remap);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + in.remap);
        remap = RemapConfig::parse(f);
    }
    if (!in.holidays.empty()) {
        std::ifstream f(in.holidays);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + in.holidays);
        data.holidays = parse_holidays(f);
    }
    {
        std::ifstream f(in.answers);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + in.answers);
        data.records = parse_answers(f, remap, lenient ? &data.issues : nullptr);
    }
    if (!in.profiles.empty()) {
        std::ifstream f(in.profiles);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + in.profiles);
        data.profiles = parse_profiles(f, remap);
    }
    data.events = split_events(data.records, data.holidays);
    return data;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

}  // namespace detail

// ---- ingest ----------------------------------------------------------------

struct IngestResult {
    DatasetSummary summary;
    std::vector<ParseIssue> issues;
};

inline IngestResult cmd_ingest(const InputPaths& in, const std::string& out_dir, bool lenient) {
    LoadedData data = load(in, lenient);
    detail::ensure_dir(out_dir);

    IngestResult res;
    res.summary = dataset_summary(data.records, data.events);
    res.issues = data.issues;
    const DatasetSummary& s = res.summary;

    nlohmann::json slots, genres;
    for (int t = 0; t < kTimeOfDayCount; ++t)
        slots[std::string(token(static_cast<TimeOfDay>(t)))] =
            s.answers_by_slot[static_cast<size_t>(t)];
    for (int g = 0; g < kGenreCount; ++g)
        genres[std::string(token(static_cast<Genre>(g)))] =
            s.genre_counts[static_cast<size_t>(g)];
    nlohmann::json issue_list = nlohmann::json::array();
    for (const auto& i : res.issues)
        issue_list.push_back(
            {{"row", i.row}, {"code", error_code_name(i.code)}, {"message", i.message}});
    detail::write_json(out_dir + "/summary.json",
                       {{"answers_total", s.answers_total},
                        {"watched_answers_raw", s.watched_answers_raw},
                        {"not_watched", s.not_watched},
                        {"post_split_rows", s.post_split_rows},
                        {"watched_events", s.watched_events},
                        {"social_watched", s.social_watched},
                        {"workday_watched", s.workday_watched},
                        {"avg_active_per_day", s.avg_active_per_day},
                        {"answers_by_slot", slots},
                        {"genre_counts", genres},
                        {"validation",
                         {{"rows_with_errors", res.issues.size()},
                          {"status", res.issues.empty() ? "pass" : "fail"},
                          {"issues", issue_list}}},
                        {"version", std::string(kVersion)}});

    std::ostringstream per_day;
    per_day << "day,date,enrolled,active,answers\n";
    for (const auto& d : s.per_day)
        per_day << d.day_index << ',' << format_date(d.date) << ',' << d.enrolled << ','
                << d.active << ',' << d.answers << '\n';
    detail::write_text(out_dir + "/per_day.csv", per_day.str());

    std::ostringstream q4;
    q4 << "genre,count\n";
    for (int g = 0; g < kGenreCount; ++g)
        q4 << token(static_cast<Genre>(g)) << ',' << s.genre_counts[static_cast<size_t>(g)]
           << '\n';
    detail::write_text(out_dir + "/genre_counts.csv", q4.str());

    std::ostringstream q1;
    q1 << "q1,count\nyes," << s.watched_answers_raw << "\nno," << s.not_watched << '\n';
    detail::write_text(out_dir + "/q1_counts.csv", q1.str());

    std::ostringstream slots_csv;
    slots_csv << "time_of_day,count\n";
    for (int t = 0; t < kTimeOfDayCount; ++t)
        slots_csv << token(static_cast<TimeOfDay>(t)) << ','
                  << s.answers_by_slot[static_cast<size_t>(t)] << '\n';
    detail::write_text(out_dir + "/timeofday_counts.csv", slots_csv.str());

    std::ostringstream validation;
    validation << "row,code,message\n";
    for (const auto& i : res.issues)
        validation << i.row << ',' << error_code_name(i.code) << ",\"" << i.message << "\"\n";
    detail::write_text(out_dir + "/validation.csv", validation.str());
    return res;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeResult {
    std::vector<std::pair<ContextDim, AssociationResult>> associations;
};

inline AnalyzeResult cmd_analyze(const InputPaths& in, const std::string& out_dir, bool lenient) {
    LoadedData data = load(in, lenient);
    detail::ensure_dir(out_dir);
    if (data.events.empty()) throw Error(ErrorCode::EmptyInput, "no watched events to analyze");

    AnalyzeResult res;
    nlohmann::json assoc = nlohmann::json::array();
    for (ContextDim dim : {ContextDim::time_of_day, ContextDim::day_type, ContextDim::companions,
                           ContextDim::viewer_count, ContextDim::attention, ContextDim::service}) {
        ContingencyTable t = contingency(data.events, dim);
        AssociationResult r = chi_square_test(t);
        res.associations.emplace_back(dim, r);
        assoc.push_back({{"dimension", context_dim_name(dim)},
                         {"chi2", r.chi2},
                         {"df", r.df},
                         {"p", r.p},
                         {"v", r.v},
                         {"valid", r.valid},
                         {"n", r.n},
                         {"rows", r.rows},
                         {"cols", r.cols}});

        std::ostringstream csv;
        csv << "genre";
        for (const auto& c : t.col_labels) csv << ',' << c;
        csv << '\n';
        for (int i = 0; i < t.rows(); ++i) {
            csv << t.row_labels[static_cast<size_t>(i)];
            for (int j = 0; j < t.cols(); ++j)
                csv << ',' << t.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
            csv << '\n';
        }
        detail::write_text(out_dir + "/contingency_" + context_dim_name(dim) + ".csv", csv.str());
    }
    detail::write_json(out_dir + "/associations.json",
                       {{"associations", assoc}, {"version", std::string(kVersion)}});

    auto write_means = [&](GroupBy by, ValueField value, const std::string& path) {
        std::ostringstream csv;
        csv << "group,count,mean,std\n";
        for (const auto& g : group_mean(data.events, by, value))
            csv << g.group << ',' << g.count << ',' << detail::fmt(g.mean) << ','
                << detail::fmt(g.stddev) << '\n';
        detail::write_text(out_dir + "/" + path, csv.str());
    };
    write_means(GroupBy::genre, ValueField::attention, "genre_attention.csv");
    write_means(GroupBy::genre, ValueField::viewer_count, "genre_viewers.csv");
    write_means(GroupBy::context_cell_time, ValueField::attention, "context_attention.csv");

    auto write_shares = [&](ShareField field, const std::string& path) {
        std::ostringstream csv;
        csv << "cell,key,count,share\n";
        for (const auto& g : share_within_context(data.events, field))
            csv << g.partition << ',' << g.group << ',' << g.count << ',' << detail::fmt(g.share)
                << '\n';
        detail::write_text(out_dir + "/" + path, csv.str());
    };
    write_shares(ShareField::time_of_day, "context_timeofday_share.csv");
    write_shares(ShareField::genre, "context_genre_share.csv");
    return res;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateOptions {
    std::vector<std::string> configs;
    std::vector<std::string> models;
    std::uint64_t seed = 0;
    int workers = 1;
    int min_answers = 5;
    int outer = 5;
    int inner = 3;
    bool dump_matrix = false;  // write <config>.matrix.csv for debugging
};

inline std::vector<EvaluationReport> cmd_evaluate(const InputPaths& in,
                                                  const EvaluateOptions& opt,
                                                  const std::string& out_dir,
                                                  bool lenient = false) {
    if (opt.configs.empty() || opt.models.empty())
        throw Error(ErrorCode::InvalidSpec, "evaluate needs at least one config and one model");
    LoadedData data = load(in, lenient);
    detail::ensure_dir(out_dir);

    std::vector<ViewingEvent> events =
        filter_min_answers(data.events, data.records, opt.min_answers);
    if (events.empty()) throw Error(ErrorCode::EmptyInput, "no events after filtering");
    UserIndex users = data.profiles.empty() ? UserIndex::from_events(events)
                                            : UserIndex::from_profiles(data.profiles);
    FoldPlan plan =
        plan_folds(static_cast<int>(events.size()), opt.outer, opt.inner, opt.seed);

    std::vector<EvaluationReport> reports;
    std::ostringstream combined;
    combined << "config,model,metric,mean,std";
    for (int k = 1; k <= opt.outer; ++k) combined << ",fold" << k;
    combined << '\n';

    for (const std::string& config_name : opt.configs) {
        FeatureConfig cfg = preset(config_name);
        DesignMatrix matrix = build_matrix(events, cfg, users);
        if (opt.dump_matrix) {
            std::ostringstream csv;
            csv << "event_id,target";
            for (int j = 0; j < matrix.width; ++j) csv << ",x" << j;
            csv << '\n';
            for (int i = 0; i < matrix.rows(); ++i) {
                csv << matrix.trial_ids[static_cast<size_t>(i)] << ','
                    << token(static_cast<Genre>(matrix.targets[static_cast<size_t>(i)]));
                for (double v : matrix.row(i)) csv << ',' << static_cast<int>(v);
                csv << '\n';
            }
            detail::write_text(out_dir + "/" + config_name + ".matrix.csv", csv.str());
        }
        for (const std::string& model_name : opt.models) {
            RankerSpec spec = RankerSpec::defaults(ranker_kind_from_name(model_name), opt.seed);
            auto started = std::chrono::steady_clock::now();
            EvalRun run = nested_cv(matrix, spec, plan, opt.workers);
            run.report.runtime_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            std::cerr << "evaluated config=" << config_name << " model=" << model_name << " in "
                      << detail::fmt(run.report.runtime_seconds) << "s\n";

            const std::string base = out_dir + "/" + config_name + "_" + model_name;
            detail::write_json(base + ".report.json", report_to_json(run.report));
            std::ostringstream oof;
            write_oof_csv(oof, run.oof);
            detail::write_text(base + ".oof.csv", oof.str());

            auto emit = [&](const char* metric, double mean, double sd, auto take) {
                combined << config_name << ',' << model_name << ',' << metric << ','
                         << detail::fmt(mean) << ',' << detail::fmt(sd);
                for (const auto& f : run.report.folds) combined << ',' << detail::fmt(take(f));
                combined << '\n';
            };
            emit("a1", run.report.mean.a1, run.report.stddev.a1,
                 [](const FoldResult& f) { return f.a1; });
            emit("a3", run.report.mean.a3, run.report.stddev.a3,
                 [](const FoldResult& f) { return f.a3; });
            emit("f1_macro", run.report.mean.f1_macro, run.report.stddev.f1_macro,
                 [](const FoldResult& f) { return f.f1_macro; });
            emit("mrr", run.report.mean.mrr, run.report.stddev.mrr,
                 [](const FoldResult& f) { return f.mrr; });
            reports.push_back(std::move(run.report));
        }
    }
    detail::write_text(out_dir + "/metrics.csv", combined.str());
    return reports;
}

// ---- compare ------------------------------------------------------------------

struct CompareResult {
    bool no_disagreement = false;
    McNemarResult mcnemar;
    long n = 0;
};

inline CompareResult cmd_compare(const std::string& oof_a_path, const std::string& oof_b_path,
                                 const std::string& out_path = "") {
    auto read = [](const std::string& path) {
        std::ifstream f(path);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
        return read_oof_csv(f);
    };
    OofPredictions a = read(oof_a_path);
    OofPredictions b = read(oof_b_path);
    if (a.size() != b.size())
        throw Error(ErrorCode::IdMismatch, "prediction sets have different sizes");

    std::unordered_map<std::string, int> index_b;
    for (int i = 0; i < b.size(); ++i) index_b[b.ids[static_cast<size_t>(i)]] = i;
    std::vector<char> correct_a, correct_b;
    correct_a.reserve(static_cast<size_t>(a.size()));
    for (int i = 0; i < a.size(); ++i) {
        auto it = index_b.find(a.ids[static_cast<size_t>(i)]);
        if (it == index_b.end())
            throw Error(ErrorCode::IdMismatch,
                        "event '" + a.ids[static_cast<size_t>(i)] + "' missing from second file");
        int j = it->second;
        if (a.truths[static_cast<size_t>(i)] != b.truths[static_cast<size_t>(j)])
            throw Error(ErrorCode::IdMismatch,
                        "true genre differs for event '" + a.ids[static_cast<size_t>(i)] + "'");
        correct_a.push_back(a.preds[static_cast<size_t>(i)].order[0] ==
                            a.truths[static_cast<size_t>(i)]);
        correct_b.push_back(b.preds[static_cast<size_t>(j)].order[0] ==
                            b.truths[static_cast<size_t>(j)]);
    }

    CompareResult res;
    res.n = a.size();
    nlohmann::json j;
    j["a"] = oof_a_path;
    j["b"] = oof_b_path;
    j["n"] = res.n;
    j["version"] = std::string(kVersion);
    try {
        res.mcnemar = mcnemar(correct_a, correct_b);
        j["status"] = "ok";
        j["chi2"] = res.mcnemar.chi2;
        j["df"] = 1;
        j["p"] = res.mcnemar.p;
        j["v"] = res.mcnemar.v;
        j["table"] = {{"both_correct", res.mcnemar.both_correct},
                      {"only_a", res.mcnemar.only_a},
                      {"only_b", res.mcnemar.only_b},
                      {"both_wrong", res.mcnemar.both_wrong}};
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoDisagreement) throw;
        res.no_disagreement = true;
        j["status"] = "no_disagreement";
    }
    if (!out_path.empty())
        detail::write_json(out_path, j);
    else
        std::cout << j.dump(2) << '\n';
    return res;
}

// ---- synth --------------------------------------------------------------------

inline void cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    SynthSpec spec;
    if (!spec_path.empty()) {
        std::ifstream f(spec_path);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + spec_path);
        nlohmann::json j;
        f >> j;
        spec = synth_spec_from_json(j);
    } else {
        spec = default_synth_spec();
    }
    detail::ensure_dir(out_dir);

    std::vector<AnswerRecord> answers = generate(spec);
    std::vector<UserProfile> profiles = generate_profiles(spec);
    {
        std::ofstream f(out_dir + "/answers.csv", std::ios::binary);
        write_answers_csv(f, answers);
    }
    {
        std::ofstream f(out_dir + "/profiles.csv", std::ios::binary);
        write_profiles_csv(f, profiles);
    }
    std::ostringstream holidays;
    for (const auto& d : spec.holidays) holidays << format_date(d) << '\n';
    detail::write_text(out_dir + "/holidays.txt", holidays.str());
    detail::write_json(out_dir + "/manifest.json", {{"seed", spec.seed},
                                                    {"answers", answers.size()},
                                                    {"users", spec.users},
                                                    {"spec", synth_spec_to_json(spec)},
                                                    {"version", std::string(kVersion)}});
}

// ---- report --------------------------------------------------------------------

inline std::string cmd_report(const std::string& run_dir, const std::string& out_path = "") {
    auto exists = [&](const std::string& name) { return fs::exists(run_dir + "/" + name); };
    auto slurp_json = [&](const std::string& name) {
        std::ifstream f(run_dir + "/" + name);
        nlohmann::json j;
        f >> j;
        return j;
    };

    std::ostringstream md;
    md << "# Benchmark report\n\n";
    bool any = false;

    if (exists("manifest.json")) {
        any = true;
        auto j = slurp_json("manifest.json");
        md << "## Synthetic data\n\n"
           << "- seed: " << j["seed"] << "\n- answers: " << j["answers"]
           << "\n- users: " << j["users"] << "\n\n";
    }

    if (exists("summary.json")) {
        any = true;
        auto j = slurp_json("summary.json");
        md << "## Dataset summary\n\n"
           << "| quantity | value |\n|---|---|\n"
           << "| answers (raw) | " << j["answers_total"] << " |\n"
           << "| post-split rows | " << j["post_split_rows"] << " |\n"
           << "| watched events | " << j["watched_events"] << " |\n"
           << "| social watched | " << j["social_watched"] << " |\n"
           << "| workday watched | " << j["workday_watched"] << " |\n"
           << "| avg active/day | " << j["avg_active_per_day"] << " |\n\n";
        md << "Genre counts:\n\n| genre | count |\n|---|---|\n";
        for (auto& [key, value] : j["genre_counts"].items())
            md << "| " << key << " | " << value << " |\n";
        md << "\n";
    }

    if (exists("associations.json")) {
        any = true;
        auto j = slurp_json("associations.json");
        md << "## Genre/context associations\n\n"
           << "Multi-select dimensions count one observation per selected option, "
              "which inflates n for companions and service.\n\n"
           << "| dimension | chi2 | df | p | V | valid | n |\n|---|---|---|---|---|---|---|\n";
        for (const auto& a : j["associations"]) {
            char chi2[32], p[32], v[32];
            std::snprintf(chi2, sizeof(chi2), "%.2f", a["chi2"].get<double>());
            std::snprintf(p, sizeof(p), "%.3g", a["p"].get<double>());
            std::snprintf(v, sizeof(v), "%.3f", a["v"].get<double>());
            md << "| " << a["dimension"].get<std::string>() << " | " << chi2 << " | " << a["df"]
               << " | " << p << " | " << v << " | " << (a["valid"].get<bool>() ? "yes" : "no")
               << " | " << a["n"] << " |\n";
        }
        md << "\n";
    }

    if (exists("metrics.csv")) {
        any = true;
        auto rows = read_csv_file(run_dir + "/metrics.csv");
        // config -> model -> metric -> "mean (std)"
        std::map<std::string, std::map<std::string, std::map<std::string, std::string>>> table;
        for (size_t r = 1; r < rows.size(); ++r) {
            const auto& f = rows[r].fields;
            if (f.size() < 5) continue;
            char cell[64];
            std::snprintf(cell, sizeof(cell), "%.3f (%.3f)", std::stod(f[3]), std::stod(f[4]));
            table[f[0]][f[1]][f[2]] = cell;
        }
        md << "## Evaluation\n\n"
           << "Nested cross-validation, 5 outer / 3 inner folds; mean over outer folds, "
              "standard deviation in parentheses. Folds split over events, so multiple "
              "events of one user can appear on both sides of a fold boundary.\n\n";
        for (const auto& [config, models] : table) {
            md << "### Config `" << config << "`\n\n"
               << "| model | A@1 | A@3 | F1 (macro) | MRR |\n|---|---|---|---|---|\n";
            for (const auto& [model, metrics] : models) {
                auto get = [&](const char* name) {
                    auto it = metrics.find(name);
                    return it == metrics.end() ? std::string("-") : it->second;
                };
                md << "| " << model << " | " << get("a1") << " | " << get("a3") << " | "
                   << get("f1_macro") << " | " << get("mrr") << " |\n";
            }
            md << "\n";
        }
        // Per-run seeds, grids and chosen hyperparameters.
        md << "### Run configuration\n\n";
        for (const auto& entry : fs::directory_iterator(run_dir)) {
            std::string name = entry.path().filename().string();
            if (name.size() < 12 || name.substr(name.size() - 12) != ".report.json") continue;
            auto j = slurp_json(name);
            md << "- `" << j["config"].get<std::string>() << "` / "
               << j["model"].get<std::string>() << ": seed " << j["seeds"]["master"];
            if (!j["hyper_name"].get<std::string>().empty()) {
                md << ", chosen " << j["hyper_name"].get<std::string>() << " per fold [";
                bool first = true;
                for (const auto& f : j["folds"]) {
                    if (!first) md << ", ";
                    md << f["chosen_hp"];
                    first = false;
                }
                md << "]";
            }
            md << "\n";
        }
        md << "\n";
    }

    for (const auto& entry : fs::directory_iterator(run_dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("compare", 0) != 0 || name.find(".json") == std::string::npos) continue;
        any = true;
        auto j = slurp_json(name);
        md << "## Paired comparison (" << name << ")\n\n";
        if (j["status"] == "no_disagreement") {
            md << "The two prediction sets agree on every trial.\n\n";
        } else {
            char chi2[32], p[32];
            std::snprintf(chi2, sizeof(chi2), "%.2f", j["chi2"].get<double>());
            std::snprintf(p, sizeof(p), "%.3g", j["p"].get<double>());
            md << "chi2(1) = " << chi2 << ", p = " << p << ", V = " << j["v"] << ", n = " << j["n"]
               << "\n\n";
        }
    }

    if (!any)
        throw Error(ErrorCode::MissingArtifacts, "no artifacts found under " + run_dir);

    std::string text = md.str();
    std::string path = out_path.empty() ? run_dir + "/report.md" : out_path;
    detail::write_text(path, text);
    return text;
}

}  // namespace ctv::cli
