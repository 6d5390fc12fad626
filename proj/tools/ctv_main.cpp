#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctv/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Contextual TV viewing benchmark toolkit"};
    app.require_subcommand(1);

    ctv::cli::InputPaths inputs;
    ctv::cli::EvaluateOptions eval_opt;
    std::string out_dir = "out";
    std::string spec_path, oof_a, oof_b, compare_out, report_out, run_dir;
    bool lenient = false;

    auto add_inputs = [&](CLI::App* cmd, bool answers_required) {
        auto* a = cmd->add_option("--answers", inputs.answers, "answers CSV");
        if (answers_required) a->required();
        cmd->add_option("--profiles", inputs.profiles, "profiles CSV");
        cmd->add_option("--holidays", inputs.holidays, "holiday dates, one ISO date per line");
        cmd->add_option("--remap", inputs.remap, "column/token remap config");
        cmd->add_flag("--lenient", lenient, "skip and report bad rows instead of failing");
        cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    };

    auto* ingest = app.add_subcommand("ingest", "parse and validate an answer log");
    add_inputs(ingest, true);

    auto* analyze = app.add_subcommand("analyze", "association statistics and group summaries");
    add_inputs(analyze, true);

    auto* evaluate = app.add_subcommand("evaluate", "nested cross-validation benchmark");
    add_inputs(evaluate, true);
    evaluate->add_option("--config", eval_opt.configs, "feature config (repeatable)")->required();
    evaluate->add_option("--model", eval_opt.models, "model kind (repeatable)")->required();
    evaluate->add_option("--seed", eval_opt.seed, "master seed")->capture_default_str();
    evaluate->add_option("--workers", eval_opt.workers, "parallel workers (0 = hardware)")
        ->capture_default_str();
    evaluate->add_option("--min-answers", eval_opt.min_answers, "minimum raw answers per user")
        ->capture_default_str();
    evaluate->add_flag("--dump-matrix", eval_opt.dump_matrix,
                       "also write the encoded design matrix per config");

    auto* compare = app.add_subcommand("compare", "McNemar test between two oof prediction sets");
    compare->add_option("oof_a", oof_a, "first oof CSV")->required();
    compare->add_option("oof_b", oof_b, "second oof CSV")->required();
    compare->add_option("--out", compare_out, "output JSON path (default: stdout)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic answer log");
    synth->add_option("--spec", spec_path, "synth spec JSON (default: built-in)");
    synth->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* report = app.add_subcommand("report", "assemble a markdown report from a run directory");
    report->add_option("run_dir", run_dir, "directory with ingest/analyze/evaluate outputs")
        ->required();
    report->add_option("--out", report_out, "output markdown path (default: <run_dir>/report.md)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            auto res = ctv::cli::cmd_ingest(inputs, out_dir, lenient);
            std::cout << "answers=" << res.summary.answers_total
                      << " post_split=" << res.summary.post_split_rows
                      << " watched_events=" << res.summary.watched_events
                      << " issues=" << res.issues.size() << '\n';
        } else if (analyze->parsed()) {
            auto res = ctv::cli::cmd_analyze(inputs, out_dir, lenient);
            for (const auto& [dim, r] : res.associations)
                std::cout << ctv::context_dim_name(dim) << ": chi2(" << r.df << ")=" << r.chi2
                          << " p=" << r.p << " V=" << r.v << (r.valid ? "" : " [invalid]")
                          << '\n';
        } else if (evaluate->parsed()) {
            if (eval_opt.workers <= 0)
                eval_opt.workers = static_cast<int>(std::thread::hardware_concurrency());
            auto reports = ctv::cli::cmd_evaluate(inputs, eval_opt, out_dir, lenient);
            for (const auto& r : reports)
                std::cout << r.config_name << '/' << r.model << ": A@1=" << r.mean.a1
                          << " A@3=" << r.mean.a3 << " F1m=" << r.mean.f1_macro
                          << " MRR=" << r.mean.mrr << '\n';
        } else if (compare->parsed()) {
            auto res = ctv::cli::cmd_compare(oof_a, oof_b, compare_out);
            if (res.no_disagreement)
                std::cout << "no disagreement between the two prediction sets\n";
            else
                std::cout << "chi2(1)=" << res.mcnemar.chi2 << " p=" << res.mcnemar.p
                          << " V=" << res.mcnemar.v << '\n';
        } else if (synth->parsed()) {
            ctv::cli::cmd_synth(spec_path, out_dir);
            std::cout << "wrote " << out_dir << "/answers.csv\n";
        } else if (report->parsed()) {
            ctv::cli::cmd_report(run_dir, report_out);
            std::cout << "wrote "
                      << (report_out.empty() ? run_dir + "/report.md" : report_out) << '\n';
        }
    } catch (const ctv::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
