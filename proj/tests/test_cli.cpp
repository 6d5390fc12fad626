#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ctv/cli.hpp"

using namespace ctv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ctv_test_" + std::to_string(CounterRng(::getpid()).next_u64() % 1000000));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

std::string slurp(const std::string& path) { return read_file(path); }

void small_synth(const std::string& out_dir, std::uint64_t seed = 11) {
    SynthSpec spec = default_synth_spec(seed);
    spec.users = 20;
    spec.answers_min = 10;
    spec.answers_max = 16;
    cli::detail::ensure_dir(out_dir);
    {
        std::ofstream f(out_dir + "/answers.csv", std::ios::binary);
        write_answers_csv(f, generate(spec));
    }
    {
        std::ofstream f(out_dir + "/profiles.csv", std::ios::binary);
        write_profiles_csv(f, generate_profiles(spec));
    }
}

}  // namespace

TEST_CASE("synth then ingest produces a consistent summary", "[cli]") {
    TempDir tmp;
    cli::cmd_synth("", tmp.str("data"));
    REQUIRE(fs::exists(tmp.str("data/answers.csv")));
    REQUIRE(fs::exists(tmp.str("data/profiles.csv")));
    REQUIRE(fs::exists(tmp.str("data/manifest.json")));

    cli::InputPaths in;
    in.answers = tmp.str("data/answers.csv");
    in.profiles = tmp.str("data/profiles.csv");
    auto res = cli::cmd_ingest(in, tmp.str("run"), false);
    CHECK(res.issues.empty());
    CHECK(res.summary.answers_total > 5000);
    CHECK(res.summary.post_split_rows >= res.summary.answers_total);
    for (const char* name : {"summary.json", "per_day.csv", "genre_counts.csv", "q1_counts.csv",
                             "timeofday_counts.csv", "validation.csv"})
        CHECK(fs::exists(tmp.str("run/") + name));
}

TEST_CASE("synth output is idempotent byte for byte", "[cli]") {
    TempDir tmp;
    cli::cmd_synth("", tmp.str("a"));
    cli::cmd_synth("", tmp.str("b"));
    CHECK(slurp(tmp.str("a/answers.csv")) == slurp(tmp.str("b/answers.csv")));
    CHECK(slurp(tmp.str("a/profiles.csv")) == slurp(tmp.str("b/profiles.csv")));
    CHECK(slurp(tmp.str("a/manifest.json")) == slurp(tmp.str("b/manifest.json")));
}

TEST_CASE("strict ingest fails on a bad row, lenient skips it", "[cli]") {
    TempDir tmp;
    std::ofstream bad(tmp.str("answers.csv"));
    bad << "answer_id,user_id,timestamp,q1,q2,q3,q4,q5,q6\n"
        << "a1,u1,2017-03-08T20:00:00,yes,alone,,news,netflix,3\n"
        << "a2,u1,2017-03-08T21:00:00,yes,alone,,mystery,netflix,3\n";
    bad.close();

    cli::InputPaths in;
    in.answers = tmp.str("answers.csv");
    try {
        cli::cmd_ingest(in, tmp.str("strict"), false);
        FAIL("expected UnknownToken");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownToken);
        CHECK(e.row() == 3);
    }

    auto res = cli::cmd_ingest(in, tmp.str("lenient"), true);
    CHECK(res.summary.answers_total == 1);
    REQUIRE(res.issues.size() == 1);
    CHECK(res.issues[0].row == 3);
    auto validation = slurp(tmp.str("lenient/validation.csv"));
    CHECK(validation.find("UnknownToken") != std::string::npos);
}

TEST_CASE("analyze writes associations and summary tables", "[cli]") {
    TempDir tmp;
    small_synth(tmp.str("data"));
    cli::InputPaths in;
    in.answers = tmp.str("data/answers.csv");
    auto res = cli::cmd_analyze(in, tmp.str("run"), false);
    CHECK(res.associations.size() == 6);
    for (const char* name :
         {"associations.json", "contingency_time_of_day.csv", "contingency_day_type.csv",
          "contingency_companions.csv", "contingency_viewer_count.csv",
          "contingency_attention.csv", "contingency_service.csv", "genre_attention.csv",
          "genre_viewers.csv", "context_attention.csv", "context_timeofday_share.csv",
          "context_genre_share.csv"})
        CHECK(fs::exists(tmp.str("run/") + name));

    auto j = nlohmann::json::parse(slurp(tmp.str("run/associations.json")));
    REQUIRE(j["associations"].size() == 6);
    CHECK(j["associations"][0]["dimension"] == "time_of_day");
}

TEST_CASE("evaluate writes reports, oof files and a combined table", "[cli]") {
    TempDir tmp;
    small_synth(tmp.str("data"));
    cli::InputPaths in;
    in.answers = tmp.str("data/answers.csv");
    in.profiles = tmp.str("data/profiles.csv");

    cli::EvaluateOptions opt;
    opt.configs = {"TD"};
    opt.models = {"toppop", "random"};
    opt.seed = 3;
    opt.dump_matrix = true;
    auto reports = cli::cmd_evaluate(in, opt, tmp.str("run"));
    REQUIRE(reports.size() == 2);
    CHECK(fs::exists(tmp.str("run/TD.matrix.csv")));
    for (const char* name : {"TD_toppop.report.json", "TD_toppop.oof.csv",
                             "TD_random.report.json", "TD_random.oof.csv", "metrics.csv"})
        CHECK(fs::exists(tmp.str("run/") + name));

    auto metrics = slurp(tmp.str("run/metrics.csv"));
    CHECK(metrics.find("config,model,metric,mean,std,fold1,fold2,fold3,fold4,fold5") == 0);
    CHECK(metrics.find("TD,toppop,a1,") != std::string::npos);

    // reruns overwrite identically
    auto first = slurp(tmp.str("run/TD_toppop.report.json"));
    cli::cmd_evaluate(in, opt, tmp.str("run"));
    CHECK(slurp(tmp.str("run/TD_toppop.report.json")) == first);

    cli::EvaluateOptions bad = opt;
    bad.configs = {"XYZ"};
    CHECK_THROWS_AS(cli::cmd_evaluate(in, bad, tmp.str("run2")), Error);
}

TEST_CASE("compare joins oof files by event id", "[cli]") {
    TempDir tmp;
    small_synth(tmp.str("data"));
    cli::InputPaths in;
    in.answers = tmp.str("data/answers.csv");
    in.profiles = tmp.str("data/profiles.csv");
    cli::EvaluateOptions opt;
    opt.configs = {"TD"};
    opt.models = {"toppop", "random"};
    opt.seed = 3;
    cli::cmd_evaluate(in, opt, tmp.str("run"));

    auto self = cli::cmd_compare(tmp.str("run/TD_toppop.oof.csv"),
                                 tmp.str("run/TD_toppop.oof.csv"),
                                 tmp.str("run/compare_self.json"));
    CHECK(self.no_disagreement);
    auto j = nlohmann::json::parse(slurp(tmp.str("run/compare_self.json")));
    CHECK(j["status"] == "no_disagreement");

    auto cross = cli::cmd_compare(tmp.str("run/TD_toppop.oof.csv"),
                                  tmp.str("run/TD_random.oof.csv"),
                                  tmp.str("run/compare_cross.json"));
    CHECK_FALSE(cross.no_disagreement);
    CHECK(cross.mcnemar.chi2 >= 0.0);

    // truncated second file: id sets no longer match
    auto oof = slurp(tmp.str("run/TD_random.oof.csv"));
    auto cut = oof.substr(0, oof.find('\n', oof.find('\n') + 1) + 1);
    cli::detail::write_text(tmp.str("run/truncated.oof.csv"), cut);
    CHECK_THROWS_AS(cli::cmd_compare(tmp.str("run/TD_toppop.oof.csv"),
                                     tmp.str("run/truncated.oof.csv"), ""),
                    Error);
}

TEST_CASE("report assembles whatever artifacts exist", "[cli]") {
    TempDir tmp;
    small_synth(tmp.str("data"));
    cli::InputPaths in;
    in.answers = tmp.str("data/answers.csv");
    in.profiles = tmp.str("data/profiles.csv");

    // analyze-only directory
    cli::cmd_analyze(in, tmp.str("stats_only"), false);
    std::string stats_md = cli::cmd_report(tmp.str("stats_only"));
    CHECK(stats_md.find("## Genre/context associations") != std::string::npos);
    CHECK(stats_md.find("## Evaluation") == std::string::npos);

    // full run directory
    cli::cmd_ingest(in, tmp.str("full"), false);
    cli::cmd_analyze(in, tmp.str("full"), false);
    cli::EvaluateOptions opt;
    opt.configs = {"TD"};
    opt.models = {"toppop"};
    opt.seed = 1;
    cli::cmd_evaluate(in, opt, tmp.str("full"));
    std::string md = cli::cmd_report(tmp.str("full"));
    CHECK(md.find("## Dataset summary") != std::string::npos);
    CHECK(md.find("## Genre/context associations") != std::string::npos);
    CHECK(md.find("## Evaluation") != std::string::npos);
    CHECK(fs::exists(tmp.str("full/report.md")));

    fs::create_directories(tmp.str("empty"));
    try {
        cli::cmd_report(tmp.str("empty"));
        FAIL("expected MissingArtifacts");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingArtifacts);
    }
}
