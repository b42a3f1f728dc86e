#include <gtest/gtest.h>

#include <sstream>

#include "spark/cli.hpp"
#include "spark/workspace.hpp"
#include "support.hpp"

using namespace spark;
using namespace spark::testkit;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args, const std::string& input = "") {
    std::ostringstream out, err;
    std::istringstream in(input);
    int code = run_cli(args, out, err, in);
    return {code, out.str(), err.str()};
}

std::vector<std::string> mock_args(const TempDir& ws, const std::string& script = "e2e.json") {
    return {"--workspace", ws.path().string(), "--mock-script", fixture(script).string(), "-q"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::vector<std::filesystem::path> files_in(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (std::filesystem::exists(dir))
        for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path());
    return out;
}

}  // namespace

TEST(Cli, RunWritesReport) {
    TempDir ws;
    auto r = cli(concat(mock_args(ws), {"run"}));
    ASSERT_EQ(r.code, 0) << r.err;
    auto reports = files_in(ws / "reports");
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_NE(r.out.find("report " + reports[0].string()), std::string::npos);
    auto report = json::parse(slurp(reports[0]));
    EXPECT_TRUE(report["complete"].get<bool>());
    EXPECT_GE(report["ideas"].size(), 1u);
    EXPECT_FALSE(slurp(ws / "ideas/ideas.jsonl").empty());
    EXPECT_FALSE(slurp(ws / "decisions/decisions.jsonl").empty());
}

TEST(Cli, RunReportOutCopy) {
    TempDir ws;
    auto target = ws / "copy.json";
    auto r = cli(concat(mock_args(ws), {"run", "--report-out", target.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(files_in(ws / "reports").size(), 1u);
    EXPECT_EQ(slurp(target), slurp(files_in(ws / "reports")[0]));
}

TEST(Cli, RunWithoutEvidenceIsIncomplete) {
    TempDir ws;
    auto r = cli(concat(mock_args(ws), {"run", "--question", "unrelated topic about gardening"}));
    EXPECT_EQ(r.code, 5);
    auto reports = files_in(ws / "reports");
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_FALSE(json::parse(slurp(reports[0]))["complete"].get<bool>());
}

TEST(Cli, AskPrintsSources) {
    TempDir ws;
    auto r = cli(concat(mock_args(ws), {"ask"}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Sources:\n[search_1]\n[search_2]"), std::string::npos) << r.out;
    auto sessions = files_in(ws / "sessions");
    ASSERT_EQ(sessions.size(), 1u);
    auto rows = read_jsonl(sessions[0]);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0]["cited_source_ids"], json({"search_1", "search_2"}));
}

TEST(Cli, InteractiveBlankLineAndQuit) {
    TempDir ws;
    auto r = cli(concat(mock_args(ws), {"ask", "--interactive"}), "\n   \n:quit\n");
    ASSERT_EQ(r.code, 0) << r.err;
    auto sessions = files_in(ws / "sessions");
    ASSERT_EQ(sessions.size(), 1u);
    EXPECT_TRUE(read_jsonl(sessions[0]).empty());
}

TEST(Cli, InteractiveAnswersThenEof) {
    TempDir ws;
    auto r = cli(concat(mock_args(ws), {"ask", "--interactive"}),
                 "How does retrieval diversity help ideation?\n");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Sources:"), std::string::npos);
    EXPECT_EQ(read_jsonl(files_in(ws / "sessions")[0]).size(), 1u);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({}).code, 2);
    TempDir ws;
    EXPECT_EQ(cli(concat(mock_args(ws), {"build-judge-dataset", "--dump",
                                         fixture("openreview_dump.jsonl").string(), "--cutoff",
                                         "31/10/2024"}))
                  .code,
              2);
}

TEST(Cli, MissingMockScriptIsUsageError) {
    EXPECT_EQ(cli({"--mock-script", "/nonexistent.json", "run"}).code, 2);
}

TEST(Cli, IngestAndStats) {
    TempDir ws;
    auto paper = ws / "paper.txt";
    std::string body;
    for (int i = 0; i < 40; ++i) body += "Sentence " + std::to_string(i) + " about reranking. ";
    write_file(paper, body);
    auto r = cli(concat(mock_args(ws), {"ingest", paper.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("ingested"), std::string::npos);
    auto again = cli(concat(mock_args(ws), {"ingest", paper.string()}));
    EXPECT_NE(again.out.find("skipped"), std::string::npos);

    auto stats = cli(concat(mock_args(ws), {"index", "stats"}));
    ASSERT_EQ(stats.code, 0) << stats.err;
    auto j = json::parse(stats.out);
    EXPECT_EQ(j["documents"], 1);
    EXPECT_EQ(j["dim"], 64);
    EXPECT_EQ(j["chunks"], j["indexed"]);
    EXPECT_GE(j["chunks"].get<int>(), 1);

    auto rebuilt = cli(concat(mock_args(ws), {"index", "build"}));
    ASSERT_EQ(rebuilt.code, 0) << rebuilt.err;
    EXPECT_NE(rebuilt.out.find("(0 embedded)"), std::string::npos) << rebuilt.out;
}

TEST(Cli, GenerateThenFilter) {
    TempDir ws;
    auto gen = cli(concat(mock_args(ws), {"generate-ideas"}));
    ASSERT_EQ(gen.code, 0) << gen.err;
    EXPECT_EQ(read_jsonl(ws / "ideas/ideas.jsonl").size(), 2u);
    auto filt = cli(concat(mock_args(ws), {"filter-ideas", "--reviews", "2"}));
    ASSERT_EQ(filt.code, 0) << filt.err;
    auto decisions = read_jsonl(ws / "decisions/decisions.jsonl");
    ASSERT_EQ(decisions.size(), 2u);
    EXPECT_NE(filt.out.find("ACCEPT"), std::string::npos);
}

TEST(Cli, WorkspaceLockedDuringRun) {
    TempDir ws;
    Workspace w(ws.path());
    WorkspaceLock held(w);
    auto r = cli(concat(mock_args(ws), {"run"}));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("in use"), std::string::npos) << r.err;
}

TEST(Cli, EvalJudge) {
    TempDir dir;
    write_file(dir / "pred.jsonl", "2\n4\n");
    write_file(dir / "actual.jsonl", "{\"score\": 5}\n{\"score\": 4}\n");
    auto r = cli({"eval-judge", "--pred", (dir / "pred.jsonl").string(), "--actual",
                  (dir / "actual.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_EQ(j["n"], 2);
    EXPECT_NEAR(j["rmse"].get<double>(), std::sqrt(4.5), 1e-12);

    write_file(dir / "short.jsonl", "1\n");
    EXPECT_EQ(cli({"eval-judge", "--pred", (dir / "pred.jsonl").string(), "--actual",
                   (dir / "short.jsonl").string()})
                  .code,
              2);
}

TEST(Cli, BuildJudgeDataset) {
    TempDir ws;
    auto out_dir = ws / "judge_out";
    auto r = cli(concat(mock_args(ws, "judge_mock.json"),
                        {"build-judge-dataset", "--dump", fixture("openreview_dump.jsonl").string(),
                         "--cutoff", "2024-10-31", "--out-dir", out_dir.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    auto s = json::parse(r.out);
    EXPECT_EQ(s["pairs"], 5);
    EXPECT_EQ(s["flagged"], 1);
    EXPECT_EQ(s["malformed_lines"], 1);
    EXPECT_EQ(s["missing_abstract"], 1);
    EXPECT_EQ(s["records"], 4 * 4 + 2 * 1);
    EXPECT_EQ(s["train"], 12);
    EXPECT_EQ(s["test"], 6);
    EXPECT_EQ(read_jsonl(out_dir / "pairs.jsonl").size(), 5u);
    EXPECT_EQ(read_jsonl(out_dir / "records_train.jsonl").size(), 12u);
    EXPECT_EQ(read_jsonl(out_dir / "records_test.jsonl").size(), 6u);
}

TEST(Cli, BuildJudgeDatasetWithoutAnnotation) {
    TempDir ws;
    auto r = cli(concat(mock_args(ws, "judge_mock.json"),
                        {"build-judge-dataset", "--dump", fixture("openreview_dump.jsonl").string(),
                         "--cutoff", "2024-10-31", "--skip-annotation"}));
    ASSERT_EQ(r.code, 0) << r.err;
    auto s = json::parse(r.out);
    EXPECT_EQ(s["records"], 2 * 5);
    EXPECT_EQ(read_jsonl(ws / "judge/records_test.jsonl").size(), 4u);
}
