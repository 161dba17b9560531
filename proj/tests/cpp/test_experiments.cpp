#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "levelsmith/experiments.hpp"

using namespace levelsmith;
using namespace levelsmith::exp;
namespace fs = std::filesystem;

namespace {

Grid cave(const std::vector<std::string>& rows) {
    std::string text;
    for (const auto& r : rows) text += r + "\n";
    return parse_level(text, TileSet::cave());
}

CellMetrics cell(double correct, double playable, double playable_correct) {
    CellMetrics c;
    c.present = true;
    c.percent_correct = correct;
    c.percent_playable = playable;
    c.percent_playable_correct = playable_correct;
    return c;
}

ExperimentPlan desk_plan() {
    ExperimentPlan plan;
    plan.experiment = ExperimentId::One;
    plan.game = Game::Cave;
    plan.model_kinds = {ModelKind::Vanilla};
    plan.classes = {1, 2};
    plan.samples_per_model = 6;
    plan.seeds = {11};
    plan.corpus_spec = CorpusSpec::cave_preset();
    plan.corpus_spec.classes = plan.classes;
    plan.corpus_spec.per_class = 4;
    plan.corpus_spec.seed = 7;
    plan.train_config.batch_size = 4;
    plan.train_config.iterations = 2;
    plan.train_config.critic_steps_per_gen_step = 2;
    plan.train_config.latent_dim = 8;
    return plan;
}

}  // namespace

TEST_CASE("evaluate_samples computes rounded percentages") {
    Grid open_two = cave({"{-2", "--2", "--}"});
    Grid open_zero = cave({"{--", "---", "--}"});
    Grid closed_two = cave({"{X2", "XX2", "--}"});
    // 7 of 10 playable, 4 of 10 with two treasures, 3 of 10 both.
    std::vector<Grid> grids{open_two, open_two,  open_two,   open_zero,  open_zero,
                            open_zero, open_zero, closed_two, closed_two, closed_two};
    CellMetrics c = evaluate_samples(grids, Game::Cave, 2);
    CHECK(c.present);
    CHECK(c.percent_playable == 70.0);
    CHECK(c.percent_correct == 60.0);
    CHECK(c.percent_playable_correct == 30.0);

    // One of three playable: 33.333... rounds to 33.3.
    CellMetrics third = evaluate_samples({open_two, closed_two, closed_two}, Game::Cave,
                                         std::nullopt);
    CHECK(third.percent_playable == 33.3);
    CHECK(third.percent_correct == 0.0);  // untouched without a target

    CHECK_THROWS_AS(evaluate_samples({}, Game::Cave, 1), ExperimentError);
}

TEST_CASE("playable-correct never exceeds correct or playable") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Grid> grids;
        for (int i = 0; i < 12; ++i) {
            Grid g(4, 4);
            for (auto& cellv : g.cells) cellv = static_cast<std::uint8_t>(rng() % 3);
            g.cells[0] = 3;
            g.cells[15] = 4;
            grids.push_back(std::move(g));
        }
        CellMetrics c = evaluate_samples(grids, Game::Cave, 1);
        CHECK(c.percent_playable_correct <= std::min(c.percent_correct, c.percent_playable));
    }
}

TEST_CASE("median_of picks the middle seed and averages even counts") {
    MetricsTable t1, t2, t3;
    for (MetricsTable* t : {&t1, &t2, &t3}) {
        t->kinds = {ModelKind::Vanilla};
        t->classes = {1};
    }
    t1.cells = {{cell(10.0, 30.0, 5.0)}};
    t2.cells = {{cell(20.0, 50.0, 15.0)}};
    t3.cells = {{cell(90.0, 40.0, 10.0)}};

    MetricsTable odd = median_of({t1, t2, t3});
    CHECK(odd.cells[0][0].percent_correct == 20.0);
    CHECK(odd.cells[0][0].percent_playable == 40.0);
    CHECK(odd.cells[0][0].percent_playable_correct == 10.0);

    MetricsTable even = median_of({t1, t3});
    CHECK(even.cells[0][0].percent_correct == 50.0);   // (10+90)/2
    CHECK(even.cells[0][0].percent_playable == 35.0);  // (30+40)/2

    // Median stays inside the per-seed envelope.
    CHECK(odd.cells[0][0].percent_playable >= 30.0);
    CHECK(odd.cells[0][0].percent_playable <= 50.0);

    MetricsTable failed = t2;
    failed.cells[0][0] = CellMetrics{};
    failed.cells[0][0].error = "boom";
    MetricsTable skipped = median_of({t1, failed, t3});
    CHECK(skipped.cells[0][0].present);
    CHECK(skipped.cells[0][0].percent_playable == 35.0);  // median of the two survivors

    MetricsTable all_failed = median_of({failed});
    CHECK_FALSE(all_failed.cells[0][0].present);
    CHECK(all_failed.cells[0][0].error == "boom");
}

TEST_CASE("table averages ignore absent cells") {
    MetricsTable t;
    t.kinds = {ModelKind::Rumi};
    t.classes = {1, 2, 3};
    CellMetrics missing;
    missing.error = "x";
    t.cells = {{cell(10.0, 20.0, 5.0), missing, cell(30.0, 60.0, 15.0)}};
    CellMetrics avg = t.average(0);
    CHECK(avg.present);
    CHECK(avg.percent_correct == 20.0);
    CHECK(avg.percent_playable == 40.0);
    CHECK(avg.percent_playable_correct == 10.0);
}

TEST_CASE("plan parsing applies sections and rejects unknown keys") {
    const std::string text =
        "# a comment\n"
        "[experiment]\n"
        "experiment = two\n"
        "game = mario\n"
        "models = vanilla,rumi\n"
        "classes = 1,3\n"
        "samples_per_model = 12  # trailing comment\n"
        "seeds = 4,5\n"
        "\n[corpus]\n"
        "per_class = 9\n"
        "\n[train]\n"
        "iterations = 7\n"
        "loss_head = loggan\n";
    ExperimentPlan plan = parse_plan(text);
    CHECK(plan.experiment == ExperimentId::Two);
    CHECK(plan.game == Game::Mario);
    CHECK(plan.model_kinds == std::vector{ModelKind::Vanilla, ModelKind::Rumi});
    CHECK(plan.classes == std::vector{1, 3});
    CHECK(plan.corpus_spec.classes == std::vector{1, 3});
    CHECK(plan.corpus_spec.cols == 32);  // mario preset dimensions
    CHECK(plan.corpus_spec.per_class == 9);
    CHECK(plan.samples_per_model == 12);
    CHECK(plan.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(plan.train_config.iterations == 7);
    CHECK(plan.train_config.loss_head == gan::LossHead::LogGAN);

    CHECK_THROWS_AS(parse_plan("[experiment]\nflavour = spicy\n"), BadPlan);
    CHECK_THROWS_AS(parse_plan("[dessert]\nsugar = 1\n"), BadPlan);
    CHECK_THROWS_AS(parse_plan("orphan = 1\n"), BadPlan);
    CHECK_THROWS_AS(parse_plan("[experiment]\nno equals sign\n"), BadPlan);
    CHECK_THROWS_AS(parse_plan("[train]\niterations = soon\n"), BadPlan);
    CHECK_THROWS_AS(parse_plan("[experiment]\nexperiment = two\nclasses = 1\n"), BadPlan);
}

TEST_CASE("plan echo is a parse fixpoint and hashes are stable") {
    ExperimentPlan plan = desk_plan();
    const std::string echo = plan_echo(plan);
    ExperimentPlan reparsed = parse_plan(echo);
    CHECK(plan_echo(reparsed) == echo);
    CHECK(plan_hash(plan) == plan_hash(reparsed));
    CHECK(plan_hash(plan).size() == 16);

    ExperimentPlan other = plan;
    other.samples_per_model += 1;
    CHECK(plan_hash(other) != plan_hash(plan));
}

TEST_CASE("plan validation") {
    ExperimentPlan plan = desk_plan();
    CHECK_NOTHROW(plan.validate());
    ExperimentPlan no_models = plan;
    no_models.model_kinds.clear();
    CHECK_THROWS_AS(no_models.validate(), BadPlan);
    ExperimentPlan no_seeds = plan;
    no_seeds.seeds.clear();
    CHECK_THROWS_AS(no_seeds.validate(), BadPlan);
    ExperimentPlan two_one_class = plan;
    two_one_class.experiment = ExperimentId::Two;
    two_one_class.classes = {1};
    CHECK_THROWS_AS(two_one_class.validate(), BadPlan);
}

TEST_CASE("samples files round trip") {
    Grid a = cave({"{-2", "---", "--}"});
    Grid b = cave({"{X-", "XX-", "--}"});
    const TileSet& ts = TileSet::cave();
    std::vector<Grid> grids{a, b, a};
    std::vector<Grid> parsed = parse_samples_file(samples_file_text(grids, ts), ts);
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[0] == a);
    CHECK(parsed[1] == b);
    CHECK(parsed[2] == a);
    CHECK(parse_samples_file("", ts).empty());
    CHECK(parse_samples_file("\n\n  \n", ts).empty());
}

TEST_CASE("worker_count reads the thread override") {
    unsetenv("LEVELSMITH_THREADS");
    CHECK(worker_count() == 1);
    setenv("LEVELSMITH_THREADS", "4", 1);
    CHECK(worker_count() == 4);
    setenv("LEVELSMITH_THREADS", "0", 1);
    CHECK(worker_count() == 1);
    unsetenv("LEVELSMITH_THREADS");
}

TEST_CASE("run_plan persists artifacts whose re-scoring matches the report") {
    const fs::path out_root = fs::temp_directory_path() / "levelsmith-runplan-test";
    fs::remove_all(out_root);
    ExperimentPlan plan = desk_plan();
    RunReport report = run_plan(plan, out_root);

    REQUIRE(report.per_seed.size() == 1);
    const CellMetrics& scored = report.per_seed[0].cells[0][0];
    REQUIRE(scored.present);
    CHECK(scored.percent_playable >= 0.0);
    CHECK(scored.percent_playable <= 100.0);

    CHECK(fs::exists(report.run_dir / "plan.cfg"));
    CHECK(fs::exists(report.run_dir / "report.txt"));
    CHECK(fs::exists(report.run_dir / "report.json"));
    const fs::path model = report.run_dir / "models" / "seed11-vanilla.bin";
    CHECK(fs::exists(model));
    const auto meta = gan::read_sidecar(fs::path(model.string() + ".meta"));
    CHECK(meta.at("kind") == "vanilla");
    CHECK(meta.at("corpus_hash") == report.corpus_hash);

    const fs::path samples = report.run_dir / "samples" / "seed11-vanilla" / "all" / "levels.txt";
    REQUIRE(fs::exists(samples));
    std::ifstream in(samples, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto grids = parse_samples_file(buf.str(), TileSet::cave());
    CHECK(grids.size() == 6);
    CellMetrics rescored = evaluate_samples(grids, Game::Cave, std::nullopt);
    CHECK(rescored.percent_playable == scored.percent_playable);

    // Report text embeds the published reference rows and the plan echo.
    std::ifstream rin(report.run_dir / "report.txt", std::ios::binary);
    std::stringstream rbuf;
    rbuf << rin.rdbuf();
    const std::string text = rbuf.str();
    CHECK(text.find("87.0 / 89.6 / 66.6") != std::string::npos);
    CHECK(text.find("67.8 / 72.0 / 75.4") != std::string::npos);
    CHECK(text.find("samples_per_model = 6") != std::string::npos);
    fs::remove_all(out_root);
}
