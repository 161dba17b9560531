#pragma once

#include "levelsmith/ganmodels.hpp"

namespace levelsmith::exp {

struct ExperimentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadPlan : ExperimentError {
    using ExperimentError::ExperimentError;
};
struct WriteFailure : ExperimentError {
    using ExperimentError::ExperimentError;
};

enum class ExperimentId { One, Two };

struct ExperimentPlan {
    ExperimentId experiment = ExperimentId::One;
    Game game = Game::Cave;
    std::vector<ModelKind> model_kinds{ModelKind::Vanilla, ModelKind::Rumi, ModelKind::CGan};
    std::vector<int> classes{1, 2, 3};
    int samples_per_model = 500;
    gan::TrainConfig train_config;
    CorpusSpec corpus_spec = CorpusSpec::cave_preset();
    std::vector<std::uint64_t> seeds{1, 2, 3};

    void validate() const;  // throws BadPlan
};

/// One scored cell: percentages in [0,100], rounded to one decimal.
/// A cell left absent records the error that interrupted its model.
struct CellMetrics {
    bool present = false;
    double percent_correct = 0.0;
    double percent_playable = 0.0;
    double percent_playable_correct = 0.0;
    std::string error;
};

/// cells[kind][class]; Experiment One has a single pseudo-class column.
struct MetricsTable {
    std::vector<ModelKind> kinds;
    std::vector<int> classes;
    std::vector<std::vector<CellMetrics>> cells;

    CellMetrics average(std::size_t kind_index) const;
};

struct RunReport {
    ExperimentPlan plan;
    std::string corpus_hash;
    std::vector<MetricsTable> per_seed;  // parallel to plan.seeds
    MetricsTable median;
    std::filesystem::path run_dir;
};

CellMetrics evaluate_samples(const std::vector<Grid>& grids, Game game,
                             std::optional<int> target_count);

MetricsTable median_of(const std::vector<MetricsTable>& tables);

/// Trains every (kind, class, seed) model in the plan, samples
/// samples_per_model levels each, persists everything under
/// out_root/<timestamp>-<plan-hash>/ and scores the persisted files.
RunReport run_plan(const ExperimentPlan& plan, const std::filesystem::path& out_root);

std::string render_report_text(const RunReport& report);
std::string render_report_json(const RunReport& report);

// Plan config: flat `key = value` lines under [experiment], [corpus] and
// [train] section headers; '#' starts a comment. Unknown keys are rejected.
ExperimentPlan parse_plan(const std::string& text);
void apply_plan_setting(ExperimentPlan& plan, const std::string& section, const std::string& key,
                        const std::string& value);
std::string plan_echo(const ExperimentPlan& plan);  // canonical config text
std::string plan_hash(const ExperimentPlan& plan);

// Sample persistence: blank-line separated rendered levels.
std::string samples_file_text(const std::vector<Grid>& grids, const TileSet& tileset);
std::vector<Grid> parse_samples_file(const std::string& text, const TileSet& tileset);

int worker_count();  // LEVELSMITH_THREADS, default 1

std::string to_string(ExperimentId id);

}  // namespace levelsmith::exp
