#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "levelsmith/experiments.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitGenerationTimeout = 3;
constexpr int kExitNonFiniteLoss = 4;
constexpr int kExitMissingArtifact = 5;
constexpr int kExitLabelRequired = 6;

using namespace levelsmith;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw exp::WriteFailure("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw exp::WriteFailure("cannot write " + path.string());
    out << text;
}

Game parse_game(const std::string& name) {
    auto game = game_from_string(name);
    if (!game) throw CLI::ValidationError("--game", "unknown game: " + name);
    return *game;
}

std::vector<int> parse_classes(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    if (out.empty()) throw CLI::ValidationError("--classes", "empty class list");
    return out;
}

Objective parse_objective(const std::string& text) {
    if (text == "playability") return Objective::playability();
    if (text.rfind("class:", 0) == 0) return Objective::class_k_of(std::stoi(text.substr(6)));
    throw CLI::ValidationError("--objective", "expected playability or class:<k>");
}

// Train-config flags shared by `train` and echoed in --help with the
// published defaults.
void add_train_flags(CLI::App* cmd, gan::TrainConfig& config, std::string& loss_head) {
    cmd->add_option("--batch-size", config.batch_size, "Training batch size")
        ->capture_default_str();
    cmd->add_option("--lr", config.learning_rate, "RMSprop learning rate")
        ->capture_default_str();
    cmd->add_option("--iterations", config.iterations, "Generator iterations")
        ->capture_default_str();
    cmd->add_option("--critic-steps", config.critic_steps_per_gen_step,
                    "Critic steps per generator step")
        ->capture_default_str();
    cmd->add_option("--clip", config.clip, "Critic weight clip (wasserstein head)")
        ->capture_default_str();
    cmd->add_option("--alpha-plus", config.alpha_plus, "Positive-term weight")
        ->capture_default_str();
    cmd->add_option("--alpha-minus", config.alpha_minus, "Negative-term weight")
        ->capture_default_str();
    cmd->add_option("--loss-head", loss_head, "Loss head: wasserstein or loggan")
        ->capture_default_str();
    cmd->add_option("--latent-dim", config.latent_dim, "Latent vector size")
        ->capture_default_str();
}

int cmd_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
    const auto entries = build_corpus(spec);
    write_corpus(out_dir, spec, entries);
    std::cout << "wrote " << entries.size() << " levels to " << out_dir.string() << "\n";
    return 0;
}

int cmd_train(const std::filesystem::path& corpus_dir, ModelKind kind, Objective objective,
              gan::TrainConfig config, const std::filesystem::path& out_path) {
    if (!std::filesystem::exists(corpus_dir)) {
        std::cerr << "corpus directory not found: " << corpus_dir.string() << "\n";
        return kExitMissingArtifact;
    }
    CorpusSpec spec;
    const auto corpus = read_corpus(corpus_dir, spec);
    const TileSet& tileset = TileSet::for_game(spec.game);
    const Partition partition = partition_samples(corpus, objective, kind, config.seed);

    auto write_history = [&](const gan::TrainHistory& history) {
        std::ostringstream ss;
        ss << "iteration,critic_loss,gen_loss,critic_grad_norm,gen_grad_norm\n";
        for (std::size_t i = 0; i < history.gen_loss.size(); ++i)
            ss << i << "," << history.critic_loss[i] << "," << history.gen_loss[i] << ","
               << history.critic_grad_norm[i] << "," << history.gen_grad_norm[i] << "\n";
        write_file(out_path.string() + ".history.csv", ss.str());
    };

    gan::TrainedModel model;
    try {
        model = gan::train(kind, partition, tileset, config);
    } catch (const gan::NonFiniteLoss& e) {
        write_history(e.history);
        std::cerr << "training aborted: " << e.what() << " (partial history preserved)\n";
        return kExitNonFiniteLoss;
    }

    std::map<std::string, std::string> meta;
    meta["kind"] = to_string(kind);
    meta["game"] = to_string(spec.game);
    meta["objective"] = objective.kind == Objective::Kind::Playability
                            ? "playability"
                            : "class:" + std::to_string(objective.class_k);
    meta["seed"] = std::to_string(config.seed);
    meta["loss_head"] = gan::to_string(config.loss_head);
    meta["iterations"] = std::to_string(config.iterations);
    meta["corpus_hash"] = corpus_hash(corpus, tileset);
    gan::save_model(out_path, model.gen, model.critic, meta);
    write_history(model.history);
    std::cout << "wrote model " << out_path.string() << "\n";
    return 0;
}

int cmd_sample(const std::filesystem::path& model_path, int n, std::uint64_t seed,
               const std::string& label_text, const std::filesystem::path& out_dir) {
    if (!std::filesystem::exists(model_path)) {
        std::cerr << "model not found: " << model_path.string() << "\n";
        return kExitMissingArtifact;
    }
    auto model = gan::load_model(model_path);
    const auto game = game_from_string(model.meta.at("game"));
    if (!game) throw exp::ExperimentError("model sidecar has unknown game");
    const TileSet& tileset = TileSet::for_game(*game);

    std::optional<LabelPair> label;
    if (!label_text.empty()) {
        LabelPair pair;
        if (std::sscanf(label_text.c_str(), "%d,%d", &pair.class_value, &pair.neg_flag) != 2) {
            std::cerr << "--label expects <class>,<neg_flag>\n";
            return kExitValidation;
        }
        label = pair;
    }
    std::mt19937_64 rng(seed);
    std::vector<Grid> grids;
    try {
        grids = gan::sample(model.gen, n, label, tileset, rng);
    } catch (const gan::LabelRequired& e) {
        std::cerr << e.what() << "\n";
        return kExitLabelRequired;
    }
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "levels.txt", exp::samples_file_text(grids, tileset));
    std::cout << "wrote " << grids.size() << " levels to " << (out_dir / "levels.txt").string()
              << "\n";
    return 0;
}

int cmd_eval(const std::filesystem::path& samples_dir, Game game, std::optional<int> target) {
    if (!std::filesystem::exists(samples_dir)) {
        std::cerr << "samples directory not found: " << samples_dir.string() << "\n";
        return kExitMissingArtifact;
    }
    const TileSet& tileset = TileSet::for_game(game);
    std::vector<Grid> grids;
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_regular_file(samples_dir)) {
        files.push_back(samples_dir);
    } else {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(samples_dir))
            if (entry.is_regular_file() && entry.path().filename() == "levels.txt")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    }
    for (const auto& file : files) {
        auto part = exp::parse_samples_file(read_file(file), tileset);
        grids.insert(grids.end(), part.begin(), part.end());
    }
    if (grids.empty()) {
        std::cerr << "no levels found under " << samples_dir.string() << "\n";
        return kExitMissingArtifact;
    }
    const auto cell = exp::evaluate_samples(grids, game, target);
    std::cout << "levels: " << grids.size() << "\n";
    std::cout << "playable: " << cell.percent_playable << "\n";
    if (target) {
        std::cout << "correct: " << cell.percent_correct << "\n";
        std::cout << "playable_correct: " << cell.percent_playable_correct << "\n";
    }
    return 0;
}

int cmd_experiment(const std::filesystem::path& plan_path, const std::string& seeds_csv,
                   const std::vector<std::string>& overrides,
                   const std::filesystem::path& out_root) {
    if (!std::filesystem::exists(plan_path)) {
        std::cerr << "plan file not found: " << plan_path.string() << "\n";
        return kExitMissingArtifact;
    }
    exp::ExperimentPlan plan = exp::parse_plan(read_file(plan_path));
    if (!seeds_csv.empty()) exp::apply_plan_setting(plan, "experiment", "seeds", seeds_csv);
    for (const std::string& item : overrides) {
        const auto dot = item.find('.');
        const auto eq = item.find('=');
        if (dot == std::string::npos || eq == std::string::npos || eq < dot) {
            std::cerr << "--set expects section.key=value, got: " << item << "\n";
            return kExitValidation;
        }
        exp::apply_plan_setting(plan, item.substr(0, dot), item.substr(dot + 1, eq - dot - 1),
                                item.substr(eq + 1));
    }
    plan.validate();
    const auto report = exp::run_plan(plan, out_root);
    std::cout << exp::render_report_text(report);
    std::cout << "run directory: " << report.run_dir.string() << "\n";
    return 0;
}

int cmd_render(const std::filesystem::path& file, Game game, int index) {
    if (!std::filesystem::exists(file)) {
        std::cerr << "level file not found: " << file.string() << "\n";
        return kExitMissingArtifact;
    }
    const TileSet& tileset = TileSet::for_game(game);
    // Accept both sample files and corpus files (whose '#' headers we skip).
    std::string text;
    {
        std::stringstream in(read_file(file));
        std::string line;
        while (std::getline(in, line))
            if (line.empty() || line[0] != '#') text += line + "\n";
    }
    const auto grids = exp::parse_samples_file(text, tileset);
    if (index < 0 || index >= static_cast<int>(grids.size())) {
        std::cerr << "level index " << index << " out of range (file has " << grids.size()
                  << " levels)\n";
        return kExitValidation;
    }
    std::cout << render_level(grids[index], tileset) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tile level corpus generation, GAN training and evaluation"};
    app.require_subcommand(1);

    // corpus
    auto* corpus = app.add_subcommand("corpus", "Generate a playable/unplayable level corpus");
    std::string corpus_game = "cave", corpus_classes = "1,2,3", corpus_out = "corpus";
    CorpusSpec corpus_spec;
    corpus->add_option("--game", corpus_game, "Game: cave or mario")->capture_default_str();
    auto* rows_opt = corpus->add_option("--rows", corpus_spec.rows, "Level rows");
    auto* cols_opt = corpus->add_option("--cols", corpus_spec.cols, "Level columns");
    corpus->add_option("--classes", corpus_classes, "Feature-count classes")
        ->capture_default_str();
    corpus->add_option("--per-class", corpus_spec.per_class, "Levels per class per side")
        ->capture_default_str();
    corpus->add_option("--seed", corpus_spec.seed, "Corpus seed")->capture_default_str();
    corpus->add_option("--window", corpus_spec.window, "Pattern window size")
        ->capture_default_str();
    corpus->add_option("--attempt-budget", corpus_spec.attempt_budget,
                       "Generation attempts per level")
        ->capture_default_str();
    corpus->add_option("--out", corpus_out, "Output directory")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train one model on a corpus");
    std::string train_corpus = "corpus", train_kind = "vanilla", train_objective = "playability";
    std::string train_out = "model.bin", train_loss_head = "wasserstein";
    gan::TrainConfig train_config;
    train->add_option("--corpus", train_corpus, "Corpus directory")->capture_default_str();
    train->add_option("--kind", train_kind, "Model kind: vanilla, rumi or cgan")
        ->capture_default_str();
    train->add_option("--objective", train_objective, "playability or class:<k>")
        ->capture_default_str();
    train->add_option("--seed", train_config.seed, "Training seed")->capture_default_str();
    train->add_option("--out", train_out, "Model output path")->capture_default_str();
    add_train_flags(train, train_config, train_loss_head);

    // sample
    auto* sample = app.add_subcommand("sample", "Draw levels from a trained model");
    std::string sample_model = "model.bin", sample_label, sample_out = "samples";
    int sample_n = 500;
    std::uint64_t sample_seed = 0;
    sample->add_option("--model", sample_model, "Model file")->capture_default_str();
    sample->add_option("--n", sample_n, "Number of levels")->capture_default_str();
    sample->add_option("--seed", sample_seed, "Sampling seed")->capture_default_str();
    sample->add_option("--label", sample_label, "Conditional label <class>,<neg_flag>");
    sample->add_option("--out", sample_out, "Output directory")->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Score persisted level samples");
    std::string eval_samples = "samples", eval_game = "cave";
    int eval_target = -1;
    eval->add_option("--samples", eval_samples, "Samples directory or levels.txt")
        ->capture_default_str();
    eval->add_option("--game", eval_game, "Game: cave or mario")->capture_default_str();
    eval->add_option("--target", eval_target, "Target feature count (enables correctness)");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run a full experiment plan");
    std::string exp_plan, exp_seeds, exp_out = "runs";
    std::vector<std::string> exp_overrides;
    experiment->add_option("--plan", exp_plan, "Plan config file")->required();
    experiment->add_option("--seeds", exp_seeds, "Override plan seeds (csv)");
    experiment->add_option("--set", exp_overrides, "Override a plan setting: section.key=value");
    experiment->add_option("--out", exp_out, "Run directory root")->capture_default_str();

    // render
    auto* render = app.add_subcommand("render", "Print a stored level as glyph art");
    std::string render_file, render_game = "cave";
    int render_index = 0;
    render->add_option("--file", render_file, "Level or sample file")->required();
    render->add_option("--game", render_game, "Game: cave or mario")->capture_default_str();
    render->add_option("--index", render_index, "Level index within the file")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitValidation;
    }

    try {
        if (corpus->parsed()) {
            corpus_spec.game = parse_game(corpus_game);
            if (!*rows_opt) corpus_spec.rows = 14;
            if (!*cols_opt) corpus_spec.cols = corpus_spec.game == Game::Cave ? 14 : 32;
            corpus_spec.classes = parse_classes(corpus_classes);
            return cmd_corpus(corpus_spec, corpus_out);
        }
        if (train->parsed()) {
            auto kind = model_kind_from_string(train_kind);
            if (!kind) {
                std::cerr << "unknown model kind: " << train_kind << "\n";
                return kExitValidation;
            }
            auto head = gan::loss_head_from_string(train_loss_head);
            if (!head) {
                std::cerr << "unknown loss head: " << train_loss_head << "\n";
                return kExitValidation;
            }
            train_config.loss_head = *head;
            return cmd_train(train_corpus, *kind, parse_objective(train_objective), train_config,
                             train_out);
        }
        if (sample->parsed()) return cmd_sample(sample_model, sample_n, sample_seed,
                                                sample_label, sample_out);
        if (eval->parsed())
            return cmd_eval(eval_samples, parse_game(eval_game),
                            eval_target < 0 ? std::nullopt : std::optional<int>(eval_target));
        if (experiment->parsed())
            return cmd_experiment(exp_plan, exp_seeds, exp_overrides, exp_out);
        if (render->parsed())
            return cmd_render(render_file, parse_game(render_game), render_index);
    } catch (const GenerationTimeout& e) {
        std::cerr << e.what() << "\n";
        return kExitGenerationTimeout;
    } catch (const MutationFailed& e) {
        std::cerr << e.what() << "\n";
        return kExitGenerationTimeout;
    } catch (const gan::NonFiniteLoss& e) {
        std::cerr << e.what() << "\n";
        return kExitNonFiniteLoss;
    } catch (const gan::LabelRequired& e) {
        std::cerr << e.what() << "\n";
        return kExitLabelRequired;
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const exp::BadPlan& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
