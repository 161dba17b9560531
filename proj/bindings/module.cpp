#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "levelsmith/experiments.hpp"

namespace py = pybind11;
using namespace levelsmith;

namespace {

Game game_arg(const std::string& name) {
    auto game = game_from_string(name);
    if (!game) throw py::value_error("unknown game: " + name);
    return *game;
}

ModelKind kind_arg(const std::string& name) {
    auto kind = model_kind_from_string(name);
    if (!kind) throw py::value_error("unknown model kind: " + name);
    return *kind;
}

py::dict entry_dict(const CorpusEntry& entry, const TileSet& tileset) {
    py::dict d;
    d["level"] = render_level(entry.grid, tileset);
    d["playable"] = entry.playable;
    d["features"] = entry.feature_count;
    d["class_label"] = entry.class_label;
    return d;
}

}  // namespace

PYBIND11_MODULE(_levelsmith, m) {
    m.doc() = "Tile level corpus generation, playability checking and GAN training";

    m.def(
        "playable",
        [](const std::string& text, const std::string& game_name) {
            const Game game = game_arg(game_name);
            const TileSet& tileset = TileSet::for_game(game);
            return is_playable(parse_level(text, tileset), tileset, MoveModel::for_game(game))
                .playable;
        },
        py::arg("level"), py::arg("game"));

    m.def(
        "shortest_path",
        [](const std::string& text, const std::string& game_name)
            -> std::optional<std::vector<std::pair<int, int>>> {
            const Game game = game_arg(game_name);
            const TileSet& tileset = TileSet::for_game(game);
            return is_playable(parse_level(text, tileset), tileset, MoveModel::for_game(game))
                .path;
        },
        py::arg("level"), py::arg("game"));

    m.def(
        "feature_count",
        [](const std::string& text, const std::string& game_name) {
            const Game game = game_arg(game_name);
            return count_features(parse_level(text, TileSet::for_game(game)), game);
        },
        py::arg("level"), py::arg("game"));

    m.def(
        "normalize_level",
        [](const std::string& text, const std::string& game_name) {
            const TileSet& tileset = TileSet::for_game(game_arg(game_name));
            return render_level(parse_level(text, tileset), tileset);
        },
        py::arg("level"), py::arg("game"));

    m.def(
        "generate_corpus",
        [](const std::string& game_name, int rows, int cols, std::vector<int> classes,
           int per_class, std::uint64_t seed) {
            CorpusSpec spec;
            spec.game = game_arg(game_name);
            spec.rows = rows;
            spec.cols = cols;
            spec.classes = std::move(classes);
            spec.per_class = per_class;
            spec.seed = seed;
            const TileSet& tileset = TileSet::for_game(spec.game);
            py::list out;
            for (const CorpusEntry& entry : build_corpus(spec))
                out.append(entry_dict(entry, tileset));
            return out;
        },
        py::arg("game"), py::arg("rows"), py::arg("cols"), py::arg("classes"),
        py::arg("per_class"), py::arg("seed"));

    m.def(
        "evaluate",
        [](const std::vector<std::string>& levels, const std::string& game_name,
           std::optional<int> target) {
            const Game game = game_arg(game_name);
            const TileSet& tileset = TileSet::for_game(game);
            std::vector<Grid> grids;
            for (const std::string& text : levels) grids.push_back(parse_level(text, tileset));
            const auto cell = exp::evaluate_samples(grids, game, target);
            py::dict d;
            d["playable"] = cell.percent_playable;
            if (target) {
                d["correct"] = cell.percent_correct;
                d["playable_correct"] = cell.percent_playable_correct;
            }
            return d;
        },
        py::arg("levels"), py::arg("game"), py::arg("target") = std::nullopt);

    m.def(
        "train_and_sample",
        [](const std::string& game_name, const std::vector<py::dict>& corpus,
           const std::string& kind_name, int iterations, int batch_size, std::uint64_t seed,
           int n_samples, std::optional<int> target_class) {
            const Game game = game_arg(game_name);
            const TileSet& tileset = TileSet::for_game(game);
            const ModelKind kind = kind_arg(kind_name);
            std::vector<CorpusEntry> entries;
            for (const py::dict& d : corpus) {
                CorpusEntry entry;
                entry.grid = parse_level(d["level"].cast<std::string>(), tileset);
                entry.playable = d["playable"].cast<bool>();
                entry.feature_count = d["features"].cast<int>();
                entry.class_label = d["class_label"].cast<int>();
                entries.push_back(std::move(entry));
            }
            const Objective objective = target_class ? Objective::class_k_of(*target_class)
                                                     : Objective::playability();
            const Partition partition = partition_samples(entries, objective, kind, seed);
            gan::TrainConfig config;
            config.iterations = iterations;
            config.batch_size = batch_size;
            config.seed = seed;
            gan::TrainedModel model = gan::train(kind, partition, tileset, config);
            std::mt19937_64 rng(seed + 1);
            std::optional<LabelPair> label;
            if (kind == ModelKind::CGan) label = LabelPair{target_class.value_or(1), 0};
            std::vector<std::string> out;
            for (const Grid& grid : gan::sample(model.gen, n_samples, label, tileset, rng))
                out.push_back(render_level(grid, tileset));
            return out;
        },
        py::arg("game"), py::arg("corpus"), py::arg("kind"), py::arg("iterations"),
        py::arg("batch_size"), py::arg("seed"), py::arg("n_samples"),
        py::arg("target_class") = std::nullopt);

    m.def("child_seed", &child_seed, py::arg("seed"), py::arg("a"), py::arg("b"),
          py::arg("c") = 0);
}
