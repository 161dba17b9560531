#include "levelsmith/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace levelsmith::exp {

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string fmt1(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << v;
    return ss.str();
}

std::string join_csv(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

struct Table3Ref {
    const char* game;
    double vanilla, rumi, cgan;
};
constexpr Table3Ref kExp1Reference[] = {{"mario", 67.8, 72.0, 75.4}, {"cave", 87.0, 89.6, 66.6}};

// Published per-class results: {correct 1,2,3, playable 1,2,3, playable-correct 1,2,3}.
struct Table45Ref {
    const char* model;
    double correct[3], playable[3], playable_correct[3];
};
constexpr Table45Ref kExp2ReferenceMario[] = {
    {"vanilla", {44.8, 41.2, 19.0}, {67.6, 65.0, 64.4}, {30.4, 28.8, 12.8}},
    {"rumi", {41.2, 41.0, 0.6}, {65.2, 71.2, 56.8}, {25.4, 31.0, 0.0}},
    {"cgan", {44.4, 31.2, 34.8}, {65.4, 69.8, 62.4}, {29.4, 22.4, 23.4}},
};
constexpr Table45Ref kExp2ReferenceCave[] = {
    {"vanilla", {24.4, 20.6, 4.6}, {85.0, 79.0, 81.8}, {20.6, 16.2, 4.0}},
    {"rumi", {18.4, 24.6, 1.8}, {83.6, 84.0, 82.2}, {16.2, 21.4, 1.8}},
    {"cgan", {38.6, 30.0, 19.6}, {41.7, 31.9, 32.2}, {16.0, 9.6, 12.8}},
};

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::string to_string(ExperimentId id) { return id == ExperimentId::One ? "one" : "two"; }

void ExperimentPlan::validate() const {
    if (samples_per_model < 1) throw BadPlan("samples_per_model must be at least 1");
    if (experiment == ExperimentId::Two && classes.size() < 2)
        throw BadPlan("experiment two needs at least two classes");
    if (model_kinds.empty()) throw BadPlan("plan selects no models");
    if (seeds.empty()) throw BadPlan("plan has no seeds");
    if (classes.empty()) throw BadPlan("plan has no classes");
    if (train_config.batch_size < 1 || train_config.iterations < 0 ||
        train_config.critic_steps_per_gen_step < 1 || train_config.latent_dim < 1)
        throw BadPlan("invalid training configuration");
    if (corpus_spec.per_class < 1) throw BadPlan("corpus per_class must be at least 1");
}

CellMetrics MetricsTable::average(std::size_t kind_index) const {
    CellMetrics avg;
    const auto& row = cells.at(kind_index);
    int n = 0;
    for (const auto& cell : row) {
        if (!cell.present) continue;
        avg.percent_correct += cell.percent_correct;
        avg.percent_playable += cell.percent_playable;
        avg.percent_playable_correct += cell.percent_playable_correct;
        ++n;
    }
    if (n == 0) {
        avg.error = "no successful class";
        return avg;
    }
    avg.present = true;
    avg.percent_correct = round1(avg.percent_correct / n);
    avg.percent_playable = round1(avg.percent_playable / n);
    avg.percent_playable_correct = round1(avg.percent_playable_correct / n);
    return avg;
}

CellMetrics evaluate_samples(const std::vector<Grid>& grids, Game game,
                             std::optional<int> target_count) {
    if (grids.empty()) throw ExperimentError("no samples to evaluate");
    const TileSet& tileset = TileSet::for_game(game);
    const MoveModel model = MoveModel::for_game(game);
    int playable = 0, correct = 0, playable_correct = 0;
    for (const Grid& grid : grids) {
        const bool p = is_playable(grid, tileset, model).playable;
        const bool c = target_count && count_features(grid, game) == *target_count;
        playable += p;
        correct += c;
        playable_correct += p && c;
    }
    const double n = static_cast<double>(grids.size());
    CellMetrics cell;
    cell.present = true;
    cell.percent_playable = round1(100.0 * playable / n);
    if (target_count) {
        cell.percent_correct = round1(100.0 * correct / n);
        cell.percent_playable_correct = round1(100.0 * playable_correct / n);
    }
    return cell;
}

MetricsTable median_of(const std::vector<MetricsTable>& tables) {
    if (tables.empty()) throw ExperimentError("median of no tables");
    MetricsTable out;
    out.kinds = tables.front().kinds;
    out.classes = tables.front().classes;
    const std::size_t ncols = tables.front().cells.empty() ? 0 : tables.front().cells[0].size();
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : round1((v[n / 2 - 1] + v[n / 2]) / 2.0);
    };
    for (std::size_t k = 0; k < out.kinds.size(); ++k) {
        out.cells.emplace_back();
        for (std::size_t c = 0; c < ncols; ++c) {
            std::vector<double> pc, pp, ppc;
            std::string error;
            for (const auto& t : tables) {
                const CellMetrics& cell = t.cells[k][c];
                if (!cell.present) {
                    error = cell.error;
                    continue;
                }
                pc.push_back(cell.percent_correct);
                pp.push_back(cell.percent_playable);
                ppc.push_back(cell.percent_playable_correct);
            }
            CellMetrics cell;
            if (pp.empty()) {
                cell.error = error.empty() ? "no successful seed" : error;
            } else {
                cell.present = true;
                cell.percent_correct = median(pc);
                cell.percent_playable = median(pp);
                cell.percent_playable_correct = median(ppc);
            }
            out.cells.back().push_back(cell);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plan config
// ---------------------------------------------------------------------------

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoull(item));
    return out;
}

std::vector<ModelKind> parse_kind_list(const std::string& s) {
    std::vector<ModelKind> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto kind = model_kind_from_string(item);
        if (!kind) throw BadPlan("unknown model kind: " + item);
        out.push_back(*kind);
    }
    return out;
}

}  // namespace

void apply_plan_setting(ExperimentPlan& plan, const std::string& section, const std::string& key,
                        const std::string& value) {
    try {
        if (section == "experiment") {
            if (key == "experiment") {
                if (value == "one")
                    plan.experiment = ExperimentId::One;
                else if (value == "two")
                    plan.experiment = ExperimentId::Two;
                else
                    throw BadPlan("experiment must be one or two");
            } else if (key == "game") {
                auto game = game_from_string(value);
                if (!game) throw BadPlan("unknown game: " + value);
                plan.game = *game;
                plan.corpus_spec.game = *game;
                plan.corpus_spec.rows = 14;
                plan.corpus_spec.cols = *game == Game::Cave ? 14 : 32;
            } else if (key == "models") {
                plan.model_kinds = parse_kind_list(value);
            } else if (key == "classes") {
                plan.classes = parse_int_list(value);
                plan.corpus_spec.classes = plan.classes;
            } else if (key == "samples_per_model") {
                plan.samples_per_model = std::stoi(value);
            } else if (key == "seeds") {
                plan.seeds = parse_seed_list(value);
            } else {
                throw BadPlan("unknown key [experiment] " + key);
            }
        } else if (section == "corpus") {
            if (key == "rows")
                plan.corpus_spec.rows = std::stoi(value);
            else if (key == "cols")
                plan.corpus_spec.cols = std::stoi(value);
            else if (key == "per_class")
                plan.corpus_spec.per_class = std::stoi(value);
            else if (key == "seed")
                plan.corpus_spec.seed = std::stoull(value);
            else if (key == "window")
                plan.corpus_spec.window = std::stoi(value);
            else if (key == "attempt_budget")
                plan.corpus_spec.attempt_budget = std::stoi(value);
            else
                throw BadPlan("unknown key [corpus] " + key);
        } else if (section == "train") {
            if (key == "batch_size")
                plan.train_config.batch_size = std::stoi(value);
            else if (key == "learning_rate")
                plan.train_config.learning_rate = std::stod(value);
            else if (key == "iterations")
                plan.train_config.iterations = std::stoi(value);
            else if (key == "critic_steps")
                plan.train_config.critic_steps_per_gen_step = std::stoi(value);
            else if (key == "clip")
                plan.train_config.clip = std::stod(value);
            else if (key == "alpha_plus")
                plan.train_config.alpha_plus = std::stod(value);
            else if (key == "alpha_minus")
                plan.train_config.alpha_minus = std::stod(value);
            else if (key == "loss_head") {
                auto head = gan::loss_head_from_string(value);
                if (!head) throw BadPlan("unknown loss head: " + value);
                plan.train_config.loss_head = *head;
            } else if (key == "latent_dim")
                plan.train_config.latent_dim = std::stoi(value);
            else
                throw BadPlan("unknown key [train] " + key);
        } else {
            throw BadPlan("unknown section [" + section + "]");
        }
    } catch (const std::invalid_argument&) {
        throw BadPlan("bad value for " + section + "." + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw BadPlan("bad value for " + section + "." + key + ": " + value);
    }
}

ExperimentPlan parse_plan(const std::string& text) {
    ExperimentPlan plan;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string& s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        };
        trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw BadPlan("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        trim(key);
        trim(value);
        if (section.empty()) throw BadPlan("setting before any [section] header");
        apply_plan_setting(plan, section, key, value);
    }
    plan.validate();
    return plan;
}

std::string plan_echo(const ExperimentPlan& plan) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "experiment = " << to_string(plan.experiment) << "\n";
    out << "game = " << levelsmith::to_string(plan.game) << "\n";
    out << "models = ";
    for (std::size_t i = 0; i < plan.model_kinds.size(); ++i)
        out << (i ? "," : "") << levelsmith::to_string(plan.model_kinds[i]);
    out << "\n";
    out << "classes = " << join_csv(plan.classes) << "\n";
    out << "samples_per_model = " << plan.samples_per_model << "\n";
    out << "seeds = " << join_seeds(plan.seeds) << "\n";
    out << "\n[corpus]\n";
    out << "rows = " << plan.corpus_spec.rows << "\n";
    out << "cols = " << plan.corpus_spec.cols << "\n";
    out << "per_class = " << plan.corpus_spec.per_class << "\n";
    out << "seed = " << plan.corpus_spec.seed << "\n";
    out << "window = " << plan.corpus_spec.window << "\n";
    out << "attempt_budget = " << plan.corpus_spec.attempt_budget << "\n";
    out << "\n[train]\n";
    out << "batch_size = " << plan.train_config.batch_size << "\n";
    out << "learning_rate = " << fmt1(plan.train_config.learning_rate * 1e5) << "e-5\n";
    out << "iterations = " << plan.train_config.iterations << "\n";
    out << "critic_steps = " << plan.train_config.critic_steps_per_gen_step << "\n";
    out << "clip = " << plan.train_config.clip << "\n";
    out << "alpha_plus = " << plan.train_config.alpha_plus << "\n";
    out << "alpha_minus = " << plan.train_config.alpha_minus << "\n";
    out << "loss_head = " << gan::to_string(plan.train_config.loss_head) << "\n";
    out << "latent_dim = " << plan.train_config.latent_dim << "\n";
    return out.str();
}

std::string plan_hash(const ExperimentPlan& plan) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a(plan_echo(plan));
    return ss.str();
}

// ---------------------------------------------------------------------------
// Sample files
// ---------------------------------------------------------------------------

std::string samples_file_text(const std::vector<Grid>& grids, const TileSet& tileset) {
    std::string out;
    for (const Grid& grid : grids) {
        out += render_level(grid, tileset);
        out += "\n\n";
    }
    return out;
}

std::vector<Grid> parse_samples_file(const std::string& text, const TileSet& tileset) {
    std::vector<Grid> grids;
    std::string block;
    std::stringstream ss(text);
    std::string line;
    auto flush = [&] {
        if (block.find_first_not_of(" \t\r\n") == std::string::npos) return;
        grids.push_back(parse_level(block, tileset));
        block.clear();
    };
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
        } else {
            block += line;
            block += '\n';
        }
    }
    flush();
    return grids;
}

// ---------------------------------------------------------------------------
// Plan execution
// ---------------------------------------------------------------------------

int worker_count() {
    const char* env = std::getenv("LEVELSMITH_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n < 1 ? 1 : n;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WriteFailure("cannot write " + path.string());
    out << text;
    if (!out) throw WriteFailure("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WriteFailure("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y%m%d-%H%M%S");
    return ss.str();
}

struct Job {
    std::size_t seed_index;
    std::size_t kind_index;
    int class_index;  // -1 for experiment one
};

}  // namespace

RunReport run_plan(const ExperimentPlan& plan_in, const std::filesystem::path& out_root) {
    ExperimentPlan plan = plan_in;
    plan.corpus_spec.game = plan.game;
    plan.corpus_spec.classes = plan.classes;
    plan.validate();

    const TileSet& tileset = TileSet::for_game(plan.game);
    const std::vector<CorpusEntry> corpus = build_corpus(plan.corpus_spec);

    RunReport report;
    report.plan = plan;
    report.corpus_hash = corpus_hash(corpus, tileset);
    report.run_dir = out_root / (timestamp_now() + "-" + plan_hash(plan));
    std::filesystem::create_directories(report.run_dir / "models");
    std::filesystem::create_directories(report.run_dir / "samples");
    write_text(report.run_dir / "plan.cfg", plan_echo(plan));

    const bool exp_two = plan.experiment == ExperimentId::Two;
    const int class_columns = exp_two ? static_cast<int>(plan.classes.size()) : 1;
    for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
        MetricsTable table;
        table.kinds = plan.model_kinds;
        if (exp_two) table.classes = plan.classes;
        table.cells.assign(plan.model_kinds.size(), std::vector<CellMetrics>(class_columns));
        report.per_seed.push_back(std::move(table));
    }

    std::vector<Job> jobs;
    for (std::size_t si = 0; si < plan.seeds.size(); ++si)
        for (std::size_t ki = 0; ki < plan.model_kinds.size(); ++ki)
            for (int ci = 0; ci < class_columns; ++ci)
                jobs.push_back({si, ki, exp_two ? ci : -1});

    auto run_job = [&](const Job& job) {
        const std::uint64_t seed = plan.seeds[job.seed_index];
        const ModelKind kind = plan.model_kinds[job.kind_index];
        CellMetrics& cell =
            report.per_seed[job.seed_index].cells[job.kind_index][std::max(job.class_index, 0)];
        try {
            const Objective objective = job.class_index < 0
                                            ? Objective::playability()
                                            : Objective::class_k_of(plan.classes[job.class_index]);
            const Partition partition = partition_samples(corpus, objective, kind, seed);
            gan::TrainConfig config = plan.train_config;
            config.seed = child_seed(seed, job.kind_index, job.class_index + 1, 0xEC5);
            gan::TrainedModel model = gan::train(kind, partition, tileset, config);

            std::string name = "seed" + std::to_string(seed) + "-" + levelsmith::to_string(kind);
            std::string class_dir = "all";
            if (job.class_index >= 0) {
                name += "-class" + std::to_string(plan.classes[job.class_index]);
                class_dir = "class_" + std::to_string(plan.classes[job.class_index]);
            }

            std::map<std::string, std::string> meta;
            meta["kind"] = levelsmith::to_string(kind);
            meta["game"] = levelsmith::to_string(plan.game);
            meta["objective"] = job.class_index < 0
                                    ? "playability"
                                    : "class:" + std::to_string(plan.classes[job.class_index]);
            meta["seed"] = std::to_string(seed);
            meta["train_seed"] = std::to_string(config.seed);
            meta["corpus_hash"] = report.corpus_hash;
            meta["loss_head"] = gan::to_string(config.loss_head);
            meta["iterations"] = std::to_string(config.iterations);
            if (kind == ModelKind::CGan) {
                meta["sample_label_neg_flag"] = "0";
                meta["sample_label_class"] =
                    job.class_index < 0 ? join_csv(plan.classes)
                                        : std::to_string(plan.classes[job.class_index]);
            }
            gan::save_model(report.run_dir / "models" / (name + ".bin"), model.gen, model.critic,
                            meta);

            std::mt19937_64 sample_rng(
                child_seed(seed, job.kind_index, job.class_index + 1, 0x5A11));
            std::vector<Grid> grids;
            if (kind == ModelKind::CGan && job.class_index < 0) {
                // Playability objective: draw conditional samples with the
                // desired flag, spread evenly across the class labels.
                const int nclasses = static_cast<int>(plan.classes.size());
                for (int i = 0; i < nclasses; ++i) {
                    const int n = plan.samples_per_model / nclasses +
                                  (i < plan.samples_per_model % nclasses ? 1 : 0);
                    if (n == 0) continue;
                    auto part = gan::sample(model.gen, n, LabelPair{plan.classes[i], 0}, tileset,
                                            sample_rng);
                    grids.insert(grids.end(), part.begin(), part.end());
                }
            } else if (kind == ModelKind::CGan) {
                grids = gan::sample(model.gen, plan.samples_per_model,
                                    LabelPair{plan.classes[job.class_index], 0}, tileset,
                                    sample_rng);
            } else {
                grids = gan::sample(model.gen, plan.samples_per_model, std::nullopt, tileset,
                                    sample_rng);
            }

            const auto sample_dir = report.run_dir / "samples" / name / class_dir;
            std::filesystem::create_directories(sample_dir);
            write_text(sample_dir / "levels.txt", samples_file_text(grids, tileset));

            // Score the persisted file, not the in-memory grids, so the
            // report is reproducible by re-scoring the sample directory.
            const auto persisted =
                parse_samples_file(read_text(sample_dir / "levels.txt"), tileset);
            cell = evaluate_samples(persisted, plan.game,
                                    job.class_index < 0
                                        ? std::nullopt
                                        : std::optional<int>(plan.classes[job.class_index]));
        } catch (const std::exception& e) {
            cell = CellMetrics{};
            cell.error = e.what();
        }
    };

    const int workers = std::min<int>(worker_count(), static_cast<int>(jobs.size()));
    if (workers <= 1) {
        for (const Job& job : jobs) run_job(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
                    run_job(jobs[i]);
            });
        for (auto& t : pool) t.join();
    }

    report.median = median_of(report.per_seed);
    write_text(report.run_dir / "report.txt", render_report_text(report));
    write_text(report.run_dir / "report.json", render_report_json(report));
    return report;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

std::string cell_str(const CellMetrics& cell, bool full) {
    if (!cell.present) return full ? "--/--/--" : "--";
    if (!full) return fmt1(cell.percent_playable);
    return fmt1(cell.percent_correct) + "/" + fmt1(cell.percent_playable) + "/" +
           fmt1(cell.percent_playable_correct);
}

void render_table_text(std::ostringstream& out, const MetricsTable& table, bool exp_two) {
    if (!exp_two) {
        out << "  model        playable%\n";
        for (std::size_t k = 0; k < table.kinds.size(); ++k) {
            out << "  " << std::left << std::setw(13) << levelsmith::to_string(table.kinds[k])
                << cell_str(table.cells[k][0], false) << "\n";
        }
        return;
    }
    out << "  cells are correct/playable/playable-correct percentages\n";
    out << "  model        ";
    for (int c : table.classes) out << std::left << std::setw(17) << ("class " + std::to_string(c));
    out << "avg\n";
    for (std::size_t k = 0; k < table.kinds.size(); ++k) {
        out << "  " << std::left << std::setw(13) << levelsmith::to_string(table.kinds[k]);
        for (std::size_t c = 0; c < table.cells[k].size(); ++c)
            out << std::left << std::setw(17) << cell_str(table.cells[k][c], true);
        out << cell_str(table.average(k), true) << "\n";
    }
    for (std::size_t k = 0; k < table.kinds.size(); ++k)
        for (std::size_t c = 0; c < table.cells[k].size(); ++c)
            if (!table.cells[k][c].present)
                out << "  ! " << levelsmith::to_string(table.kinds[k]) << " class "
                    << table.classes[c] << ": " << table.cells[k][c].error << "\n";
}

void render_exp1_errors(std::ostringstream& out, const MetricsTable& table) {
    for (std::size_t k = 0; k < table.kinds.size(); ++k)
        if (!table.cells[k][0].present)
            out << "  ! " << levelsmith::to_string(table.kinds[k]) << ": "
                << table.cells[k][0].error << "\n";
}

void render_references(std::ostringstream& out, const ExperimentPlan& plan) {
    if (plan.experiment == ExperimentId::One) {
        out << "published reference, playable% (vanilla / rumi / cgan):\n";
        for (const auto& ref : kExp1Reference)
            out << "  " << std::left << std::setw(7) << ref.game << fmt1(ref.vanilla) << " / "
                << fmt1(ref.rumi) << " / " << fmt1(ref.cgan) << "\n";
        return;
    }
    out << "published reference for " << levelsmith::to_string(plan.game)
        << ", correct/playable/playable-correct by class 1, 2, 3:\n";
    const auto* refs = plan.game == Game::Mario ? kExp2ReferenceMario : kExp2ReferenceCave;
    for (int i = 0; i < 3; ++i) {
        const auto& r = refs[i];
        out << "  " << std::left << std::setw(9) << r.model;
        for (int c = 0; c < 3; ++c)
            out << std::left << std::setw(17)
                << (fmt1(r.correct[c]) + "/" + fmt1(r.playable[c]) + "/" +
                    fmt1(r.playable_correct[c]));
        out << "\n";
    }
}

nlohmann::ordered_json cell_json(const CellMetrics& cell, bool exp_two) {
    nlohmann::ordered_json j;
    if (!cell.present) {
        j["error"] = cell.error;
        return j;
    }
    if (exp_two) {
        j["correct"] = cell.percent_correct;
        j["playable"] = cell.percent_playable;
        j["playable_correct"] = cell.percent_playable_correct;
    } else {
        j["playable"] = cell.percent_playable;
    }
    return j;
}

nlohmann::ordered_json table_json(const MetricsTable& table, bool exp_two) {
    nlohmann::ordered_json j;
    for (std::size_t k = 0; k < table.kinds.size(); ++k) {
        nlohmann::ordered_json row;
        if (exp_two) {
            for (std::size_t c = 0; c < table.cells[k].size(); ++c)
                row["class_" + std::to_string(table.classes[c])] =
                    cell_json(table.cells[k][c], true);
            row["avg"] = cell_json(table.average(k), true);
        } else {
            row = cell_json(table.cells[k][0], false);
        }
        j[levelsmith::to_string(table.kinds[k])] = std::move(row);
    }
    return j;
}

}  // namespace

std::string render_report_text(const RunReport& report) {
    const bool exp_two = report.plan.experiment == ExperimentId::Two;
    std::ostringstream out;
    out << "experiment " << to_string(report.plan.experiment) << " on "
        << levelsmith::to_string(report.plan.game) << "\n";
    out << "corpus_hash: " << report.corpus_hash << "\n";
    out << "seeds: " << join_seeds(report.plan.seeds) << "\n";
    out << "samples_per_model: " << report.plan.samples_per_model << "\n\n";
    for (std::size_t si = 0; si < report.per_seed.size(); ++si) {
        out << "seed " << report.plan.seeds[si] << ":\n";
        render_table_text(out, report.per_seed[si], exp_two);
        if (!exp_two) render_exp1_errors(out, report.per_seed[si]);
        out << "\n";
    }
    out << "median over seeds:\n";
    render_table_text(out, report.median, exp_two);
    if (!exp_two) render_exp1_errors(out, report.median);
    out << "\n";
    render_references(out, report.plan);
    out << "\nplan:\n";
    std::stringstream echo(plan_echo(report.plan));
    std::string line;
    while (std::getline(echo, line)) out << "  " << line << "\n";
    return out.str();
}

std::string render_report_json(const RunReport& report) {
    const bool exp_two = report.plan.experiment == ExperimentId::Two;
    nlohmann::ordered_json j;
    j["experiment"] = to_string(report.plan.experiment);
    j["game"] = levelsmith::to_string(report.plan.game);
    j["corpus_hash"] = report.corpus_hash;
    j["seeds"] = report.plan.seeds;
    j["samples_per_model"] = report.plan.samples_per_model;
    j["plan"] = plan_echo(report.plan);
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
    for (std::size_t si = 0; si < report.per_seed.size(); ++si) {
        nlohmann::ordered_json entry;
        entry["seed"] = report.plan.seeds[si];
        entry["table"] = table_json(report.per_seed[si], exp_two);
        per_seed.push_back(std::move(entry));
    }
    j["per_seed"] = std::move(per_seed);
    j["median"] = table_json(report.median, exp_two);
    nlohmann::ordered_json ref;
    if (!exp_two) {
        for (const auto& r : kExp1Reference)
            ref[r.game] = {{"vanilla", r.vanilla}, {"rumi", r.rumi}, {"cgan", r.cgan}};
    } else {
        const auto* refs =
            report.plan.game == Game::Mario ? kExp2ReferenceMario : kExp2ReferenceCave;
        for (int i = 0; i < 3; ++i) {
            nlohmann::ordered_json row;
            for (int c = 0; c < 3; ++c)
                row["class_" + std::to_string(c + 1)] = {
                    {"correct", refs[i].correct[c]},
                    {"playable", refs[i].playable[c]},
                    {"playable_correct", refs[i].playable_correct[c]}};
            ref[refs[i].model] = std::move(row);
        }
    }
    j["published_reference"] = std::move(ref);
    return j.dump(2) + "\n";
}

}  // namespace levelsmith::exp
