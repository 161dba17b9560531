#pragma once

#include <functional>
#include <map>
#include <optional>

#include "levelsmith/corpusgen.hpp"
#include "levelsmith/tensor.hpp"

namespace levelsmith::gan {

using ad::Tape;
using ad::Value;

struct GanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IncompatibleDims : GanError {
    using GanError::GanError;
};
struct PartitionMismatch : GanError {
    using GanError::GanError;
};
struct LabelRequired : GanError {
    using GanError::GanError;
};
struct EmptyBatch : GanError {
    using GanError::GanError;
};
struct NegativeAlpha : GanError {
    using GanError::GanError;
};

enum class LossHead { LogGAN, Wasserstein };

std::string to_string(LossHead head);
std::optional<LossHead> loss_head_from_string(const std::string& name);

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 5e-5;
    int iterations = 200;  // generator updates
    int critic_steps_per_gen_step = 5;
    double clip = 0.01;
    double alpha_plus = 1.0;
    double alpha_minus = 0.5;
    LossHead loss_head = LossHead::Wasserstein;
    std::uint64_t seed = 0;
    int latent_dim = 32;
};

struct TrainHistory {
    std::vector<double> critic_loss;
    std::vector<double> gen_loss;
    std::vector<double> critic_grad_norm;
    std::vector<double> gen_grad_norm;
};

struct NonFiniteLoss : GanError {
    TrainHistory history;
    explicit NonFiniteLoss(TrainHistory h)
        : GanError("non-finite training loss"), history(std::move(h)) {}
};

struct BatchNormLayer {
    Value gamma, beta;
    std::vector<double> running_mean, running_var;
};

/// Latent (plus optional label) to channel-softmax level tensor.
/// dense -> reshape (base, r/2, c/2) -> bn -> relu
///       -> conv_transpose k4 s2 -> bn -> relu -> conv_transpose k3 s1 -> softmax
/// A parallel conv head emits per-channel spatial placement fields; channels
/// listed in placement_channels (the tileset's start/end) receive a strong
/// logit boost at their field's softmax peak, so every sample carries the
/// singleton tiles playable levels require and training only has to learn
/// where to put them.
struct GeneratorNet {
    int rows = 0, cols = 0, channels = 0, latent_dim = 0, label_dim = 0;
    int base_width = 48, mid_width = 48;
    std::vector<int> label_classes;      // class values for label one-hot encoding
    std::vector<int> placement_channels; // set from the tileset by train()/sample()

    Value fc_w, fc_b;
    BatchNormLayer bn0;
    Value up_w, up_b;
    BatchNormLayer bn1;
    Value out_w, out_b;
    Value place_w, place_b;

    Value forward(Tape& tape, const Value& z, const Value* label, bool train);
    std::vector<Value> params();
};

/// One-hot (plus optional broadcast label channels) to one real score per
/// batch element. conv k4 s2 -> bn -> leaky -> conv k3 s1 -> bn -> leaky ->
/// dense over the conv features plus the per-channel tile counts.
struct CriticNet {
    int rows = 0, cols = 0, channels = 0, label_dim = 0;
    int w1 = 24, w2 = 48;

    Value conv1_w, conv1_b;
    BatchNormLayer bn1;
    Value conv2_w, conv2_b;
    BatchNormLayer bn2;
    Value fc_w, fc_b;

    Value forward(Tape& tape, const Value& x, const Value* label, bool train);
    std::vector<Value> params();
};

GeneratorNet build_generator(int rows, int cols, int channels, int latent_dim, int label_dim,
                             std::mt19937_64& rng);
CriticNet build_critic(int rows, int cols, int channels, int label_dim, std::mt19937_64& rng);

std::vector<double> encode_label(const LabelPair& label, const std::vector<int>& classes);

// (critic_loss, gen_loss) pairs; every tensor stays on the caller's tape.
std::pair<Value, Value> loss_vanilla(Tape& tape, const Value& d_real, const Value& d_fake,
                                     LossHead head);
std::pair<Value, Value> loss_cgan(Tape& tape, const Value& d_real_given_y,
                                  const Value& d_fake_given_y, LossHead head);
std::pair<Value, Value> loss_rumi(Tape& tape, const Value& d_pos, const Value& d_neg,
                                  const Value& d_fake, double alpha_plus, double alpha_minus,
                                  LossHead head);

struct TrainedModel {
    GeneratorNet gen;
    CriticNet critic;
    TrainHistory history;
};

TrainedModel train(ModelKind kind, const Partition& partition, const TileSet& tileset,
                   const TrainConfig& config,
                   const std::function<void(const CriticNet&)>& after_critic_step = nullptr);

std::vector<Grid> sample(GeneratorNet& gen, int n, std::optional<LabelPair> label,
                         const TileSet& tileset, std::mt19937_64& rng);

// Model persistence: binary parameter file plus a key=value text sidecar
// at <path>.meta (kind, game, architecture, config echo, seed, corpus hash).
void save_model(const std::filesystem::path& path, const GeneratorNet& gen,
                const CriticNet& critic, const std::map<std::string, std::string>& meta);
struct LoadedModel {
    GeneratorNet gen;
    CriticNet critic;
    std::map<std::string, std::string> meta;
};
LoadedModel load_model(const std::filesystem::path& path);

std::map<std::string, std::string> read_sidecar(const std::filesystem::path& path);
void write_sidecar(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& meta);

}  // namespace levelsmith::gan
