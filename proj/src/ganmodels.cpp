#include "levelsmith/ganmodels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace levelsmith::gan {

std::string to_string(LossHead head) {
    return head == LossHead::LogGAN ? "loggan" : "wasserstein";
}

std::optional<LossHead> loss_head_from_string(const std::string& name) {
    if (name == "loggan") return LossHead::LogGAN;
    if (name == "wasserstein") return LossHead::Wasserstein;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

namespace {
constexpr double kInitStd = 0.02;
constexpr double kLogitGain = 12.0;
// Placement head: spatial softmax sharpness and the logit boost granted to a
// placement channel at its field's peak cell.
constexpr double kPlaceSharpness = 30.0;
constexpr double kPlaceBoost = 12.0;

std::vector<int> placement_channels_for(const TileSet& tileset) {
    std::vector<int> out;
    if (tileset.start_index() >= 0) out.push_back(tileset.start_index());
    if (tileset.end_index() >= 0 && tileset.end_index() != tileset.start_index())
        out.push_back(tileset.end_index());
    return out;
}

BatchNormLayer make_bn(int channels) {
    BatchNormLayer bn;
    bn.gamma = ad::make_param_const({channels}, 1.0);
    bn.beta = ad::make_param_const({channels}, 0.0);
    return bn;
}
}  // namespace

GeneratorNet build_generator(int rows, int cols, int channels, int latent_dim, int label_dim,
                             std::mt19937_64& rng) {
    if (rows < 6 || cols < 6 || rows % 2 != 0 || cols % 2 != 0)
        throw IncompatibleDims("generator needs even rows/cols of at least 6");
    if (channels < 1 || latent_dim < 1 || label_dim < 0)
        throw IncompatibleDims("generator dims must be positive");
    GeneratorNet net;
    net.rows = rows;
    net.cols = cols;
    net.channels = channels;
    net.latent_dim = latent_dim;
    net.label_dim = label_dim;
    const int hr = rows / 2, hc = cols / 2;
    net.fc_w = ad::make_param({net.base_width * hr * hc, latent_dim + label_dim}, kInitStd, rng);
    net.fc_b = ad::make_param_const({net.base_width * hr * hc}, 0.0);
    net.bn0 = make_bn(net.base_width);
    net.up_w = ad::make_param({net.base_width, net.mid_width, 4, 4}, kInitStd, rng);
    net.up_b = ad::make_param_const({net.mid_width}, 0.0);
    net.bn1 = make_bn(net.mid_width);
    // Small output init: per-cell noise starts low so the learned coarse
    // structure decides tiles once the logit gain sharpens the softmax.
    net.out_w = ad::make_param({net.mid_width, channels, 3, 3}, kInitStd / 4.0, rng);
    net.out_b = ad::make_param_const({channels}, 0.0);
    net.place_w = ad::make_param({net.mid_width, channels, 3, 3}, kInitStd, rng);
    net.place_b = ad::make_param_const({channels}, 0.0);
    return net;
}

Value GeneratorNet::forward(Tape& tape, const Value& z, const Value* label, bool train) {
    if (label_dim > 0 && label == nullptr) throw LabelRequired("generator needs a label input");
    Value input = label_dim > 0 ? tape.concat_cols(z, *label) : z;
    const int n = input->dim(0);
    const int hr = rows / 2, hc = cols / 2;
    Value h = tape.dense(input, fc_w, fc_b);
    h = tape.reshape(h, {n, base_width, hr, hc});
    h = tape.batchnorm2d(h, bn0.gamma, bn0.beta, bn0.running_mean, bn0.running_var, train);
    h = tape.relu(h);
    h = tape.conv_transpose2d(h, up_w, up_b, 2, 1);
    h = tape.batchnorm2d(h, bn1.gamma, bn1.beta, bn1.running_mean, bn1.running_var, train);
    h = tape.relu(h);
    Value logits = tape.conv_transpose2d(h, out_w, out_b, 1, 1);
    // Fixed logit gain: sharpens the output distribution so the small weight
    // updates RMSprop allows per step translate into decisive tile choices.
    logits = tape.affine(logits, kLogitGain, 0.0);
    if (!placement_channels.empty()) {
        Value place = tape.conv_transpose2d(h, place_w, place_b, 1, 1);
        place = tape.affine(place, kPlaceSharpness, 0.0);
        // Per-channel softmax over positions, via the channel softmax on a
        // view where each (sample, channel) pair is its own batch row.
        place = tape.reshape(place, {n * channels, rows * cols, 1, 1});
        place = tape.channel_softmax(place);
        place = tape.reshape(place, {n, channels, rows, cols});
        // Keep the placement channels' fields, zero the rest, and scale to a
        // boost that wins the per-cell softmax at each field's peak.
        std::vector<double> mask(static_cast<std::size_t>(channels) * channels, 0.0);
        for (int c : placement_channels)
            mask[static_cast<std::size_t>(c) * channels + c] = kPlaceBoost;
        Value mask_w = ad::make_input({channels, channels, 1, 1}, std::move(mask));
        Value mask_b = ad::make_input({channels}, std::vector<double>(channels, 0.0));
        logits = tape.add(logits, tape.conv2d(place, mask_w, mask_b, 1, 0));
    }
    return tape.channel_softmax(logits);
}

std::vector<Value> GeneratorNet::params() {
    return {fc_w,      fc_b,      bn0.gamma, bn0.beta, up_w,    up_b,
            bn1.gamma, bn1.beta,  out_w,     out_b,    place_w, place_b};
}

CriticNet build_critic(int rows, int cols, int channels, int label_dim, std::mt19937_64& rng) {
    if (rows < 6 || cols < 6 || rows % 2 != 0 || cols % 2 != 0)
        throw IncompatibleDims("critic needs even rows/cols of at least 6");
    CriticNet net;
    net.rows = rows;
    net.cols = cols;
    net.channels = channels;
    net.label_dim = label_dim;
    net.conv1_w = ad::make_param({net.w1, channels + label_dim, 4, 4}, kInitStd, rng);
    net.conv1_b = ad::make_param_const({net.w1}, 0.0);
    net.bn1 = make_bn(net.w1);
    net.conv2_w = ad::make_param({net.w2, net.w1, 3, 3}, kInitStd, rng);
    net.conv2_b = ad::make_param_const({net.w2}, 0.0);
    net.bn2 = make_bn(net.w2);
    net.fc_w = ad::make_param({1, net.w2 * (rows / 2) * (cols / 2) + channels}, kInitStd, rng);
    net.fc_b = ad::make_param_const({1}, 0.0);
    return net;
}

Value CriticNet::forward(Tape& tape, const Value& x, const Value* label, bool train) {
    Value input = x;
    if (label_dim > 0) {
        if (label == nullptr) throw LabelRequired("critic needs a label input");
        // Broadcast the per-sample label vector as constant extra channels.
        const int n = x->dim(0);
        std::vector<double> plane(static_cast<std::size_t>(n) * label_dim * rows * cols);
        for (int i = 0; i < n; ++i)
            for (int ld = 0; ld < label_dim; ++ld) {
                const double v = (*label)->v[static_cast<std::size_t>(i) * label_dim + ld];
                double* dst =
                    &plane[(static_cast<std::size_t>(i) * label_dim + ld) *
                           static_cast<std::size_t>(rows) * cols];
                std::fill_n(dst, static_cast<std::size_t>(rows) * cols, v);
            }
        Value label_channels = ad::make_input({n, label_dim, rows, cols}, std::move(plane));
        input = tape.concat_channels(x, label_channels);
    }
    Value h = tape.conv2d(input, conv1_w, conv1_b, 2, 1);
    h = tape.batchnorm2d(h, bn1.gamma, bn1.beta, bn1.running_mean, bn1.running_var, train);
    h = tape.leaky_relu(h, 0.2);
    h = tape.conv2d(h, conv2_w, conv2_b, 1, 1);
    h = tape.batchnorm2d(h, bn2.gamma, bn2.beta, bn2.running_mean, bn2.running_var, train);
    h = tape.leaky_relu(h, 0.2);
    h = tape.reshape(h, {x->dim(0), w2 * (rows / 2) * (cols / 2)});
    // Per-channel tile mass fed straight to the output layer: tile counts are
    // the cheapest real/fake cue (real levels have exactly one start and one
    // end), and the conv stack would take many steps to recover them.
    Value per_cell = tape.reshape(x, {x->dim(0) * channels, rows * cols});
    Value ones = ad::make_input({1, rows * cols},
                                std::vector<double>(static_cast<std::size_t>(rows) * cols, 1.0));
    Value zero = ad::make_input({1}, std::vector<double>{0.0});
    Value counts = tape.reshape(tape.dense(per_cell, ones, zero), {x->dim(0), channels});
    // Squashed count: sigmoid(2*(log(1+count) - log 2)) is ~0.2 at zero,
    // 0.5 at one and saturates for large counts, so the critic stays
    // sensitive around the one-start/one-end regime without the dominant
    // channel's count drowning the conv features.
    counts = tape.sigmoid(
        tape.affine(tape.log(tape.affine(counts, 1.0, 1.0)), 2.0, -2.0 * std::log(2.0)));
    counts = tape.affine(counts, 8.0, 0.0);
    return tape.dense(tape.concat_cols(h, counts), fc_w, fc_b);
}

std::vector<Value> CriticNet::params() {
    return {conv1_w, conv1_b, bn1.gamma, bn1.beta, conv2_w,
            conv2_b, bn2.gamma, bn2.beta, fc_w,    fc_b};
}

std::vector<double> encode_label(const LabelPair& label, const std::vector<int>& classes) {
    std::vector<double> out(classes.size() + 1, 0.0);
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == label.class_value) out[i] = 1.0;
    out.back() = static_cast<double>(label.neg_flag);
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace {

Value generator_loss(Tape& tape, const Value& d_fake, LossHead head) {
    if (head == LossHead::LogGAN)  // non-saturating form
        return tape.affine(tape.mean(tape.log(tape.sigmoid(d_fake))), -1.0, 0.0);
    return tape.affine(tape.mean(d_fake), -1.0, 0.0);
}

}  // namespace

std::pair<Value, Value> loss_vanilla(Tape& tape, const Value& d_real, const Value& d_fake,
                                     LossHead head) {
    if (d_real->v.empty() || d_fake->v.empty()) throw EmptyBatch("loss_vanilla: empty batch");
    Value critic;
    if (head == LossHead::LogGAN) {
        Value real_term = tape.mean(tape.log(tape.sigmoid(d_real)));
        Value fake_term = tape.mean(tape.log(tape.affine(tape.sigmoid(d_fake), -1.0, 1.0)));
        critic = tape.affine(tape.add(real_term, fake_term), -1.0, 0.0);
    } else {
        critic = tape.sub(tape.mean(d_fake), tape.mean(d_real));
    }
    return {critic, generator_loss(tape, d_fake, head)};
}

std::pair<Value, Value> loss_cgan(Tape& tape, const Value& d_real_given_y,
                                  const Value& d_fake_given_y, LossHead head) {
    // Same functional form as the vanilla loss; the desired/undesired
    // distinction flows through the conditioning label.
    return loss_vanilla(tape, d_real_given_y, d_fake_given_y, head);
}

std::pair<Value, Value> loss_rumi(Tape& tape, const Value& d_pos, const Value& d_neg,
                                  const Value& d_fake, double alpha_plus, double alpha_minus,
                                  LossHead head) {
    if (!(alpha_plus > 0.0) || alpha_minus < 0.0)
        throw NegativeAlpha("alpha_plus must be > 0 and alpha_minus >= 0");
    if (d_pos->v.empty() || d_fake->v.empty() || (alpha_minus > 0.0 && d_neg->v.empty()))
        throw EmptyBatch("loss_rumi: empty batch");
    Value critic;
    if (head == LossHead::LogGAN) {
        Value pos_term =
            tape.affine(tape.mean(tape.log(tape.sigmoid(d_pos))), alpha_plus, 0.0);
        Value fake_term = tape.mean(tape.log(tape.affine(tape.sigmoid(d_fake), -1.0, 1.0)));
        Value acc = tape.add(pos_term, fake_term);
        if (alpha_minus > 0.0) {
            Value neg_term = tape.affine(
                tape.mean(tape.log(tape.affine(tape.sigmoid(d_neg), -1.0, 1.0))), alpha_minus,
                0.0);
            acc = tape.add(acc, neg_term);
        }
        critic = tape.affine(acc, -1.0, 0.0);
    } else {
        critic = tape.sub(tape.mean(d_fake), tape.affine(tape.mean(d_pos), alpha_plus, 0.0));
        if (alpha_minus > 0.0)
            critic = tape.add(critic, tape.affine(tape.mean(d_neg), alpha_minus, 0.0));
    }
    return {critic, generator_loss(tape, d_fake, head)};
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct EncodedPool {
    int channels = 0, rows = 0, cols = 0;
    std::vector<std::vector<double>> data;        // one-hot values per entry
    std::vector<std::vector<double>> labels;      // encoded labels (may be empty)
};

EncodedPool encode_pool(const std::vector<CorpusEntry>& entries,
                        const std::vector<LabelPair>& labels, const TileSet& tileset,
                        const std::vector<int>& classes) {
    EncodedPool pool;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        OneHot oh = encode_onehot(entries[i].grid, tileset);
        if (pool.data.empty()) {
            pool.channels = oh.channels;
            pool.rows = oh.rows;
            pool.cols = oh.cols;
        } else if (oh.rows != pool.rows || oh.cols != pool.cols) {
            throw PartitionMismatch("partition mixes grid dimensions");
        }
        pool.data.push_back(std::move(oh.values));
        if (!labels.empty()) pool.labels.push_back(encode_label(labels[i], classes));
    }
    return pool;
}

Value batch_from_pool(const EncodedPool& pool, const std::vector<std::size_t>& idx) {
    const std::size_t per = pool.data[0].size();
    std::vector<double> values(idx.size() * per);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(pool.data[idx[i]].data(), per, &values[i * per]);
    return ad::make_input(
        {static_cast<int>(idx.size()), pool.channels, pool.rows, pool.cols}, std::move(values));
}

Value labels_from_pool(const EncodedPool& pool, const std::vector<std::size_t>& idx) {
    const std::size_t per = pool.labels[0].size();
    std::vector<double> values(idx.size() * per);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(pool.labels[idx[i]].data(), per, &values[i * per]);
    return ad::make_input({static_cast<int>(idx.size()), static_cast<int>(per)},
                          std::move(values));
}

std::vector<std::size_t> draw_indices(std::mt19937_64& rng, std::size_t pool_size, int count) {
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = rng() % pool_size;
    return idx;
}

Value draw_latents(std::mt19937_64& rng, int n, int latent_dim) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> z(static_cast<std::size_t>(n) * latent_dim);
    for (double& v : z) v = dist(rng);
    return ad::make_input({n, latent_dim}, std::move(z));
}

Value detach(const Value& x) {
    return ad::make_input(x->shape, x->v);
}

void zero_grads(const std::vector<Value>& params) {
    for (const Value& p : params) p->zero_grad();
}

}  // namespace

TrainedModel train(ModelKind kind, const Partition& partition, const TileSet& tileset,
                   const TrainConfig& config,
                   const std::function<void(const CriticNet&)>& after_critic_step) {
    if (partition.positives.empty()) throw PartitionMismatch("partition has no positives");
    if (kind == ModelKind::Vanilla && !partition.negatives.empty())
        throw PartitionMismatch("vanilla training cannot use negatives");
    if (kind == ModelKind::Rumi && partition.negatives.empty())
        throw PartitionMismatch("rumi training requires negatives");
    if (kind == ModelKind::CGan &&
        (partition.positive_labels.size() != partition.positives.size() ||
         partition.negative_labels.size() != partition.negatives.size()))
        throw PartitionMismatch("cgan training requires labels on every sample");

    std::vector<int> classes;
    if (kind == ModelKind::CGan) {
        std::set<int> set;
        for (const auto& l : partition.positive_labels) set.insert(l.class_value);
        for (const auto& l : partition.negative_labels) set.insert(l.class_value);
        classes.assign(set.begin(), set.end());
    }
    const int label_dim = kind == ModelKind::CGan ? static_cast<int>(classes.size()) + 1 : 0;

    // For the conditional model the "real" pool is every labeled sample.
    std::vector<CorpusEntry> real_entries = partition.positives;
    std::vector<LabelPair> real_labels = partition.positive_labels;
    if (kind == ModelKind::CGan) {
        real_entries.insert(real_entries.end(), partition.negatives.begin(),
                            partition.negatives.end());
        real_labels.insert(real_labels.end(), partition.negative_labels.begin(),
                           partition.negative_labels.end());
    }
    EncodedPool real_pool = encode_pool(real_entries, real_labels, tileset, classes);
    EncodedPool neg_pool;
    if (kind == ModelKind::Rumi)
        neg_pool = encode_pool(partition.negatives, {}, tileset, classes);

    std::mt19937_64 rng(config.seed);
    TrainedModel model;
    model.gen = build_generator(real_pool.rows, real_pool.cols, real_pool.channels,
                                config.latent_dim, label_dim, rng);
    model.gen.label_classes = classes;
    model.gen.placement_channels = placement_channels_for(tileset);
    model.critic =
        build_critic(real_pool.rows, real_pool.cols, real_pool.channels, label_dim, rng);

    ad::RmsPropState gen_opt{config.learning_rate};
    ad::RmsPropState critic_opt{config.learning_rate};
    auto gen_params = model.gen.params();
    auto critic_params = model.critic.params();

    TrainHistory& history = model.history;
    auto check_finite_loss = [&](const Value& loss) {
        if (!std::isfinite(loss->v[0])) throw NonFiniteLoss(history);
    };

    for (int iter = 0; iter < config.iterations; ++iter) {
        double last_critic_loss = 0.0;
        for (int cs = 0; cs < config.critic_steps_per_gen_step; ++cs) {
            Tape tape;
            const auto real_idx = draw_indices(rng, real_pool.data.size(), config.batch_size);
            Value x_real = batch_from_pool(real_pool, real_idx);
            Value y_real, y_fake;
            if (label_dim > 0) {
                y_real = labels_from_pool(real_pool, real_idx);
                const auto fake_idx =
                    draw_indices(rng, real_pool.data.size(), config.batch_size);
                y_fake = labels_from_pool(real_pool, fake_idx);
            }
            Value z = draw_latents(rng, config.batch_size, config.latent_dim);
            Value x_fake;
            {
                Tape gen_tape;  // critic step: generator output is detached
                x_fake = detach(model.gen.forward(gen_tape, z,
                                                  label_dim > 0 ? &y_fake : nullptr, true));
            }

            Value critic_loss;
            if (kind == ModelKind::Rumi) {
                const auto neg_idx =
                    draw_indices(rng, neg_pool.data.size(), config.batch_size);
                Value x_neg = batch_from_pool(neg_pool, neg_idx);
                Value d_pos = model.critic.forward(tape, x_real, nullptr, true);
                Value d_neg = model.critic.forward(tape, x_neg, nullptr, true);
                Value d_fake = model.critic.forward(tape, x_fake, nullptr, true);
                critic_loss = loss_rumi(tape, d_pos, d_neg, d_fake, config.alpha_plus,
                                        config.alpha_minus, config.loss_head)
                                  .first;
            } else {
                const Value* yr = label_dim > 0 ? &y_real : nullptr;
                const Value* yf = label_dim > 0 ? &y_fake : nullptr;
                Value d_real = model.critic.forward(tape, x_real, yr, true);
                Value d_fake = model.critic.forward(tape, x_fake, yf, true);
                critic_loss = loss_vanilla(tape, d_real, d_fake, config.loss_head).first;
            }
            check_finite_loss(critic_loss);
            last_critic_loss = critic_loss->v[0];
            zero_grads(critic_params);
            tape.backward(critic_loss);
            if (cs + 1 == config.critic_steps_per_gen_step)
                history.critic_grad_norm.push_back(ad::grad_norm(critic_params));
            rmsprop_step(critic_params, critic_opt);
            if (config.loss_head == LossHead::Wasserstein)
                clip_weights(critic_params, config.clip);
            if (after_critic_step) after_critic_step(model.critic);
        }

        Tape tape;
        Value y_fake;
        if (label_dim > 0) {
            const auto fake_idx = draw_indices(rng, real_pool.data.size(), config.batch_size);
            y_fake = labels_from_pool(real_pool, fake_idx);
        }
        Value z = draw_latents(rng, config.batch_size, config.latent_dim);
        Value fake =
            model.gen.forward(tape, z, label_dim > 0 ? &y_fake : nullptr, true);
        Value d_fake =
            model.critic.forward(tape, fake, label_dim > 0 ? &y_fake : nullptr, true);
        Value gen_loss = generator_loss(tape, d_fake, config.loss_head);
        check_finite_loss(gen_loss);
        zero_grads(gen_params);
        zero_grads(critic_params);
        tape.backward(gen_loss);
        rmsprop_step(gen_params, gen_opt);

        history.critic_loss.push_back(last_critic_loss);
        history.gen_loss.push_back(gen_loss->v[0]);
        history.gen_grad_norm.push_back(ad::grad_norm(gen_params));
    }
    return model;
}

std::vector<Grid> sample(GeneratorNet& gen, int n, std::optional<LabelPair> label,
                         const TileSet& tileset, std::mt19937_64& rng) {
    if (gen.label_dim > 0 && !label)
        throw LabelRequired("conditional generator requires a sampling label");
    if (gen.label_dim == 0 && label) throw LabelRequired("unconditional generator takes no label");
    gen.placement_channels = placement_channels_for(tileset);
    std::vector<Grid> grids;
    grids.reserve(n);
    const int chunk = 64;
    for (int done = 0; done < n; done += chunk) {
        const int m = std::min(chunk, n - done);
        Tape tape;
        Value z = draw_latents(rng, m, gen.latent_dim);
        Value y;
        const Value* yp = nullptr;
        if (gen.label_dim > 0) {
            const auto enc = encode_label(*label, gen.label_classes);
            std::vector<double> values(static_cast<std::size_t>(m) * enc.size());
            for (int i = 0; i < m; ++i)
                std::copy_n(enc.data(), enc.size(), &values[i * enc.size()]);
            y = ad::make_input({m, static_cast<int>(enc.size())}, std::move(values));
            yp = &y;
        }
        Value out = gen.forward(tape, z, yp, false);
        const std::size_t per = static_cast<std::size_t>(gen.channels) * gen.rows * gen.cols;
        for (int i = 0; i < m; ++i) {
            OneHot oh;
            oh.channels = gen.channels;
            oh.rows = gen.rows;
            oh.cols = gen.cols;
            oh.values.assign(out->v.begin() + i * per, out->v.begin() + (i + 1) * per);
            grids.push_back(decode_onehot(oh, tileset));
        }
    }
    return grids;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

void push_block(std::vector<ad::NamedBlock>& blocks, const std::string& name, const Value& v) {
    blocks.push_back({name, v->shape, v->v});
}
void push_raw(std::vector<ad::NamedBlock>& blocks, const std::string& name,
              const std::vector<double>& data) {
    blocks.push_back({name, {static_cast<int>(data.size())}, data});
}
void push_bn(std::vector<ad::NamedBlock>& blocks, const std::string& prefix,
             const BatchNormLayer& bn) {
    push_block(blocks, prefix + ".gamma", bn.gamma);
    push_block(blocks, prefix + ".beta", bn.beta);
    push_raw(blocks, prefix + ".running_mean", bn.running_mean);
    push_raw(blocks, prefix + ".running_var", bn.running_var);
}

class BlockMap {
public:
    explicit BlockMap(std::vector<ad::NamedBlock> blocks) : blocks_(std::move(blocks)) {}
    const ad::NamedBlock& get(const std::string& name) const {
        for (const auto& b : blocks_)
            if (b.name == name) return b;
        throw ad::TensorError("model file missing block " + name);
    }
    void into(const std::string& name, const Value& v) const {
        const auto& b = get(name);
        if (b.data.size() != v->v.size())
            throw ad::TensorError("block " + name + " has unexpected size");
        v->v = b.data;
    }
    void into_bn(const std::string& prefix, BatchNormLayer& bn) const {
        into(prefix + ".gamma", bn.gamma);
        into(prefix + ".beta", bn.beta);
        bn.running_mean = get(prefix + ".running_mean").data;
        bn.running_var = get(prefix + ".running_var").data;
    }

private:
    std::vector<ad::NamedBlock> blocks_;
};

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

}  // namespace

void write_sidecar(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw GanError("cannot write sidecar " + path.string());
    for (const auto& [key, value] : meta) out << key << " = " << value << "\n";
}

std::map<std::string, std::string> read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw GanError("cannot read sidecar " + path.string());
    std::map<std::string, std::string> meta;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.pop_back();
        };
        trim(key);
        trim(value);
        meta[key] = value;
    }
    return meta;
}

void save_model(const std::filesystem::path& path, const GeneratorNet& gen,
                const CriticNet& critic, const std::map<std::string, std::string>& meta) {
    std::vector<ad::NamedBlock> blocks;
    push_block(blocks, "gen.fc.w", gen.fc_w);
    push_block(blocks, "gen.fc.b", gen.fc_b);
    push_bn(blocks, "gen.bn0", gen.bn0);
    push_block(blocks, "gen.up.w", gen.up_w);
    push_block(blocks, "gen.up.b", gen.up_b);
    push_bn(blocks, "gen.bn1", gen.bn1);
    push_block(blocks, "gen.out.w", gen.out_w);
    push_block(blocks, "gen.out.b", gen.out_b);
    push_block(blocks, "gen.place.w", gen.place_w);
    push_block(blocks, "gen.place.b", gen.place_b);
    push_block(blocks, "critic.conv1.w", critic.conv1_w);
    push_block(blocks, "critic.conv1.b", critic.conv1_b);
    push_bn(blocks, "critic.bn1", critic.bn1);
    push_block(blocks, "critic.conv2.w", critic.conv2_w);
    push_block(blocks, "critic.conv2.b", critic.conv2_b);
    push_bn(blocks, "critic.bn2", critic.bn2);
    push_block(blocks, "critic.fc.w", critic.fc_w);
    push_block(blocks, "critic.fc.b", critic.fc_b);
    ad::save_blocks(path, blocks);

    auto full = meta;
    full["rows"] = std::to_string(gen.rows);
    full["cols"] = std::to_string(gen.cols);
    full["channels"] = std::to_string(gen.channels);
    full["latent_dim"] = std::to_string(gen.latent_dim);
    full["label_dim"] = std::to_string(gen.label_dim);
    full["label_classes"] = join_ints(gen.label_classes);
    write_sidecar(path.string() + ".meta", full);
}

LoadedModel load_model(const std::filesystem::path& path) {
    LoadedModel model;
    model.meta = read_sidecar(path.string() + ".meta");
    const int rows = std::stoi(model.meta.at("rows"));
    const int cols = std::stoi(model.meta.at("cols"));
    const int channels = std::stoi(model.meta.at("channels"));
    const int latent_dim = std::stoi(model.meta.at("latent_dim"));
    const int label_dim = std::stoi(model.meta.at("label_dim"));
    std::mt19937_64 rng(0);
    model.gen = build_generator(rows, cols, channels, latent_dim, label_dim, rng);
    model.gen.label_classes = split_ints(model.meta.at("label_classes"));
    model.critic = build_critic(rows, cols, channels, label_dim, rng);

    const BlockMap blocks(ad::load_blocks(path));
    blocks.into("gen.fc.w", model.gen.fc_w);
    blocks.into("gen.fc.b", model.gen.fc_b);
    blocks.into_bn("gen.bn0", model.gen.bn0);
    blocks.into("gen.up.w", model.gen.up_w);
    blocks.into("gen.up.b", model.gen.up_b);
    blocks.into_bn("gen.bn1", model.gen.bn1);
    blocks.into("gen.out.w", model.gen.out_w);
    blocks.into("gen.out.b", model.gen.out_b);
    blocks.into("gen.place.w", model.gen.place_w);
    blocks.into("gen.place.b", model.gen.place_b);
    blocks.into("critic.conv1.w", model.critic.conv1_w);
    blocks.into("critic.conv1.b", model.critic.conv1_b);
    blocks.into_bn("critic.bn1", model.critic.bn1);
    blocks.into("critic.conv2.w", model.critic.conv2_w);
    blocks.into("critic.conv2.b", model.critic.conv2_b);
    blocks.into_bn("critic.bn2", model.critic.bn2);
    blocks.into("critic.fc.w", model.critic.fc_w);
    blocks.into("critic.fc.b", model.critic.fc_b);
    return model;
}

}  // namespace levelsmith::gan
