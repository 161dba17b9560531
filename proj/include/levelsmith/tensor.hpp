#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace levelsmith::ad {

struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : TensorError {
    using TensorError::TensorError;
};
struct NonFiniteInput : TensorError {
    using TensorError::TensorError;
};
struct LogOfNonPositive : TensorError {
    using TensorError::TensorError;
};
struct NotScalar : TensorError {
    using TensorError::TensorError;
};
struct GraphConsumed : TensorError {
    using TensorError::TensorError;
};
struct NonPositiveClip : TensorError {
    using TensorError::TensorError;
};

/// Dense n-d array of 64-bit reals, optionally carrying a gradient buffer.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;
    bool requires_grad = false;
    std::vector<double> g;

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    int dim(int i) const { return shape.at(i); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

using Value = std::shared_ptr<Tensor>;

Value make_input(std::vector<int> shape, std::vector<double> values);
Value make_zeros(std::vector<int> shape, bool requires_grad = false);
Value make_param(std::vector<int> shape, double stddev, std::mt19937_64& rng);
Value make_param_const(std::vector<int> shape, double fill);

/// Records executed primitives and replays them in exact reverse order on
/// backward(). One tape per training step; cleared (or discarded) after use.
class Tape {
public:
    Value dense(const Value& x, const Value& w, const Value& b);
    Value conv2d(const Value& x, const Value& w, const Value& b, int stride, int pad);
    Value conv_transpose2d(const Value& x, const Value& w, const Value& b, int stride, int pad);
    Value batchnorm2d(const Value& x, const Value& gamma, const Value& beta,
                      std::vector<double>& running_mean, std::vector<double>& running_var,
                      bool train, double momentum = 0.9, double eps = 1e-5);
    Value relu(const Value& x);
    Value leaky_relu(const Value& x, double slope = 0.2);
    Value sigmoid(const Value& x);
    Value channel_softmax(const Value& x);
    Value mean(const Value& x);
    Value log(const Value& x);
    Value affine(const Value& x, double mul, double off);  // mul*x + off, elementwise
    Value add(const Value& a, const Value& b);
    Value sub(const Value& a, const Value& b);
    Value reshape(const Value& x, std::vector<int> shape);
    Value concat_cols(const Value& a, const Value& b);          // (N,A)+(N,B)
    Value concat_channels(const Value& a, const Value& b);      // (N,C1,H,W)+(N,C2,H,W)

    void backward(const Value& loss);
    void clear();

private:
    Value result(std::vector<int> shape, bool requires_grad);
    void record(std::function<void()> fn) { back_.push_back(std::move(fn)); }

    std::vector<std::function<void()>> back_;
    bool consumed_ = false;
};

struct RmsPropState {
    double learning_rate = 5e-5;
    double decay = 0.99;
    double epsilon = 1e-8;
    std::unordered_map<const Tensor*, std::vector<double>> accumulator;
};

/// accumulator <- decay*accumulator + (1-decay)*grad^2;
/// param <- param - lr*grad/(sqrt(accumulator)+epsilon)
void rmsprop_step(const std::vector<Value>& params, RmsPropState& state);

/// Clamp every parameter entry into [-c, c].
void clip_weights(const std::vector<Value>& params, double c);

double max_abs(const std::vector<Value>& params);
double grad_norm(const std::vector<Value>& params);
bool all_finite(const Tensor& t);

// Versioned binary parameter persistence (little-endian, 64-bit values).
struct NamedBlock {
    std::string name;
    std::vector<int> dims;
    std::vector<double> data;
};
void save_blocks(const std::filesystem::path& path, const std::vector<NamedBlock>& blocks);
std::vector<NamedBlock> load_blocks(const std::filesystem::path& path);

}  // namespace levelsmith::ad
