#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "arbiter/nn/tensor.hpp"
#include "arbiter/rng.hpp"

namespace arbiter::nn {

/// Named trainable array plus its gradient and Adam state.
struct Param {
    std::string name;
    TensorData value;
    TensorData grad;
    TensorData adam_m;
    TensorData adam_v;

    void zero_grad() { grad = TensorData::zeros(value.rows, value.cols); }
};

/// Non-trainable named state (batch-norm running statistics).
struct BufferTensor {
    std::string name;
    TensorData value;
};

/// Owns every parameter and buffer of one model, in creation order.
class ParamStore {
public:
    Param& create(const std::string& name, long rows, long cols);
    BufferTensor& create_buffer(const std::string& name, long rows, long cols, double fill);

    Param* find(const std::string& name);
    BufferTensor* find_buffer(const std::string& name);

    const std::vector<std::unique_ptr<Param>>& params() const { return params_; }
    const std::vector<std::unique_ptr<BufferTensor>>& buffers() const { return buffers_; }

    std::size_t parameter_count() const;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::vector<std::unique_ptr<BufferTensor>> buffers_;
    std::unordered_map<std::string, Param*> by_name_;
    std::unordered_map<std::string, BufferTensor*> buffers_by_name_;
};

/// Per-forward context: caches one leaf Variable per parameter so shared
/// weights accumulate gradients through a single node, and carries the
/// train/inference mode flag.
class Graph {
public:
    explicit Graph(bool training) : training_(training) {}

    bool training() const { return training_; }

    Variable use(Param& p) {
        auto it = leaves_.find(&p);
        if (it != leaves_.end()) return it->second;
        Variable leaf = make_leaf(p.value, true, &p);
        leaves_.emplace(&p, leaf);
        return leaf;
    }

private:
    bool training_;
    std::unordered_map<Param*, Variable> leaves_;
};

/// Uniform init in [-limit, limit] with limit = sqrt(6 / (fan_in + fan_out)).
void init_uniform(TensorData& t, long fan_in, long fan_out, rng::Generator& gen);

class Linear {
public:
    Linear() = default;
    Linear(ParamStore& store, const std::string& prefix, long in_dim, long out_dim,
           rng::Generator& gen);

    Variable forward(Graph& g, const Variable& x) const; // (T x in) -> (T x out)

private:
    Param* w_ = nullptr; // in x out
    Param* b_ = nullptr; // 1 x out
};

class Conv1d {
public:
    Conv1d() = default;
    Conv1d(ParamStore& store, const std::string& prefix, int in_channels, int out_channels,
           int kernel, int stride, rng::Generator& gen);

    Variable forward(Graph& g, const Variable& x) const;
    int stride() const { return stride_; }

private:
    Param* w_ = nullptr; // (kernel * in) x out
    Param* b_ = nullptr;
    int kernel_ = 3;
    int stride_ = 1;
};

class BatchNorm1d {
public:
    BatchNorm1d() = default;
    BatchNorm1d(ParamStore& store, const std::string& prefix, int channels,
                double eps, double momentum);

    Variable forward(Graph& g, const Variable& x) const;

private:
    Param* gamma_ = nullptr;
    Param* beta_ = nullptr;
    BufferTensor* running_mean_ = nullptr;
    BufferTensor* running_var_ = nullptr;
    double eps_ = 1e-5;
    double momentum_ = 0.1;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& prefix, long dim, double eps = 1e-5);

    Variable forward(Graph& g, const Variable& x) const;

private:
    Param* gamma_ = nullptr;
    Param* beta_ = nullptr;
    double eps_ = 1e-5;
};

class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore& store, const std::string& prefix, int dim, int heads,
                       rng::Generator& gen);

    Variable forward(Graph& g, const Variable& x) const;

private:
    Linear q_, k_, v_, out_;
    int dim_ = 0;
    int heads_ = 1;
};

/// Pre-norm block: x + MHA(LN(x)), then x + FFN(LN(x)).
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(ParamStore& store, const std::string& prefix, int dim, int heads,
                     int ffn_hidden, rng::Generator& gen);

    Variable forward(Graph& g, const Variable& x) const;

private:
    LayerNorm ln1_, ln2_;
    MultiHeadAttention attn_;
    Linear ff1_, ff2_;
};

/// Stack of blocks with optional sinusoidal positions at the input and a
/// final layer norm.
class TransformerStack {
public:
    TransformerStack() = default;
    TransformerStack(ParamStore& store, const std::string& prefix, int dim, int heads,
                     int layers, int ffn_hidden, bool use_positional, rng::Generator& gen);

    Variable forward(Graph& g, Variable x) const;
    bool use_positional() const { return use_positional_; }

private:
    std::vector<TransformerBlock> blocks_;
    LayerNorm final_ln_;
    bool use_positional_ = false;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over every parameter in a store. step() consumes the accumulated
/// grads (scaled by grad_scale) and advances the bias-correction counter.
class AdamOptimizer {
public:
    AdamOptimizer(ParamStore& store, AdamConfig config);

    void step(double lr_override, double grad_scale);
    long steps_taken() const { return t_; }

private:
    ParamStore& store_;
    AdamConfig config_;
    long t_ = 0;
};

} // namespace arbiter::nn
