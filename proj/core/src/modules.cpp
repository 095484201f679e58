#include "arbiter/nn/modules.hpp"

#include <cmath>

#include "arbiter/errors.hpp"

namespace arbiter::nn {

Param& ParamStore::create(const std::string& name, long rows, long cols) {
    if (by_name_.count(name)) throw Error("ParamStore: duplicate parameter " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->value = TensorData::zeros(rows, cols);
    p->grad = TensorData::zeros(rows, cols);
    Param& ref = *p;
    by_name_.emplace(name, &ref);
    params_.push_back(std::move(p));
    return ref;
}

BufferTensor& ParamStore::create_buffer(const std::string& name, long rows, long cols, double fill) {
    if (buffers_by_name_.count(name)) throw Error("ParamStore: duplicate buffer " + name);
    auto b = std::make_unique<BufferTensor>();
    b->name = name;
    b->value = TensorData::full(rows, cols, fill);
    BufferTensor& ref = *b;
    buffers_by_name_.emplace(name, &ref);
    buffers_.push_back(std::move(b));
    return ref;
}

Param* ParamStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

BufferTensor* ParamStore::find_buffer(const std::string& name) {
    auto it = buffers_by_name_.find(name);
    return it == buffers_by_name_.end() ? nullptr : it->second;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.v.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

void init_uniform(TensorData& t, long fan_in, long fan_out, rng::Generator& gen) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.v) v = gen.uniform(-limit, limit);
}

Linear::Linear(ParamStore& store, const std::string& prefix, long in_dim, long out_dim,
               rng::Generator& gen) {
    w_ = &store.create(prefix + ".w", in_dim, out_dim);
    b_ = &store.create(prefix + ".b", 1, out_dim);
    init_uniform(w_->value, in_dim, out_dim, gen);
}

Variable Linear::forward(Graph& g, const Variable& x) const {
    return add_row(matmul(x, g.use(*w_)), g.use(*b_));
}

Conv1d::Conv1d(ParamStore& store, const std::string& prefix, int in_channels, int out_channels,
               int kernel, int stride, rng::Generator& gen)
    : kernel_(kernel), stride_(stride) {
    w_ = &store.create(prefix + ".w", static_cast<long>(kernel) * in_channels, out_channels);
    b_ = &store.create(prefix + ".b", 1, out_channels);
    init_uniform(w_->value, static_cast<long>(kernel) * in_channels,
                 static_cast<long>(kernel) * out_channels, gen);
}

Variable Conv1d::forward(Graph& g, const Variable& x) const {
    return conv1d_same(x, g.use(*w_), g.use(*b_), kernel_, stride_);
}

BatchNorm1d::BatchNorm1d(ParamStore& store, const std::string& prefix, int channels,
                         double eps, double momentum)
    : eps_(eps), momentum_(momentum) {
    gamma_ = &store.create(prefix + ".gamma", 1, channels);
    beta_ = &store.create(prefix + ".beta", 1, channels);
    std::fill(gamma_->value.v.begin(), gamma_->value.v.end(), 1.0);
    running_mean_ = &store.create_buffer(prefix + ".running_mean", 1, channels, 0.0);
    running_var_ = &store.create_buffer(prefix + ".running_var", 1, channels, 1.0);
}

Variable BatchNorm1d::forward(Graph& g, const Variable& x) const {
    return batch_norm_time(x, g.use(*gamma_), g.use(*beta_), eps_, g.training(),
                           &running_mean_->value, &running_var_->value, momentum_);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, long dim, double eps)
    : eps_(eps) {
    gamma_ = &store.create(prefix + ".gamma", 1, dim);
    beta_ = &store.create(prefix + ".beta", 1, dim);
    std::fill(gamma_->value.v.begin(), gamma_->value.v.end(), 1.0);
}

Variable LayerNorm::forward(Graph& g, const Variable& x) const {
    return layer_norm(x, g.use(*gamma_), g.use(*beta_), eps_);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& prefix, int dim,
                                       int heads, rng::Generator& gen)
    : dim_(dim), heads_(heads) {
    if (dim % heads != 0) throw Error("MultiHeadAttention: dim must be divisible by heads");
    q_ = Linear(store, prefix + ".q", dim, dim, gen);
    k_ = Linear(store, prefix + ".k", dim, dim, gen);
    v_ = Linear(store, prefix + ".v", dim, dim, gen);
    out_ = Linear(store, prefix + ".out", dim, dim, gen);
}

Variable MultiHeadAttention::forward(Graph& g, const Variable& x) const {
    const Variable q = q_.forward(g, x);
    const Variable k = k_.forward(g, x);
    const Variable v = v_.forward(g, x);
    const long head_dim = dim_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    std::vector<Variable> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(heads_));
    for (int h = 0; h < heads_; ++h) {
        const long c0 = static_cast<long>(h) * head_dim;
        const Variable qh = slice_cols(q, c0, c0 + head_dim);
        const Variable kh = slice_cols(k, c0, c0 + head_dim);
        const Variable vh = slice_cols(v, c0, c0 + head_dim);
        const Variable scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        head_outputs.push_back(matmul(softmax_rows(scores), vh));
    }
    return out_.forward(g, concat_cols(head_outputs));
}

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& prefix, int dim,
                                   int heads, int ffn_hidden, rng::Generator& gen) {
    ln1_ = LayerNorm(store, prefix + ".ln1", dim);
    attn_ = MultiHeadAttention(store, prefix + ".attn", dim, heads, gen);
    ln2_ = LayerNorm(store, prefix + ".ln2", dim);
    ff1_ = Linear(store, prefix + ".ff1", dim, ffn_hidden, gen);
    ff2_ = Linear(store, prefix + ".ff2", ffn_hidden, dim, gen);
}

Variable TransformerBlock::forward(Graph& g, const Variable& x) const {
    Variable h = add(x, attn_.forward(g, ln1_.forward(g, x)));
    const Variable ff = ff2_.forward(g, relu(ff1_.forward(g, ln2_.forward(g, h))));
    return add(h, ff);
}

TransformerStack::TransformerStack(ParamStore& store, const std::string& prefix, int dim,
                                   int heads, int layers, int ffn_hidden, bool use_positional,
                                   rng::Generator& gen)
    : use_positional_(use_positional) {
    blocks_.reserve(static_cast<std::size_t>(layers));
    for (int i = 0; i < layers; ++i) {
        blocks_.emplace_back(store, prefix + ".block" + std::to_string(i), dim, heads,
                             ffn_hidden, gen);
    }
    final_ln_ = LayerNorm(store, prefix + ".final_ln", dim);
}

Variable TransformerStack::forward(Graph& g, Variable x) const {
    if (use_positional_) {
        x = add(x, constant(sinusoidal_positions(x.rows(), x.cols())));
    }
    for (const auto& block : blocks_) x = block.forward(g, x);
    return final_ln_.forward(g, x);
}

AdamOptimizer::AdamOptimizer(ParamStore& store, AdamConfig config)
    : store_(store), config_(config) {
    for (const auto& p : store_.params()) {
        p->adam_m = TensorData::zeros(p->value.rows, p->value.cols);
        p->adam_v = TensorData::zeros(p->value.rows, p->value.cols);
    }
}

void AdamOptimizer::step(double lr_override, double grad_scale) {
    ++t_;
    const double lr = lr_override > 0.0 ? lr_override : config_.lr;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (const auto& p : store_.params()) {
        for (std::size_t i = 0; i < p->value.v.size(); ++i) {
            const double g = p->grad.v[i] * grad_scale;
            p->adam_m.v[i] = config_.beta1 * p->adam_m.v[i] + (1.0 - config_.beta1) * g;
            p->adam_v.v[i] = config_.beta2 * p->adam_v.v[i] + (1.0 - config_.beta2) * g * g;
            const double mhat = p->adam_m.v[i] / bc1;
            const double vhat = p->adam_v.v[i] / bc2;
            p->value.v[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

} // namespace arbiter::nn
