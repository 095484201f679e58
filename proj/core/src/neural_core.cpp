#include "arbiter/neural_core.hpp"

#include <cmath>

#include "arbiter/errors.hpp"

namespace arbiter::nn {

namespace {

Variable features_to_variable(const feat::FeatureMatrix& f) {
    TensorData t(f.frames, f.bins);
    t.v = f.values;
    return constant(std::move(t));
}

} // namespace

int EncoderConfig::total_stride() const {
    int s = 1;
    for (int st : stage_strides) s *= st;
    return s;
}

void EncoderConfig::validate() const {
    if (conv_layers < 2 || conv_layers % 2 != 0) {
        throw Error("EncoderConfig: conv_layers must be even and >= 2");
    }
    if (stage_channels.size() != stage_strides.size() ||
        conv_layers != 2 * static_cast<int>(stage_channels.size())) {
        throw Error("EncoderConfig: conv_layers must equal 2 * stage count");
    }
    for (int c : stage_channels) {
        if (c < 1) throw Error("EncoderConfig: channels must be positive");
    }
    for (int s : stage_strides) {
        if (s < 1) throw Error("EncoderConfig: strides must be >= 1");
    }
    const int ts = total_stride();
    if (ts < 1 || (ts & (ts - 1)) != 0) {
        throw Error("EncoderConfig: total stride must be a power of two");
    }
    if (stage_channels.back() != embedding_dim) {
        throw Error("EncoderConfig: last stage channels must equal embedding_dim");
    }
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw Error("EncoderConfig: kernel_size must be odd and positive");
    }
}

EncoderConfig EncoderConfig::small_preset() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::deep_preset() {
    EncoderConfig c;
    c.conv_layers = 18;
    c.stage_channels = {32, 32, 32, 48, 48, 48, 64, 64, 64};
    c.stage_strides = {2, 1, 1, 2, 1, 1, 2, 1, 1};
    c.embedding_dim = 64;
    return c;
}

void TransformerConfig::validate() const {
    if (dim < 1 || heads < 1 || layers < 1 || ffn_hidden < 1) {
        throw Error("TransformerConfig: sizes must be positive");
    }
    if (dim % heads != 0) throw Error("TransformerConfig: dim must be divisible by heads");
}

void ModelConfig::validate() const {
    encoder.validate();
    summarizer.validate();
    speech_encoder.validate();
    decoder.validate();
    classifier_attention.validate();
    classifier_summary.validate();
    if (summarizer.dim != encoder.embedding_dim ||
        classifier_attention.dim != encoder.embedding_dim ||
        classifier_summary.dim != encoder.embedding_dim) {
        throw Error("ModelConfig: attention dims must match encoder embedding_dim");
    }
    if (speech_encoder.dim != speech_dim || decoder.dim < 1) {
        throw Error("ModelConfig: speech encoder dim must equal speech_dim");
    }
    if (classifier_head_hidden < 1 || feature_bins < 1) {
        throw Error("ModelConfig: head and feature sizes must be positive");
    }
}

ModelConfig ModelConfig::small_preset() {
    ModelConfig c;
    c.encoder = EncoderConfig::small_preset();
    c.summarizer = {64, 4, 2, 128, false};
    c.speech_encoder = {64, 4, 2, 128, true};
    c.decoder = {64, 4, 2, 128, true};
    c.classifier_attention = {64, 4, 2, 128, true};
    c.classifier_summary = {64, 4, 2, 128, false};
    return c;
}

ModelConfig ModelConfig::deep_preset() {
    ModelConfig c = small_preset();
    c.encoder = EncoderConfig::deep_preset();
    return c;
}

ModelConfig ModelConfig::tiny_preset() {
    ModelConfig c;
    c.encoder.conv_layers = 2;
    c.encoder.stage_channels = {8};
    c.encoder.stage_strides = {2};
    c.encoder.embedding_dim = 8;
    c.summarizer = {8, 2, 1, 16, false};
    c.speech_encoder = {8, 2, 1, 16, true};
    c.decoder = {8, 2, 1, 16, true};
    c.classifier_attention = {8, 2, 1, 16, true};
    c.classifier_summary = {8, 2, 1, 16, false};
    c.speech_dim = 8;
    c.classifier_head_hidden = 8;
    return c;
}

ConvEncoder::ConvEncoder(ParamStore& store, const EncoderConfig& config,
                         const std::string& prefix, rng::Generator& gen)
    : config_(config) {
    config_.validate();
    int in_ch = input_bins_;
    for (std::size_t i = 0; i < config_.stage_channels.size(); ++i) {
        const int out_ch = config_.stage_channels[i];
        const int stride = config_.stage_strides[i];
        const std::string p = prefix + ".pair" + std::to_string(i);
        ResidualPair pair;
        pair.conv1 = Conv1d(store, p + ".conv1", in_ch, out_ch, config_.kernel_size, stride, gen);
        pair.bn1 = BatchNorm1d(store, p + ".bn1", out_ch, config_.bn_epsilon, config_.bn_momentum);
        pair.conv2 = Conv1d(store, p + ".conv2", out_ch, out_ch, config_.kernel_size, 1, gen);
        pair.bn2 = BatchNorm1d(store, p + ".bn2", out_ch, config_.bn_epsilon, config_.bn_momentum);
        pair.has_skip_proj = (in_ch != out_ch) || (stride != 1);
        if (pair.has_skip_proj) {
            pair.skip_conv = Conv1d(store, p + ".skip", in_ch, out_ch, 1, stride, gen);
            pair.skip_bn = BatchNorm1d(store, p + ".skip_bn", out_ch, config_.bn_epsilon,
                                       config_.bn_momentum);
        }
        pairs_.push_back(std::move(pair));
        in_ch = out_ch;
    }
}

Variable ConvEncoder::forward(Graph& g, const Variable& features) const {
    if (features.rows() < config_.total_stride()) {
        throw Error("ConvEncoder: fewer frames than total stride");
    }
    Variable x = features;
    for (const auto& pair : pairs_) {
        Variable h = relu(pair.bn1.forward(g, pair.conv1.forward(g, x)));
        h = pair.bn2.forward(g, pair.conv2.forward(g, h));
        Variable skip = pair.has_skip_proj
                            ? pair.skip_bn.forward(g, pair.skip_conv.forward(g, x))
                            : x;
        x = relu(add(h, skip));
    }
    return x;
}

Variable ConvEncoder::forward(Graph& g, const feat::FeatureMatrix& features) const {
    return forward(g, features_to_variable(features));
}

AttentionSummarizer::AttentionSummarizer(ParamStore& store, const TransformerConfig& config,
                                         const std::string& prefix, bool l2_normalize,
                                         rng::Generator& gen)
    : l2_normalize_(l2_normalize) {
    config.validate();
    query_ = &store.create(prefix + ".query", 1, config.dim);
    init_uniform(query_->value, config.dim, config.dim, gen);
    stack_ = TransformerStack(store, prefix + ".stack", config.dim, config.heads, config.layers,
                              config.ffn_hidden, config.use_positional, gen);
    out_proj_ = Linear(store, prefix + ".out", config.dim, config.dim, gen);
}

Variable AttentionSummarizer::forward(Graph& g, const Variable& sequence) const {
    if (sequence.rows() < 1) throw Error("AttentionSummarizer: empty sequence");
    std::vector<Variable> tokens{g.use(*query_), sequence};
    const Variable mixed = stack_.forward(g, concat_rows(tokens));
    const Variable pooled = slice_rows(mixed, 0, 1);
    const Variable projected = out_proj_.forward(g, pooled);
    return l2_normalize_ ? normalize_rows(projected) : projected;
}

SpeechEncoder::SpeechEncoder(ParamStore& store, const TransformerConfig& config, int input_bins,
                             const std::string& prefix, rng::Generator& gen) {
    config.validate();
    in_proj_ = Linear(store, prefix + ".in", input_bins, config.dim, gen);
    stack_ = TransformerStack(store, prefix + ".stack", config.dim, config.heads, config.layers,
                              config.ffn_hidden, config.use_positional, gen);
}

Variable SpeechEncoder::forward(Graph& g, const Variable& features) const {
    if (features.rows() < 1) throw Error("SpeechEncoder: empty input");
    return stack_.forward(g, in_proj_.forward(g, features));
}

Variable SpeechEncoder::forward(Graph& g, const feat::FeatureMatrix& features) const {
    return forward(g, features_to_variable(features));
}

ReconstructionDecoder::ReconstructionDecoder(ParamStore& store, const TransformerConfig& config,
                                             int speech_dim, int embedding_dim, int out_bins,
                                             const std::string& prefix, rng::Generator& gen)
    : out_bins_(out_bins) {
    config.validate();
    in_proj_ = Linear(store, prefix + ".in", speech_dim + embedding_dim + 1, config.dim, gen);
    stack_ = TransformerStack(store, prefix + ".stack", config.dim, config.heads, config.layers,
                              config.ffn_hidden, config.use_positional, gen);
    head_ = Linear(store, prefix + ".head", config.dim, out_bins, gen);
}

Variable ReconstructionDecoder::forward(Graph& g, const Variable& speech_seq,
                                        const Variable& acoustic_embedding,
                                        const feat::Envelope& env) const {
    const long frames = speech_seq.rows();
    if (frames != static_cast<long>(env.values.size())) {
        throw Error("ReconstructionDecoder: speech sequence and envelope lengths differ");
    }
    // Copy the fixed-length embedding along the time axis.
    std::vector<Variable> copies(static_cast<std::size_t>(frames), acoustic_embedding);
    const Variable tiled = concat_rows(copies);
    TensorData env_col(frames, 1);
    for (long k = 0; k < frames; ++k) env_col.at(k, 0) = env.values[static_cast<std::size_t>(k)];
    const Variable joined = concat_cols({speech_seq, tiled, constant(std::move(env_col))});
    return head_.forward(g, stack_.forward(g, in_proj_.forward(g, joined)));
}

ArbitrationClassifier::ArbitrationClassifier(ParamStore& store, const TransformerConfig& stage1,
                                             const TransformerConfig& stage2, int head_hidden,
                                             const std::string& prefix, rng::Generator& gen) {
    stage1.validate();
    stage2.validate();
    stage1_ = TransformerStack(store, prefix + ".stage1", stage1.dim, stage1.heads, stage1.layers,
                               stage1.ffn_hidden, stage1.use_positional, gen);
    stage2_ = AttentionSummarizer(store, stage2, prefix + ".stage2", /*l2_normalize=*/false, gen);
    head1_ = Linear(store, prefix + ".head1", stage1.dim, head_hidden, gen);
    head2_ = Linear(store, prefix + ".head2", head_hidden, 1, gen);
}

Variable ArbitrationClassifier::forward(Graph& g, const std::vector<Variable>& device_hidden) const {
    if (device_hidden.empty()) throw Error("ArbitrationClassifier: empty device list");
    const long k = device_hidden.front().rows();
    for (const auto& h : device_hidden) {
        if (h.rows() != k) throw Error("ArbitrationClassifier: unequal hidden lengths");
    }
    const Variable concatenated = concat_rows(device_hidden);
    const Variable mixed = stage1_.forward(g, concatenated);

    std::vector<Variable> logits;
    logits.reserve(device_hidden.size());
    for (std::size_t i = 0; i < device_hidden.size(); ++i) {
        const long r0 = static_cast<long>(i) * k;
        const Variable summary = stage2_.forward(g, slice_rows(mixed, r0, r0 + k));
        logits.push_back(head2_.forward(g, relu(head1_.forward(g, summary))));
    }
    return softmax_rows(concat_cols(logits));
}

PretrainModel::PretrainModel(const ModelConfig& config, std::uint64_t seed,
                             bool with_reconstruction)
    : config_(config) {
    config_.validate();
    rng::Generator gen(rng::derive_seed(seed, 0x90de1));
    encoder_ = std::make_unique<ConvEncoder>(store_, config_.encoder, "encoder", gen);
    summarizer_ = std::make_unique<AttentionSummarizer>(store_, config_.summarizer, "summarizer",
                                                        /*l2_normalize=*/true, gen);
    if (with_reconstruction) {
        speech_encoder_ = std::make_unique<SpeechEncoder>(store_, config_.speech_encoder,
                                                          config_.feature_bins, "speech_encoder",
                                                          gen);
        decoder_ = std::make_unique<ReconstructionDecoder>(
            store_, config_.decoder, config_.speech_dim, config_.encoder.embedding_dim,
            config_.feature_bins, "decoder", gen);
    }
}

Variable PretrainModel::embed(Graph& g, const feat::FeatureMatrix& features) const {
    return summarizer_->forward(g, encoder_->forward(g, features));
}

ClassifierModel::ClassifierModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
    config_.validate();
    rng::Generator gen(rng::derive_seed(seed, 0x90de1));
    encoder_ = std::make_unique<ConvEncoder>(store_, config_.encoder, "encoder", gen);
    classifier_ = std::make_unique<ArbitrationClassifier>(store_, config_.classifier_attention,
                                                          config_.classifier_summary,
                                                          config_.classifier_head_hidden,
                                                          "classifier", gen);
}

Variable ClassifierModel::probabilities(Graph& g,
                                        const std::vector<feat::FeatureMatrix>& device_features) const {
    if (device_features.empty()) throw Error("ClassifierModel: no device features");
    std::vector<Variable> hidden;
    hidden.reserve(device_features.size());
    for (const auto& f : device_features) hidden.push_back(encoder_->forward(g, f));
    return classifier_->forward(g, hidden);
}

} // namespace arbiter::nn
