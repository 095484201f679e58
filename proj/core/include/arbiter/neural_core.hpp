#pragma once

#include <memory>
#include <string>
#include <vector>

#include "arbiter/feature_pipeline.hpp"
#include "arbiter/nn/modules.hpp"

namespace arbiter::nn {

/// Residual convolutional encoder configuration. conv_layers must be even
/// (two convolutions per residual pair) and equal 2 * stage count; the
/// product of stage strides must be a power of two.
struct EncoderConfig {
    int conv_layers = 6;
    std::vector<int> stage_channels{32, 48, 64};
    std::vector<int> stage_strides{2, 2, 2};
    int kernel_size = 3;
    int embedding_dim = 64; // D; equals the last stage's channel count
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.1;

    int total_stride() const;
    void validate() const;

    static EncoderConfig small_preset();
    /// 18 convolutional layers; the configuration used for full-size runs.
    static EncoderConfig deep_preset();
};

struct TransformerConfig {
    int dim = 64;
    int heads = 4;
    int layers = 2;
    int ffn_hidden = 128;
    bool use_positional = false;

    void validate() const;
};

struct ModelConfig {
    EncoderConfig encoder;
    TransformerConfig summarizer;           // learned-query pooling, no positions
    TransformerConfig speech_encoder;       // frame-rate, positions on
    TransformerConfig decoder;              // frame-rate, positions on
    TransformerConfig classifier_attention; // stage 1 over concatenated devices
    TransformerConfig classifier_summary;   // stage 2 per-device pooling
    int speech_dim = 64;
    int classifier_head_hidden = 64;
    int feature_bins = 64;

    void validate() const;
    static ModelConfig small_preset();
    static ModelConfig deep_preset();
    /// Miniature config for gradient checks (D=8, single heads/layers).
    static ModelConfig tiny_preset();
};

/// Residual convolutional encoder over LFBE frames. Produces
/// ceil(frames / total_stride) hidden vectors of dimension embedding_dim.
class ConvEncoder {
public:
    ConvEncoder(ParamStore& store, const EncoderConfig& config, const std::string& prefix,
                rng::Generator& gen);

    Variable forward(Graph& g, const Variable& features) const;
    Variable forward(Graph& g, const feat::FeatureMatrix& features) const;

    const EncoderConfig& config() const { return config_; }

private:
    struct ResidualPair {
        Conv1d conv1, conv2;
        BatchNorm1d bn1, bn2;
        Conv1d skip_conv;     // 1x1 when shape changes
        BatchNorm1d skip_bn;
        bool has_skip_proj = false;
    };

    EncoderConfig config_;
    std::vector<ResidualPair> pairs_;
    int input_bins_ = 64;
};

/// Maps a hidden sequence to one fixed-length vector: a learned query token
/// attends over the sequence through a transformer; optionally the output is
/// projected and L2-normalized (unit acoustic embeddings).
class AttentionSummarizer {
public:
    AttentionSummarizer() = default;
    AttentionSummarizer(ParamStore& store, const TransformerConfig& config,
                        const std::string& prefix, bool l2_normalize, rng::Generator& gen);

    Variable forward(Graph& g, const Variable& sequence) const; // 1 x dim

private:
    Param* query_ = nullptr;
    TransformerStack stack_;
    Linear out_proj_;
    bool l2_normalize_ = true;
};

/// Frame-rate transformer: output length always equals input length.
class SpeechEncoder {
public:
    SpeechEncoder(ParamStore& store, const TransformerConfig& config, int input_bins,
                  const std::string& prefix, rng::Generator& gen);

    Variable forward(Graph& g, const Variable& features) const;
    Variable forward(Graph& g, const feat::FeatureMatrix& features) const;

private:
    Linear in_proj_;
    TransformerStack stack_;
};

/// Reconstructs LFBE features from (speech sequence, acoustic embedding
/// copied along time, envelope scalar per frame).
class ReconstructionDecoder {
public:
    ReconstructionDecoder(ParamStore& store, const TransformerConfig& config, int speech_dim,
                          int embedding_dim, int out_bins, const std::string& prefix,
                          rng::Generator& gen);

    Variable forward(Graph& g, const Variable& speech_seq, const Variable& acoustic_embedding,
                     const feat::Envelope& env) const;

private:
    Linear in_proj_;
    TransformerStack stack_;
    Linear head_;
    int out_bins_ = 64;
};

/// Two-stage self-attention arbitration head: stage 1 attends over the
/// device-concatenated hidden sequence (positions added by default), stage 2
/// summarizes each device's slice, and a shared two-layer feedforward emits
/// one logit per device, softmaxed into arbitration probabilities.
class ArbitrationClassifier {
public:
    ArbitrationClassifier(ParamStore& store, const TransformerConfig& stage1,
                          const TransformerConfig& stage2, int head_hidden,
                          const std::string& prefix, rng::Generator& gen);

    Variable forward(Graph& g, const std::vector<Variable>& device_hidden) const; // 1 x N

private:
    TransformerStack stage1_;
    AttentionSummarizer stage2_;
    Linear head1_, head2_;
};

/// Encoder + summarizer (and, when reconstruction is on, speech encoder +
/// decoder): everything the self-supervised objectives train.
class PretrainModel {
public:
    PretrainModel(const ModelConfig& config, std::uint64_t seed, bool with_reconstruction);

    /// Unit-norm acoustic embedding A(x) = summarize(encode(f)).
    Variable embed(Graph& g, const feat::FeatureMatrix& features) const;

    const ModelConfig& config() const { return config_; }
    ParamStore& store() { return store_; }
    const ConvEncoder& encoder() const { return *encoder_; }
    const AttentionSummarizer& summarizer() const { return *summarizer_; }
    const SpeechEncoder& speech_encoder() const { return *speech_encoder_; }
    const ReconstructionDecoder& decoder() const { return *decoder_; }
    bool has_reconstruction() const { return speech_encoder_ != nullptr; }

private:
    ModelConfig config_;
    ParamStore store_;
    std::unique_ptr<ConvEncoder> encoder_;
    std::unique_ptr<AttentionSummarizer> summarizer_;
    std::unique_ptr<SpeechEncoder> speech_encoder_;
    std::unique_ptr<ReconstructionDecoder> decoder_;
};

/// Encoder + arbitration classifier: the end-to-end supervised model.
class ClassifierModel {
public:
    ClassifierModel(const ModelConfig& config, std::uint64_t seed);

    /// Arbitration probabilities (1 x N) for one scenario's features.
    Variable probabilities(Graph& g, const std::vector<feat::FeatureMatrix>& device_features) const;

    const ModelConfig& config() const { return config_; }
    ParamStore& store() { return store_; }
    const ConvEncoder& encoder() const { return *encoder_; }
    const ArbitrationClassifier& classifier() const { return *classifier_; }

private:
    ModelConfig config_;
    ParamStore store_;
    std::unique_ptr<ConvEncoder> encoder_;
    std::unique_ptr<ArbitrationClassifier> classifier_;
};

} // namespace arbiter::nn
