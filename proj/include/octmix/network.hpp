#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "octmix/random.hpp"
#include "octmix/window.hpp"

namespace octmix::nn {

/// Dense row-major matrix; rows are batch entries.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Side-by-side concatenation; all parts must have equal row counts.
Matrix concat_columns(const std::vector<Matrix>& parts);

/// A named trainable tensor with its gradient buffer.
struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, std::vector<std::size_t> s);

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad();
};

/// Shape of one feature extractor plus classifier. Block b has
/// channel_widths[b] output channels.
struct ModelConfig {
    std::size_t in_channels = 3;
    std::vector<std::size_t> channel_widths{64, 128, 256, 512, 512};
    std::size_t kernel_size = 3;
    std::size_t num_classes = 6;

    std::size_t num_blocks() const noexcept { return channel_widths.size(); }
    std::size_t feature_dim() const noexcept { return channel_widths.empty() ? 0 : channel_widths.back(); }
    /// 2^num_blocks: every pooling stage needs at least one output step.
    std::size_t min_timesteps() const noexcept { return std::size_t{1} << num_blocks(); }

    /// Throws InvalidParameterError.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Activations recorded by a forward pass, consumed by backward().
struct ExtractorTape {
    struct Stage {
        std::size_t length = 0;         // input length of the block
        std::vector<double> input;      // in_channels x length
        std::vector<double> pre;        // out_channels x length (before ReLU)
        std::vector<std::uint32_t> argmax;  // out_channels x length/2, index into pre
    };
    // samples x blocks
    std::vector<std::vector<Stage>> stages;
    std::vector<std::size_t> final_length;
};

/// Stack of conv blocks (same-padded stride-1 conv, ReLU, max-pool 2) followed
/// by global average pooling over time.
class FeatureExtractor {
public:
    FeatureExtractor() = default;
    FeatureExtractor(const ModelConfig& config, Rng& init_rng, const std::string& prefix = "E");

    const ModelConfig& config() const noexcept { return config_; }

    /// n x feature_dim. Throws WindowTooShortError when T < 2^num_blocks.
    Matrix forward(const LabeledBatch& batch) const;
    Matrix forward(const LabeledBatch& batch, ExtractorTape& tape) const;

    /// Accumulates parameter gradients for d(loss)/d(features). No-op when frozen.
    void backward(const ExtractorTape& tape, const Matrix& d_features);

    void freeze();
    bool frozen() const noexcept;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

private:
    struct Block {
        std::size_t in = 0;
        std::size_t out = 0;
        Parameter weight;  // out x in x kernel
        Parameter bias;    // out
    };

    Matrix run(const LabeledBatch& batch, ExtractorTape* tape) const;

    ModelConfig config_;
    std::vector<Block> blocks_;
};

/// Frozen copy of `extractor`.
FeatureExtractor freeze(FeatureExtractor extractor);

/// Single affine map followed by softmax.
class Classifier {
public:
    Classifier() = default;
    Classifier(std::size_t in_features, std::size_t num_classes, Rng& init_rng, const std::string& prefix = "C");

    std::size_t in_features() const noexcept { return in_; }
    std::size_t num_classes() const noexcept { return out_; }

    /// n x num_classes logits. Throws ShapeError on a feature-width mismatch.
    Matrix logits(const Matrix& features) const;

    /// Accumulates gradients; returns d(loss)/d(features).
    Matrix backward(const Matrix& features, const Matrix& d_logits);

    void freeze();
    bool frozen() const noexcept;

    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }
    const Parameter& weight() const noexcept { return weight_; }
    const Parameter& bias() const noexcept { return bias_; }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

private:
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    Parameter weight_;  // out x in
    Parameter bias_;    // out
};

/// Row-wise softmax.
Matrix softmax(const Matrix& logits);

/// Targets as an n x K matrix.
Matrix label_matrix(const LabeledBatch& batch);

/// Mean over rows of -sum_k t_k log(max(p_k, 1e-12)).
double soft_cross_entropy(const Matrix& probs, const Matrix& targets);

/// (probs - targets) / n.
Matrix cross_entropy_logit_grad(const Matrix& probs, const Matrix& targets);

/// One extractor followed by one classifier.
struct Network {
    FeatureExtractor extractor;
    Classifier classifier;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
};

/// Loss of the network on the batch, no gradients.
double evaluate_loss(const Network& net, const LabeledBatch& batch);

/// Zeroes gradients, runs forward and reverse passes, leaves d(loss)/d(param)
/// in every trainable parameter's grad buffer. Returns the loss.
double backward(Network& net, const LabeledBatch& batch);
double backward(FeatureExtractor& extractor, Classifier& classifier, const LabeledBatch& batch);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Non-trainable parameters
/// are never touched.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Parameter*> params, AdamConfig config = {});

    void step();
    std::uint64_t steps() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    std::vector<Parameter*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig config_;
    std::uint64_t step_ = 0;
};

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace octmix::nn
