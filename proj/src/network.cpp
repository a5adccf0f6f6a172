#include "octmix/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "octmix/error.hpp"

namespace octmix::nn {

namespace {

constexpr double kLogClamp = 1e-12;

void he_uniform(Parameter& p, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : p.value) v = dist(rng);
}

}  // namespace

Matrix concat_columns(const std::vector<Matrix>& parts) {
    if (parts.empty()) return {};
    const std::size_t rows = parts.front().rows;
    std::size_t cols = 0;
    for (const Matrix& m : parts) {
        if (m.rows != rows) throw ShapeError("cannot concatenate matrices with different row counts");
        cols += m.cols;
    }
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t offset = 0;
        for (const Matrix& m : parts) {
            std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols), m.cols,
                        out.data.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
            offset += m.cols;
        }
    }
    return out;
}

Parameter::Parameter(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (std::size_t d : shape) count *= d;
    value.assign(count, 0.0);
    grad.assign(count, 0.0);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

void ModelConfig::validate() const {
    if (in_channels == 0) throw InvalidParameterError("model needs at least one input channel");
    if (channel_widths.empty()) throw InvalidParameterError("model needs at least one conv block");
    for (std::size_t w : channel_widths) {
        if (w == 0) throw InvalidParameterError("conv block widths must be >= 1");
    }
    if (kernel_size == 0 || kernel_size % 2 == 0) throw InvalidParameterError("kernel_size must be odd");
    if (num_classes < 2) throw InvalidParameterError("model needs at least two classes");
    if (num_blocks() > 20) throw InvalidParameterError("too many conv blocks");
}

// ---------------------------------------------------------------------------
// FeatureExtractor

FeatureExtractor::FeatureExtractor(const ModelConfig& config, Rng& init_rng, const std::string& prefix)
    : config_(config) {
    config_.validate();
    std::size_t in = config_.in_channels;
    for (std::size_t b = 0; b < config_.num_blocks(); ++b) {
        Block block;
        block.in = in;
        block.out = config_.channel_widths[b];
        const std::string base = prefix + ".block" + std::to_string(b);
        block.weight = Parameter(base + ".weight", {block.out, block.in, config_.kernel_size});
        block.bias = Parameter(base + ".bias", {block.out});
        he_uniform(block.weight, block.in * config_.kernel_size, init_rng);
        blocks_.push_back(std::move(block));
        in = config_.channel_widths[b];
    }
}

Matrix FeatureExtractor::forward(const LabeledBatch& batch) const { return run(batch, nullptr); }

Matrix FeatureExtractor::forward(const LabeledBatch& batch, ExtractorTape& tape) const {
    return run(batch, &tape);
}

Matrix FeatureExtractor::run(const LabeledBatch& batch, ExtractorTape* tape) const {
    batch.validate();
    if (blocks_.empty()) throw ContractViolationError("feature extractor is not initialized");
    if (batch.channels() != config_.in_channels) {
        throw ShapeError("extractor expects " + std::to_string(config_.in_channels) + " channels, got " +
                         std::to_string(batch.channels()));
    }
    if (batch.timesteps() < config_.min_timesteps()) {
        throw WindowTooShortError("windows of " + std::to_string(batch.timesteps()) +
                                  " timesteps are too short for " + std::to_string(config_.num_blocks()) +
                                  " pooling stages; minimum T is " + std::to_string(config_.min_timesteps()));
    }
    const std::size_t n = batch.size();
    const std::size_t k = config_.kernel_size;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    Matrix features(n, config_.feature_dim());
    if (tape) {
        tape->stages.assign(n, std::vector<ExtractorTape::Stage>(blocks_.size()));
        tape->final_length.assign(n, 0);
    }

    std::vector<double> act;
    std::vector<double> pre;
    for (std::size_t s = 0; s < n; ++s) {
        const Window& w = batch.windows[s];
        std::size_t length = w.timesteps();
        act.assign(config_.in_channels * length, 0.0);
        for (std::size_t t = 0; t < length; ++t) {
            for (std::size_t c = 0; c < config_.in_channels; ++c) act[c * length + t] = w(t, c);
        }
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            const Block& blk = blocks_[b];
            const auto len = static_cast<std::ptrdiff_t>(length);
            pre.assign(blk.out * length, 0.0);
            for (std::size_t o = 0; o < blk.out; ++o) {
                double* dst = pre.data() + o * length;
                std::fill(dst, dst + length, blk.bias.value[o]);
                for (std::size_t i = 0; i < blk.in; ++i) {
                    const double* src = act.data() + i * length;
                    for (std::size_t j = 0; j < k; ++j) {
                        const double wv = blk.weight.value[(o * blk.in + i) * k + j];
                        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - shift);
                        for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t] += wv * src[t + shift];
                    }
                }
            }
            const std::size_t pooled_len = length / 2;
            std::vector<double> pooled(blk.out * pooled_len);
            std::vector<std::uint32_t> argmax;
            if (tape) argmax.resize(blk.out * pooled_len);
            for (std::size_t o = 0; o < blk.out; ++o) {
                const double* row = pre.data() + o * length;
                for (std::size_t t = 0; t < pooled_len; ++t) {
                    const double a = std::max(row[2 * t], 0.0);
                    const double c = std::max(row[2 * t + 1], 0.0);
                    const bool second = c > a;
                    pooled[o * pooled_len + t] = second ? c : a;
                    if (tape) argmax[o * pooled_len + t] = static_cast<std::uint32_t>(2 * t + (second ? 1 : 0));
                }
            }
            if (tape) {
                ExtractorTape::Stage& st = tape->stages[s][b];
                st.length = length;
                st.input = std::move(act);
                st.pre = pre;
                st.argmax = std::move(argmax);
            }
            act = std::move(pooled);
            length = pooled_len;
        }
        const std::size_t width = config_.feature_dim();
        for (std::size_t o = 0; o < width; ++o) {
            double sum = 0.0;
            for (std::size_t t = 0; t < length; ++t) sum += act[o * length + t];
            features(s, o) = sum / static_cast<double>(length);
        }
        if (tape) tape->final_length[s] = length;
    }
    return features;
}

void FeatureExtractor::backward(const ExtractorTape& tape, const Matrix& d_features) {
    if (frozen()) return;
    const std::size_t n = tape.stages.size();
    if (d_features.rows != n || d_features.cols != config_.feature_dim()) {
        throw ShapeError("feature gradient shape does not match the recorded forward pass");
    }
    const std::size_t k = config_.kernel_size;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    std::vector<double> d_act;
    std::vector<double> d_pre;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t final_len = tape.final_length[s];
        const std::size_t width = config_.feature_dim();
        d_act.assign(width * final_len, 0.0);
        for (std::size_t o = 0; o < width; ++o) {
            const double g = d_features(s, o) / static_cast<double>(final_len);
            for (std::size_t t = 0; t < final_len; ++t) d_act[o * final_len + t] = g;
        }
        for (std::size_t b = blocks_.size(); b-- > 0;) {
            Block& blk = blocks_[b];
            const ExtractorTape::Stage& st = tape.stages[s][b];
            const std::size_t length = st.length;
            const std::size_t pooled_len = length / 2;
            const auto len = static_cast<std::ptrdiff_t>(length);
            d_pre.assign(blk.out * length, 0.0);
            for (std::size_t o = 0; o < blk.out; ++o) {
                for (std::size_t t = 0; t < pooled_len; ++t) {
                    const std::size_t src = st.argmax[o * pooled_len + t];
                    if (st.pre[o * length + src] > 0.0) d_pre[o * length + src] += d_act[o * pooled_len + t];
                }
            }
            const bool need_input_grad = b > 0;
            std::vector<double> d_in(need_input_grad ? blk.in * length : 0, 0.0);
            for (std::size_t o = 0; o < blk.out; ++o) {
                const double* g = d_pre.data() + o * length;
                double bias_grad = 0.0;
                for (std::size_t t = 0; t < length; ++t) bias_grad += g[t];
                blk.bias.grad[o] += bias_grad;
                for (std::size_t i = 0; i < blk.in; ++i) {
                    const double* x = st.input.data() + i * length;
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t widx = (o * blk.in + i) * k + j;
                        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - shift);
                        double acc = 0.0;
                        for (std::ptrdiff_t t = t0; t < t1; ++t) acc += g[t] * x[t + shift];
                        blk.weight.grad[widx] += acc;
                        if (need_input_grad) {
                            const double wv = blk.weight.value[widx];
                            double* dx = d_in.data() + i * length;
                            for (std::ptrdiff_t t = t0; t < t1; ++t) dx[t + shift] += wv * g[t];
                        }
                    }
                }
            }
            d_act = std::move(d_in);
        }
    }
}

void FeatureExtractor::freeze() {
    for (Parameter* p : parameters()) p->trainable = false;
}

bool FeatureExtractor::frozen() const noexcept {
    for (const Block& b : blocks_) {
        if (b.weight.trainable || b.bias.trainable) return false;
    }
    return true;
}

std::vector<Parameter*> FeatureExtractor::parameters() {
    std::vector<Parameter*> out;
    for (Block& b : blocks_) {
        out.push_back(&b.weight);
        out.push_back(&b.bias);
    }
    return out;
}

std::vector<const Parameter*> FeatureExtractor::parameters() const {
    std::vector<const Parameter*> out;
    for (const Block& b : blocks_) {
        out.push_back(&b.weight);
        out.push_back(&b.bias);
    }
    return out;
}

FeatureExtractor freeze(FeatureExtractor extractor) {
    extractor.freeze();
    return extractor;
}

// ---------------------------------------------------------------------------
// Classifier

Classifier::Classifier(std::size_t in_features, std::size_t num_classes, Rng& init_rng, const std::string& prefix)
    : in_(in_features),
      out_(num_classes),
      weight_(prefix + ".weight", {num_classes, in_features}),
      bias_(prefix + ".bias", {num_classes}) {
    if (in_ == 0 || out_ == 0) throw InvalidParameterError("classifier dimensions must be positive");
    he_uniform(weight_, in_, init_rng);
}

Matrix Classifier::logits(const Matrix& features) const {
    if (features.cols != in_) {
        throw ShapeError("classifier expects " + std::to_string(in_) + " features, got " +
                         std::to_string(features.cols));
    }
    Matrix out(features.rows, out_);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const double* f = features.data.data() + r * in_;
        for (std::size_t k = 0; k < out_; ++k) {
            const double* w = weight_.value.data() + k * in_;
            double acc = bias_.value[k];
            for (std::size_t i = 0; i < in_; ++i) acc += w[i] * f[i];
            out(r, k) = acc;
        }
    }
    return out;
}

Matrix Classifier::backward(const Matrix& features, const Matrix& d_logits) {
    if (features.cols != in_ || d_logits.cols != out_ || features.rows != d_logits.rows) {
        throw ShapeError("classifier backward shape mismatch");
    }
    const bool learn = !frozen();
    Matrix d_features(features.rows, in_);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const double* f = features.data.data() + r * in_;
        double* df = d_features.data.data() + r * in_;
        for (std::size_t k = 0; k < out_; ++k) {
            const double g = d_logits(r, k);
            const double* w = weight_.value.data() + k * in_;
            for (std::size_t i = 0; i < in_; ++i) df[i] += g * w[i];
            if (learn) {
                double* gw = weight_.grad.data() + k * in_;
                for (std::size_t i = 0; i < in_; ++i) gw[i] += g * f[i];
                bias_.grad[k] += g;
            }
        }
    }
    return d_features;
}

void Classifier::freeze() {
    weight_.trainable = false;
    bias_.trainable = false;
}

bool Classifier::frozen() const noexcept { return !weight_.trainable && !bias_.trainable; }

std::vector<Parameter*> Classifier::parameters() { return {&weight_, &bias_}; }

std::vector<const Parameter*> Classifier::parameters() const { return {&weight_, &bias_}; }

// ---------------------------------------------------------------------------
// Loss

Matrix softmax(const Matrix& logits) {
    Matrix probs(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double peak = logits(r, 0);
        for (std::size_t k = 1; k < logits.cols; ++k) peak = std::max(peak, logits(r, k));
        double sum = 0.0;
        for (std::size_t k = 0; k < logits.cols; ++k) {
            probs(r, k) = std::exp(logits(r, k) - peak);
            sum += probs(r, k);
        }
        for (std::size_t k = 0; k < logits.cols; ++k) probs(r, k) /= sum;
    }
    return probs;
}

Matrix label_matrix(const LabeledBatch& batch) {
    Matrix out(batch.size(), batch.num_classes());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        for (std::size_t k = 0; k < out.cols; ++k) out(r, k) = batch.labels[r].probs[k];
    }
    return out;
}

double soft_cross_entropy(const Matrix& probs, const Matrix& targets) {
    if (probs.rows != targets.rows || probs.cols != targets.cols) {
        throw ShapeError("probabilities and targets differ in shape");
    }
    if (probs.rows == 0) throw ShapeError("cross-entropy of an empty batch");
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        for (std::size_t k = 0; k < probs.cols; ++k) {
            const double t = targets(r, k);
            if (t != 0.0) total -= t * std::log(std::max(probs(r, k), kLogClamp));
        }
    }
    return total / static_cast<double>(probs.rows);
}

Matrix cross_entropy_logit_grad(const Matrix& probs, const Matrix& targets) {
    if (probs.rows != targets.rows || probs.cols != targets.cols) {
        throw ShapeError("probabilities and targets differ in shape");
    }
    Matrix grad(probs.rows, probs.cols);
    const double scale = 1.0 / static_cast<double>(probs.rows);
    for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = (probs.data[i] - targets.data[i]) * scale;
    return grad;
}

// ---------------------------------------------------------------------------
// Network

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out = extractor.parameters();
    for (Parameter* p : classifier.parameters()) out.push_back(p);
    return out;
}

std::vector<const Parameter*> Network::parameters() const {
    std::vector<const Parameter*> out = extractor.parameters();
    for (const Parameter* p : classifier.parameters()) out.push_back(p);
    return out;
}

double evaluate_loss(const Network& net, const LabeledBatch& batch) {
    const Matrix probs = softmax(net.classifier.logits(net.extractor.forward(batch)));
    return soft_cross_entropy(probs, label_matrix(batch));
}

double backward(Network& net, const LabeledBatch& batch) { return backward(net.extractor, net.classifier, batch); }

double backward(FeatureExtractor& extractor, Classifier& classifier, const LabeledBatch& batch) {
    zero_grads(extractor.parameters());
    zero_grads(classifier.parameters());
    ExtractorTape tape;
    const Matrix features = extractor.forward(batch, tape);
    const Matrix probs = softmax(classifier.logits(features));
    const Matrix targets = label_matrix(batch);
    const double loss = soft_cross_entropy(probs, targets);
    const Matrix d_features = classifier.backward(features, cross_entropy_logit_grad(probs, targets));
    extractor.backward(tape, d_features);
    return loss;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.lr > 0.0)) throw InvalidParameterError("learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    ++step_;
    const double t = static_cast<double>(step_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Parameter& param = *params_[p];
        if (!param.trainable) continue;
        if (param.grad.size() != param.value.size() || m_[p].size() != param.value.size()) {
            throw ShapeError("Adam state does not match parameter " + param.name);
        }
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        for (std::size_t i = 0; i < param.value.size(); ++i) {
            const double g = param.grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            param.value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

}  // namespace octmix::nn
