#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "videolstm/cells.hpp"

// Frame encoder, per-variant sequence unrolling, classifier head, loss and
// two-stream fusion.
namespace vlsm {

enum class Variant { kLstm, kAlstm, kConvLstm, kConvAlstm, kVideoLstm };
enum class Stream { kRgb, kFlow };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::kLstm: return "lstm";
        case Variant::kAlstm: return "alstm";
        case Variant::kConvLstm: return "conv_lstm";
        case Variant::kConvAlstm: return "conv_alstm";
        case Variant::kVideoLstm: return "videolstm";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "lstm") return Variant::kLstm;
    if (s == "alstm") return Variant::kAlstm;
    if (s == "conv_lstm") return Variant::kConvLstm;
    if (s == "conv_alstm") return Variant::kConvAlstm;
    if (s == "videolstm") return Variant::kVideoLstm;
    throw UsageError("unknown variant '" + s + "'");
}

inline bool variant_has_attention(Variant v) {
    return v == Variant::kAlstm || v == Variant::kConvAlstm || v == Variant::kVideoLstm;
}

inline std::string to_string(Stream s) { return s == Stream::kRgb ? "rgb" : "flow"; }

inline Stream stream_from_string(const std::string& s) {
    if (s == "rgb") return Stream::kRgb;
    if (s == "flow") return Stream::kFlow;
    throw UsageError("unknown stream '" + s + "'");
}

// The encoder stands in for a pre-trained deep net at desk scale: two 3×3
// convolutions with tanh, each followed by a 2×2 max-pool, so the total
// stride is 4 and a H×H frame becomes an (H/4)×(H/4)×D feature map.
inline constexpr int kEncoderStride = 4;

struct ModelConfig {
    Variant variant = Variant::kVideoLstm;
    Stream stream = Stream::kRgb;  // appearance source; the motion path always reads flow
    int frame_size = 32;
    int n = 8;           // feature map extent, frame_size / kEncoderStride
    int feat_dim = 8;    // D, channels of the encoded feature map
    int hidden = 8;      // K: vector cell width, or channels of spatial states
    int num_classes = 6;
    int head_width = 64;
    double dropout_rate = 0.7;
    int state_kernel = 3;  // input-to-state and state-to-state convolutions
    int attn_kernel = 3;   // W_xa / W_ha; the score kernel W_z is always 1×1
    int encoder_mid = 8;   // channels after the first encoder stage
    uint64_t init_seed = 0;

    void validate() const {
        if (frame_size % kEncoderStride != 0)
            throw ConfigError("frame size must be divisible by the encoder stride " +
                              std::to_string(kEncoderStride));
        if (n != frame_size / kEncoderStride)
            throw ConfigError("feature extent n must equal frame_size/" +
                              std::to_string(kEncoderStride));
        if (feat_dim <= 0 || hidden <= 0 || num_classes <= 0 || encoder_mid <= 0)
            throw ConfigError("extents must be positive");
        if (head_width <= 0) throw ConfigError("head_width must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigError("dropout_rate must lie in [0,1)");
        if (state_kernel % 2 == 0 || attn_kernel % 2 == 0)
            throw ConfigError("kernels must be odd-sized");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["variant"] = to_string(variant);
        j["stream"] = to_string(stream);
        j["frame_size"] = frame_size;
        j["n"] = n;
        j["feat_dim"] = feat_dim;
        j["hidden"] = hidden;
        j["num_classes"] = num_classes;
        j["head_width"] = head_width;
        j["dropout_rate"] = dropout_rate;
        j["state_kernel"] = state_kernel;
        j["attn_kernel"] = attn_kernel;
        j["encoder_mid"] = encoder_mid;
        j["init_seed"] = init_seed;
        return j;
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.variant = variant_from_string(j.at("variant").get<std::string>());
        c.stream = stream_from_string(j.at("stream").get<std::string>());
        c.frame_size = j.at("frame_size").get<int>();
        c.n = j.at("n").get<int>();
        c.feat_dim = j.at("feat_dim").get<int>();
        c.hidden = j.at("hidden").get<int>();
        c.num_classes = j.at("num_classes").get<int>();
        c.head_width = j.at("head_width").get<int>();
        c.dropout_rate = j.at("dropout_rate").get<double>();
        c.state_kernel = j.at("state_kernel").get<int>();
        c.attn_kernel = j.at("attn_kernel").get<int>();
        c.encoder_mid = j.at("encoder_mid").get<int>();
        c.init_seed = j.at("init_seed").get<uint64_t>();
        c.validate();
        return c;
    }
};

// Model input: per-frame tensors for both streams. Flow images are the
// [0,255]-discretized fields rescaled to [0,1].
struct ClipTensors {
    std::vector<Tensor> rgb;   // T × H×W×1
    std::vector<Tensor> flow;  // T × H×W×2
    int label = -1;
};

struct FramePrediction {
    Tensor scores;     // pre-softmax head outputs
    Tensor probs;      // softmax of scores
    Tensor attention;  // N×N map for attention variants, otherwise empty
};

// ---------------------------------------------------------------------------
// Encoder and head parameter groups
// ---------------------------------------------------------------------------

struct EncoderIdx {
    int w1, b1, w2, b2;
};
struct EncoderVars {
    ad::Var w1, b1, w2, b2;
};

inline EncoderIdx add_encoder(ParamStore& ps, const std::string& prefix, int cin, int mid,
                              int d, Rng& rng) {
    EncoderIdx idx{};
    idx.w1 = ps.add(prefix + ".conv1.w", glorot_kernel(3, cin, mid, rng));
    idx.b1 = ps.add(prefix + ".conv1.b", Tensor({mid}));
    idx.w2 = ps.add(prefix + ".conv2.w", glorot_kernel(3, mid, d, rng));
    idx.b2 = ps.add(prefix + ".conv2.b", Tensor({d}));
    return idx;
}

inline EncoderVars bind_encoder(const BoundParams& bp, const EncoderIdx& idx) {
    return {bp[idx.w1], bp[idx.b1], bp[idx.w2], bp[idx.b2]};
}

inline ad::Var encode_frame(ad::Var frame, const EncoderVars& enc) {
    if (frame->value.ndim() != 3) throw ShapeError("encode_frame: frame must be H×W×C");
    if (frame->value.extent(0) % kEncoderStride != 0 ||
        frame->value.extent(1) % kEncoderStride != 0)
        throw ConfigError("encode_frame: frame extents must be divisible by the stride");
    auto s1 = ad::maxpool2(ad::tanh(ad::conv2d(frame, enc.w1, enc.b1)));
    return ad::maxpool2(ad::tanh(ad::conv2d(s1, enc.w2, enc.b2)));
}

struct HeadIdx {
    int w1, b1, w2, b2;
};
struct HeadVars {
    ad::Var w1, b1, w2, b2;
};

inline HeadIdx add_head(ParamStore& ps, const std::string& prefix, int in_dim, int width,
                        int classes, Rng& rng) {
    HeadIdx idx{};
    idx.w1 = ps.add(prefix + ".w1", glorot_matrix(in_dim, width, rng));
    idx.b1 = ps.add(prefix + ".b1", Tensor({width}));
    idx.w2 = ps.add(prefix + ".w2", glorot_matrix(width, classes, rng));
    idx.b2 = ps.add(prefix + ".b2", Tensor({classes}));
    return idx;
}

inline HeadVars bind_head(const BoundParams& bp, const HeadIdx& idx) {
    return {bp[idx.w1], bp[idx.b1], bp[idx.w2], bp[idx.b2]};
}

// dense → tanh → dropout (training only, inverted scaling) → dense → softmax.
// Returns {scores, probs} as graph nodes.
inline std::pair<ad::Var, ad::Var> classify_hidden(ad::Var h_flat, const HeadVars& head,
                                                   const Tensor* dropout_mask) {
    auto hidden = ad::tanh(ad::dense(h_flat, head.w1, head.b1));
    if (dropout_mask) {
        if (!dropout_mask->same_shape(hidden->value))
            throw ShapeError("classify_hidden: dropout mask shape mismatch");
        hidden = ad::hadamard(hidden, ad::constant(*dropout_mask));
    }
    auto scores = ad::dense(hidden, head.w2, head.b2);
    return {scores, ad::softmax_vec(scores)};
}

// Mask entries are 0 with probability `rate`, else 1/(1−rate). `rate` is the
// drop probability.
inline Tensor dropout_mask(int width, double rate, Rng& rng) {
    Tensor m({width}, 1.0);
    if (rate <= 0.0) return m;
    const double keep = 1.0 - rate;
    for (int i = 0; i < width; ++i) m[i] = (rng.uniform(0.0, 1.0) < rate) ? 0.0 : 1.0 / keep;
    return m;
}

// ---------------------------------------------------------------------------
// Free prediction helpers (plain tensors)
// ---------------------------------------------------------------------------

// Normalized temporal sum of per-frame class distributions.
inline Tensor video_prediction(const std::vector<Tensor>& frame_probs) {
    if (frame_probs.empty()) throw UsageError("video_prediction: empty prediction list");
    Tensor total = Tensor::zeros_like(frame_probs.front());
    for (const Tensor& p : frame_probs) total = ops::add(total, p);
    double norm = total.sum();
    return ops::scale(total, 1.0 / norm);
}

inline double cross_entropy_loss(const Tensor& video_prob, int label) {
    if (video_prob.ndim() != 1) throw UsageError("cross_entropy_loss: expects a distribution");
    if (label < 0 || label >= video_prob.extent(0))
        throw UsageError("cross_entropy_loss: label out of range");
    return -std::log(std::max(video_prob[label], 1e-12));
}

// Product fusion of two class distributions, renormalized.
inline Tensor fuse_streams(const Tensor& p_rgb, const Tensor& p_flow) {
    if (!p_rgb.same_shape(p_flow) || p_rgb.ndim() != 1)
        throw ShapeError("fuse_streams: distributions must share one class axis");
    Tensor prod = ops::hadamard(p_rgb, p_flow);
    const double total = prod.sum();
    if (total <= 0.0) throw NumericError("fuse_streams: degenerate all-zero product");
    return ops::scale(prod, 1.0 / total);
}

inline int argmax_class(const Tensor& probs) {
    int best = 0;
    for (int i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;  // ties keep the lowest index
    return best;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ForwardResult {
    BoundParams bound;  // parameter leaves; gradients land here after backward
    ad::Var loss;       // scalar node, present when a label was supplied
    Tensor video_probs;
    std::vector<FramePrediction> frames;
};

class Model {
public:
    explicit Model(ModelConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(cfg_.init_seed);
        const int xin = cfg_.stream == Stream::kRgb ? 1 : 2;
        enc_x_ = add_encoder(params_, "enc_x", xin, cfg_.encoder_mid, cfg_.feat_dim, rng);
        const int n = cfg_.n, d = cfg_.feat_dim, k = cfg_.hidden;
        switch (cfg_.variant) {
            case Variant::kLstm:
                vec_gates_ = add_vector_gates(params_, "cell", n * n * d, k, rng);
                break;
            case Variant::kAlstm:
                vec_gates_ = add_vector_gates(params_, "cell", d, k, rng);
                vec_attn_ = add_vector_attention(params_, "attn", d, k, rng);
                break;
            case Variant::kConvLstm:
                conv_gates_ = add_conv_gates(params_, "cell", cfg_.state_kernel, d, k, rng);
                break;
            case Variant::kConvAlstm:
                conv_gates_ = add_conv_gates(params_, "cell", cfg_.state_kernel, d, k, rng);
                conv_attn_ = add_conv_attention(params_, "attn", cfg_.attn_kernel, d, k, rng);
                break;
            case Variant::kVideoLstm:
                enc_m_ = add_encoder(params_, "enc_m", 2, cfg_.encoder_mid, d, rng);
                conv_gates_ = add_conv_gates(params_, "cell", cfg_.state_kernel, d, k, rng);
                motion_gates_ = add_motion_gates(params_, "motion", cfg_.state_kernel, d, k, rng);
                conv_attn_ = add_conv_attention(params_, "attn", cfg_.attn_kernel, d, k, rng);
                break;
        }
        const int head_in = is_conv_variant() ? n * n * k : k;
        head_ = add_head(params_, "head", head_in, cfg_.head_width, cfg_.num_classes, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    bool is_conv_variant() const {
        return cfg_.variant == Variant::kConvLstm || cfg_.variant == Variant::kConvAlstm ||
               cfg_.variant == Variant::kVideoLstm;
    }

    // Unrolls the configured cell over the clip. `training` enables dropout
    // (dropout_rng required when the rate is nonzero); `with_grad` decides
    // whether parameters are bound as gradient leaves or constants. The loss
    // node is built when clip.label is in range.
    ForwardResult forward(const ClipTensors& clip, bool training = false,
                          Rng* dropout_rng = nullptr, bool with_grad = true) const {
        const std::vector<Tensor>& xs = stream_frames(clip);
        if (xs.empty()) throw UsageError("forward: empty clip");
        if (cfg_.variant == Variant::kVideoLstm && clip.flow.size() != xs.size())
            throw UsageError("forward: frame and flow sequence lengths differ");
        const bool use_dropout = training && cfg_.dropout_rate > 0.0;
        if (use_dropout && !dropout_rng)
            throw UsageError("forward: training with dropout needs an rng");

        ForwardResult out{BoundParams(params_, with_grad), nullptr, Tensor(), {}};
        const BoundParams& bp = out.bound;
        const EncoderVars enc_x = bind_encoder(bp, enc_x_);
        const HeadVars head = bind_head(bp, head_);
        const int n = cfg_.n, k = cfg_.hidden;
        const int t_len = static_cast<int>(xs.size());

        CellStateVar state =
            is_conv_variant() ? zero_state_map(n, k) : zero_state_vec(k);
        CellStateVar bottom = zero_state_map(n, k);  // videolstm only

        VectorGateVars vgates;
        VectorAttnVars vattn;
        ConvGateVars cgates;
        ConvAttnVars cattn;
        MotionGateVars mgates;
        EncoderVars enc_m;
        switch (cfg_.variant) {
            case Variant::kLstm: vgates = bind_vector_gates(bp, vec_gates_); break;
            case Variant::kAlstm:
                vgates = bind_vector_gates(bp, vec_gates_);
                vattn = bind_vector_attention(bp, vec_attn_);
                break;
            case Variant::kConvLstm: cgates = bind_conv_gates(bp, conv_gates_); break;
            case Variant::kConvAlstm:
                cgates = bind_conv_gates(bp, conv_gates_);
                cattn = bind_conv_attention(bp, conv_attn_);
                break;
            case Variant::kVideoLstm:
                cgates = bind_conv_gates(bp, conv_gates_);
                cattn = bind_conv_attention(bp, conv_attn_);
                mgates = bind_motion_gates(bp, motion_gates_);
                enc_m = bind_encoder(bp, enc_m_);
                break;
        }

        ad::Var prob_sum;
        out.frames.reserve(static_cast<size_t>(t_len));
        std::vector<Tensor> frame_probs;
        for (int t = 0; t < t_len; ++t) {
            auto feat = encode_frame(ad::constant(xs[static_cast<size_t>(t)]), enc_x);
            ad::Var attention;
            switch (cfg_.variant) {
                case Variant::kLstm:
                    state = lstm_step(ad::flatten(feat), state, vgates);
                    break;
                case Variant::kAlstm:
                    state = alstm_step(feat, state, vgates, vattn, &attention);
                    break;
                case Variant::kConvLstm:
                    state = conv_lstm_step(feat, state, cgates);
                    break;
                case Variant::kConvAlstm: {
                    auto [s, a] = conv_alstm_step(feat, state, cgates, cattn);
                    state = s;
                    attention = a;
                    break;
                }
                case Variant::kVideoLstm: {
                    auto flow_feat =
                        encode_frame(ad::constant(clip.flow[static_cast<size_t>(t)]), enc_m);
                    auto step = videolstm_step(feat, flow_feat, state, bottom, cgates, mgates,
                                               cattn);
                    state = step.top;
                    bottom = step.bottom;
                    attention = step.attention;
                    break;
                }
            }

            Tensor mask;
            const Tensor* mask_ptr = nullptr;
            if (use_dropout) {
                mask = dropout_mask(cfg_.head_width, cfg_.dropout_rate, *dropout_rng);
                mask_ptr = &mask;
            }
            auto h_flat = is_conv_variant() ? ad::flatten(state.h) : state.h;
            auto [scores, probs] = classify_hidden(h_flat, head, mask_ptr);

            FramePrediction fp;
            fp.scores = scores->value;
            fp.probs = probs->value;
            if (attention) fp.attention = attention->value;
            out.frames.push_back(std::move(fp));
            frame_probs.push_back(probs->value);
            prob_sum = prob_sum ? ad::add(prob_sum, probs) : probs;
        }

        auto video_probs = ad::scale(prob_sum, 1.0 / t_len);
        out.video_probs = video_probs->value;
        if (clip.label >= 0) {
            if (clip.label >= cfg_.num_classes) throw UsageError("forward: label out of range");
            out.loss = ad::neg_log_pick(video_probs, clip.label);
        }
        return out;
    }

private:
    const std::vector<Tensor>& stream_frames(const ClipTensors& clip) const {
        if (cfg_.stream == Stream::kRgb) return clip.rgb;
        return clip.flow;
    }

    ModelConfig cfg_;
    ParamStore params_;
    EncoderIdx enc_x_{}, enc_m_{};
    VectorGateIdx vec_gates_{};
    VectorAttnIdx vec_attn_{};
    ConvGateIdx conv_gates_{};
    ConvAttnIdx conv_attn_{};
    MotionGateIdx motion_gates_{};
    HeadIdx head_{};
};

// ---------------------------------------------------------------------------
// Checkpoints: JSON manifest + named TNSR parameter sections
// ---------------------------------------------------------------------------

inline void save_checkpoint(const Model& model, const std::string& json_path) {
    namespace fs = std::filesystem;
    const fs::path jp(json_path);
    fs::path pp = jp;
    pp.replace_extension(".params");

    nlohmann::ordered_json manifest;
    manifest["format"] = "vlsm-checkpoint";
    manifest["version"] = 1;
    manifest["params_file"] = pp.filename().string();
    manifest["config"] = model.config().to_json();

    std::ofstream pf(pp, std::ios::binary);
    if (!pf) throw IoError("save_checkpoint: cannot write " + pp.string());
    model.params().save(pf);
    pf.close();

    std::ofstream jf(jp);
    if (!jf) throw IoError("save_checkpoint: cannot write " + json_path);
    jf << manifest.dump(2) << '\n';
}

inline Model load_checkpoint(const std::string& json_path) {
    namespace fs = std::filesystem;
    std::ifstream jf(json_path);
    if (!jf) throw IoError("load_checkpoint: cannot read " + json_path);
    nlohmann::json manifest;
    try {
        jf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_checkpoint: bad manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "vlsm-checkpoint")
        throw FormatError("load_checkpoint: not a checkpoint manifest");
    if (manifest.value("version", 0) != 1)
        throw FormatError("load_checkpoint: expected version 1, found " +
                          std::to_string(manifest.value("version", 0)));

    Model model(ModelConfig::from_json(manifest.at("config")));
    const fs::path pp =
        fs::path(json_path).parent_path() / manifest.at("params_file").get<std::string>();
    std::ifstream pf(pp, std::ios::binary);
    if (!pf) throw IoError("load_checkpoint: cannot read " + pp.string());
    model.params().load(pf);
    return model;
}

}  // namespace vlsm
