#pragma once

// The three regression architectures. Every model maps a GraspBatch to one
// normalized modulus prediction per grasp, shape [B, 1].

#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "tactile/contact.hpp"
#include "tactile/nn/layers.hpp"
#include "tactile/pipeline.hpp"

namespace tactile {

enum class InputStrategy { Image, ImageF, ImageFW, All };
enum class Architecture { Top10NN, VggLstm, ResTf };

inline std::string to_string(InputStrategy s) {
    switch (s) {
        case InputStrategy::Image: return "Image";
        case InputStrategy::ImageF: return "ImageF";
        case InputStrategy::ImageFW: return "ImageFW";
        case InputStrategy::All: return "ALL";
    }
    return "?";
}

inline std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::Top10NN: return "top10nn";
        case Architecture::VggLstm: return "vgg_lstm";
        case Architecture::ResTf: return "res_tf";
    }
    return "?";
}

inline InputStrategy parse_strategy(const std::string& s) {
    const auto l = lowercase(s);
    if (l == "image") return InputStrategy::Image;
    if (l == "imagef") return InputStrategy::ImageF;
    if (l == "imagefw") return InputStrategy::ImageFW;
    if (l == "all") return InputStrategy::All;
    fail(ErrorKind::InvalidArgument, "unknown input strategy '" + s + "'");
}

inline Architecture parse_architecture(const std::string& s) {
    auto l = lowercase(s);
    std::erase_if(l, [](char c) { return c == '_' || c == '-'; });
    if (l == "top10nn") return Architecture::Top10NN;
    if (l == "vgglstm") return Architecture::VggLstm;
    if (l == "restf") return Architecture::ResTf;
    fail(ErrorKind::InvalidArgument, "unknown architecture '" + s + "'");
}

inline bool uses_force(InputStrategy s) { return s != InputStrategy::Image; }
inline bool uses_width(InputStrategy s) { return s == InputStrategy::ImageFW || s == InputStrategy::All; }
inline bool uses_estimates(InputStrategy s) { return s == InputStrategy::All; }

struct ModelConfig {
    Architecture architecture = Architecture::VggLstm;
    InputStrategy strategy = InputStrategy::Image;
    int image_size = 16;
    std::vector<int> encoder_channels{8, 16};
    int embed = 32;
    bool shared_encoder = true;
    int lstm_hidden = 32;
    int tf_dim = 32;
    int tf_heads = 4;
    int tf_depth = 1;
    int tf_ffn = 64;
    int pos_dim = 8;
    bool tf_pre_norm = false;
    std::vector<int> decoder{32};
    std::vector<int> small_decoder{16};  // Top10NN only, after the estimates join
    nn::LossConfig loss{};

    void validate() const {
        auto pos = [](int v) { return v > 0; };
        require(image_size > 0 && embed > 0 && lstm_hidden > 0 && tf_dim > 0 && tf_heads > 0 && tf_ffn > 0 && pos_dim > 0 && tf_depth >= 0,
                ErrorKind::InvalidArgument, "model sizes must be positive");
        require(std::all_of(encoder_channels.begin(), encoder_channels.end(), pos) && std::all_of(decoder.begin(), decoder.end(), pos) &&
                    std::all_of(small_decoder.begin(), small_decoder.end(), pos),
                ErrorKind::InvalidArgument, "layer widths must be positive");
        require(tf_dim % tf_heads == 0, ErrorKind::HeadDivisibility,
                "tf_dim " + std::to_string(tf_dim) + " not divisible by " + std::to_string(tf_heads) + " heads");
        require(image_size >> encoder_channels.size() >= 1, ErrorKind::InvalidArgument, "image_size too small for the encoder depth");
    }
};

/// Model inputs for B grasps. Frames are [B, 3, 3, S, S] (grasp, time, RGB, y, x).
/// Scalars are already normalized: force / 60 N, width / W0, estimates through
/// normalize_young.
struct GraspBatch {
    int size = 0;
    int image_size = 0;
    std::vector<float> frames;
    std::vector<double> force;      // [B, 3]
    std::vector<double> width;      // [B, 3]
    std::vector<double> estimates;  // [B, 2], empty unless strategy ALL
    std::vector<double> targets;    // [B], may be empty at inference
};

/// Per-grasp inputs ready for batching.
struct GraspFeatures {
    std::string grasp_id;
    std::array<TactileFrame, 3> frames;  // resized to the model input size
    std::array<double, 3> force{};
    std::array<double, 3> width{};
    std::optional<std::array<double, 2>> estimates;
    double target = 0;
};

inline GraspFeatures make_features(const GraspRecord& g, double truth_pa, int image_size, const ModulusBounds& b) {
    GraspFeatures f;
    f.grasp_id = g.grasp_id;
    for (int i = 0; i < 3; ++i) f.frames[i] = resize_box(g.frames[i], image_size);
    const auto idx = frame_sample_indices(g.force_n.size());
    for (int i = 0; i < 3; ++i) {
        f.force[i] = g.force_n[idx[i]] / kForceThresholdN;
        f.width[i] = g.width_m[idx[i]] / g.width_m.front();
    }
    if (g.estimates) f.estimates = std::array<double, 2>{normalize_young(g.estimates->e_elastic_pa, b), normalize_young(g.estimates->e_hertz_pa, b)};
    f.target = normalize_young(truth_pa, b);
    return f;
}

/// Packs features into a batch. `frames_override`, when given, replaces the
/// stored frames of item i (used for augmentation).
inline GraspBatch pack_batch(const std::vector<const GraspFeatures*>& items, InputStrategy strategy,
                             const std::vector<std::array<TactileFrame, 3>>* frames_override = nullptr) {
    require(!items.empty(), ErrorKind::InvalidArgument, "empty batch");
    GraspBatch b;
    b.size = static_cast<int>(items.size());
    const int s = items[0]->frames[0].height;
    b.image_size = s;
    const std::size_t plane = static_cast<std::size_t>(s) * s;
    b.frames.resize(items.size() * 3 * 3 * plane);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& fr = frames_override ? (*frames_override)[i] : items[i]->frames;
        for (int t = 0; t < 3; ++t) {
            require(fr[t].height == s && fr[t].width == s, ErrorKind::ShapeMismatch, "frame size differs within batch");
            float* dst = b.frames.data() + (i * 3 + t) * 3 * plane;
            for (std::size_t p = 0; p < plane; ++p)
                for (int c = 0; c < 3; ++c) dst[c * plane + p] = fr[t].pixels[p * 3 + c];
        }
        for (int t = 0; t < 3; ++t) {
            b.force.push_back(items[i]->force[t]);
            b.width.push_back(items[i]->width[t]);
        }
        if (uses_estimates(strategy)) {
            require(items[i]->estimates.has_value(), ErrorKind::StrategyMismatch, "grasp " + items[i]->grasp_id + " has no estimates for strategy ALL");
            b.estimates.push_back((*items[i]->estimates)[0]);
            b.estimates.push_back((*items[i]->estimates)[1]);
        }
        b.targets.push_back(items[i]->target);
    }
    return b;
}

template <typename T>
nn::Tensor<T> to_tensor(std::vector<int> shape, const auto& values) {
    nn::Tensor<T> t(std::move(shape));
    require(t.size() == values.size(), ErrorKind::ShapeMismatch, "tensor payload size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) t[i] = static_cast<T>(values[i]);
    return t;
}

class Model {
public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const ModelConfig& config() const { return cfg_; }

    template <typename T>
    void init(nn::ParamStore<T>& store, std::mt19937_64& rng) const {
        for (const auto& e : encoders()) e.init(store, rng);
        switch (cfg_.architecture) {
            case Architecture::Top10NN:
                for (const auto& d : dense_stack("dec", cfg_.embed * 3 + final_scalar_count(), cfg_.decoder)) d.init(store, rng);
                for (const auto& d : dense_stack("small", decoder_out() + (uses_estimates(cfg_.strategy) ? 2 : 0), cfg_.small_decoder))
                    d.init(store, rng);
                init_output(store, rng, small_out());
                break;
            case Architecture::VggLstm: {
                lstm().init(store, rng);
                for (const auto& d : dense_stack("dec", cfg_.lstm_hidden, cfg_.decoder)) d.init(store, rng);
                init_output(store, rng, decoder_out());
                store.add("agg.logits", nn::Tensor<T>({3}));
                break;
            }
            case Architecture::ResTf: {
                store.add("pos", nn::glorot<T>({3, cfg_.pos_dim}, cfg_.pos_dim, 3, rng));
                token_projection().init(store, rng);
                for (const auto& l : encoder_layers()) l.init(store, rng);
                for (const auto& d : dense_stack("dec", cfg_.tf_dim + sequence_scalar_count(), cfg_.decoder)) d.init(store, rng);
                init_output(store, rng, decoder_out());
                break;
            }
        }
    }

    /// Returns predictions [B, 1]. Throws StrategyMismatch when the batch does
    /// not carry exactly the inputs the strategy needs.
    template <typename T>
    nn::Var<T> forward(nn::Tape<T>& tape, nn::ParamStore<T>& store, const GraspBatch& batch, std::vector<T>* attention = nullptr) const {
        check_batch(batch);
        const int b = batch.size;
        nn::Var<T> emb = embed_frames(tape, store, batch);  // [B*3, E], row b*3 + t
        switch (cfg_.architecture) {
            case Architecture::Top10NN: {
                std::vector<nn::Var<T>> parts{nn::reshape(emb, {b, 3 * cfg_.embed})};
                if (final_scalar_count()) parts.push_back(final_scalars<T>(tape, batch));
                nn::Var<T> x = parts.size() > 1 ? nn::concat_cols(parts) : parts[0];
                x = run_stack(tape, store, dense_stack("dec", cfg_.embed * 3 + final_scalar_count(), cfg_.decoder), x);
                if (uses_estimates(cfg_.strategy)) x = nn::concat_cols<T>({x, tape.constant(to_tensor<T>({b, 2}, batch.estimates))});
                x = run_stack(tape, store, dense_stack("small", decoder_out() + (uses_estimates(cfg_.strategy) ? 2 : 0), cfg_.small_decoder), x);
                return output(small_out())(tape, store, x);
            }
            case Architecture::VggLstm: {
                const auto cell = lstm();
                nn::Var<T> h = tape.constant(nn::Tensor<T>({b, cfg_.lstm_hidden}));
                nn::Var<T> c = h;
                const auto head = dense_stack("dec", cfg_.lstm_hidden, cfg_.decoder);
                std::vector<nn::Var<T>> outs;
                for (int t = 0; t < 3; ++t) {
                    std::vector<int> rows;
                    for (int i = 0; i < b; ++i) rows.push_back(i * 3 + t);
                    nn::Var<T> x = nn::gather_rows(emb, rows);
                    if (step_scalar_count()) x = nn::concat_cols<T>({x, step_scalars<T>(tape, batch, t)});
                    std::tie(h, c) = cell(tape, store, x, h, c);
                    outs.push_back(output(decoder_out())(tape, store, run_stack(tape, store, head, h)));
                }
                return nn::weighted_average(nn::interleave_rows(outs), tape.param(store, "agg.logits"));
            }
            case Architecture::ResTf: {
                nn::Var<T> x = nn::mean_tokens(encode_tokens(tape, store, emb, b, attention), 3);
                if (sequence_scalar_count()) x = nn::concat_cols<T>({x, sequence_scalars<T>(tape, batch)});
                x = run_stack(tape, store, dense_stack("dec", cfg_.tf_dim + sequence_scalar_count(), cfg_.decoder), x);
                return output(decoder_out())(tape, store, x);
            }
        }
        fail(ErrorKind::InvalidArgument, "unknown architecture");
    }

    /// Res-Tf token stack after the encoder layers, [B*3, tf_dim] with row b*3 + t.
    template <typename T>
    nn::Var<T> transformer_tokens(nn::Tape<T>& tape, nn::ParamStore<T>& store, const GraspBatch& batch) const {
        require(cfg_.architecture == Architecture::ResTf, ErrorKind::InvalidArgument, "transformer_tokens needs the res_tf architecture");
        check_batch(batch);
        return encode_tokens<T>(tape, store, embed_frames(tape, store, batch), batch.size, nullptr);
    }

    void check_batch(const GraspBatch& batch) const {
        const auto b = static_cast<std::size_t>(batch.size);
        require(batch.size > 0, ErrorKind::ShapeMismatch, "empty batch");
        require(batch.image_size == cfg_.image_size, ErrorKind::ShapeMismatch,
                "batch image size " + std::to_string(batch.image_size) + " vs model " + std::to_string(cfg_.image_size));
        require(batch.frames.size() == b * 9 * cfg_.image_size * cfg_.image_size, ErrorKind::ShapeMismatch, "frame payload size");
        require(batch.force.size() == 3 * b && batch.width.size() == 3 * b, ErrorKind::ShapeMismatch, "force/width must be [B, 3]");
        if (uses_estimates(cfg_.strategy))
            require(batch.estimates.size() == 2 * b, ErrorKind::StrategyMismatch, "strategy ALL needs estimates [B, 2]");
        else
            require(batch.estimates.empty(), ErrorKind::StrategyMismatch, "strategy " + to_string(cfg_.strategy) + " does not take estimates");
    }

    /// Parameter names that belong to the image encoder(s); used for loading external weights.
    std::vector<std::string> encoder_prefixes() const {
        std::vector<std::string> out;
        for (const auto& e : encoders()) out.push_back(e.name + ".");
        return out;
    }

private:
    ModelConfig cfg_;

    std::vector<nn::ImageEncoder> encoders() const {
        std::vector<nn::ImageEncoder> out;
        const int n = cfg_.shared_encoder ? 1 : 3;
        for (int i = 0; i < n; ++i)
            out.push_back({cfg_.shared_encoder ? "enc" : "enc" + std::to_string(i), 3, cfg_.image_size, cfg_.encoder_channels, cfg_.embed});
        return out;
    }

    static std::vector<nn::Dense> dense_stack(const std::string& name, int in, const std::vector<int>& widths) {
        std::vector<nn::Dense> out;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            out.push_back({name + std::to_string(i), in, widths[i], nn::Activation::Relu});
            in = widths[i];
        }
        return out;
    }

    template <typename T>
    static nn::Var<T> run_stack(nn::Tape<T>& tape, nn::ParamStore<T>& store, const std::vector<nn::Dense>& stack, nn::Var<T> x) {
        for (const auto& d : stack) x = d(tape, store, x);
        return x;
    }

    int decoder_out() const {
        if (!cfg_.decoder.empty()) return cfg_.decoder.back();
        switch (cfg_.architecture) {
            case Architecture::Top10NN: return cfg_.embed * 3 + final_scalar_count();
            case Architecture::VggLstm: return cfg_.lstm_hidden;
            case Architecture::ResTf: return cfg_.tf_dim + sequence_scalar_count();
        }
        return 0;
    }

    int small_out() const { return cfg_.small_decoder.empty() ? decoder_out() + (uses_estimates(cfg_.strategy) ? 2 : 0) : cfg_.small_decoder.back(); }

    static nn::Dense output(int in) { return {"out", in, 1, nn::Activation::Linear}; }

    /// Output layer starts at the middle of the target range.
    template <typename T>
    static void init_output(nn::ParamStore<T>& store, std::mt19937_64& rng, int in) {
        output(in).init(store, rng);
        store.get("out.b").value[0] = T(0.5);
    }

    template <typename T>
    nn::Var<T> encode_tokens(nn::Tape<T>& tape, nn::ParamStore<T>& store, nn::Var<T> emb, int b, std::vector<T>* attention) const {
        nn::Var<T> pos = nn::tile_rows(tape.param(store, "pos"), b);
        nn::Var<T> x = token_projection()(tape, store, nn::concat_cols<T>({emb, pos}));
        for (const auto& l : encoder_layers()) x = l(tape, store, x, 3, attention);
        return x;
    }

    nn::LstmCell lstm() const { return {"lstm", cfg_.embed + step_scalar_count(), cfg_.lstm_hidden}; }

    nn::Dense token_projection() const { return {"tok", cfg_.embed + cfg_.pos_dim, cfg_.tf_dim, nn::Activation::Linear}; }

    std::vector<nn::EncoderLayer> encoder_layers() const {
        std::vector<nn::EncoderLayer> out;
        for (int i = 0; i < cfg_.tf_depth; ++i) out.push_back({"tf" + std::to_string(i), cfg_.tf_dim, cfg_.tf_heads, cfg_.tf_ffn, cfg_.tf_pre_norm});
        return out;
    }

    int final_scalar_count() const { return (uses_force(cfg_.strategy) ? 1 : 0) + (uses_width(cfg_.strategy) ? 1 : 0); }
    int step_scalar_count() const { return final_scalar_count() + (uses_estimates(cfg_.strategy) ? 2 : 0); }
    int sequence_scalar_count() const { return 3 * final_scalar_count() + (uses_estimates(cfg_.strategy) ? 2 : 0); }

    template <typename T>
    nn::Var<T> embed_frames(nn::Tape<T>& tape, nn::ParamStore<T>& store, const GraspBatch& batch) const {
        const int b = batch.size, s = cfg_.image_size;
        if (cfg_.shared_encoder) return encoders()[0](tape, store, tape.constant(to_tensor<T>({b * 3, 3, s, s}, batch.frames)));
        const std::size_t per = static_cast<std::size_t>(3) * s * s;
        std::vector<nn::Var<T>> steps;
        const auto encs = encoders();
        for (int t = 0; t < 3; ++t) {
            nn::Tensor<T> x({b, 3, s, s});
            for (int i = 0; i < b; ++i)
                for (std::size_t p = 0; p < per; ++p) x[i * per + p] = static_cast<T>(batch.frames[(static_cast<std::size_t>(i) * 3 + t) * per + p]);
            steps.push_back(encs[t](tape, store, tape.constant(std::move(x))));
        }
        return nn::interleave_rows(steps);
    }

    template <typename T>
    nn::Var<T> final_scalars(nn::Tape<T>& tape, const GraspBatch& batch) const {
        std::vector<double> v;
        for (int i = 0; i < batch.size; ++i) {
            if (uses_force(cfg_.strategy)) v.push_back(batch.force[i * 3 + 2]);
            if (uses_width(cfg_.strategy)) v.push_back(batch.width[i * 3 + 2]);
        }
        return tape.constant(to_tensor<T>({batch.size, final_scalar_count()}, v));
    }

    template <typename T>
    nn::Var<T> step_scalars(nn::Tape<T>& tape, const GraspBatch& batch, int t) const {
        std::vector<double> v;
        for (int i = 0; i < batch.size; ++i) {
            if (uses_force(cfg_.strategy)) v.push_back(batch.force[i * 3 + t]);
            if (uses_width(cfg_.strategy)) v.push_back(batch.width[i * 3 + t]);
            if (uses_estimates(cfg_.strategy)) {
                v.push_back(batch.estimates[i * 2]);
                v.push_back(batch.estimates[i * 2 + 1]);
            }
        }
        return tape.constant(to_tensor<T>({batch.size, step_scalar_count()}, v));
    }

    template <typename T>
    nn::Var<T> sequence_scalars(nn::Tape<T>& tape, const GraspBatch& batch) const {
        std::vector<double> v;
        for (int i = 0; i < batch.size; ++i) {
            for (int t = 0; t < 3; ++t) {
                if (uses_force(cfg_.strategy)) v.push_back(batch.force[i * 3 + t]);
                if (uses_width(cfg_.strategy)) v.push_back(batch.width[i * 3 + t]);
            }
            if (uses_estimates(cfg_.strategy)) {
                v.push_back(batch.estimates[i * 2]);
                v.push_back(batch.estimates[i * 2 + 1]);
            }
        }
        return tape.constant(to_tensor<T>({batch.size, sequence_scalar_count()}, v));
    }
};

}  // namespace tactile
