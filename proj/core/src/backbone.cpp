#include "pad/backbone.hpp"

#include "pad/errors.hpp"
#include "pad/rng.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pad {

using nlohmann::json;

void VisionBackboneSpec::validate() const {
    if (layer_count < 1) throw DataError("vision spec: layer_count must be >= 1");
    if (token_dim < 1 || embed_dim < 1) throw DataError("vision spec: bad dims");
    if (input_size % patch_size != 0) {
        throw DataError("vision spec: input size " + std::to_string(input_size) +
                        " not divisible by patch size " + std::to_string(patch_size));
    }
    if (token_dim % head_count != 0) {
        throw DataError("vision spec: token_dim not divisible by head_count");
    }
}

void TextBackboneSpec::validate() const {
    if (layer_count < 1) throw DataError("text spec: layer_count must be >= 1");
    if (token_dim < 1 || embed_dim < 1 || max_sequence < 2 || vocab_size < 1) {
        throw DataError("text spec: bad dims");
    }
    if (token_dim % head_count != 0) {
        throw DataError("text spec: token_dim not divisible by head_count");
    }
}

namespace {

Eigen::MatrixXd patchify(const Image& img, int patch) {
    const int gh = img.height / patch;
    const int gw = img.width / patch;
    Eigen::MatrixXd out(gh * gw, 3 * patch * patch);
    for (int gi = 0; gi < gh; ++gi) {
        for (int gj = 0; gj < gw; ++gj) {
            int idx = 0;
            const int row = gi * gw + gj;
            for (int c = 0; c < 3; ++c) {
                for (int pi = 0; pi < patch; ++pi) {
                    for (int pj = 0; pj < patch; ++pj) {
                        out(row, idx++) = img.ch[c](gi * patch + pi, gj * patch + pj);
                    }
                }
            }
        }
    }
    return out;
}

// Visits every tensor in a fixed order shared by checksum, save and load.
template <typename Weights, typename Fn>
void visit_layer(const std::string& prefix, Weights& w, Fn&& fn) {
    fn(prefix + ".ln1.gamma", w.ln1_gamma);
    fn(prefix + ".ln1.beta", w.ln1_beta);
    fn(prefix + ".attn.wq", w.wq);
    fn(prefix + ".attn.bq", w.bq);
    fn(prefix + ".attn.wk", w.wk);
    fn(prefix + ".attn.bk", w.bk);
    fn(prefix + ".attn.wv", w.wv);
    fn(prefix + ".attn.bv", w.bv);
    fn(prefix + ".attn.wo", w.wo);
    fn(prefix + ".attn.bo", w.bo);
    fn(prefix + ".ln2.gamma", w.ln2_gamma);
    fn(prefix + ".ln2.beta", w.ln2_beta);
    fn(prefix + ".mlp.w1", w.w1);
    fn(prefix + ".mlp.b1", w.b1);
    fn(prefix + ".mlp.w2", w.w2);
    fn(prefix + ".mlp.b2", w.b2);
}

template <typename BackboneT, typename Fn>
void visit_tensors(BackboneT& b, Fn&& fn) {
    fn("vision.patch_embed.weight", b.vision.patch_embed_w);
    fn("vision.patch_embed.bias", b.vision.patch_embed_b);
    if (b.vision_spec.class_token) fn("vision.class_token", b.vision.class_token);
    fn("vision.pos_embed", b.vision.pos_embed);
    for (std::size_t i = 0; i < b.vision.layers.size(); ++i) {
        visit_layer("vision.layers." + std::to_string(i), b.vision.layers[i], fn);
    }
    fn("vision.ln_final.gamma", b.vision.ln_final_gamma);
    fn("vision.ln_final.beta", b.vision.ln_final_beta);
    fn("vision.proj", b.vision.proj);

    fn("text.vocab_embed", b.text.vocab_embed);
    fn("text.pos_embed", b.text.pos_embed);
    for (std::size_t i = 0; i < b.text.layers.size(); ++i) {
        visit_layer("text.layers." + std::to_string(i), b.text.layers[i], fn);
    }
    fn("text.ln_final.gamma", b.text.ln_final_gamma);
    fn("text.ln_final.beta", b.text.ln_final_beta);
    fn("text.proj", b.text.proj);
}

} // namespace

ad::Var Backbone::run_layer(ad::Tape& tape, ad::Var x, const detail::LayerWeights& w,
                            int head_count) const {
    auto c = [&](const ad::Parameter& p) { return tape.constant(p.value); };

    ad::Var t = tape.add_rowvec(tape.mul_rowvec(tape.layer_norm_rows(x), c(w.ln1_gamma)),
                                c(w.ln1_beta));
    ad::Var q = tape.add_rowvec(tape.matmul(t, c(w.wq)), c(w.bq));
    ad::Var k = tape.add_rowvec(tape.matmul(t, c(w.wk)), c(w.bk));
    ad::Var v = tape.add_rowvec(tape.matmul(t, c(w.wv)), c(w.bv));

    const int d = q.cols();
    const int dh = d / head_count;
    std::vector<ad::Var> heads;
    heads.reserve(static_cast<std::size_t>(head_count));
    for (int h = 0; h < head_count; ++h) {
        ad::Var qh = tape.cols(q, h * dh, dh);
        ad::Var kh = tape.cols(k, h * dh, dh);
        ad::Var vh = tape.cols(v, h * dh, dh);
        ad::Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), 1.0 / std::sqrt(dh));
        heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    ad::Var o = head_count == 1 ? heads.front() : tape.hcat(heads);
    o = tape.add_rowvec(tape.matmul(o, c(w.wo)), c(w.bo));
    x = tape.add(x, o);

    ad::Var t2 = tape.add_rowvec(tape.mul_rowvec(tape.layer_norm_rows(x), c(w.ln2_gamma)),
                                 c(w.ln2_beta));
    ad::Var hidden = tape.gelu(tape.add_rowvec(tape.matmul(t2, c(w.w1)), c(w.b1)));
    ad::Var m = tape.add_rowvec(tape.matmul(hidden, c(w.w2)), c(w.b2));
    return tape.add(x, m);
}

Backbone::VisionForward Backbone::encode_image_layers(ad::Tape& tape, const Image& image,
                                                      const std::map<int, Hook>& hooks) const {
    if (image.height != vision_spec.input_size || image.width != vision_spec.input_size) {
        throw DataError("encode_image_layers: expected " + std::to_string(vision_spec.input_size) +
                        "x" + std::to_string(vision_spec.input_size) + " input, got " +
                        std::to_string(image.height) + "x" + std::to_string(image.width));
    }
    for (const auto& [idx, hook] : hooks) {
        if (idx < 1 || idx > vision_spec.layer_count) {
            throw DataError("encode_image_layers: hook index " + std::to_string(idx) +
                            " outside 1.." + std::to_string(vision_spec.layer_count));
        }
    }

    auto c = [&](const ad::Parameter& p) { return tape.constant(p.value); };
    const int n = vision_spec.patch_tokens();

    ad::Var x = tape.add_rowvec(
        tape.matmul(tape.constant(patchify(image, vision_spec.patch_size)),
                    c(vision.patch_embed_w)),
        c(vision.patch_embed_b));
    if (vision_spec.class_token) {
        x = tape.vcat({c(vision.class_token), x});
    }
    x = tape.add(x, c(vision.pos_embed));

    VisionForward out;
    out.layer_features.reserve(static_cast<std::size_t>(vision_spec.layer_count));
    for (int i = 1; i <= vision_spec.layer_count; ++i) {
        x = run_layer(tape, x, vision.layers[static_cast<std::size_t>(i - 1)],
                      vision_spec.head_count);
        if (auto it = hooks.find(i); it != hooks.end()) {
            x = it->second(tape, x, i);
        }
        out.layer_features.push_back(
            vision_spec.class_token ? tape.rows(x, 1, n) : tape.rows(x, 0, n));
    }

    ad::Var t = tape.add_rowvec(
        tape.mul_rowvec(tape.layer_norm_rows(x), c(vision.ln_final_gamma)),
        c(vision.ln_final_beta));
    ad::Var pooled;
    if (vision_spec.class_token) {
        pooled = tape.rows(t, 0, 1);
    } else {
        Eigen::MatrixXd avg = Eigen::MatrixXd::Constant(1, n, 1.0 / n);
        pooled = tape.matmul(tape.constant(std::move(avg)), t);
    }
    out.global = tape.matmul(pooled, c(vision.proj));
    return out;
}

ad::Var Backbone::encode_text_with_injections(ad::Tape& tape, ad::Var token_embeddings,
                                              const std::map<int, ad::Var>& injections) const {
    const int s = token_embeddings.rows();
    if (s < 1 || s > text_spec.max_sequence) {
        throw DataError("encode_text: sequence length " + std::to_string(s) + " outside 1.." +
                        std::to_string(text_spec.max_sequence));
    }
    if (token_embeddings.cols() != text_spec.token_dim) {
        throw DataError("encode_text: token dim mismatch");
    }
    for (const auto& [idx, g] : injections) {
        if (idx < 1 || idx > text_spec.layer_count) {
            throw DataError("encode_text: injection layer " + std::to_string(idx) +
                            " outside 1.." + std::to_string(text_spec.layer_count));
        }
        if (g.rows() >= s) {
            throw DataError("encode_text: injection token count must stay below sequence length");
        }
        if (g.cols() != text_spec.token_dim) {
            throw DataError("encode_text: injection token dim mismatch");
        }
    }

    auto c = [&](const ad::Parameter& p) { return tape.constant(p.value); };
    ad::Var x = tape.add(token_embeddings, tape.constant(text.pos_embed.value.topRows(s)));
    for (int i = 1; i <= text_spec.layer_count; ++i) {
        if (auto it = injections.find(i); it != injections.end()) {
            const int j = it->second.rows();
            x = tape.vcat({it->second, tape.rows(x, j, s - j)});
        }
        x = run_layer(tape, x, text.layers[static_cast<std::size_t>(i - 1)],
                      text_spec.head_count);
    }
    ad::Var t = tape.add_rowvec(tape.mul_rowvec(tape.layer_norm_rows(x), c(text.ln_final_gamma)),
                                c(text.ln_final_beta));
    return tape.matmul(tape.rows(t, s - 1, 1), c(text.proj));
}

std::vector<int> Backbone::tokenize(const std::string& text_in) const {
    std::vector<int> ids;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            ids.push_back(static_cast<int>(fnv1a64(word) % static_cast<std::uint64_t>(
                                                              text_spec.vocab_size)));
            word.clear();
        }
    };
    for (char raw : text_in) {
        const unsigned char u = static_cast<unsigned char>(raw);
        if (std::isalnum(u)) {
            word.push_back(static_cast<char>(std::tolower(u)));
        } else {
            flush();
        }
    }
    flush();
    return ids;
}

Eigen::MatrixXd Backbone::embed_tokens(const std::vector<int>& ids) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), text_spec.token_dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= text_spec.vocab_size) {
            throw DataError("embed_tokens: token id out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = text.vocab_embed.value.row(ids[i]);
    }
    return out;
}

std::uint64_t Backbone::weight_checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    visit_tensors(*this, [&](const std::string&, const ad::Parameter& p) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
        const std::size_t n = static_cast<std::size_t>(p.value.size()) * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    });
    return h;
}

namespace {

Eigen::MatrixXd gaussian(Rng& rng, int rows, int cols, double sigma) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = sigma * rng.normal();
        }
    }
    return m;
}

detail::LayerWeights init_layer(Rng& root, const std::string& prefix, int d, int mlp) {
    auto g = [&](const std::string& name, int r, int c, double sigma) {
        Rng rng = root.split(prefix + "." + name);
        return ad::Parameter(prefix + "." + name, gaussian(rng, r, c, sigma));
    };
    detail::LayerWeights w;
    w.ln1_gamma = ad::Parameter(prefix + ".ln1.gamma", Eigen::MatrixXd::Ones(1, d));
    w.ln1_beta = ad::Parameter(prefix + ".ln1.beta", Eigen::MatrixXd::Zero(1, d));
    w.wq = g("attn.wq", d, d, 0.05);
    w.bq = g("attn.bq", 1, d, 0.02);
    w.wk = g("attn.wk", d, d, 0.05);
    w.bk = g("attn.bk", 1, d, 0.02);
    w.wv = g("attn.wv", d, d, 0.05);
    w.bv = g("attn.bv", 1, d, 0.02);
    w.wo = g("attn.wo", d, d, 0.05);
    w.bo = g("attn.bo", 1, d, 0.02);
    w.ln2_gamma = ad::Parameter(prefix + ".ln2.gamma", Eigen::MatrixXd::Ones(1, d));
    w.ln2_beta = ad::Parameter(prefix + ".ln2.beta", Eigen::MatrixXd::Zero(1, d));
    w.w1 = g("mlp.w1", d, mlp, 0.05);
    w.b1 = g("mlp.b1", 1, mlp, 0.02);
    w.w2 = g("mlp.w2", mlp, d, 0.05);
    w.b2 = g("mlp.b2", 1, d, 0.02);
    return w;
}

} // namespace

Backbone make_toy_backbone(const ToyBackboneConfig& cfg) {
    Backbone b;
    b.vision_spec.layer_count = cfg.vision_layers;
    b.vision_spec.token_dim = cfg.token_dim;
    b.vision_spec.input_size = cfg.input_size;
    b.vision_spec.patch_size = cfg.patch_size;
    b.vision_spec.head_count = cfg.vision_heads;
    b.vision_spec.mlp_dim = 2 * cfg.token_dim;
    b.vision_spec.embed_dim = cfg.embed_dim;
    b.vision_spec.class_token = true;
    b.text_spec.layer_count = cfg.text_layers;
    b.text_spec.token_dim = cfg.text_token_dim;
    b.text_spec.max_sequence = cfg.max_sequence;
    b.text_spec.head_count = cfg.text_heads;
    b.text_spec.mlp_dim = 2 * cfg.text_token_dim;
    b.text_spec.embed_dim = cfg.embed_dim;
    b.text_spec.vocab_size = cfg.vocab_size;
    b.vision_spec.validate();
    b.text_spec.validate();
    b.toy = {true, cfg.seed};

    Rng root(cfg.seed);
    auto g = [&](const std::string& name, int r, int c, double sigma) {
        Rng rng = root.split(name);
        return ad::Parameter(name, gaussian(rng, r, c, sigma));
    };

    const int d = cfg.token_dim;
    const int patch_in = 3 * cfg.patch_size * cfg.patch_size;
    b.vision.patch_embed_w = g("vision.patch_embed.weight", patch_in, d, 0.05);
    b.vision.patch_embed_b = g("vision.patch_embed.bias", 1, d, 0.02);
    b.vision.class_token = g("vision.class_token", 1, d, 0.05);
    b.vision.pos_embed = g("vision.pos_embed", b.vision_spec.sequence_length(), d, 0.05);
    for (int i = 0; i < cfg.vision_layers; ++i) {
        b.vision.layers.push_back(
            init_layer(root, "vision.layers." + std::to_string(i), d, b.vision_spec.mlp_dim));
    }
    b.vision.ln_final_gamma = ad::Parameter("vision.ln_final.gamma", Eigen::MatrixXd::Ones(1, d));
    b.vision.ln_final_beta = ad::Parameter("vision.ln_final.beta", Eigen::MatrixXd::Zero(1, d));
    b.vision.proj = g("vision.proj", d, cfg.embed_dim, 0.1);

    const int td = cfg.text_token_dim;
    b.text.vocab_embed = g("text.vocab_embed", cfg.vocab_size, td, 0.05);
    b.text.pos_embed = g("text.pos_embed", cfg.max_sequence, td, 0.05);
    for (int i = 0; i < cfg.text_layers; ++i) {
        b.text.layers.push_back(
            init_layer(root, "text.layers." + std::to_string(i), td, b.text_spec.mlp_dim));
    }
    b.text.ln_final_gamma = ad::Parameter("text.ln_final.gamma", Eigen::MatrixXd::Ones(1, td));
    b.text.ln_final_beta = ad::Parameter("text.ln_final.beta", Eigen::MatrixXd::Zero(1, td));
    b.text.proj = g("text.proj", td, cfg.embed_dim, 0.1);
    return b;
}

Backbone make_toy_backbone(int layers, int token_dim, int embed_dim, std::uint64_t seed) {
    ToyBackboneConfig cfg;
    cfg.vision_layers = layers;
    cfg.text_layers = layers;
    cfg.token_dim = token_dim;
    cfg.text_token_dim = token_dim;
    cfg.embed_dim = embed_dim;
    cfg.seed = seed;
    return make_toy_backbone(cfg);
}

void save_backbone(const Backbone& backbone, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "backbone.bin", std::ios::binary);
    if (!bin) throw DataError("save_backbone: cannot write " + (dir / "backbone.bin").string());

    json tensors = json::array();
    std::uint64_t offset = 0;
    visit_tensors(backbone, [&](const std::string& name, const ad::Parameter& p) {
        tensors.push_back({{"name", name},
                           {"rows", p.value.rows()},
                           {"cols", p.value.cols()},
                           {"offset", offset}});
        // Eigen default storage is column-major; serialize row-major for a
        // layout-independent file format.
        for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
                const double v = p.value(i, j);
                bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
        }
        offset += static_cast<std::uint64_t>(p.value.size()) * sizeof(double);
    });

    json meta;
    meta["format"] = "pad-backbone-v1";
    meta["vision"] = {{"layer_count", backbone.vision_spec.layer_count},
                      {"token_dim", backbone.vision_spec.token_dim},
                      {"input_size", backbone.vision_spec.input_size},
                      {"patch_size", backbone.vision_spec.patch_size},
                      {"head_count", backbone.vision_spec.head_count},
                      {"mlp_dim", backbone.vision_spec.mlp_dim},
                      {"embed_dim", backbone.vision_spec.embed_dim},
                      {"class_token", backbone.vision_spec.class_token}};
    meta["text"] = {{"layer_count", backbone.text_spec.layer_count},
                    {"token_dim", backbone.text_spec.token_dim},
                    {"max_sequence", backbone.text_spec.max_sequence},
                    {"head_count", backbone.text_spec.head_count},
                    {"mlp_dim", backbone.text_spec.mlp_dim},
                    {"embed_dim", backbone.text_spec.embed_dim},
                    {"vocab_size", backbone.text_spec.vocab_size}};
    meta["toy"] = {{"is_toy", backbone.toy.is_toy}, {"seed", backbone.toy.seed}};
    meta["tensors"] = tensors;
    std::ofstream js(dir / "backbone.json");
    if (!js) throw DataError("save_backbone: cannot write " + (dir / "backbone.json").string());
    js << meta.dump(2) << '\n';
}

Backbone load_pretrained(const std::filesystem::path& dir) {
    std::ifstream js(dir / "backbone.json");
    if (!js) throw DataError("load_pretrained: missing " + (dir / "backbone.json").string());
    json meta;
    try {
        js >> meta;
    } catch (const json::exception& e) {
        throw DataError("load_pretrained: corrupt metadata: " + std::string(e.what()));
    }
    if (meta.value("format", "") != "pad-backbone-v1") {
        throw DataError("load_pretrained: unknown checkpoint format");
    }

    Backbone b;
    try {
        const auto& v = meta.at("vision");
        b.vision_spec.layer_count = v.at("layer_count").get<int>();
        b.vision_spec.token_dim = v.at("token_dim").get<int>();
        b.vision_spec.input_size = v.at("input_size").get<int>();
        b.vision_spec.patch_size = v.at("patch_size").get<int>();
        b.vision_spec.head_count = v.at("head_count").get<int>();
        b.vision_spec.mlp_dim = v.at("mlp_dim").get<int>();
        b.vision_spec.embed_dim = v.at("embed_dim").get<int>();
        b.vision_spec.class_token = v.at("class_token").get<bool>();
        const auto& t = meta.at("text");
        b.text_spec.layer_count = t.at("layer_count").get<int>();
        b.text_spec.token_dim = t.at("token_dim").get<int>();
        b.text_spec.max_sequence = t.at("max_sequence").get<int>();
        b.text_spec.head_count = t.at("head_count").get<int>();
        b.text_spec.mlp_dim = t.at("mlp_dim").get<int>();
        b.text_spec.embed_dim = t.at("embed_dim").get<int>();
        b.text_spec.vocab_size = t.at("vocab_size").get<int>();
        if (meta.contains("toy")) {
            b.toy.is_toy = meta.at("toy").value("is_toy", false);
            b.toy.seed = meta.at("toy").value("seed", 0ull);
        }
    } catch (const json::exception& e) {
        throw DataError("load_pretrained: corrupt metadata: " + std::string(e.what()));
    }
    b.vision_spec.validate();
    b.text_spec.validate();
    if (b.vision_spec.embed_dim != b.text_spec.embed_dim) {
        throw DataError("load_pretrained: vision/text embed dims differ");
    }
    b.vision.layers.resize(static_cast<std::size_t>(b.vision_spec.layer_count));
    b.text.layers.resize(static_cast<std::size_t>(b.text_spec.layer_count));

    std::map<std::string, std::pair<std::pair<Eigen::Index, Eigen::Index>, std::uint64_t>> index;
    for (const auto& t : meta.at("tensors")) {
        index[t.at("name").get<std::string>()] = {
            {t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>()},
            t.at("offset").get<std::uint64_t>()};
    }

    std::ifstream bin(dir / "backbone.bin", std::ios::binary);
    if (!bin) throw DataError("load_pretrained: missing " + (dir / "backbone.bin").string());

    visit_tensors(b, [&](const std::string& name, ad::Parameter& p) {
        auto it = index.find(name);
        if (it == index.end()) {
            throw DataError("load_pretrained: checkpoint missing tensor " + name);
        }
        const auto [shape, offset] = it->second;
        Eigen::MatrixXd value(shape.first, shape.second);
        bin.seekg(static_cast<std::streamoff>(offset));
        for (Eigen::Index i = 0; i < value.rows(); ++i) {
            for (Eigen::Index j = 0; j < value.cols(); ++j) {
                double v = 0.0;
                bin.read(reinterpret_cast<char*>(&v), sizeof(double));
                value(i, j) = v;
            }
        }
        if (!bin) throw DataError("load_pretrained: truncated weight blob at " + name);
        p = ad::Parameter(name, std::move(value));
    });

    // Shape cross-checks against the declared specs.
    auto expect = [&](const ad::Parameter& p, Eigen::Index r, Eigen::Index c) {
        if (p.value.rows() != r || p.value.cols() != c) {
            throw DataError("load_pretrained: tensor " + p.name + " has shape " +
                            std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()) +
                            ", expected " + std::to_string(r) + "x" + std::to_string(c));
        }
    };
    expect(b.vision.patch_embed_w, 3 * b.vision_spec.patch_size * b.vision_spec.patch_size,
           b.vision_spec.token_dim);
    expect(b.vision.pos_embed, b.vision_spec.sequence_length(), b.vision_spec.token_dim);
    expect(b.vision.proj, b.vision_spec.token_dim, b.vision_spec.embed_dim);
    expect(b.text.vocab_embed, b.text_spec.vocab_size, b.text_spec.token_dim);
    expect(b.text.pos_embed, b.text_spec.max_sequence, b.text_spec.token_dim);
    expect(b.text.proj, b.text_spec.token_dim, b.text_spec.embed_dim);
    for (const auto& lw : b.vision.layers) {
        expect(lw.wq, b.vision_spec.token_dim, b.vision_spec.token_dim);
        expect(lw.w1, b.vision_spec.token_dim, b.vision_spec.mlp_dim);
    }
    for (const auto& lw : b.text.layers) {
        expect(lw.wq, b.text_spec.token_dim, b.text_spec.token_dim);
        expect(lw.w1, b.text_spec.token_dim, b.text_spec.mlp_dim);
    }
    return b;
}

} // namespace pad
