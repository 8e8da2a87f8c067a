#include "gluscope/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gluscope/errors.hpp"

namespace gluscope {

namespace {

constexpr double kRopeTheta = 10000.0;
const std::string kTransposedKey = "gluscope.transposed";

std::set<std::string> parse_name_list(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

class TensorReader {
public:
    TensorReader(const TensorArchive& ar) : ar_(ar) {
        auto it = ar.metadata().find(kTransposedKey);
        if (it != ar.metadata().end()) transposed_ = parse_name_list(it->second);
    }

    Matrix matrix(const std::string& name, std::size_t rows, std::size_t cols) const {
        if (!ar_.contains(name)) throw LoadError("missing tensor '" + name + "'");
        const bool flipped = transposed_.count(name) != 0;
        const std::vector<std::size_t> want = flipped ? std::vector{cols, rows} : std::vector{rows, cols};
        check_shape(name, want);
        Matrix m(want[0], want[1]);
        m.data() = finite_values(name);
        return flipped ? m.transposed() : m;
    }

    Vector vector(const std::string& name, std::size_t n) const {
        if (!ar_.contains(name)) throw LoadError("missing tensor '" + name + "'");
        check_shape(name, {n});
        return finite_values(name);
    }

private:
    void check_shape(const std::string& name, const std::vector<std::size_t>& want) const {
        const auto& got = ar_.entry(name).shape;
        if (got != want) {
            throw LoadError("tensor '" + name + "': shape " + shape_str(got) + ", expected " + shape_str(want));
        }
    }

    std::vector<double> finite_values(const std::string& name) const {
        auto v = ar_.values(name);
        for (double x : v) {
            if (!std::isfinite(x)) throw LoadError("tensor '" + name + "': non-finite entry");
        }
        return v;
    }

    const TensorArchive& ar_;
    std::set<std::string> transposed_;
};

std::size_t parse_count(const std::map<std::string, std::string>& md, const std::string& key) {
    auto it = md.find(key);
    if (it == md.end()) throw LoadError("archive metadata lacks '" + key + "'");
    std::size_t v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw LoadError("archive metadata '" + key + "' is not a count");
    return v;
}

void apply_rope(std::span<double> v, std::size_t n_heads, std::size_t pos) {
    const std::size_t head_dim = v.size() / n_heads;
    for (std::size_t h = 0; h < n_heads; ++h) {
        double* x = v.data() + h * head_dim;
        for (std::size_t i = 0; 2 * i + 1 < head_dim; ++i) {
            const double freq = std::pow(kRopeTheta, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
            const double angle = static_cast<double>(pos) * freq;
            const double c = std::cos(angle), s = std::sin(angle);
            const double a = x[2 * i], b = x[2 * i + 1];
            x[2 * i] = a * c - b * s;
            x[2 * i + 1] = a * s + b * c;
        }
    }
}

// Causal multi-head attention over all positions of `h` (positions x d_model).
Matrix attention(const LayerWeights& lw, const Matrix& h, std::size_t n_heads) {
    const std::size_t n = h.rows(), d = h.cols(), head_dim = d / n_heads;
    Matrix q(n, d), k(n, d), v(n, d);
    for (std::size_t p = 0; p < n; ++p) {
        auto qp = matvec(lw.attn_q, h.row(p));
        auto kp = matvec(lw.attn_k, h.row(p));
        auto vp = matvec(lw.attn_v, h.row(p));
        apply_rope(qp, n_heads, p);
        apply_rope(kp, n_heads, p);
        std::copy(qp.begin(), qp.end(), q.row(p).begin());
        std::copy(kp.begin(), kp.end(), k.row(p).begin());
        std::copy(vp.begin(), vp.end(), v.row(p).begin());
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Matrix out(n, d);
    std::vector<double> scores(n);
    Vector mixed(d);
    for (std::size_t p = 0; p < n; ++p) {
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (std::size_t hd = 0; hd < n_heads; ++hd) {
            const std::size_t base = hd * head_dim;
            double max_score = -INFINITY;
            for (std::size_t s = 0; s <= p; ++s) {
                double acc = 0.0;
                for (std::size_t j = 0; j < head_dim; ++j) acc += q(p, base + j) * k(s, base + j);
                scores[s] = acc * scale;
                max_score = std::max(max_score, scores[s]);
            }
            double denom = 0.0;
            for (std::size_t s = 0; s <= p; ++s) {
                scores[s] = std::exp(scores[s] - max_score);
                denom += scores[s];
            }
            for (std::size_t s = 0; s <= p; ++s) {
                const double w = scores[s] / denom;
                for (std::size_t j = 0; j < head_dim; ++j) mixed[base + j] += w * v(s, base + j);
            }
        }
        auto o = matvec(lw.attn_o, mixed);
        std::copy(o.begin(), o.end(), out.row(p).begin());
    }
    return out;
}

void run_decoder(const WeightSet& ws, const TokenizedDoc& doc, const ActivationSink* sink, Matrix* logits) {
    const auto& cfg = ws.config;
    if (doc.tokens.empty()) throw InputError("doc " + std::to_string(doc.doc_id) + ": no tokens");
    for (std::size_t p = 0; p < doc.tokens.size(); ++p) {
        if (doc.tokens[p] >= cfg.vocab_size) {
            throw InputError("doc " + std::to_string(doc.doc_id) + " position " + std::to_string(p) + ": token id " +
                             std::to_string(doc.tokens[p]) + " >= vocab size " + std::to_string(cfg.vocab_size));
        }
    }

    const std::size_t n = doc.tokens.size();
    Matrix resid(n, cfg.d_model);
    for (std::size_t p = 0; p < n; ++p) {
        auto e = ws.embed.row(doc.tokens[p]);
        std::copy(e.begin(), e.end(), resid.row(p).begin());
    }

    for (std::size_t l = 0; l < ws.layers.size(); ++l) {
        const auto& lw = ws.layers[l];
        Matrix normed(n, cfg.d_model);
        for (std::size_t p = 0; p < n; ++p) {
            auto h = rms_norm(resid.row(p), lw.norm1_gain, cfg.norm_eps);
            std::copy(h.begin(), h.end(), normed.row(p).begin());
        }
        Matrix attn = attention(lw, normed, cfg.n_heads);
        for (std::size_t i = 0; i < resid.data().size(); ++i) resid.data()[i] += attn.data()[i];

        ActivationBatch batch;
        batch.doc_id = doc.doc_id;
        batch.first_position = 0;
        batch.n_positions = n;
        batch.layer = l;
        batch.d_mlp = cfg.d_mlp;
        batch.pairs.resize(n * cfg.d_mlp * 2);
        for (std::size_t p = 0; p < n; ++p) {
            auto h = rms_norm(resid.row(p), lw.norm2_gain, cfg.norm_eps);
            auto mlp = mlp_forward(lw, h, cfg.activation);
            for (std::size_t j = 0; j < cfg.d_model; ++j) resid(p, j) += mlp.out[j];
            for (std::size_t m = 0; m < cfg.d_mlp; ++m) {
                batch.pairs[(p * cfg.d_mlp + m) * 2] = static_cast<float>(mlp.gate_pre[m]);
                batch.pairs[(p * cfg.d_mlp + m) * 2 + 1] = static_cast<float>(mlp.in_pre[m]);
            }
        }
        if (sink) (*sink)(batch);
    }

    if (logits) {
        *logits = Matrix(n, cfg.vocab_size);
        for (std::size_t p = 0; p < n; ++p) {
            auto h = rms_norm(resid.row(p), ws.final_norm_gain, cfg.norm_eps);
            auto row = matvec(ws.unembed, h);
            std::copy(row.begin(), row.end(), logits->row(p).begin());
        }
    }
}

} // namespace

void ModelConfig::validate() const {
    if (n_layers < 1 || d_model < 1 || d_mlp < 1 || n_heads < 1 || vocab_size < 1) {
        throw ConfigError("model config: all counts must be >= 1");
    }
    if (d_model % n_heads != 0) throw ConfigError("model config: d_model must be divisible by n_heads");
    if (!(norm_eps >= 0.0) || !std::isfinite(norm_eps)) throw ConfigError("model config: norm_eps must be >= 0");
}

std::string tensor_names::block(std::size_t layer, const std::string& suffix) {
    return "blocks." + std::to_string(layer) + "." + suffix;
}

void write_model_config(TensorArchive& archive, const ModelConfig& c) {
    auto& md = archive.metadata();
    md["gluscope.n_layers"] = std::to_string(c.n_layers);
    md["gluscope.d_model"] = std::to_string(c.d_model);
    md["gluscope.d_mlp"] = std::to_string(c.d_mlp);
    md["gluscope.n_heads"] = std::to_string(c.n_heads);
    md["gluscope.vocab_size"] = std::to_string(c.vocab_size);
    md["gluscope.activation"] = std::string(to_string(c.activation));
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), c.norm_eps);
    md["gluscope.norm_eps"] = std::string(buf, p);
}

ModelConfig read_model_config(const TensorArchive& archive) {
    const auto& md = archive.metadata();
    ModelConfig c;
    c.n_layers = parse_count(md, "gluscope.n_layers");
    c.d_model = parse_count(md, "gluscope.d_model");
    c.d_mlp = parse_count(md, "gluscope.d_mlp");
    c.n_heads = parse_count(md, "gluscope.n_heads");
    c.vocab_size = parse_count(md, "gluscope.vocab_size");
    auto act = md.find("gluscope.activation");
    if (act == md.end()) throw LoadError("archive metadata lacks 'gluscope.activation'");
    auto kind = parse_activation_kind(act->second);
    if (!kind) throw LoadError("archive metadata: unknown activation '" + act->second + "'");
    c.activation = *kind;
    auto eps = md.find("gluscope.norm_eps");
    if (eps != md.end()) {
        const auto& s = eps->second;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), c.norm_eps);
        if (ec != std::errc{}) throw LoadError("archive metadata: bad norm_eps");
    }
    c.validate();
    return c;
}

WeightSet load_weights(const TensorArchive& archive, const ModelConfig& config) {
    config.validate();
    namespace tn = tensor_names;
    TensorReader rd(archive);
    const std::size_t d = config.d_model, m = config.d_mlp;
    WeightSet ws;
    ws.config = config;
    ws.embed = rd.matrix(tn::kEmbed, config.vocab_size, d);
    ws.unembed = rd.matrix(tn::kUnembed, config.vocab_size, d);
    ws.final_norm_gain = rd.vector(tn::kFinalNorm, d);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerWeights lw;
        lw.attn_q = rd.matrix(tn::block(l, "attn.Q"), d, d);
        lw.attn_k = rd.matrix(tn::block(l, "attn.K"), d, d);
        lw.attn_v = rd.matrix(tn::block(l, "attn.V"), d, d);
        lw.attn_o = rd.matrix(tn::block(l, "attn.O"), d, d);
        lw.norm1_gain = rd.vector(tn::block(l, "norm1.gain"), d);
        lw.norm2_gain = rd.vector(tn::block(l, "norm2.gain"), d);
        lw.w_gate = rd.matrix(tn::block(l, "mlp.W_gate"), m, d);
        lw.w_in = rd.matrix(tn::block(l, "mlp.W_in"), m, d);
        lw.w_out = rd.matrix(tn::block(l, "mlp.W_out"), d, m);
        ws.layers.push_back(std::move(lw));
    }
    return ws;
}

TensorArchive to_archive(const WeightSet& ws, DType dtype, const std::set<std::string>& store_transposed) {
    namespace tn = tensor_names;
    TensorArchive ar;
    write_model_config(ar, ws.config);
    auto put_matrix = [&](const std::string& name, const Matrix& mtx) {
        if (store_transposed.count(name)) {
            Matrix t = mtx.transposed();
            ar.put(name, {t.rows(), t.cols()}, t.data(), dtype);
        } else {
            ar.put(name, {mtx.rows(), mtx.cols()}, mtx.data(), dtype);
        }
    };
    auto put_vector = [&](const std::string& name, const Vector& v) { ar.put(name, {v.size()}, v, dtype); };

    put_matrix(tn::kEmbed, ws.embed);
    put_matrix(tn::kUnembed, ws.unembed);
    put_vector(tn::kFinalNorm, ws.final_norm_gain);
    for (std::size_t l = 0; l < ws.layers.size(); ++l) {
        const auto& lw = ws.layers[l];
        put_matrix(tn::block(l, "attn.Q"), lw.attn_q);
        put_matrix(tn::block(l, "attn.K"), lw.attn_k);
        put_matrix(tn::block(l, "attn.V"), lw.attn_v);
        put_matrix(tn::block(l, "attn.O"), lw.attn_o);
        put_vector(tn::block(l, "norm1.gain"), lw.norm1_gain);
        put_vector(tn::block(l, "norm2.gain"), lw.norm2_gain);
        put_matrix(tn::block(l, "mlp.W_gate"), lw.w_gate);
        put_matrix(tn::block(l, "mlp.W_in"), lw.w_in);
        put_matrix(tn::block(l, "mlp.W_out"), lw.w_out);
    }
    if (!store_transposed.empty()) {
        std::string list;
        for (const auto& n : store_transposed) list += (list.empty() ? "" : ",") + n;
        ar.metadata()[kTransposedKey] = list;
    }
    return ar;
}

WeightSet load_model(const std::string& path) {
    auto ar = TensorArchive::load(path);
    return preprocess_weights(load_weights(ar, read_model_config(ar)));
}

WeightSet preprocess_weights(WeightSet ws) {
    for (auto& lw : ws.layers) {
        const auto& g = lw.norm2_gain;
        for (std::size_t n = 0; n < lw.w_gate.rows(); ++n) {
            for (std::size_t j = 0; j < g.size(); ++j) {
                lw.w_gate(n, j) *= g[j];
                lw.w_in(n, j) *= g[j];
            }
        }
        std::fill(lw.norm2_gain.begin(), lw.norm2_gain.end(), 1.0);
    }
    return ws;
}

Vector rms_norm(std::span<const double> x, std::span<const double> gain, double eps) {
    if (x.size() != gain.size()) throw ContractError("rms_norm: gain length mismatch");
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + eps);
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
    return out;
}

MlpOutput mlp_forward(const LayerWeights& layer, std::span<const double> x, ActivationKind kind) {
    const std::size_t d_mlp = layer.w_gate.rows();
    if (layer.w_in.rows() != d_mlp || layer.w_out.cols() != d_mlp || layer.w_gate.cols() != x.size() ||
        layer.w_in.cols() != x.size() || layer.w_out.rows() != x.size()) {
        throw ContractError("mlp_forward: inconsistent shapes");
    }
    MlpOutput r;
    r.gate_pre = matvec(layer.w_gate, x);
    r.in_pre = matvec(layer.w_in, x);
    Vector hidden(d_mlp);
    for (std::size_t n = 0; n < d_mlp; ++n) hidden[n] = gate_fn(kind, r.gate_pre[n]) * r.in_pre[n];
    r.out = matvec(layer.w_out, hidden);
    return r;
}

void forward_collect(const WeightSet& ws, const TokenizedDoc& doc, const ActivationSink& sink) {
    run_decoder(ws, doc, &sink, nullptr);
}

DocActivations collect_doc(const WeightSet& ws, const TokenizedDoc& doc) {
    const auto& cfg = ws.config;
    DocActivations acts(doc.doc_id, static_cast<std::uint32_t>(doc.tokens.size()),
                        static_cast<std::uint32_t>(cfg.n_layers), static_cast<std::uint32_t>(cfg.d_mlp));
    ActivationSink sink = [&](const ActivationBatch& b) {
        for (std::size_t p = 0; p < b.n_positions; ++p) {
            for (std::size_t m = 0; m < b.d_mlp; ++m) {
                const std::size_t src = (p * b.d_mlp + m) * 2;
                acts.set(b.first_position + p, b.layer, m, b.pairs[src], b.pairs[src + 1]);
            }
        }
    };
    run_decoder(ws, doc, &sink, nullptr);
    return acts;
}

Matrix forward_logits(const WeightSet& ws, const TokenizedDoc& doc) {
    Matrix logits;
    run_decoder(ws, doc, nullptr, &logits);
    return logits;
}

} // namespace gluscope
