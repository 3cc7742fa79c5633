#include "evolt/nn.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "evolt/errors.hpp"
#include "evolt/json_io.hpp"
#include "evolt/kernels.hpp"
#include "evolt/rng.hpp"

namespace evolt::nn {

void MlpSpec::validate() const {
    if (input_dim < 1) throw ConfigError("mlp input_dim must be >= 1");
    if (output_dim != 1) throw ConfigError("mlp output_dim must be 1");
    if (hidden_layers > 0 && neurons < 1)
        throw ConfigError("mlp neurons must be >= 1 when hidden layers are present");
}

std::vector<std::size_t> MlpSpec::dims() const {
    std::vector<std::size_t> d;
    d.reserve(hidden_layers + 2);
    d.push_back(input_dim);
    for (std::size_t i = 0; i < hidden_layers; ++i) d.push_back(neurons);
    d.push_back(output_dim);
    return d;
}

std::size_t param_count(const MlpSpec& spec) {
    spec.validate();
    const auto d = spec.dims();
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) total += d[l] * d[l + 1] + d[l + 1];
    return total;
}

namespace {

std::size_t layer_offset(const std::vector<std::size_t>& dims, std::size_t layer) {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += dims[l] * dims[l + 1] + dims[l + 1];
    return off;
}

}  // namespace

MlpModel::LayerView MlpModel::layer(std::size_t i) const {
    const auto d = spec.dims();
    const std::size_t off = layer_offset(d, i);
    return {params.data() + off, params.data() + off + d[i] * d[i + 1], d[i], d[i + 1]};
}

MlpModel::MutLayerView MlpModel::layer_mut(std::size_t i) {
    const auto d = spec.dims();
    const std::size_t off = layer_offset(d, i);
    return {params.data() + off, params.data() + off + d[i] * d[i + 1], d[i], d[i + 1]};
}

MlpModel init_model(const MlpSpec& spec, std::uint64_t seed, bool zero_output_layer) {
    spec.validate();
    MlpModel m;
    m.spec = spec;
    m.seed = seed;
    m.params.assign(param_count(spec), 0.0);

    std::mt19937_64 gen(rng::splitmix64(seed));
    const std::size_t layers = m.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        auto view = m.layer_mut(l);
        if (zero_output_layer && l == layers - 1) break;  // stays zero
        const double limit = std::sqrt(6.0 / static_cast<double>(view.in));
        for (std::size_t i = 0; i < view.in * view.out; ++i)
            view.w[i] = rng::uniform(gen, -limit, limit);
        // biases stay zero
    }
    return m;
}

namespace {

void ensure_workspace(const MlpModel& model, Workspace& ws) {
    const auto d = model.spec.dims();
    const std::size_t layers = model.layer_count();
    ws.act.resize(layers);  // act[l] holds the input of layer l
    ws.pre.resize(model.spec.hidden_layers);
    for (std::size_t l = 0; l < layers; ++l) ws.act[l].resize(d[l]);
    for (std::size_t l = 0; l < model.spec.hidden_layers; ++l) ws.pre[l].resize(d[l + 1]);
    std::size_t widest = 1;
    for (std::size_t v : d) widest = std::max(widest, v);
    ws.delta_a.resize(widest);
    ws.delta_b.resize(widest);
}

// Forward pass with stored pre-activations; assumes the workspace is sized.
double forward_stored(const MlpModel& model, const double* row, Workspace& ws) {
    const auto& k = kernels::active();
    std::copy(row, row + model.spec.input_dim, ws.act[0].begin());
    for (std::size_t l = 0; l < model.spec.hidden_layers; ++l) {
        const auto view = model.layer(l);
        k.matvec(view.w, ws.act[l].data(), view.b, ws.pre[l].data(), view.out, view.in);
        k.relu(ws.pre[l].data(), ws.act[l + 1].data(), view.out);
    }
    const auto out = model.layer(model.layer_count() - 1);
    return k.dot(out.w, ws.act[model.spec.hidden_layers].data(), out.in) + out.b[0];
}

// Accumulates the gradient contribution of one sample with output delta
// d_out into grad; the workspace must hold that sample's forward state.
void backward_sample(const MlpModel& model, double d_out, std::vector<double>& grad,
                     Workspace& ws) {
    const auto& k = kernels::active();
    const auto dims = model.spec.dims();
    const std::size_t last = model.layer_count() - 1;

    {
        const auto view = model.layer(last);
        const std::size_t off = layer_offset(dims, last);
        k.axpy(d_out, ws.act[last].data(), grad.data() + off, view.in);
        grad[off + view.in * view.out] += d_out;  // single output bias
    }
    if (model.spec.hidden_layers == 0) return;

    double* d = ws.delta_a.data();
    double* d_next = ws.delta_b.data();
    {
        const auto view = model.layer(last);
        for (std::size_t c = 0; c < view.in; ++c) d[c] = d_out * view.w[c];
        k.relu_backward(ws.pre[last - 1].data(), d, view.in);
    }
    for (std::size_t l = last; l-- > 0;) {
        const auto view = model.layer(l);
        const std::size_t off = layer_offset(dims, l);
        k.ger_acc(1.0, d, ws.act[l].data(), grad.data() + off, view.out, view.in);
        k.axpy(1.0, d, grad.data() + off + view.in * view.out, view.out);
        if (l > 0) {
            k.matvec_t(view.w, d, d_next, view.out, view.in);
            k.relu_backward(ws.pre[l - 1].data(), d_next, view.in);
            std::swap(d, d_next);
        }
    }
}

// One batch over the given row indices: accumulates the mean-loss gradient
// into grad (which must be zeroed) and returns the summed squared error.
double batch_pass(const MlpModel& model, const double* x, const double* y,
                  const std::size_t* idx, std::size_t bn, std::vector<double>& grad,
                  Workspace& ws) {
    const std::size_t dim = model.spec.input_dim;
    double sq_sum = 0.0;
    for (std::size_t b = 0; b < bn; ++b) {
        const std::size_t r = idx[b];
        const double f = forward_stored(model, x + r * dim, ws);
        if (!std::isfinite(f))
            throw TrainingError("non-finite activation in forward pass (batch row " +
                                std::to_string(b) + ")");
        const double err = f - y[r];
        sq_sum += err * err;
        backward_sample(model, 2.0 * err / static_cast<double>(bn), grad, ws);
    }
    return sq_sum;
}

}  // namespace

double forward(const MlpModel& model, std::span<const double> row, Workspace& ws) {
    if (row.size() != model.spec.input_dim)
        throw InvalidInput("forward: row has " + std::to_string(row.size()) +
                           " features, model expects " + std::to_string(model.spec.input_dim));
    ensure_workspace(model, ws);
    return forward_stored(model, row.data(), ws);
}

double forward(const MlpModel& model, std::span<const double> row) {
    Workspace ws;
    return forward(model, row, ws);
}

double loss_mse(std::span<const double> preds, std::span<const double> targets) {
    if (preds.empty()) throw InvalidInput("loss_mse: empty input");
    if (preds.size() != targets.size()) throw InvalidInput("loss_mse: length mismatch");
    const double sq = kernels::active().sq_err_sum(preds.data(), targets.data(), preds.size());
    return sq / static_cast<double>(preds.size());
}

std::vector<double> backward(const MlpModel& model, const double* x, const double* y,
                             std::size_t n) {
    if (n == 0) throw InvalidInput("backward: empty batch");
    Workspace ws;
    ensure_workspace(model, ws);
    std::vector<double> grad(model.params.size(), 0.0);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    batch_pass(model, x, y, idx.data(), n, grad, ws);
    return grad;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train learning_rate must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
        throw ConfigError("train holdout_fraction must be in [0, 1)");
    if (!(early_stop_rel_improvement >= 0.0))
        throw ConfigError("train early_stop_rel_improvement must be >= 0");
}

TrainResult train(const MlpModel& init, const double* x, const double* y,
                  std::size_t n_rows, const TrainConfig& cfg) {
    cfg.validate();
    if (n_rows == 0) throw InvalidInput("train: empty dataset");

    TrainResult out;
    out.model = init;
    if (cfg.epochs == 0) return out;

    MlpModel& model = out.model;
    const std::size_t dim = model.spec.input_dim;
    const std::size_t n_holdout =
        cfg.holdout_fraction > 0.0
            ? std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::llround(cfg.holdout_fraction *
                                                        static_cast<double>(n_rows))))
            : 0;
    if (n_holdout >= n_rows) throw ConfigError("train: holdout leaves no training rows");
    const std::size_t n_train = n_rows - n_holdout;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(rng::splitmix64(cfg.seed ^ 0x5eedf00dULL));

    const auto& k = kernels::active();
    Workspace ws;
    ensure_workspace(model, ws);
    std::vector<double> grad(model.params.size(), 0.0);
    std::vector<double> adam_m, adam_v;
    double beta1_t = 1.0, beta2_t = 1.0;
    if (cfg.optimizer == TrainConfig::Optimizer::adam) {
        adam_m.assign(model.params.size(), 0.0);
        adam_v.assign(model.params.size(), 0.0);
    }

    double best = std::numeric_limits<double>::infinity();
    std::size_t wait = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) rng::shuffle(order, gen);

        double epoch_sq = 0.0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t bn = std::min(cfg.batch_size, n_train - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            try {
                epoch_sq += batch_pass(model, x, y, order.data() + start, bn, grad, ws);
            } catch (const TrainingError& e) {
                throw TrainingError(e.what(), epoch);
            }
            if (cfg.optimizer == TrainConfig::Optimizer::adam) {
                beta1_t *= cfg.beta1;
                beta2_t *= cfg.beta2;
                k.adam_step(model.params.data(), grad.data(), adam_m.data(), adam_v.data(),
                            model.params.size(), cfg.learning_rate, cfg.beta1, cfg.beta2,
                            cfg.eps, 1.0 / (1.0 - beta1_t), 1.0 / (1.0 - beta2_t));
            } else {
                k.axpy(-cfg.learning_rate, grad.data(), model.params.data(),
                       model.params.size());
            }
        }

        const double train_loss = epoch_sq / static_cast<double>(n_train);
        out.loss_history.push_back(train_loss);
        if (!std::isfinite(train_loss))
            throw TrainingError("training diverged (non-finite loss)", epoch);
        for (double p : model.params) {
            if (!std::isfinite(p))
                throw TrainingError("training diverged (non-finite parameter)", epoch);
        }

        double monitored = train_loss;
        if (n_holdout > 0) {
            double sq = 0.0;
            for (std::size_t r = n_train; r < n_rows; ++r) {
                const double f = forward_stored(model, x + r * dim, ws);
                const double err = f - y[r];
                sq += err * err;
            }
            monitored = sq / static_cast<double>(n_holdout);
            if (!std::isfinite(monitored))
                throw TrainingError("training diverged (non-finite holdout loss)", epoch);
        }

        if (cfg.early_stop_patience > 0) {
            if (monitored < best * (1.0 - cfg.early_stop_rel_improvement)) {
                best = monitored;
                wait = 0;
            } else if (++wait >= cfg.early_stop_patience) {
                break;
            }
            best = std::min(best, monitored);
        }
    }
    return out;
}

double predict_pinn(const MlpModel& model, std::span<const double> row, double v_phy) {
    if (model.spec.input_dim != features::kPinnDim)
        throw InvalidInput("predict_pinn: model input_dim is not the PINN feature width");
    if (!std::isfinite(v_phy)) throw InvalidInput("predict_pinn: non-finite v_phy");
    return v_phy + forward(model, row);
}

void save_model(const ModelFile& mf, const std::filesystem::path& path) {
    using jsonio::json;
    const auto dims = mf.model.spec.dims();
    json layers = json::array();
    for (std::size_t l = 0; l < mf.model.layer_count(); ++l) {
        const auto view = mf.model.layer(l);
        json w = json::array();
        for (std::size_t r = 0; r < view.out; ++r) {
            w.push_back(std::vector<double>(view.w + r * view.in, view.w + (r + 1) * view.in));
        }
        layers.push_back(json{
            {"w", std::move(w)},
            {"b", std::vector<double>(view.b, view.b + view.out)},
        });
    }
    json doc{
        {"format", "evolt-model-v1"},
        {"mode", features::mode_name(mf.mode)},
        {"spec",
         {{"input_dim", mf.model.spec.input_dim},
          {"hidden_layers", mf.model.spec.hidden_layers},
          {"neurons", mf.model.spec.neurons},
          {"output_dim", mf.model.spec.output_dim}}},
        {"seed", mf.model.seed},
        {"normalizer", jsonio::to_json(mf.normalizer)},
        {"layers", std::move(layers)},
    };
    if (mf.ecm_params) doc["ecm"] = jsonio::to_json(*mf.ecm_params);

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file: " + path.string());
    out << doc.dump(2) << "\n";
}

ModelFile load_model(const std::filesystem::path& path) {
    using jsonio::json;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError("model file " + path.string() + ": " + e.what());
    }
    jsonio::check_keys(doc, {"format", "mode", "spec", "seed", "normalizer", "layers", "ecm"},
                       "model");
    if (jsonio::get_str(doc, "format", "model") != "evolt-model-v1")
        throw ConfigError("model file " + path.string() + ": unknown format");

    ModelFile mf;
    mf.mode = features::parse_mode(jsonio::get_str(doc, "mode", "model"));
    const json& spec = jsonio::require(doc, "spec", "model");
    jsonio::check_keys(spec, {"input_dim", "hidden_layers", "neurons", "output_dim"},
                       "model.spec");
    mf.model.spec.input_dim = static_cast<std::size_t>(jsonio::get_int(spec, "input_dim", "model.spec"));
    mf.model.spec.hidden_layers =
        static_cast<std::size_t>(jsonio::get_int(spec, "hidden_layers", "model.spec"));
    mf.model.spec.neurons = static_cast<std::size_t>(jsonio::get_int(spec, "neurons", "model.spec"));
    mf.model.spec.output_dim =
        static_cast<std::size_t>(jsonio::get_int(spec, "output_dim", "model.spec"));
    mf.model.spec.validate();
    if (mf.model.spec.input_dim != features::input_dim(mf.mode))
        throw ConfigError("model file: input_dim does not match mode");
    mf.model.seed = jsonio::get_u64_or(doc, "seed", "model", 0);

    mf.normalizer = jsonio::normalizer_from_json(jsonio::require(doc, "normalizer", "model"),
                                                 "model.normalizer");
    if (mf.normalizer.dim() != mf.model.spec.input_dim)
        throw ConfigError("model file: normalizer width does not match input_dim");

    const json& layers = jsonio::require(doc, "layers", "model");
    if (!layers.is_array() || layers.size() != mf.model.layer_count())
        throw ConfigError("model file: wrong layer count");
    const auto dims = mf.model.spec.dims();
    mf.model.params.reserve(param_count(mf.model.spec));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string lpath = "model.layers[" + std::to_string(l) + "]";
        jsonio::check_keys(layers[l], {"w", "b"}, lpath);
        const json& w = jsonio::require(layers[l], "w", lpath);
        const json& b = jsonio::require(layers[l], "b", lpath);
        if (!w.is_array() || w.size() != dims[l + 1])
            throw ConfigError(lpath + ": weight matrix has wrong row count");
        for (const auto& row : w) {
            if (!row.is_array() || row.size() != dims[l])
                throw ConfigError(lpath + ": weight matrix has wrong column count");
            for (const auto& v : row) mf.model.params.push_back(v.get<double>());
        }
        if (!b.is_array() || b.size() != dims[l + 1])
            throw ConfigError(lpath + ": bias vector has wrong length");
        for (const auto& v : b) mf.model.params.push_back(v.get<double>());
    }
    if (mf.model.params.size() != param_count(mf.model.spec))
        throw ConfigError("model file: parameter count mismatch");

    if (doc.contains("ecm"))
        mf.ecm_params = jsonio::ecm_from_json(doc.at("ecm"), "model.ecm");
    if (mf.mode == features::Mode::pinn && !mf.ecm_params)
        throw ConfigError("model file: PINN weights require embedded ecm parameters");
    return mf;
}

}  // namespace evolt::nn
