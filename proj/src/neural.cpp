#include "raccon/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "raccon/errors.hpp"

namespace raccon {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Identity: return z;
    }
    return z;
}

// Derivative expressed through the pre-activation z.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::Identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    }
    return z;
}

Eigen::MatrixXd normalize(const MlpModel& m, const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd x = raw;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        x.row(r) = ((x.row(r).array() - m.means[i]) / m.stds[i]).matrix();
    }
    return x;
}

// Forward pass over columns, keeping pre-activations for backprop.
Eigen::RowVectorXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& raw,
                                 std::vector<Eigen::MatrixXd>* zs, std::vector<Eigen::MatrixXd>* as) {
    Eigen::MatrixXd a = normalize(m, raw);
    if (as) as->push_back(a);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Eigen::MatrixXd z = m.layers[l].weights * a;
        z.colwise() += m.layers[l].bias;
        const bool last = l + 1 == m.layers.size();
        a = activate(z, last ? Activation::Identity : m.hidden_activation);
        if (zs) zs->push_back(std::move(z));
        if (as) as->push_back(a);
    }
    return a.row(0);
}

void gradient_from_batch(const MlpModel& m, const Eigen::MatrixXd& raw, const Eigen::VectorXd& targets,
                         std::vector<DenseLayer>& grads, double& loss) {
    std::vector<Eigen::MatrixXd> zs;
    std::vector<Eigen::MatrixXd> as;
    const Eigen::RowVectorXd y = forward_batch(m, raw, &zs, &as);
    const double n = static_cast<double>(raw.cols());
    const Eigen::RowVectorXd err = y - targets.transpose();
    loss = err.squaredNorm() / n;

    grads.resize(m.layers.size());
    Eigen::MatrixXd delta = (2.0 / n) * err;
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        grads[l].weights = delta * as[l].transpose();
        grads[l].bias = delta.rowwise().sum();
        if (l > 0) {
            delta = (m.layers[l].weights.transpose() * delta).cwiseProduct(activation_grad(zs[l - 1], m.hidden_activation));
        }
    }
}

void check_features(const MlpModel& m, std::size_t n) {
    if (n != input_dim(m.kind))
        throw ModelError(to_string(m.kind) + " expects " + std::to_string(input_dim(m.kind)) + " features, got " +
                         std::to_string(n));
}

Eigen::MatrixXd design_matrix(std::span<const DatasetRecord> records, ModelKind kind) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(input_dim(kind)), static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        if (kind == ModelKind::Predictor) {
            const auto f = predictor_features(records[i]).to_array();
            for (int r = 0; r < 4; ++r) x(r, c) = f[static_cast<std::size_t>(r)];
        } else {
            const auto f = estimator_features(records[i]).to_array();
            for (int r = 0; r < 3; ++r) x(r, c) = f[static_cast<std::size_t>(r)];
        }
    }
    return x;
}

Eigen::VectorXd target_vector(std::span<const DatasetRecord> records) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) y(static_cast<Eigen::Index>(i)) = records[i].a_e_response;
    return y;
}

double matrix_mae(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.cols() == 0) throw ConfigError("MAE of an empty dataset is undefined");
    constexpr Eigen::Index chunk = 8192;
    double sum = 0.0;
    for (Eigen::Index start = 0; start < x.cols(); start += chunk) {
        const Eigen::Index len = std::min(chunk, x.cols() - start);
        const Eigen::RowVectorXd out = forward_batch(m, x.middleCols(start, len), nullptr, nullptr);
        sum += (out - y.segment(start, len).transpose()).cwiseAbs().sum();
    }
    return sum / static_cast<double>(x.cols());
}

} // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::Predictor ? "predictor" : "response-estimator"; }

std::string to_string(Activation act) {
    switch (act) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    }
    return "?";
}

std::string to_string(Optimizer opt) { return opt == Optimizer::Adam ? "adam" : "sgd-momentum"; }

ModelKind parse_model_kind(const std::string& name) {
    if (name == "predictor") return ModelKind::Predictor;
    if (name == "response-estimator") return ModelKind::ResponseEstimator;
    throw ModelError("unknown model kind '" + name + "'");
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ModelError("unsupported activation '" + name + "'");
}

Optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return Optimizer::Adam;
    if (name == "sgd-momentum") return Optimizer::SgdMomentum;
    throw ConfigError("unknown optimizer '" + name + "'");
}

PredictorFeatures predictor_features(const DatasetRecord& r) { return {r.a_p, r.v_p, r.v_e, r.gap}; }
EstimatorFeatures estimator_features(const DatasetRecord& r) { return {r.v_p, r.v_e, r.gap}; }

std::size_t input_dim(ModelKind kind) { return kind == ModelKind::Predictor ? 4 : 3; }

void MlpModel::validate() const {
    if (layer_dims.size() < 2) throw ModelError("model needs at least an input and an output layer");
    if (static_cast<std::size_t>(layer_dims.front()) != input_dim(kind))
        throw ModelError("input width does not match model kind");
    if (layer_dims.back() != 1) throw ModelError("output dimension must be 1");
    if (layers.size() + 1 != layer_dims.size()) throw ModelError("layer count does not match layer_dims");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weights.rows() != layer_dims[l + 1] || layers[l].weights.cols() != layer_dims[l] ||
            layers[l].bias.size() != layer_dims[l + 1])
            throw ModelError("layer " + std::to_string(l) + " shape does not chain");
        if (!layers[l].weights.allFinite() || !layers[l].bias.allFinite())
            throw ModelError("layer " + std::to_string(l) + " has non-finite parameters");
    }
    if (means.size() != input_dim(kind) || stds.size() != input_dim(kind))
        throw ModelError("normalization size does not match input width");
    for (std::size_t i = 0; i < stds.size(); ++i)
        if (!(stds[i] > 0.0) || !std::isfinite(stds[i]) || !std::isfinite(means[i]))
            throw ModelError("normalization std must be positive and finite");
}

double MlpModel::forward(std::span<const double> features) const {
    check_features(*this, features.size());
    Eigen::VectorXd a(static_cast<Eigen::Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i)
        a(static_cast<Eigen::Index>(i)) = (features[i] - means[i]) / stds[i];
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::VectorXd z = layers[l].weights * a + layers[l].bias;
        if (l + 1 < layers.size()) {
            if (hidden_activation == Activation::ReLU) z = z.cwiseMax(0.0);
            else if (hidden_activation == Activation::Tanh) z = z.array().tanh().matrix();
        }
        a = std::move(z);
    }
    return a(0);
}

double MlpModel::forward(const PredictorFeatures& f) const {
    const auto x = f.to_array();
    return forward(std::span<const double>(x));
}

double MlpModel::forward(const EstimatorFeatures& f) const {
    const auto x = f.to_array();
    return forward(std::span<const double>(x));
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

MlpModel make_mlp(ModelKind kind, const std::vector<int>& hidden, Activation act, std::uint64_t seed) {
    MlpModel m;
    m.kind = kind;
    m.hidden_activation = act;
    m.layer_dims.push_back(static_cast<int>(input_dim(kind)));
    for (int h : hidden) {
        if (h <= 0) throw ConfigError("hidden layer widths must be positive");
        m.layer_dims.push_back(h);
    }
    m.layer_dims.push_back(1);
    m.means.assign(input_dim(kind), 0.0);
    m.stds.assign(input_dim(kind), 1.0);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        const int in = m.layer_dims[l];
        const int out = m.layer_dims[l + 1];
        const double gain = act == Activation::ReLU ? 2.0 : 1.0;
        std::normal_distribution<double> dist(0.0, std::sqrt(gain / in));
        DenseLayer layer;
        layer.weights.resize(out, in);
        for (Eigen::Index c = 0; c < in; ++c)
            for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = dist(rng);
        layer.bias = Eigen::VectorXd::Zero(out);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

void TrainConfig::validate() const {
    if (hidden_layers.empty()) throw ConfigError("train: at least one hidden layer is required");
    for (int h : hidden_layers)
        if (h <= 0) throw ConfigError("train: hidden layer widths must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
    if (early_stop_patience == 0) throw ConfigError("train: early_stop_patience must be positive");
}

double loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                         std::vector<double>& gradient) {
    std::vector<DenseLayer> grads;
    double loss = 0.0;
    gradient_from_batch(model, inputs, targets, grads, loss);
    gradient.clear();
    for (const auto& g : grads) {
        gradient.insert(gradient.end(), g.weights.data(), g.weights.data() + g.weights.size());
        gradient.insert(gradient.end(), g.bias.data(), g.bias.data() + g.bias.size());
    }
    return loss;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
    std::vector<double> p;
    p.reserve(model.parameter_count());
    for (const auto& l : model.layers) {
        p.insert(p.end(), l.weights.data(), l.weights.data() + l.weights.size());
        p.insert(p.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return p;
}

void assign_parameters(MlpModel& model, std::span<const double> params) {
    if (params.size() != model.parameter_count()) throw ModelError("parameter vector has the wrong length");
    std::size_t k = 0;
    for (auto& l : model.layers) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(k), l.weights.size(), l.weights.data());
        k += static_cast<std::size_t>(l.weights.size());
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
        k += static_cast<std::size_t>(l.bias.size());
    }
}

TrainResult train_matrix(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                         const Eigen::MatrixXd& val_inputs, const Eigen::VectorXd& val_targets,
                         const TrainConfig& config, ModelKind kind) {
    config.validate();
    const auto dim = static_cast<Eigen::Index>(input_dim(kind));
    if (inputs.cols() == 0) throw ConfigError("train: empty training set");
    if (inputs.rows() != dim || val_inputs.rows() != dim) throw ModelError("train: feature count mismatch");
    if (inputs.cols() != targets.size() || val_inputs.cols() != val_targets.size())
        throw ConfigError("train: inputs and targets differ in length");
    if (!inputs.allFinite() || !targets.allFinite()) throw NumericError("train: non-finite training data");

    MlpModel model = make_mlp(kind, config.hidden_layers, config.hidden_activation, config.rng_seed);
    const double n = static_cast<double>(inputs.cols());
    for (Eigen::Index r = 0; r < dim; ++r) {
        const double mean = inputs.row(r).sum() / n;
        const double var = (inputs.row(r).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        model.means[static_cast<std::size_t>(r)] = mean;
        model.stds[static_cast<std::size_t>(r)] = sd > 0.0 ? sd : 1.0;
    }

    const bool has_val = val_inputs.cols() > 0;
    const auto& vx = has_val ? val_inputs : inputs;
    const auto& vy = has_val ? val_targets : targets;

    std::vector<double> params = flatten_parameters(model);
    std::vector<double> m1(params.size(), 0.0);
    std::vector<double> m2(params.size(), 0.0);
    std::vector<double> grad;
    std::uint64_t t = 0;
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(config.rng_seed ^ 0x5DEECE66DULL);

    TrainResult result;
    result.model = model;
    result.report.best_validation_mae = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    Eigen::MatrixXd bx(dim, static_cast<Eigen::Index>(config.batch_size));
    Eigen::VectorXd by(static_cast<Eigen::Index>(config.batch_size));
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            bx.resize(dim, static_cast<Eigen::Index>(len));
            by.resize(static_cast<Eigen::Index>(len));
            for (std::size_t i = 0; i < len; ++i) {
                bx.col(static_cast<Eigen::Index>(i)) = inputs.col(order[start + i]);
                by(static_cast<Eigen::Index>(i)) = targets(order[start + i]);
            }
            const double loss = loss_and_gradient(model, bx, by, grad);
            if (!std::isfinite(loss))
                throw NumericError("train: loss became non-finite in epoch " + std::to_string(epoch) +
                                   "; lower learning_rate (currently " + std::to_string(config.learning_rate) + ")");
            ++t;
            if (config.optimizer == Optimizer::Adam) {
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
                for (std::size_t i = 0; i < params.size(); ++i) {
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
                }
            } else {
                for (std::size_t i = 0; i < params.size(); ++i) {
                    m1[i] = config.momentum * m1[i] + grad[i];
                    params[i] -= config.learning_rate * m1[i];
                }
            }
            assign_parameters(model, params);
        }
        EpochReport rep;
        rep.epoch = epoch;
        rep.train_mae = matrix_mae(model, inputs, targets);
        rep.validation_mae = matrix_mae(model, vx, vy);
        if (!std::isfinite(rep.train_mae) || !std::isfinite(rep.validation_mae))
            throw NumericError("train: non-finite MAE in epoch " + std::to_string(epoch) +
                               "; lower learning_rate");
        result.report.epochs.push_back(rep);
        if (rep.validation_mae < result.report.best_validation_mae) {
            result.report.best_validation_mae = rep.validation_mae;
            result.report.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= config.early_stop_patience) {
            break;
        }
    }
    return result;
}

TrainResult train(std::span<const DatasetRecord> train_set, std::span<const DatasetRecord> validation,
                  const TrainConfig& config, ModelKind kind) {
    if (train_set.empty()) throw ConfigError("train: empty training set");
    return train_matrix(design_matrix(train_set, kind), target_vector(train_set), design_matrix(validation, kind),
                        target_vector(validation), config, kind);
}

double mae(const MlpModel& model, std::span<const DatasetRecord> records) {
    if (records.empty()) throw ConfigError("MAE of an empty dataset is undefined");
    return matrix_mae(model, design_matrix(records, model.kind), target_vector(records));
}

std::string model_to_json(const MlpModel& model) {
    model.validate();
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["model_kind"] = to_string(model.kind);
    j["layer_dims"] = model.layer_dims;
    auto acts = nlohmann::json::array();
    for (std::size_t l = 0; l < model.layers.size(); ++l)
        acts.push_back(to_string(l + 1 == model.layers.size() ? Activation::Identity : model.hidden_activation));
    j["activations"] = acts;
    j["normalization"] = {{"means", model.means}, {"stds", model.stds}};
    auto layers = nlohmann::json::array();
    for (const auto& l : model.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()}, {"weights", w}, {"bias", b}});
    }
    j["layers"] = layers;
    return j.dump(1) + "\n";
}

MlpModel model_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelError(std::string("corrupt model file: ") + e.what());
    }
    try {
        if (!j.is_object()) throw ModelError("corrupt model file: not a JSON object");
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw ModelError("unsupported model format_version " + std::to_string(version));
        MlpModel m;
        m.kind = parse_model_kind(j.at("model_kind").get<std::string>());
        m.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        const auto acts = j.at("activations").get<std::vector<std::string>>();
        if (acts.empty()) throw ModelError("model has no activations");
        std::vector<Activation> parsed;
        for (const auto& a : acts) parsed.push_back(parse_activation(a));
        if (parsed.back() != Activation::Identity) throw ModelError("output activation must be identity");
        m.hidden_activation = parsed.size() > 1 ? parsed.front() : Activation::ReLU;
        for (std::size_t i = 0; i + 1 < parsed.size(); ++i)
            if (parsed[i] != m.hidden_activation) throw ModelError("mixed hidden activations are not supported");
        m.means = j.at("normalization").at("means").get<std::vector<double>>();
        m.stds = j.at("normalization").at("stds").get<std::vector<double>>();
        for (const auto& lj : j.at("layers")) {
            const auto rows = lj.at("rows").get<Eigen::Index>();
            const auto cols = lj.at("cols").get<Eigen::Index>();
            const auto w = lj.at("weights").get<std::vector<double>>();
            const auto b = lj.at("bias").get<std::vector<double>>();
            if (rows <= 0 || cols <= 0 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
                static_cast<Eigen::Index>(b.size()) != rows)
                throw ModelError("layer shape does not match its data");
            DenseLayer layer;
            layer.weights.resize(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
            layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
            m.layers.push_back(std::move(layer));
        }
        if (acts.size() != m.layers.size()) throw ModelError("activation count does not match layer count");
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("corrupt model file: ") + e.what());
    }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    const auto text = model_to_json(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace raccon
