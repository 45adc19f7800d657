#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "raccon/scenario.hpp"

namespace raccon {

enum class ModelKind { Predictor, ResponseEstimator };
enum class Activation { ReLU, Tanh, Identity };
enum class Optimizer { SgdMomentum, Adam };

std::string to_string(ModelKind kind);
std::string to_string(Activation act);
ModelKind parse_model_kind(const std::string& name);
Activation parse_activation(const std::string& name);
Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer opt);

/// Inputs the Predictor sees: (a_P, v_P, v_E, gap).
struct PredictorFeatures {
    double a_p = 0.0;
    double v_p = 0.0;
    double v_e = 0.0;
    double gap = 0.0;

    std::array<double, 4> to_array() const { return {a_p, v_p, v_e, gap}; }
};

/// Trusted sensory inputs only. There is deliberately no acceleration field:
/// nothing received over V2V can reach the Response Estimator.
struct EstimatorFeatures {
    double v_p = 0.0;
    double v_e = 0.0;
    double gap = 0.0;

    std::array<double, 3> to_array() const { return {v_p, v_e, gap}; }
};

PredictorFeatures predictor_features(const DatasetRecord& r);
EstimatorFeatures estimator_features(const DatasetRecord& r);
std::size_t input_dim(ModelKind kind);

struct DenseLayer {
    Eigen::MatrixXd weights; // rows = outputs, cols = inputs
    Eigen::VectorXd bias;
};

struct MlpModel {
    ModelKind kind = ModelKind::Predictor;
    std::vector<int> layer_dims;        // input, hidden..., 1
    Activation hidden_activation = Activation::ReLU;
    std::vector<double> means;          // per input feature
    std::vector<double> stds;
    std::vector<DenseLayer> layers;

    /// Throws ModelError if shapes do not chain or normalization is invalid.
    void validate() const;

    /// Throws ModelError when the feature count does not match the kind.
    double forward(std::span<const double> features) const;
    double forward(const PredictorFeatures& f) const;
    double forward(const EstimatorFeatures& f) const;

    std::size_t parameter_count() const;
};

/// Random initialization with identity normalization.
MlpModel make_mlp(ModelKind kind, const std::vector<int>& hidden, Activation act,
                  std::uint64_t seed);

struct TrainConfig {
    std::vector<int> hidden_layers{32, 32};
    Activation hidden_activation = Activation::ReLU;
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t epochs = 30;
    Optimizer optimizer = Optimizer::Adam;
    double momentum = 0.9;
    std::size_t early_stop_patience = 10;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

struct EpochReport {
    std::size_t epoch = 0;
    double train_mae = 0.0;
    double validation_mae = 0.0;
};

struct TrainReport {
    std::vector<EpochReport> epochs;
    std::size_t best_epoch = 0;
    double best_validation_mae = 0.0;
};

struct TrainResult {
    MlpModel model;
    TrainReport report;
};

/// Mini-batch gradient descent on mean-squared error. Normalization statistics
/// come from `train` only. Returns the snapshot with the best validation MAE.
/// Deterministic for a fixed seed; throws NumericError on a non-finite loss.
TrainResult train(std::span<const DatasetRecord> train, std::span<const DatasetRecord> validation,
                  const TrainConfig& config, ModelKind kind);

/// Raw design-matrix entry point shared by train() and the gradient tests.
/// Columns of `inputs` are samples.
TrainResult train_matrix(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                         const Eigen::MatrixXd& val_inputs, const Eigen::VectorXd& val_targets,
                         const TrainConfig& config, ModelKind kind);

/// Mean-squared loss over the columns of `inputs` and its gradient, flattened
/// layer by layer as [W (column-major), b].
double loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets, std::vector<double>& gradient);
std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, std::span<const double> params);

double mae(const MlpModel& model, std::span<const DatasetRecord> records);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(std::string_view text);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

} // namespace raccon
