#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diprl/data/rollout.hpp"
#include "diprl/nn/adam.hpp"
#include "diprl/nn/checkpoint.hpp"

namespace diprl::ae {

using nn::Matrix;
using nn::MlpParams;
using nn::Vector;
using Rng = std::mt19937_64;

/// Which quantity the L2 coefficient penalizes.
enum class AePenalty { reconstruction, latent };

inline const char* to_string(AePenalty p) { return p == AePenalty::reconstruction ? "reconstruction" : "latent"; }
inline AePenalty ae_penalty_from_string(const std::string& s) {
  if (s == "reconstruction") return AePenalty::reconstruction;
  if (s == "latent") return AePenalty::latent;
  throw ConfigError("ae.penalty must be 'reconstruction' or 'latent', got '" + s + "'");
}

struct AeConfig {
  int latent_dim = 32;
  int hidden = 64;
  double weight_decay = 1e-5;
  double recon_l2_coeff = 1e-4;
  AePenalty penalty = AePenalty::reconstruction;
  double task_batch_fraction = 0.10;
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  int diverse_episodes = 50;

  void validate(int obs_dim) const {
    if (latent_dim < 1 || latent_dim >= obs_dim) throw ConfigError("ae.latent_dim must be in [1, obs length)");
    if (hidden < 1) throw ConfigError("ae.hidden must be positive");
    if (weight_decay < 0 || recon_l2_coeff < 0) throw ConfigError("ae coefficients must be >= 0");
    if (task_batch_fraction < 0 || task_batch_fraction > 1) throw ConfigError("ae.task_batch_fraction outside [0, 1]");
    if (epochs < 1 || batch_size < 1 || !(lr > 0)) throw ConfigError("ae.epochs, ae.batch_size, ae.lr must be positive");
    if (diverse_episodes < 1) throw ConfigError("ae.diverse_episodes must be >= 1");
  }
};

inline nlohmann::json to_json(const AeConfig& c) {
  return {{"latent_dim", c.latent_dim},
          {"hidden", c.hidden},
          {"weight_decay", c.weight_decay},
          {"recon_l2_coeff", c.recon_l2_coeff},
          {"penalty", to_string(c.penalty)},
          {"task_batch_fraction", c.task_batch_fraction},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"diverse_episodes", c.diverse_episodes}};
}

inline AeConfig ae_config_from_json(const nlohmann::json& j) {
  AeConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.recon_l2_coeff = j.at("recon_l2_coeff").get<double>();
  c.penalty = ae_penalty_from_string(j.at("penalty").get<std::string>());
  c.task_batch_fraction = j.at("task_batch_fraction").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.diverse_episodes = j.at("diverse_episodes").get<int>();
  return c;
}

/// Encoder obs -> latent and decoder latent -> obs, each with two relu
/// hidden layers. Once frozen the parameters are only reachable read-only.
class AutoencoderModel {
 public:
  AutoencoderModel() = default;

  static AutoencoderModel create(int obs_dim, const AeConfig& cfg, Rng& rng) {
    cfg.validate(obs_dim);
    const auto o = static_cast<std::size_t>(obs_dim);
    const auto h = static_cast<std::size_t>(cfg.hidden);
    const auto z = static_cast<std::size_t>(cfg.latent_dim);
    AutoencoderModel m;
    m.config_ = cfg;
    m.encoder_ = nn::make_mlp({o, h, h, z}, nn::Activation::relu, rng);
    m.decoder_ = nn::make_mlp({z, h, h, o}, nn::Activation::relu, rng);
    return m;
  }

  static AutoencoderModel from_parts(MlpParams encoder, MlpParams decoder, AeConfig cfg, bool frozen) {
    AutoencoderModel m;
    m.encoder_ = std::move(encoder);
    m.decoder_ = std::move(decoder);
    m.config_ = cfg;
    m.frozen_ = frozen;
    return m;
  }

  const MlpParams& encoder() const { return encoder_; }
  const MlpParams& decoder() const { return decoder_; }
  const AeConfig& config() const { return config_; }
  bool frozen() const { return frozen_; }
  int obs_dim() const { return static_cast<int>(encoder_.in_dim()); }
  int latent_dim() const { return static_cast<int>(encoder_.out_dim()); }

  void freeze() { frozen_ = true; }

  /// Writable parameters; refuses once frozen.
  MlpParams& mutable_encoder() {
    if (frozen_) throw ContractError("autoencoder is frozen");
    return encoder_;
  }
  MlpParams& mutable_decoder() {
    if (frozen_) throw ContractError("autoencoder is frozen");
    return decoder_;
  }

  /// Test hook: lifts the freeze so a negative control can mutate weights.
  void unfreeze_for_test() { frozen_ = false; }

 private:
  MlpParams encoder_;
  MlpParams decoder_;
  AeConfig config_;
  bool frozen_ = false;
};

inline Matrix to_matrix(const std::vector<const data::Observation*>& obs) {
  if (obs.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(obs.front()->size()), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t j = 0; j < obs.size(); ++j)
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Vector>(obs[j]->data(), static_cast<Eigen::Index>(obs[j]->size()));
  return m;
}

inline Vector encode(const AutoencoderModel& m, const data::Observation& obs) {
  if (static_cast<int>(obs.size()) != m.obs_dim())
    throw ShapeError("encode: observation has " + std::to_string(obs.size()) + " entries, expected " +
                     std::to_string(m.obs_dim()));
  return nn::mlp_forward(m.encoder(), Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size())));
}

/// Encodes columns of `obs`.
inline Matrix encode_batch(const AutoencoderModel& m, const Matrix& obs) { return nn::mlp_apply_batch(m.encoder(), obs); }

inline Matrix reconstruct_batch(const AutoencoderModel& m, const Matrix& obs) {
  return nn::mlp_apply_batch(m.decoder(), nn::mlp_apply_batch(m.encoder(), obs));
}

/// Uniform-random-policy episodes, each on a world seed drawn from `rng`.
/// The seeds used are appended to `world_seeds` when given.
inline data::DemoDataset build_diverse_dataset(const env::EnvConfig& base, int n_episodes, Rng& rng,
                                               std::vector<std::uint64_t>* world_seeds = nullptr) {
  if (n_episodes < 1) throw ConfigError("diverse dataset needs at least one episode");
  data::DemoDataset out;
  std::uniform_int_distribution<int> pick(0, env::kNumActions - 1);
  for (int i = 0; i < n_episodes; ++i) {
    env::EnvConfig cfg = base;
    cfg.world_seed = rng();
    if (world_seeds) world_seeds->push_back(cfg.world_seed);
    out.add_episode(data::rollout_episode(
        cfg, [&](const env::WorldState&, const data::Observation&) { return env::action_from_index(pick(rng)); },
        data::Source::demo));
  }
  return out;
}

struct AeLoss {
  double total = 0.0;
  double mse = 0.0;
  double penalty = 0.0;
};

/// Mean squared reconstruction error plus coeff * mean square of the
/// penalized quantity (reconstructions or latents).
inline AeLoss autoencoder_loss(const MlpParams& encoder, const MlpParams& decoder, const AeConfig& cfg,
                               const Matrix& batch) {
  const Matrix z = nn::mlp_apply_batch(encoder, batch);
  const Matrix recon = nn::mlp_apply_batch(decoder, z);
  AeLoss l;
  l.mse = (recon - batch).squaredNorm() / static_cast<double>(batch.size());
  const Matrix& pen = cfg.penalty == AePenalty::reconstruction ? recon : z;
  l.penalty = pen.squaredNorm() / static_cast<double>(pen.size());
  l.total = l.mse + cfg.recon_l2_coeff * l.penalty;
  return l;
}

/// Gradients of autoencoder_loss for both networks.
inline AeLoss autoencoder_gradients(const MlpParams& encoder, const MlpParams& decoder, const AeConfig& cfg,
                                    const Matrix& batch, nn::GradBuffer& enc_grad, nn::GradBuffer& dec_grad) {
  const auto enc_trace = nn::mlp_forward_batch(encoder, batch);
  const auto dec_trace = nn::mlp_forward_batch(decoder, enc_trace.result());
  const Matrix& z = enc_trace.result();
  const Matrix& recon = dec_trace.result();
  const double n_obs = static_cast<double>(recon.size());
  const double n_lat = static_cast<double>(z.size());

  AeLoss l;
  l.mse = (recon - batch).squaredNorm() / n_obs;
  Matrix d_recon = (2.0 / n_obs) * (recon - batch);
  Matrix d_latent_extra;
  if (cfg.penalty == AePenalty::reconstruction) {
    l.penalty = recon.squaredNorm() / n_obs;
    d_recon += (2.0 * cfg.recon_l2_coeff / n_obs) * recon;
  } else {
    l.penalty = z.squaredNorm() / n_lat;
    d_latent_extra = (2.0 * cfg.recon_l2_coeff / n_lat) * z;
  }
  l.total = l.mse + cfg.recon_l2_coeff * l.penalty;

  Matrix d_z;
  nn::accumulate_backward(decoder, dec_trace, d_recon, dec_grad, &d_z);
  if (d_latent_extra.size() > 0) d_z += d_latent_extra;
  nn::accumulate_backward(encoder, enc_trace, d_z, enc_grad);
  return l;
}

struct AeTrainingLog {
  std::vector<double> epoch_loss;  // objective on a fixed probe mixture, after each epoch
  std::vector<double> epoch_mse;
  double initial_loss = 0.0;
};

/// Number of task observations in each autoencoder batch.
inline int task_count_per_batch(const AeConfig& cfg) {
  return static_cast<int>(std::lround(cfg.task_batch_fraction * cfg.batch_size));
}

/// Trains on batches holding exactly round(task_batch_fraction * batch_size)
/// task observations (the rest diverse), then freezes the model.
inline AutoencoderModel train_autoencoder(AutoencoderModel model, const data::DemoDataset& task,
                                          const data::DemoDataset& diverse, Rng& rng, AeTrainingLog* log = nullptr) {
  if (model.frozen()) throw TrainingError("autoencoder: model is already frozen");
  if (task.empty() || diverse.empty()) throw TrainingError("autoencoder: both datasets must be nonempty");
  const AeConfig& cfg = model.config();
  const int n_task = task_count_per_batch(cfg);
  const int n_div = cfg.batch_size - n_task;

  std::uniform_int_distribution<std::size_t> pick_task(0, task.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_div(0, diverse.size() - 1);
  auto draw_batch = [&](int tasks, int divs) {
    std::vector<const data::Observation*> cols;
    cols.reserve(static_cast<std::size_t>(tasks + divs));
    for (int i = 0; i < tasks; ++i) cols.push_back(&task[pick_task(rng)].obs);
    for (int i = 0; i < divs; ++i) cols.push_back(&diverse[pick_div(rng)].obs);
    return to_matrix(cols);
  };

  // Fixed probe with the same mixture, for epoch-boundary loss tracking.
  const Matrix probe = draw_batch(n_task * 16, n_div * 16);
  AeTrainingLog local;
  local.initial_loss = autoencoder_loss(model.encoder(), model.decoder(), cfg, probe).total;

  nn::AdamState enc_adam = nn::AdamState::for_params(model.encoder());
  nn::AdamState dec_adam = nn::AdamState::for_params(model.decoder());
  auto enc_grad = nn::GradBuffer::zeros_like(model.encoder());
  auto dec_grad = nn::GradBuffer::zeros_like(model.decoder());
  const std::size_t total = task.size() + diverse.size();
  const std::size_t batches = (total + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches; ++b) {
      const Matrix batch = draw_batch(n_task, n_div);
      enc_grad.set_zero();
      dec_grad.set_zero();
      const auto l = autoencoder_gradients(model.encoder(), model.decoder(), cfg, batch, enc_grad, dec_grad);
      if (!std::isfinite(l.total))
        throw NumericError("autoencoder: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      nn::adam_step(model.mutable_encoder(), enc_grad, enc_adam, cfg.lr, cfg.weight_decay);
      nn::adam_step(model.mutable_decoder(), dec_grad, dec_adam, cfg.lr, cfg.weight_decay);
    }
    const auto l = autoencoder_loss(model.encoder(), model.decoder(), cfg, probe);
    local.epoch_loss.push_back(l.total);
    local.epoch_mse.push_back(l.mse);
  }
  if (log) *log = std::move(local);
  model.freeze();
  return model;
}

/// True iff the encoder parameters are bit-identical.
inline bool assert_frozen(const MlpParams& encoder_before, const MlpParams& encoder_after) {
  return nn::bit_identical(encoder_before, encoder_after);
}

inline nlohmann::json to_json(const AutoencoderModel& m) {
  return {{"format", "diprl-autoencoder"},
          {"version", 1},
          {"frozen", m.frozen()},
          {"config", to_json(m.config())},
          {"encoder", nn::to_json(m.encoder())},
          {"decoder", nn::to_json(m.decoder())}};
}

inline AutoencoderModel autoencoder_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "diprl-autoencoder") throw ConfigError("not an autoencoder checkpoint");
    return AutoencoderModel::from_parts(nn::mlp_from_json(j.at("encoder")), nn::mlp_from_json(j.at("decoder")),
                                        ae_config_from_json(j.at("config")), j.at("frozen").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("autoencoder checkpoint: ") + e.what());
  }
}

inline void save_autoencoder(const std::string& path, const AutoencoderModel& m) { nn::write_json_file(path, to_json(m)); }
inline AutoencoderModel load_autoencoder(const std::string& path) {
  return autoencoder_from_json(nn::read_json_file(path));
}

}  // namespace diprl::ae
