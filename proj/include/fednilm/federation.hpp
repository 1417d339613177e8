#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fednilm/data.hpp"
#include "fednilm/metrics.hpp"
#include "fednilm/model.hpp"
#include "fednilm/params.hpp"

namespace fednilm {

struct FederationConfig {
  std::size_t clients = 3;         // N
  std::size_t global_rounds = 10;  // R_G
  std::size_t local_epochs = 10;   // R_L
  std::size_t local_batch = 32;    // B_L
  std::size_t global_batch = 32;   // B_G: capacity of the server's update buffer
  float eta = 1e-4f;
  float rho = 0.5f;
  std::uint64_t global_seed = 0;
  /// Per-client seeds; client n defaults to global_seed + 1 + n.
  std::vector<std::uint64_t> client_seeds;
  /// Worker threads for in-process clients; 0 means one per client.
  std::size_t threads = 0;
  /// Architecture; its init_seed is replaced by global_seed.
  ModelConfig model;

  void validate() const;
  std::uint64_t client_seed(std::size_t n) const;
  ModelConfig initial_model() const;
  /// Stable digest of every field that affects numerics (threads excluded).
  std::uint64_t hash() const;
};

/// Batch tensors for windows `indices` of `data`: input [B, 1, L] and labels [B, I, L].
void assemble_batch(std::span<const WindowSample> data, std::span<const std::size_t> indices,
                    std::size_t appliances, Tensor<float>& input, Tensor<float>& labels);

/// A household's private training state. Velocity and rng persist across rounds.
struct ClientState {
  std::uint32_t client_id = 0;
  std::shared_ptr<const std::vector<WindowSample>> data;
  NilmModel<float> model;
  OptimizerState<float> optimizer;
  Rng rng;

  ClientState(const FederationConfig& config, std::uint32_t id,
              std::shared_ptr<const std::vector<WindowSample>> windows);
};

struct LocalUpdate {
  std::uint32_t client_id = 0;
  ParamVector<float> params;
  float mean_loss = 0;  // mean batch loss over the round's local epochs
  std::size_t batches = 0;
};

/// Loads `global`, then runs `epochs` epochs of shuffled mini-batch SGD with
/// momentum. Throws DataError on an empty dataset and NumericError on a
/// non-finite loss.
LocalUpdate households_update(ClientState& client, const ParamVector<float>& global,
                              const FederationConfig& config, std::size_t epochs);
inline LocalUpdate households_update(ClientState& client, const ParamVector<float>& global,
                                     const FederationConfig& config) {
  return households_update(client, global, config, config.local_epochs);
}

/// Unweighted elementwise mean, summed in the given order.
ParamVector<float> fedavg(std::span<const ParamVector<float>> updates);
/// Unweighted mean summed in ascending client_id order, whatever the input order.
ParamVector<float> fedavg(std::span<const LocalUpdate> updates);

struct ClientRoundStat {
  std::uint32_t client_id = 0;
  float loss = 0;
  std::size_t batches = 0;
  std::uint64_t bytes_sent = 0;      // server -> client
  std::uint64_t bytes_received = 0;  // client -> server
  bool excluded = false;
  std::string note;
};

struct RoundReport {
  std::size_t round = 0;  // 1-based
  std::vector<ClientRoundStat> clients;
  double train_seconds = 0;        // broadcast to barrier
  double aggregation_seconds = 0;  // fedavg alone
  double elapsed_seconds = 0;      // since training start
  std::optional<std::vector<ScoreSet>> validation;
};

/// Called after every round (or centralized epoch) with the new global params.
using SnapshotFn = std::function<void(const RoundReport&, const ParamVector<float>&)>;

struct TrainingOptions {
  SnapshotFn on_round;
  /// When non-empty, each report carries per-appliance scores on these windows.
  std::span<const WindowSample> validation;
};

struct TrainingResult {
  ParamVector<float> params;
  std::vector<RoundReport> rounds;
};

/// In-process FedAvg over one dataset per client (dataset n belongs to client n).
TrainingResult run_federated(const FederationConfig& config,
                             std::span<const std::vector<WindowSample>> datasets,
                             const TrainingOptions& options = {});

/// Single model over pooled windows for `epochs` epochs, driven by client 0's
/// seed stream so that one-client federation reproduces it bit for bit.
TrainingResult run_centralized(const FederationConfig& config, std::vector<WindowSample> pooled,
                               std::size_t epochs, const TrainingOptions& options = {});

/// Per-appliance confusion counts of thresholded predictions over `windows`.
std::vector<ConfusionCounts> evaluate_windows(NilmModel<float>& model,
                                              std::span<const WindowSample> windows,
                                              std::size_t batch = 64);
std::vector<ScoreSet> score_windows(NilmModel<float>& model, std::span<const WindowSample> windows,
                                    std::size_t batch = 64);

}  // namespace fednilm
