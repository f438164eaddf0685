#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ngsplat/calculus.hpp"
#include "ngsplat/dataset.hpp"
#include "ngsplat/density.hpp"
#include "ngsplat/field.hpp"
#include "ngsplat/physics.hpp"

namespace ngs {

/// Mode switches for the ablation studies: freeze centers, keep the
/// Gaussian population fixed, or swap the forward/gradient path to the
/// unnormalized sum.
struct AblationFlags {
  bool freeze_positions = false;
  bool disable_density_control = false;
  bool use_unnormalized = false;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 1;
  int batch_size = 0;  // 0 = full batch
  double lambda = 1.0;
  DensifyConfig density;
  std::uint64_t seed = 0;
  int threads = 0;
  AblationFlags ablation;
  std::optional<double> time_budget_seconds;

  void validate() const;
};

/// Adam with bias correction. Moment vectors always match the parameter
/// vector; resize() re-indexes them across density-control events, zeroing
/// the blocks of freshly created Gaussians.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  explicit AdamState(int n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
  void resize(const std::vector<int>& carried_from, int block_size);
};

/// One Adam update; rejects mismatched lengths.
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

struct EpochRecord {
  int epoch = 0;
  double total_loss = 0.0;
  double data_loss = 0.0;
  double pde_loss = 0.0;
  int gaussians = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double total_seconds = 0.0;
  bool stopped_on_time_budget = false;
  std::string checkpoint_path;  // filled by the CLI after writing

  const EpochRecord& final_epoch() const { return epochs.back(); }
};

struct TrainResult {
  GaussianField field;
  TrainReport report;
};

/// Full training loop: per epoch, seeded uniform-without-replacement
/// batches (one full batch when batch_size = 0), fused loss/gradient, Adam
/// update; every density interval a densify-then-merge pass with optimizer
/// moments re-indexed (new blocks start at zero). Epoch losses are
/// recorded on the full dataset after the epoch's updates, so the final
/// record matches the checkpointed field exactly. Reproducible bit-for-bit
/// from (seed, config, dataset) at any thread count. Aborts with a
/// diagnostic naming the epoch and term if the loss turns non-finite.
TrainResult train(const FieldDataset& dataset, const GaussianField& initial_field,
                  const PdeSpec& spec, const TrainConfig& config);

}  // namespace ngs
