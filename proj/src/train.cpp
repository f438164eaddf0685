#include "ngsplat/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ngsplat/parallel.hpp"
#include "ngsplat/splat.hpp"

namespace ngs {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 0) throw std::invalid_argument("train: batch_size must be >= 0");
  if (lambda < 0.0) throw std::invalid_argument("train: lambda must be >= 0");
  density.validate();
  if (time_budget_seconds && *time_budget_seconds <= 0.0)
    throw std::invalid_argument("train: time budget must be positive");
}

void AdamState::resize(const std::vector<int>& carried_from, int block_size) {
  const Eigen::Index n = static_cast<Eigen::Index>(carried_from.size()) * block_size;
  Eigen::VectorXd new_m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd new_v = Eigen::VectorXd::Zero(n);
  for (size_t i = 0; i < carried_from.size(); ++i) {
    const int from = carried_from[i];
    if (from < 0) continue;
    new_m.segment(static_cast<Eigen::Index>(i) * block_size, block_size) =
        m.segment(static_cast<Eigen::Index>(from) * block_size, block_size);
    new_v.segment(static_cast<Eigen::Index>(i) * block_size, block_size) =
        v.segment(static_cast<Eigen::Index>(from) * block_size, block_size);
  }
  m = std::move(new_m);
  v = std::move(new_v);
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam: parameter, gradient and moment lengths must match");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grad.array().square().matrix();
  const double m_corr = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params -= (lr * (state.m / m_corr).array() /
             ((state.v / v_corr).array().sqrt() + state.epsilon))
                .matrix();
}

namespace {

double unnormalized_data_loss(const GaussianField& field, const Eigen::MatrixXd& coords,
                              const Eigen::MatrixXd& values, const Eigen::VectorXd& mask,
                              int threads) {
  const Eigen::MatrixXd pred = predict_many_unnormalized(field, coords, threads);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < coords.rows(); ++r)
    for (int a = 0; a < mask.size(); ++a) {
      const double diff = mask[a] * (pred(r, a) - values(r, a));
      acc += diff * diff;
    }
  return acc / static_cast<double>(coords.rows());
}

// Per-point total losses for the densification weighting; L_k combines the
// data and (scaled) residual terms at the point.
Eigen::VectorXd point_losses(const GaussianField& field, const FieldDataset& dataset,
                             const PdeSpec& spec, double lambda, bool unnormalized, int threads) {
  Eigen::VectorXd losses(dataset.count());
  for_chunks(dataset.count(), threads, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
    for (std::int64_t k = begin; k < end; ++k) {
      const Eigen::VectorXd x = dataset.coords.row(k).transpose();
      const Eigen::VectorXd pred =
          unnormalized ? predict_unnormalized(field, x) : predict(field, x);
      double l = 0.0;
      for (int a = 0; a < dataset.mask.size(); ++a) {
        const double diff = dataset.mask[a] * (pred[a] - dataset.values(k, a));
        l += diff * diff;
      }
      if (spec.has_pde() && !unnormalized)
        l += lambda * residual(field, x, spec).squaredNorm();
      losses[k] = l;
    }
  });
  return losses;
}

}  // namespace

TrainResult train(const FieldDataset& dataset, const GaussianField& initial_field,
                  const PdeSpec& spec, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.dim() != initial_field.dim() || dataset.channels() != initial_field.channels())
    throw std::invalid_argument("train: dataset layout does not match the field");
  if (spec.has_pde()) spec.check_layout(initial_field.dim(), initial_field.channels());

  const auto t_start = std::chrono::steady_clock::now();
  GaussianField field = initial_field;
  const int k = dataset.count();
  const int q = field.dim();
  const int stride = field.params_per_gaussian();
  const bool density_on = !config.ablation.disable_density_control;
  const bool unnorm = config.ablation.use_unnormalized;

  Eigen::VectorXd params = field.flatten();
  AdamState adam(static_cast<int>(params.size()));

  // Position-gradient bookkeeping since the last density-control event.
  Eigen::MatrixXd pos_grad_sum = Eigen::MatrixXd::Zero(field.size(), q);
  long pos_grad_steps = 0;

  TrainReport report;
  report.epochs.reserve(static_cast<size_t>(config.epochs));

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();

    // Seeded uniform-without-replacement batches (one full batch when
    // batch_size is 0).
    const int batch = config.batch_size == 0 ? k : std::min(config.batch_size, k);
    const bool full_batch = batch == k;
    if (!full_batch) {
      std::mt19937_64 rng(split_seed(config.seed, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
    }

    for (int start = 0; start < k; start += batch) {
      const int len = std::min(batch, k - start);
      Eigen::MatrixXd bcoords, bvalues;
      const Eigen::MatrixXd* coords_ptr = &dataset.coords;
      const Eigen::MatrixXd* values_ptr = &dataset.values;
      if (!full_batch) {
        bcoords.resize(len, q);
        bvalues.resize(len, field.channels());
        for (int r = 0; r < len; ++r) {
          bcoords.row(r) = dataset.coords.row(order[start + r]);
          bvalues.row(r) = dataset.values.row(order[start + r]);
        }
        coords_ptr = &bcoords;
        values_ptr = &bvalues;
      }

      GradientOptions opts;
      opts.lambda = config.lambda;
      opts.threads = config.threads;
      opts.unnormalized = unnorm;
      LossGradient lg =
          loss_param_gradient(field, *coords_ptr, *values_ptr, dataset.mask, spec, opts);

      if (!std::isfinite(lg.data) || !std::isfinite(lg.pde))
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch) + " (data term " +
            std::to_string(lg.data) + ", pde term " + std::to_string(lg.pde) + ")");

      if (config.ablation.freeze_positions || unnorm) {
        for (int i = 0; i < field.size(); ++i)
          lg.grad.segment(static_cast<Eigen::Index>(i) * stride, q).setZero();
        lg.position_grad.setZero();
      }

      pos_grad_sum += lg.position_grad;
      ++pos_grad_steps;

      adam_step(adam, params, lg.grad, config.learning_rate);
      field.apply(params);
    }

    // Scheduled density control: densify first, then merge; optimizer
    // moments follow the survivors, fresh blocks start at zero.
    if (density_on && epoch % config.density.interval == 0) {
      const InfluenceMatrix influence =
          influence_matrix(field, dataset.coords, config.threads);
      const Eigen::VectorXd losses =
          point_losses(field, dataset, spec, config.lambda, unnorm, config.threads);
      const Eigen::VectorXd errors = gaussian_errors(influence, losses);
      const std::vector<int> selected = select_densify(errors, config.density);

      const Eigen::MatrixXd avg_pos_grad =
          pos_grad_steps > 0 ? (pos_grad_sum / static_cast<double>(pos_grad_steps)).eval()
                             : Eigen::MatrixXd::Zero(field.size(), q).eval();
      DensityUpdate densified =
          densify(field, selected, avg_pos_grad, config.learning_rate, config.density,
                  split_seed(config.seed ^ 0x64656e73ULL, static_cast<std::uint64_t>(epoch)));
      field = std::move(densified.field);
      adam.resize(densified.carried_from, stride);

      DensityUpdate merged = merge(field, dataset.coords, config.density, config.threads);
      field = std::move(merged.field);
      adam.resize(merged.carried_from, stride);

      params = field.flatten();
      pos_grad_sum = Eigen::MatrixXd::Zero(field.size(), q);
      pos_grad_steps = 0;
    }

    // Epoch record: losses of the updated field on the full dataset, so
    // the last record matches the checkpoint exactly.
    EpochRecord rec;
    rec.epoch = epoch;
    if (unnorm) {
      rec.data_loss =
          unnormalized_data_loss(field, dataset.coords, dataset.values, dataset.mask,
                                 config.threads);
      rec.pde_loss = 0.0;
      rec.total_loss = rec.data_loss;
    } else {
      const LossBreakdown lb = total_loss(field, dataset.coords, dataset.values, dataset.mask,
                                          spec, config.lambda, config.threads);
      rec.data_loss = lb.data;
      rec.pde_loss = lb.pde;
      rec.total_loss = lb.total;
    }
    if (!std::isfinite(rec.total_loss))
      throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                               " (data term " + std::to_string(rec.data_loss) + ", pde term " +
                               std::to_string(rec.pde_loss) + ")");
    rec.gaussians = field.size();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    report.epochs.push_back(rec);

    if (config.time_budget_seconds) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      if (elapsed > *config.time_budget_seconds) {
        report.stopped_on_time_budget = true;
        break;
      }
    }
  }

  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return TrainResult{std::move(field), std::move(report)};
}

}  // namespace ngs
