#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "ngsplat/dataset.hpp"
#include "ngsplat/field.hpp"
#include "ngsplat/physics.hpp"
#include "ngsplat/rates.hpp"
#include "ngsplat/run_config.hpp"
#include "ngsplat/splat.hpp"
#include "ngsplat/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// All artifacts go through a temp file and a rename, so a failing command
// leaves no partial outputs behind.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void save_field_atomic(const ngs::GaussianField& field, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  ngs::save_field(field, tmp);
  fs::rename(tmp, path);
}

void save_dataset_atomic(const ngs::FieldDataset& ds, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  ngs::save_dataset(ds, tmp);
  fs::rename(tmp, path);
}

std::string report_csv(const ngs::TrainReport& report) {
  std::ostringstream out;
  out << "epoch,total_loss,data_loss,pde_loss,gaussians,seconds\n";
  char buf[160];
  for (const auto& r : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d,%.6f\n", r.epoch, r.total_loss,
                  r.data_loss, r.pde_loss, r.gaussians, r.seconds);
    out << buf;
  }
  return out.str();
}

json summary_json(const ngs::TrainReport& report, const std::string& checkpoint) {
  json j;
  const auto& last = report.final_epoch();
  j["epochs_run"] = last.epoch;
  j["final_total_loss"] = last.total_loss;
  j["final_data_loss"] = last.data_loss;
  j["final_pde_loss"] = last.pde_loss;
  j["final_gaussians"] = last.gaussians;
  j["total_seconds"] = report.total_seconds;
  j["stopped_on_time_budget"] = report.stopped_on_time_budget;
  j["checkpoint"] = checkpoint;
  return j;
}

json metrics_json(double rel, double rms, int k, const Eigen::VectorXd& mask) {
  json j;
  j["relative_l2"] = rel;
  j["rmse"] = rms;
  j["points"] = k;
  std::vector<int> masked;
  for (int a = 0; a < mask.size(); ++a)
    if (mask[a] != 0.0) masked.push_back(a);
  j["masked_components"] = masked;
  return j;
}

fs::path resolve_output_dir(const std::string& flag_value) {
  const char* env = std::getenv("NGSPLAT_OUTPUT_DIR");
  fs::path dir = (env != nullptr && *env != '\0') ? fs::path(env) : fs::path(flag_value);
  fs::create_directories(dir);
  return dir;
}

int env_threads(int flag_value) {
  const char* env = std::getenv("NGSPLAT_THREADS");
  if (env != nullptr && *env != '\0') return std::atoi(env);
  return flag_value;
}

Eigen::VectorXd parse_mask(const std::string& csv, int p) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (static_cast<int>(vals.size()) != p)
    throw std::runtime_error("mask has " + std::to_string(vals.size()) + " entries, dataset has " +
                             std::to_string(p) + " channels");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), p);
}

struct GridAxisSpec {
  double lo, hi;
  int n;
};

std::vector<GridAxisSpec> parse_grid(const std::string& text) {
  std::vector<GridAxisSpec> axes;
  std::stringstream ss(text);
  std::string axis;
  while (std::getline(ss, axis, ',')) {
    GridAxisSpec a{};
    if (std::sscanf(axis.c_str(), "%lf:%lf:%d", &a.lo, &a.hi, &a.n) != 3 || a.n < 1)
      throw std::runtime_error("bad grid axis '" + axis + "', expected lo:hi:n");
    axes.push_back(a);
  }
  if (axes.empty()) throw std::runtime_error("empty grid specification");
  return axes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-field reconstruction with normalized axes-aligned Gaussian splatting"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset file");
  std::string gen_kind, gen_out = "dataset.csv";
  int gen_nx = 64, gen_ny = 64, gen_nt = 8;
  double gen_lo = -2.0, gen_hi = 2.0, gen_nu = 0.01 / M_PI, gen_t_end = 1.0;
  gen->add_option("--kind", gen_kind, "rosenbrock | taylor-green | burgers")->required();
  gen->add_option("--nx", gen_nx);
  gen->add_option("--ny", gen_ny);
  gen->add_option("--nt", gen_nt);
  gen->add_option("--lo", gen_lo, "rosenbrock domain lower corner");
  gen->add_option("--hi", gen_hi, "rosenbrock domain upper corner");
  gen->add_option("--nu", gen_nu, "viscosity");
  gen->add_option("--t-end", gen_t_end);
  gen->add_option("--out", gen_out);

  // ---- fit-function ----
  auto* fit = app.add_subcommand("fit-function", "Fit the benchmark surface and report errors");
  int fit_n = 400, fit_nx = 50, fit_ny = 50, fit_epochs = 10000, fit_threads = 0;
  double fit_lr = 1e-2, fit_lo = -2.0, fit_hi = 2.0, fit_z = 1e-4;
  std::uint64_t fit_seed = 0;
  bool fit_unnorm = false, fit_freeze = false, fit_no_density = false;
  std::string fit_out = "fit_run";
  fit->add_option("--gaussians", fit_n, "initial Gaussian count");
  fit->add_option("--nx", fit_nx);
  fit->add_option("--ny", fit_ny);
  fit->add_option("--lo", fit_lo);
  fit->add_option("--hi", fit_hi);
  fit->add_option("--epochs", fit_epochs);
  fit->add_option("--learning-rate", fit_lr);
  fit->add_option("--z-threshold", fit_z);
  fit->add_option("--seed", fit_seed);
  fit->add_option("--threads", fit_threads);
  fit->add_flag("--unnormalized", fit_unnorm, "use the unnormalized sum");
  fit->add_flag("--freeze-positions", fit_freeze);
  fit->add_flag("--disable-density-control", fit_no_density);
  fit->add_option("--out", fit_out);

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train a field from a config file");
  std::string tr_config;
  std::string tr_out_override;
  tr->add_option("--config", tr_config, "JSON run configuration")->required();
  tr->add_option("--out", tr_out_override, "override the config's output_dir");
  std::optional<double> tr_lr, tr_lambda, tr_dt, tr_sct, tr_mt, tr_z;
  std::optional<int> tr_epochs, tr_batch, tr_interval, tr_threads;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--learning-rate", tr_lr);
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--pde-weight", tr_lambda);
  tr->add_option("--densification-step", tr_interval);
  tr->add_option("--densification-threshold", tr_dt);
  tr->add_option("--split-clone-threshold", tr_sct);
  tr->add_option("--merging-threshold", tr_mt);
  tr->add_option("--z-threshold", tr_z);
  tr->add_option("--seed", tr_seed);
  tr->add_option("--threads", tr_threads);

  // ---- predict ----
  auto* pr = app.add_subcommand("predict", "Evaluate a checkpoint on a grid or point file");
  std::string pr_checkpoint, pr_grid, pr_points, pr_out = "prediction.csv";
  int pr_threads = 0;
  pr->add_option("--checkpoint", pr_checkpoint)->required();
  pr->add_option("--grid", pr_grid, "per-axis lo:hi:n, comma separated");
  pr->add_option("--points", pr_points, "dataset file supplying query coordinates");
  pr->add_option("--threads", pr_threads);
  pr->add_option("--out", pr_out);

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Compare a checkpoint against a truth dataset");
  std::string ev_checkpoint, ev_truth, ev_mask, ev_out = "metrics.json";
  int ev_threads = 0;
  ev->add_option("--checkpoint", ev_checkpoint)->required();
  ev->add_option("--truth", ev_truth)->required();
  ev->add_option("--mask", ev_mask, "override the truth mask, e.g. 1,1,0");
  ev->add_option("--threads", ev_threads);
  ev->add_option("--out", ev_out);

  // ---- downsample ----
  auto* dn = app.add_subcommand("downsample", "Block-average a structured dataset");
  std::string dn_dataset, dn_out = "downsampled.csv";
  int dn_factor = 2, dn_passes = 1;
  dn->add_option("--dataset", dn_dataset)->required();
  dn->add_option("--factor", dn_factor, "per-axis block edge (2 or 4)");
  dn->add_option("--passes", dn_passes);
  dn->add_option("--out", dn_out);

  // ---- rate-check ----
  auto* rc = app.add_subcommand("rate-check", "Monte-Carlo convergence-rate estimate");
  int rc_q = 1, rc_beta = 2, rc_trials = 20, rc_tests = 64;
  double rc_noise = 0.1, rc_c = 0.8;
  std::uint64_t rc_seed = 0;
  std::vector<int> rc_counts;
  std::string rc_out = "rate_check.json";
  rc->add_option("--q", rc_q);
  rc->add_option("--beta", rc_beta);
  rc->add_option("--noise", rc_noise);
  rc->add_option("--bandwidth-constant", rc_c);
  rc->add_option("--trials", rc_trials);
  rc->add_option("--test-points", rc_tests);
  rc->add_option("--counts", rc_counts, "sample sizes (default 2^7..2^14)");
  rc->add_option("--seed", rc_seed);
  rc->add_option("--out", rc_out);

  // ---- decay-demo ----
  auto* dd = app.add_subcommand("decay-demo", "Far-field behavior of both predictors");
  int dd_n = 12;
  double dd_sigma = 0.05;
  std::vector<double> dd_dist;
  std::uint64_t dd_seed = 0;
  std::string dd_out = "decay_demo.json";
  dd->add_option("--gaussians", dd_n);
  dd->add_option("--sigma", dd_sigma);
  dd->add_option("--distances", dd_dist, "probe distances in sigmas (default 1,2,5,10,20)");
  dd->add_option("--seed", dd_seed);
  dd->add_option("--out", dd_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ngs::FieldDataset ds = [&] {
        if (gen_kind == "rosenbrock") return ngs::generate_rosenbrock(gen_nx, gen_ny, gen_lo, gen_hi);
        if (gen_kind == "taylor-green")
          return ngs::generate_taylor_green(gen_nx, gen_ny, gen_nt, gen_t_end, gen_nu);
        if (gen_kind == "burgers") {
          ngs::BurgersOptions opts;
          opts.nu = gen_nu;
          opts.t_end = gen_t_end;
          return ngs::generate_burgers(gen_nx, gen_nt, opts);
        }
        throw std::runtime_error("unknown dataset kind '" + gen_kind + "'");
      }();
      save_dataset_atomic(ds, gen_out);
      std::cout << "wrote " << gen_out << " (" << ds.count() << " points)\n";
    }

    if (fit->parsed()) {
      const fs::path dir = resolve_output_dir(fit_out);
      const ngs::FieldDataset ds = ngs::generate_rosenbrock(fit_nx, fit_ny, fit_lo, fit_hi);
      ngs::GridInit init;
      init.count = fit_n;
      const ngs::GaussianField f0 = ngs::init_from_grid(ds, init, fit_z);

      ngs::TrainConfig cfg;
      cfg.learning_rate = fit_lr;
      cfg.epochs = fit_epochs;
      cfg.lambda = 0.0;
      cfg.seed = fit_seed;
      cfg.threads = env_threads(fit_threads);
      cfg.ablation.use_unnormalized = fit_unnorm;
      cfg.ablation.freeze_positions = fit_freeze;
      cfg.ablation.disable_density_control = fit_no_density;

      const ngs::TrainResult result = ngs::train(ds, f0, ngs::PdeSpec::none(), cfg);

      const Eigen::MatrixXd pred =
          fit_unnorm ? ngs::predict_many_unnormalized(result.field, ds.coords, cfg.threads)
                     : ngs::predict_many(result.field, ds.coords, cfg.threads);
      const double rel = ngs::relative_l2(pred, ds.values, ds.mask);
      const double rms = ngs::rmse(pred, ds.values, ds.mask);

      save_field_atomic(result.field, dir / "checkpoint.txt");
      write_atomic(dir / "report.csv", report_csv(result.report));
      json metrics = metrics_json(rel, rms, ds.count(), ds.mask);
      metrics["gaussians"] = result.field.size();
      write_atomic(dir / "metrics.json", metrics.dump(2));
      json echo;
      echo["command"] = "fit-function";
      echo["gaussians"] = fit_n;
      echo["actual_gaussians"] = f0.size();
      echo["grid"] = {fit_nx, fit_ny};
      echo["domain"] = {fit_lo, fit_hi};
      echo["epochs"] = fit_epochs;
      echo["learning_rate"] = fit_lr;
      echo["z_threshold"] = fit_z;
      echo["seed"] = fit_seed;
      echo["unnormalized"] = fit_unnorm;
      echo["freeze_positions"] = fit_freeze;
      echo["disable_density_control"] = fit_no_density;
      write_atomic(dir / "config.json", echo.dump(2));
      write_atomic(dir / "summary.json",
                   summary_json(result.report, (dir / "checkpoint.txt").string()).dump(2));
      std::cout << "relative_l2 " << rel << " rmse " << rms << " gaussians "
                << result.field.size() << "\n";
    }

    if (tr->parsed()) {
      ngs::RunConfig cfg = ngs::load_run_config(tr_config);
      if (!tr_out_override.empty()) cfg.output_dir = tr_out_override;
      if (tr_lr) cfg.train.learning_rate = *tr_lr;
      if (tr_epochs) cfg.train.epochs = *tr_epochs;
      if (tr_batch) cfg.train.batch_size = *tr_batch;
      if (tr_lambda) cfg.train.lambda = *tr_lambda;
      if (tr_interval) cfg.train.density.interval = *tr_interval;
      if (tr_dt) cfg.train.density.densify_threshold = *tr_dt;
      if (tr_sct) cfg.train.density.split_clone_threshold = *tr_sct;
      if (tr_mt) cfg.train.density.merge_threshold = *tr_mt;
      if (tr_z) cfg.z_threshold = *tr_z;
      if (tr_seed) cfg.train.seed = *tr_seed;
      if (tr_threads) cfg.train.threads = *tr_threads;
      cfg.train.threads = env_threads(cfg.train.threads);
      cfg.validate();

      const fs::path dir = resolve_output_dir(cfg.output_dir);
      ngs::FieldDataset ds = ngs::load_dataset(cfg.dataset_path, cfg.layout);
      if (cfg.mask) {
        if (static_cast<int>(cfg.mask->size()) != ds.channels())
          throw std::runtime_error("config mask length does not match dataset channels");
        ds.mask = Eigen::Map<const Eigen::VectorXd>(cfg.mask->data(), ds.channels());
      }
      const ngs::GaussianField f0 = ngs::init_from_grid(ds, cfg.init, cfg.z_threshold);
      const ngs::TrainResult result = ngs::train(ds, f0, cfg.pde, cfg.train);

      save_field_atomic(result.field, dir / "checkpoint.txt");
      write_atomic(dir / "report.csv", report_csv(result.report));
      write_atomic(dir / "config.json", ngs::run_config_to_json(cfg));
      write_atomic(dir / "summary.json",
                   summary_json(result.report, (dir / "checkpoint.txt").string()).dump(2));
      std::cout << "final total loss " << result.report.final_epoch().total_loss << ", "
                << result.field.size() << " gaussians, " << result.report.total_seconds << "s\n";
    }

    if (pr->parsed()) {
      const ngs::GaussianField field = ngs::load_field(pr_checkpoint);
      Eigen::MatrixXd coords;
      if (!pr_grid.empty()) {
        const auto axes = parse_grid(pr_grid);
        if (static_cast<int>(axes.size()) != field.dim())
          throw std::runtime_error("grid has " + std::to_string(axes.size()) +
                                   " axes, checkpoint has q=" + std::to_string(field.dim()));
        long total = 1;
        for (const auto& a : axes) total *= a.n;
        coords.resize(total, field.dim());
        std::vector<int> idx(axes.size(), 0);
        for (long r = 0; r < total; ++r) {
          for (size_t j = 0; j < axes.size(); ++j)
            coords(r, j) = axes[j].n == 1
                               ? axes[j].lo
                               : axes[j].lo + idx[j] * (axes[j].hi - axes[j].lo) / (axes[j].n - 1);
          for (int j = static_cast<int>(axes.size()) - 1; j >= 0; --j) {
            if (++idx[j] < axes[j].n) break;
            idx[j] = 0;
          }
        }
      } else if (!pr_points.empty()) {
        coords = ngs::load_dataset(pr_points).coords;
      } else {
        throw std::runtime_error("predict needs --grid or --points");
      }
      ngs::FieldDataset out;
      out.coords = coords;
      out.values = ngs::predict_many(field, coords, env_threads(pr_threads));
      out.mask = Eigen::VectorXd::Ones(field.channels());
      save_dataset_atomic(out, pr_out);
      std::cout << "wrote " << pr_out << " (" << out.count() << " points)\n";
    }

    if (ev->parsed()) {
      const ngs::GaussianField field = ngs::load_field(ev_checkpoint);
      const ngs::FieldDataset truth = ngs::load_dataset(ev_truth);
      if (truth.dim() != field.dim() || truth.channels() != field.channels())
        throw std::runtime_error("truth layout (q=" + std::to_string(truth.dim()) + ", p=" +
                                 std::to_string(truth.channels()) +
                                 ") does not match checkpoint (q=" + std::to_string(field.dim()) +
                                 ", p=" + std::to_string(field.channels()) + ")");
      Eigen::VectorXd mask = truth.mask;
      if (!ev_mask.empty()) mask = parse_mask(ev_mask, truth.channels());
      const Eigen::MatrixXd pred = ngs::predict_many(field, truth.coords, env_threads(ev_threads));
      const double rel = ngs::relative_l2(pred, truth.values, mask);
      const double rms = ngs::rmse(pred, truth.values, mask);
      write_atomic(ev_out, metrics_json(rel, rms, truth.count(), mask).dump(2));
      std::cout << "relative_l2 " << rel << " rmse " << rms << "\n";
    }

    if (dn->parsed()) {
      const ngs::FieldDataset ds = ngs::load_dataset(dn_dataset);
      const ngs::FieldDataset avg = ngs::spatial_average(ds, dn_factor, dn_passes);
      save_dataset_atomic(avg, dn_out);
      std::cout << "wrote " << dn_out << " (" << avg.count() << " points)\n";
    }

    if (rc->parsed()) {
      ngs::RateExperiment exp;
      exp.q = rc_q;
      exp.beta = rc_beta;
      exp.noise_sigma = rc_noise;
      exp.bandwidth_constant = rc_c;
      exp.trials = rc_trials;
      exp.test_points = rc_tests;
      exp.seed = rc_seed;
      exp.box_lo = 0.0;
      exp.box_hi = 2.0 * M_PI;
      exp.target = [](const Eigen::VectorXd& x) {
        double acc = 0.0;
        for (int j = 0; j < x.size(); ++j) acc += std::sin(x[j]);
        return acc;
      };
      if (rc_counts.empty())
        for (int e = 7; e <= 14; ++e) exp.sample_counts.push_back(1 << e);
      else
        exp.sample_counts = rc_counts;

      const ngs::RateResult result = ngs::run_rate_experiment(exp);
      json j;
      j["sample_counts"] = result.sample_counts;
      j["mean_rmse"] = result.mean_rmse;
      j["slope"] = result.slope;
      j["slope_stderr"] = result.slope_stderr;
      j["exact_fit"] = result.exact_fit;
      j["expected_slope"] = -static_cast<double>(rc_beta) / (2.0 * rc_beta + rc_q);
      write_atomic(rc_out, j.dump(2));
      std::cout << "slope " << result.slope << " (expected "
                << j["expected_slope"].get<double>() << ")\n";
    }

    if (dd->parsed()) {
      if (dd_dist.empty()) dd_dist = {1.0, 2.0, 5.0, 10.0, 20.0};
      const auto probes = ngs::run_unnormalized_decay_demo(dd_n, dd_sigma, dd_dist, dd_seed);
      json j = json::array();
      for (const auto& p : probes) {
        json row;
        row["distance_sigmas"] = p.distance;
        row["unnormalized_norm"] = p.unnormalized_norm;
        row["normalized_norm"] = p.normalized_norm;
        j.push_back(row);
      }
      write_atomic(dd_out, j.dump(2));
      std::cout << "wrote " << dd_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
