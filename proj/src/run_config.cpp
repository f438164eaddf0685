#include "ngsplat/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ngs {

using nlohmann::json;

void RunConfig::validate() const {
  if (dataset_path.empty()) throw std::invalid_argument("config: dataset.path is required");
  train.validate();
  if (z_threshold < 0.0) throw std::invalid_argument("config: z_threshold must be >= 0");
  if (output_dir.empty()) throw std::invalid_argument("config: output_dir must be non-empty");
  int modes = (init.count ? 1 : 0) + (init.axis_counts.empty() ? 0 : 1) + (init.stride ? 1 : 0);
  if (modes != 1)
    throw std::invalid_argument("config: init needs exactly one of count, axis_counts, stride");
}

namespace {

[[noreturn]] void fail_key(const std::string& key, const std::string& what) {
  throw std::runtime_error("config: key '" + key + "': " + what);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail_key(key, e.what());
  }
}

PdeSpec parse_pde(const json& j) {
  const std::string type = get_or<std::string>(j, "type", "none");
  if (type == "none") return PdeSpec::none();
  if (type == "steady_ns_2d") {
    if (!j.contains("reynolds")) fail_key("pde.reynolds", "required for steady_ns_2d");
    return PdeSpec::steady_ns_2d(j.at("reynolds").get<double>(),
                                 get_or<int>(j, "pressure_channel", 2));
  }
  if (type == "unsteady_ns") {
    if (!j.contains("reynolds")) fail_key("pde.reynolds", "required for unsteady_ns");
    return PdeSpec::unsteady_ns(j.at("reynolds").get<double>(),
                                get_or<int>(j, "spatial_dims", 3),
                                get_or<int>(j, "time_axis", -1),
                                get_or<int>(j, "pressure_channel", -1));
  }
  if (type == "burgers") {
    if (!j.contains("viscosity")) fail_key("pde.viscosity", "required for burgers");
    return PdeSpec::burgers(j.at("viscosity").get<double>(), get_or<int>(j, "time_axis", 1));
  }
  fail_key("pde.type", "unknown value '" + type + "'");
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Map the byte offset to a line number for the diagnostic.
    size_t line = 1;
    for (size_t i = 0; i < std::min(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw std::runtime_error("config: " + path.string() + ":" + std::to_string(line) + ": " +
                             e.what());
  }

  RunConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    cfg.dataset_path = get_or<std::string>(d, "path", "");
    if (d.contains("q") != d.contains("p"))
      fail_key("dataset", "q and p must be given together");
    if (d.contains("q")) cfg.layout = DatasetLayout{d.at("q").get<int>(), d.at("p").get<int>()};
    if (d.contains("mask")) cfg.mask = d.at("mask").get<std::vector<double>>();
  }
  if (j.contains("pde")) cfg.pde = parse_pde(j.at("pde"));
  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.train.learning_rate = get_or<double>(t, "learning_rate", cfg.train.learning_rate);
    cfg.train.epochs = get_or<int>(t, "epochs", cfg.train.epochs);
    cfg.train.batch_size = get_or<int>(t, "batch_size", cfg.train.batch_size);
    cfg.train.lambda = get_or<double>(t, "pde_weight", cfg.train.lambda);
    cfg.train.seed = get_or<std::uint64_t>(t, "seed", cfg.train.seed);
    cfg.train.threads = get_or<int>(t, "threads", cfg.train.threads);
    cfg.train.density.interval = get_or<int>(t, "densification_step", cfg.train.density.interval);
    cfg.train.density.densify_threshold =
        get_or<double>(t, "densification_threshold", cfg.train.density.densify_threshold);
    cfg.train.density.split_clone_threshold =
        get_or<double>(t, "split_clone_threshold", cfg.train.density.split_clone_threshold);
    cfg.train.density.merge_threshold =
        get_or<double>(t, "merging_threshold", cfg.train.density.merge_threshold);
    cfg.train.ablation.freeze_positions =
        get_or<bool>(t, "freeze_positions", cfg.train.ablation.freeze_positions);
    cfg.train.ablation.disable_density_control =
        get_or<bool>(t, "disable_density_control", cfg.train.ablation.disable_density_control);
    cfg.train.ablation.use_unnormalized =
        get_or<bool>(t, "use_unnormalized", cfg.train.ablation.use_unnormalized);
    if (t.contains("time_budget_seconds") && !t.at("time_budget_seconds").is_null())
      cfg.train.time_budget_seconds = t.at("time_budget_seconds").get<double>();
  }
  if (j.contains("init")) {
    const json& i = j.at("init");
    if (i.contains("count")) cfg.init.count = i.at("count").get<int>();
    if (i.contains("axis_counts")) cfg.init.axis_counts = i.at("axis_counts").get<std::vector<int>>();
    if (i.contains("stride")) cfg.init.stride = i.at("stride").get<int>();
  } else {
    cfg.init.count = 400;
  }
  cfg.z_threshold = get_or<double>(j, "z_threshold", cfg.z_threshold);
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.validate();
  return cfg;
}

std::string run_config_to_json(const RunConfig& config) {
  json j;
  j["dataset"]["path"] = config.dataset_path;
  if (config.layout) {
    j["dataset"]["q"] = config.layout->q;
    j["dataset"]["p"] = config.layout->p;
  }
  if (config.mask) j["dataset"]["mask"] = *config.mask;

  json pde;
  switch (config.pde.kind()) {
    case PdeSpec::Kind::NoPde: pde["type"] = "none"; break;
    case PdeSpec::Kind::SteadyNS2D:
      pde["type"] = "steady_ns_2d";
      pde["reynolds"] = config.pde.reynolds();
      pde["pressure_channel"] = config.pde.pressure_channel();
      break;
    case PdeSpec::Kind::UnsteadyNS:
      pde["type"] = "unsteady_ns";
      pde["reynolds"] = config.pde.reynolds();
      pde["spatial_dims"] = config.pde.spatial_dims();
      pde["time_axis"] = config.pde.time_axis();
      pde["pressure_channel"] = config.pde.pressure_channel();
      break;
    case PdeSpec::Kind::Burgers:
      pde["type"] = "burgers";
      pde["viscosity"] = config.pde.viscosity();
      pde["time_axis"] = config.pde.time_axis();
      break;
  }
  j["pde"] = pde;

  json t;
  t["learning_rate"] = config.train.learning_rate;
  t["epochs"] = config.train.epochs;
  t["batch_size"] = config.train.batch_size;
  t["pde_weight"] = config.train.lambda;
  t["seed"] = config.train.seed;
  t["threads"] = config.train.threads;
  t["densification_step"] = config.train.density.interval;
  t["densification_threshold"] = config.train.density.densify_threshold;
  t["split_clone_threshold"] = config.train.density.split_clone_threshold;
  t["merging_threshold"] = config.train.density.merge_threshold;
  t["freeze_positions"] = config.train.ablation.freeze_positions;
  t["disable_density_control"] = config.train.ablation.disable_density_control;
  t["use_unnormalized"] = config.train.ablation.use_unnormalized;
  if (config.train.time_budget_seconds) t["time_budget_seconds"] = *config.train.time_budget_seconds;
  j["train"] = t;

  json init;
  if (config.init.count) init["count"] = *config.init.count;
  if (!config.init.axis_counts.empty()) init["axis_counts"] = config.init.axis_counts;
  if (config.init.stride) init["stride"] = *config.init.stride;
  j["init"] = init;

  j["z_threshold"] = config.z_threshold;
  j["output_dir"] = config.output_dir;
  return j.dump(2);
}

}  // namespace ngs
