#include "ngsplat/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ngs {

namespace {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, delim)) out.push_back(item);
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("dataset: bad value '" + tok + "' in metadata key " + key);
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (double v : parse_double_list(s, key)) out.push_back(static_cast<int>(v));
  return out;
}

}  // namespace

int GridMeta::point_count() const {
  int n = 1;
  for (int c : axis_counts) n *= c;
  return n;
}

void FieldDataset::validate() const {
  if (coords.rows() < 1) throw std::invalid_argument("dataset: must contain at least one point");
  if (coords.cols() < 1) throw std::invalid_argument("dataset: q must be >= 1");
  if (values.cols() < 1) throw std::invalid_argument("dataset: p must be >= 1");
  if (values.rows() != coords.rows())
    throw std::invalid_argument("dataset: coords and values row counts differ");
  if (mask.size() != values.cols())
    throw std::invalid_argument("dataset: mask length must equal p");
  if (!coords.allFinite() || !values.allFinite())
    throw std::invalid_argument("dataset: non-finite entry");
  for (int a = 0; a < mask.size(); ++a)
    if (mask[a] != 0.0 && mask[a] != 1.0)
      throw std::invalid_argument("dataset: mask entries must be 0 or 1");
  if (grid) {
    if (static_cast<int>(grid->axis_counts.size()) != dim() ||
        static_cast<int>(grid->spacing.size()) != dim() ||
        static_cast<int>(grid->origin.size()) != dim())
      throw std::invalid_argument("dataset: grid metadata dimension mismatch");
    if (grid->point_count() != count())
      throw std::invalid_argument("dataset: grid metadata names " +
                                  std::to_string(grid->point_count()) + " points, dataset has " +
                                  std::to_string(count()));
    if (grid->time_axis >= dim())
      throw std::invalid_argument("dataset: grid time_axis out of range");
  }
}

double FieldDataset::mean_nearest_neighbor_spacing() const {
  const int k = count();
  if (k < 2) return 1.0;
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      best = std::min(best, (coords.row(i) - coords.row(j)).norm());
    }
    acc += best;
  }
  return acc / k;
}

FieldDataset load_dataset(const std::filesystem::path& path, std::optional<DatasetLayout> layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path.string());

  int q = -1, p = -1;
  std::optional<GridMeta> grid_meta;
  GridMeta grid;
  bool has_counts = false, has_spacing = false, has_origin = false;
  PhysicsMeta physics;
  std::vector<double> mask_values;
  std::string line;
  int line_no = 0;
  std::string header;

  // Metadata lines, then the column-name header, then one point per row.
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      const size_t eq = body.find('=');
      if (eq == std::string::npos) continue;  // free-form comment
      std::string key = body.substr(0, eq);
      std::string value = body.substr(eq + 1);
      key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
      value.erase(std::remove_if(value.begin(), value.end(), ::isspace), value.end());
      if (key == "q") q = std::stoi(value);
      else if (key == "p") p = std::stoi(value);
      else if (key == "mask") mask_values = parse_double_list(value, key);
      else if (key == "grid_axes") { grid.axis_counts = parse_int_list(value, key); has_counts = true; }
      else if (key == "grid_spacing") { grid.spacing = parse_double_list(value, key); has_spacing = true; }
      else if (key == "grid_origin") { grid.origin = parse_double_list(value, key); has_origin = true; }
      else if (key == "time_axis") grid.time_axis = std::stoi(value);
      else if (key == "reynolds") physics.reynolds = std::stod(value);
      else if (key == "viscosity") physics.viscosity = std::stod(value);
      else if (key == "length_scale") physics.length_scale = std::stod(value);
      else if (key == "velocity_scale") physics.velocity_scale = std::stod(value);
      continue;
    }
    header = line;
    break;
  }
  if (header.empty())
    throw std::runtime_error("dataset: " + path.string() + " has no column header row");

  if (q < 0 || p < 0) {
    if (!layout)
      throw std::runtime_error("dataset: " + path.string() +
                               " carries no layout metadata; a column layout (q, p) is required");
    q = layout->q;
    p = layout->p;
  }
  if (q < 1 || p < 1) throw std::runtime_error("dataset: invalid layout (q, p)");

  const auto columns = split(header, ',');
  if (static_cast<int>(columns.size()) != q + p)
    throw std::runtime_error("dataset: " + path.string() + " header names " +
                             std::to_string(columns.size()) + " columns, layout needs " +
                             std::to_string(q + p) + " (q=" + std::to_string(q) +
                             " coordinates then p=" + std::to_string(p) + " values)");

  std::vector<double> flat;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != q + p)
      throw std::runtime_error("dataset: " + path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(q + p) + " columns, found " +
                               std::to_string(cells.size()));
    for (int c = 0; c < q + p; ++c) {
      double v;
      try {
        size_t pos = 0;
        v = std::stod(cells[c], &pos);
        if (pos != cells[c].size()) throw std::invalid_argument(cells[c]);
      } catch (const std::exception&) {
        throw std::runtime_error("dataset: " + path.string() + ":" + std::to_string(line_no) +
                                 ": column '" + columns[c] + "' has unparseable value '" +
                                 cells[c] + "'");
      }
      if (!std::isfinite(v))
        throw std::runtime_error("dataset: " + path.string() + ":" + std::to_string(line_no) +
                                 ": column '" + columns[c] + "' is non-finite");
      flat.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("dataset: " + path.string() + " contains no points");

  FieldDataset ds;
  ds.coords.resize(rows, q);
  ds.values.resize(rows, p);
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < q; ++j) ds.coords(r, j) = flat[static_cast<size_t>(r) * (q + p) + j];
    for (int a = 0; a < p; ++a) ds.values(r, a) = flat[static_cast<size_t>(r) * (q + p) + q + a];
  }
  if (mask_values.empty()) {
    ds.mask = Eigen::VectorXd::Ones(p);
  } else {
    if (static_cast<int>(mask_values.size()) != p)
      throw std::runtime_error("dataset: mask metadata length does not match p");
    ds.mask = Eigen::Map<Eigen::VectorXd>(mask_values.data(), p);
  }
  if (has_counts || has_spacing || has_origin) {
    if (!(has_counts && has_spacing && has_origin))
      throw std::runtime_error("dataset: grid metadata requires grid_axes, grid_spacing and grid_origin");
    grid_meta = grid;
  }
  ds.grid = grid_meta;
  ds.physics = physics;

  // Non-dimensionalize at ingestion: coordinates /L, time·U/L, velocities
  // /U, pressure /U² (modified pressure with unit density).
  const double L = physics.length_scale.value_or(1.0);
  const double U = physics.velocity_scale.value_or(1.0);
  if (L != 1.0 || U != 1.0) {
    const int time_axis = ds.grid ? ds.grid->time_axis : -1;
    for (int j = 0; j < q; ++j) {
      const double scale = (j == time_axis) ? U / L : 1.0 / L;
      ds.coords.col(j) *= scale;
      if (ds.grid) {
        ds.grid->spacing[j] *= scale;
        ds.grid->origin[j] *= scale;
      }
    }
    // Velocity channels are the leading spatial-dimension block; any
    // remaining channels are treated as (modified) pressure.
    const int d = (time_axis >= 0) ? q - 1 : q;
    for (int a = 0; a < p; ++a) {
      const double scale = (a < d) ? 1.0 / U : 1.0 / (U * U);
      ds.values.col(a) *= scale;
    }
    if (physics.viscosity && !physics.reynolds)
      ds.physics.reynolds = U * L / *physics.viscosity;
    // Scales are consumed: the in-memory dataset is dimensionless, and
    // saving it again must not trigger a second rescale.
    ds.physics.length_scale.reset();
    ds.physics.velocity_scale.reset();
  }

  ds.validate();
  return ds;
}

void save_dataset(const FieldDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot open " + path.string() + " for writing");
  const int q = dataset.dim(), p = dataset.channels();
  out << "# ngsplat dataset v1\n";
  out << "# q=" << q << "\n# p=" << p << '\n';
  out << "# mask=";
  for (int a = 0; a < p; ++a) out << dataset.mask[a] << (a + 1 == p ? '\n' : ',');
  if (dataset.grid) {
    out << "# grid_axes=";
    for (int j = 0; j < q; ++j)
      out << dataset.grid->axis_counts[j] << (j + 1 == q ? '\n' : ',');
    out << "# grid_spacing=";
    for (int j = 0; j < q; ++j)
      out << format_full(dataset.grid->spacing[j]) << (j + 1 == q ? '\n' : ',');
    out << "# grid_origin=";
    for (int j = 0; j < q; ++j)
      out << format_full(dataset.grid->origin[j]) << (j + 1 == q ? '\n' : ',');
    if (dataset.grid->time_axis >= 0) out << "# time_axis=" << dataset.grid->time_axis << '\n';
  }
  if (dataset.physics.reynolds) out << "# reynolds=" << format_full(*dataset.physics.reynolds) << '\n';
  if (dataset.physics.viscosity)
    out << "# viscosity=" << format_full(*dataset.physics.viscosity) << '\n';
  if (dataset.physics.length_scale)
    out << "# length_scale=" << format_full(*dataset.physics.length_scale) << '\n';
  if (dataset.physics.velocity_scale)
    out << "# velocity_scale=" << format_full(*dataset.physics.velocity_scale) << '\n';
  for (int j = 0; j < q; ++j) out << 'x' << j << ',';
  for (int a = 0; a < p; ++a) out << 'v' << a << (a + 1 == p ? '\n' : ',');
  for (int r = 0; r < dataset.count(); ++r) {
    for (int j = 0; j < q; ++j) out << format_full(dataset.coords(r, j)) << ',';
    for (int a = 0; a < p; ++a)
      out << format_full(dataset.values(r, a)) << (a + 1 == p ? '\n' : ',');
  }
  if (!out) throw std::runtime_error("dataset: write failed for " + path.string());
}

FieldDataset spatial_average(const FieldDataset& dataset, int factor, int passes) {
  dataset.validate();
  if (factor != 2 && factor != 4)
    throw std::invalid_argument("spatial_average: factor must be 2 or 4");
  if (passes < 1) throw std::invalid_argument("spatial_average: passes must be >= 1");
  if (!dataset.grid)
    throw std::invalid_argument("spatial_average: dataset has no grid metadata");

  FieldDataset current = dataset;
  for (int pass = 0; pass < passes; ++pass) {
    const GridMeta& g = *current.grid;
    const int q = current.dim();
    const int p = current.channels();

    std::vector<int> in_counts = g.axis_counts;
    std::vector<int> out_counts(q);
    std::vector<int> block(q);
    for (int j = 0; j < q; ++j) {
      if (j == g.time_axis) {
        block[j] = 1;
        out_counts[j] = in_counts[j];
        continue;
      }
      block[j] = factor;
      out_counts[j] = in_counts[j] / factor;
      if (out_counts[j] < 1)
        throw std::invalid_argument("spatial_average: axis " + std::to_string(j) +
                                    " has too few points for factor " + std::to_string(factor));
      if (in_counts[j] % factor != 0)
        std::cerr << "spatial_average: axis " << j << " count " << in_counts[j]
                  << " not divisible by " << factor << ", dropping remainder\n";
    }

    long out_total = 1;
    for (int j = 0; j < q; ++j) out_total *= out_counts[j];

    FieldDataset next;
    next.coords.resize(out_total, q);
    next.values.resize(out_total, p);
    next.mask = current.mask;
    next.physics = current.physics;

    std::vector<long> in_strides(q, 1);
    for (int j = q - 2; j >= 0; --j) in_strides[j] = in_strides[j + 1] * in_counts[j + 1];

    long blocks_per_cell = 1;
    for (int j = 0; j < q; ++j) blocks_per_cell *= block[j];

    std::vector<int> out_idx(q, 0);
    for (long r = 0; r < out_total; ++r) {
      Eigen::VectorXd coord_acc = Eigen::VectorXd::Zero(q);
      Eigen::VectorXd value_acc = Eigen::VectorXd::Zero(p);
      std::vector<int> off(q, 0);
      for (long b = 0; b < blocks_per_cell; ++b) {
        long flat = 0;
        for (int j = 0; j < q; ++j) flat += (out_idx[j] * block[j] + off[j]) * in_strides[j];
        coord_acc += current.coords.row(flat).transpose();
        value_acc += current.values.row(flat).transpose();
        for (int j = q - 1; j >= 0; --j) {
          if (++off[j] < block[j]) break;
          off[j] = 0;
        }
      }
      next.coords.row(r) = (coord_acc / blocks_per_cell).transpose();
      next.values.row(r) = (value_acc / blocks_per_cell).transpose();
      for (int j = q - 1; j >= 0; --j) {
        if (++out_idx[j] < out_counts[j]) break;
        out_idx[j] = 0;
      }
    }

    GridMeta out_grid;
    out_grid.axis_counts = out_counts;
    out_grid.time_axis = g.time_axis;
    out_grid.spacing.resize(q);
    out_grid.origin.resize(q);
    for (int j = 0; j < q; ++j) {
      out_grid.spacing[j] = g.spacing[j] * block[j];
      out_grid.origin[j] = g.origin[j] + g.spacing[j] * (block[j] - 1) / 2.0;
    }
    next.grid = out_grid;
    next.validate();
    current = std::move(next);
  }
  return current;
}

namespace {

// Row-major structured grid: first axis slowest.
FieldDataset build_grid_dataset(const std::vector<int>& counts, const std::vector<double>& lo,
                                const std::vector<double>& spacing, int p, int time_axis,
                                const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
  const int q = static_cast<int>(counts.size());
  long total = 1;
  for (int c : counts) total *= c;
  FieldDataset ds;
  ds.coords.resize(total, q);
  ds.values.resize(total, p);
  ds.mask = Eigen::VectorXd::Ones(p);
  std::vector<int> idx(q, 0);
  Eigen::VectorXd x(q);
  for (long r = 0; r < total; ++r) {
    for (int j = 0; j < q; ++j) x[j] = lo[j] + idx[j] * spacing[j];
    ds.coords.row(r) = x.transpose();
    ds.values.row(r) = f(x).transpose();
    for (int j = q - 1; j >= 0; --j) {
      if (++idx[j] < counts[j]) break;
      idx[j] = 0;
    }
  }
  GridMeta g;
  g.axis_counts = counts;
  g.origin = lo;
  g.spacing = spacing;
  g.time_axis = time_axis;
  ds.grid = g;
  return ds;
}

}  // namespace

FieldDataset generate_rosenbrock(int nx, int ny, double lo, double hi) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("rosenbrock: nx, ny must be >= 2");
  if (!(hi > lo)) throw std::invalid_argument("rosenbrock: hi must exceed lo");
  const double dx = (hi - lo) / (nx - 1);
  const double dy = (hi - lo) / (ny - 1);
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(1);
    const double a = 1.0 - x[0];
    const double b = x[0] - x[1] * x[1];
    v[0] = a * a + 100.0 * b * b;
    return v;
  };
  FieldDataset ds = build_grid_dataset({nx, ny}, {lo, lo}, {dx, dy}, 1, -1, f);
  ds.validate();
  return ds;
}

Eigen::Vector3d taylor_green_value(double x, double y, double t, double nu) {
  const double decay = std::exp(-2.0 * nu * t);
  Eigen::Vector3d v;
  v[0] = -std::cos(x) * std::sin(y) * decay;
  v[1] = std::sin(x) * std::cos(y) * decay;
  v[2] = -0.25 * (std::cos(2.0 * x) + std::cos(2.0 * y)) * decay * decay;
  return v;
}

FieldDataset generate_taylor_green(int nx, int ny, int nt, double t_end, double nu) {
  if (nx < 2 || ny < 2 || nt < 1)
    throw std::invalid_argument("taylor_green: nx, ny >= 2 and nt >= 1 required");
  if (!(nu > 0.0)) throw std::invalid_argument("taylor_green: nu must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("taylor_green: t_end must be >= 0");
  const double two_pi = 2.0 * M_PI;
  const double dx = two_pi / (nx - 1);
  const double dy = two_pi / (ny - 1);
  const double dt = nt > 1 ? t_end / (nt - 1) : 1.0;
  auto f = [nu](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(taylor_green_value(x[0], x[1], x[2], nu));
  };
  FieldDataset ds = build_grid_dataset({nx, ny, nt}, {0.0, 0.0, 0.0}, {dx, dy, dt}, 3, 2, f);
  ds.physics.viscosity = nu;
  ds.physics.reynolds = 1.0 / nu;
  ds.validate();
  return ds;
}

double relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                   const Eigen::VectorXd& mask) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("relative_l2: shape mismatch");
  if (mask.size() != pred.cols()) throw std::invalid_argument("relative_l2: mask length mismatch");
  double num = 0.0, den = 0.0;
  for (int a = 0; a < pred.cols(); ++a) {
    if (mask[a] == 0.0) continue;
    num += (pred.col(a) - truth.col(a)).squaredNorm();
    den += truth.col(a).squaredNorm();
  }
  if (den == 0.0)
    throw std::invalid_argument("relative_l2: masked truth is identically zero");
  return std::sqrt(num / den);
}

double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
            const Eigen::VectorXd& mask) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("rmse: shape mismatch");
  if (mask.size() != pred.cols()) throw std::invalid_argument("rmse: mask length mismatch");
  double num = 0.0;
  for (int a = 0; a < pred.cols(); ++a) {
    if (mask[a] == 0.0) continue;
    num += (pred.col(a) - truth.col(a)).squaredNorm();
  }
  return std::sqrt(num / static_cast<double>(pred.rows()));
}

}  // namespace ngs
