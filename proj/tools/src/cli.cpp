// SPDX-License-Identifier: Apache-2.0
#include "octoconv_cli/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "octoconv/checkpoint.hpp"
#include "octoconv/config.hpp"
#include "octoconv/dataset_io.hpp"
#include "octoconv/equivariance.hpp"
#include "octoconv/error.hpp"
#include "octoconv/experiment.hpp"
#include "octoconv/froc.hpp"
#include "octoconv/parallel.hpp"

namespace octoconv::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class Format { kText, kCsv, kJsonLines };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string output_dir;
  std::string format = "text";
  int threads = 0;

  Format fmt() const {
    if (format == "csv") return Format::kCsv;
    if (format == "json-lines") return Format::kJsonLines;
    return Format::kText;
  }
};

/// Failure carrying its exit code and diagnostic kind.
struct CommandError : std::runtime_error {
  CommandError(int code, std::string kind, const std::string& what)
      : std::runtime_error(what), code(code), kind(std::move(kind)) {}
  int code;
  std::string kind;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != std::strlen(v)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw CommandError(kUsageError, "usage", std::string(name) + " must be an unsigned integer, got '" + v + "'");
  }
}

std::uint64_t resolve_seed(const Globals& g, std::uint64_t fallback) {
  if (g.seed) return *g.seed;
  if (auto e = env_u64("OCTOCONV_SEED")) return *e;
  return fallback;
}

void apply_threads(const Globals& g) {
  int n = g.threads;
  if (n <= 0) {
    const auto e = env_u64("OCTOCONV_THREADS");
    n = e ? static_cast<int>(*e) : 1;
  }
  set_max_threads(n);
}

fs::path output_dir(const Globals& g, const char* fallback) {
  fs::path dir = g.output_dir.empty() ? fs::path(fallback) : fs::path(g.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError(kIoError, "io", "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_output(const fs::path& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw CommandError(kIoError, "io", "cannot open " + path.string() + " for writing");
  return f;
}

// ---- groups inspect -------------------------------------------------------

void cmd_groups_inspect(const Globals& g, const std::string& name, bool voxel_action, std::ostream& out) {
  const SymmetryGroup group = build_group(parse_group_name(name));
  const PermutationRep rho = derive_rho(group);
  const std::size_t n = group.order();
  auto row_string = [](const auto& values) {
    std::string s;
    for (const auto& v : values) s += (s.empty() ? "" : " ") + std::to_string(v);
    return s;
  };
  auto cayley_row = [&](std::size_t a) {
    std::vector<std::size_t> r(n);
    for (std::size_t b = 0; b < n; ++b) r[b] = group.cayley(a, b);
    return r;
  };
  auto flat_matrix = [](const GroupElement& e) {
    std::vector<int> m;
    for (const auto& r : e.m) m.insert(m.end(), r.begin(), r.end());
    return m;
  };
  std::vector<Permutation> voxels;
  if (voxel_action)
    for (const auto& e : group.elements()) voxels.push_back(spatial_permutation(e, {3, 3, 3}).source);

  switch (g.fmt()) {
    case Format::kText: {
      out << "group " << to_string(group.name()) << "  order " << n << "\n\nelements (rows act on x, y, z):\n";
      for (std::size_t i = 0; i < n; ++i)
        out << "  g" << i << "  " << format_matrix(group.element(i)) << "  det " << std::showpos
            << group.element(i).determinant() << std::noshowpos << "  inverse g" << group.inverse(i) << '\n';
      out << "\ncayley table (row a, column b: index of a*b):\n";
      for (std::size_t a = 0; a < n; ++a) {
        out << "  ";
        for (std::size_t b = 0; b < n; ++b) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "%3zu", group.cayley(a, b));
          out << buf;
        }
        out << '\n';
      }
      out << "\nrho (channel o of rho(h) reads channel perm[o]):\n";
      for (std::size_t i = 0; i < n; ++i) out << "  g" << i << ": " << row_string(rho.perms[i]) << '\n';
      if (voxel_action) {
        out << "\nvoxel action on a 3x3x3 kernel (destination voxel reads source index):\n";
        for (std::size_t i = 0; i < n; ++i) out << "  g" << i << ": " << row_string(voxels[i]) << '\n';
      }
      break;
    }
    case Format::kCsv: {
      out << "section,row,values\n";
      for (std::size_t i = 0; i < n; ++i) out << "element," << i << ',' << row_string(flat_matrix(group.element(i))) << '\n';
      for (std::size_t a = 0; a < n; ++a) out << "cayley," << a << ',' << row_string(cayley_row(a)) << '\n';
      for (std::size_t i = 0; i < n; ++i) out << "rho," << i << ',' << row_string(rho.perms[i]) << '\n';
      for (std::size_t i = 0; i < voxels.size(); ++i) out << "voxel_action," << i << ',' << row_string(voxels[i]) << '\n';
      break;
    }
    case Format::kJsonLines: {
      for (std::size_t i = 0; i < n; ++i) {
        json j{{"group", to_string(group.name())},
               {"element", i},
               {"matrix", group.element(i).m},
               {"inverse", group.inverse(i)},
               {"cayley_row", cayley_row(i)},
               {"rho", rho.perms[i]}};
        if (voxel_action) j["voxel_action"] = voxels[i];
        out << j.dump() << '\n';
      }
      break;
    }
  }
}

// ---- check-equivariance ---------------------------------------------------

struct EquivarianceArgs {
  std::string group;
  std::size_t depth = 1;
  std::size_t trials = 2;
  double tolerance = 1e-4;
  bool corrupt = false;
};

int cmd_check_equivariance(const Globals& g, const EquivarianceArgs& a, std::ostream& out, std::ostream& err) {
  const SymmetryGroup group = build_group(parse_group_name(a.group));
  PermutationRep rho = derive_rho(group);
  if (a.corrupt) rho = corrupt_rho(rho);
  const std::uint64_t seed = resolve_seed(g, 0);

  EquivarianceOptions opt;
  opt.depth = a.depth;
  opt.trials = a.trials;
  opt.seed = seed;
  const EquivarianceReport plain = check_gconv_equivariance(group, rho, opt);
  opt.with_batchnorm = true;
  const EquivarianceReport with_bn = check_gconv_equivariance(group, rho, opt);
  opt.with_batchnorm = false;
  opt.integer_valued = true;
  opt.trials = 1;
  const EquivarianceReport integer = check_gconv_equivariance(group, rho, opt);

  const double worst_float = std::max(plain.worst, with_bn.worst);
  const bool ok = worst_float <= a.tolerance && integer.worst == 0.0;
  switch (g.fmt()) {
    case Format::kText:
      out << "group " << to_string(group.name()) << "  depth " << a.depth << "  trials " << a.trials << "  tolerance "
          << sci(a.tolerance) << '\n'
          << "element  float_error  float_bn_error  integer_error\n";
      for (std::size_t h = 0; h < group.order(); ++h)
        out << "  g" << h << std::string(h < 10 ? 6 : 5, ' ') << sci(plain.worst_per_element[h]) << "    "
            << sci(with_bn.worst_per_element[h]) << "       " << sci(integer.worst_per_element[h]) << '\n';
      out << "worst float error: " << sci(worst_float) << '\n'
          << "worst integer error: " << sci(integer.worst) << '\n'
          << "result: " << (ok ? "pass" : "FAIL") << '\n';
      break;
    case Format::kCsv:
      out << "element,float_error,float_bn_error,integer_error\n";
      for (std::size_t h = 0; h < group.order(); ++h)
        out << h << ',' << sci(plain.worst_per_element[h]) << ',' << sci(with_bn.worst_per_element[h]) << ','
            << sci(integer.worst_per_element[h]) << '\n';
      break;
    case Format::kJsonLines:
      for (std::size_t h = 0; h < group.order(); ++h)
        out << json{{"element", h},
                    {"float_error", plain.worst_per_element[h]},
                    {"float_bn_error", with_bn.worst_per_element[h]},
                    {"integer_error", integer.worst_per_element[h]}}
                   .dump()
            << '\n';
      out << json{{"group", to_string(group.name())},
                  {"depth", a.depth},
                  {"worst_float_error", worst_float},
                  {"worst_integer_error", integer.worst},
                  {"pass", ok}}
                 .dump()
          << '\n';
      break;
  }
  if (!ok) {
    err << "octoconv: error[equivariance]: worst float error " << sci(worst_float) << " (tolerance " << sci(a.tolerance)
        << "), worst integer error " << sci(integer.worst) << '\n';
    return kEquivarianceViolation;
  }
  return kOk;
}

// ---- datagen --------------------------------------------------------------

DatasetConfig profile_data(const std::string& profile) {
  if (profile == "desk") return DatasetConfig::desk();
  if (profile == "paper-shape") return DatasetConfig::paper_shape();
  throw CommandError(kUsageError, "usage", "unknown profile '" + profile + "' (expected desk or paper-shape)");
}

ModelConfig profile_model(const std::string& profile, GroupName group) {
  return profile == "paper-shape" ? ModelConfig::paper_shape(group) : ModelConfig::desk(group);
}

void write_reference(const fs::path& path, const std::vector<PatchSample>& test, const DatasetConfig& dc) {
  auto f = open_output(path);
  write_reference_csv(f, test_references(test, dc));
}

struct DatagenArgs {
  std::string profile = "desk";
  std::vector<std::size_t> train_sizes;
};

void cmd_datagen(const Globals& g, const DatagenArgs& a, std::ostream& out) {
  DatasetConfig dc = profile_data(a.profile);
  if (!a.train_sizes.empty()) dc.train_sizes = a.train_sizes;
  const std::uint64_t seed = resolve_seed(g, 0);
  const fs::path dir = output_dir(g, "octoconv-data");
  const Datasets ds = build_datasets(seed, dc);

  // Nested sizes share one directory; a run with size n uses its first n samples.
  const auto& largest = ds.train.rbegin()->second;
  write_split(dir / "train", largest, dc.spacing_mm);
  write_split(dir / "val", ds.val, dc.spacing_mm);
  write_split(dir / "test", ds.test, dc.spacing_mm);
  write_reference(dir / "test" / "reference.csv", ds.test, dc);
  {
    auto f = open_output(dir / "dataset.cfg");
    f << "# generated with seed " << seed << '\n';
    write_dataset_config(f, dc);
  }
  auto positives = [](const std::vector<PatchSample>& v) {
    return std::count_if(v.begin(), v.end(), [](const PatchSample& s) { return s.label == 1; });
  };
  if (g.fmt() == Format::kJsonLines) {
    for (const auto& [name, split] :
         {std::pair<std::string, const std::vector<PatchSample>*>{"train", &largest}, {"val", &ds.val}, {"test", &ds.test}})
      out << json{{"split", name}, {"samples", split->size()}, {"positives", positives(*split)}}.dump() << '\n';
  } else {
    out << "wrote " << dir.string() << " (seed " << seed << ")\n"
        << "  train: " << largest.size() << " samples, " << positives(largest) << " positive\n"
        << "  val:   " << ds.val.size() << " samples, " << positives(ds.val) << " positive\n"
        << "  test:  " << ds.test.size() << " samples, " << positives(ds.test) << " positive, " << dc.test_scans
        << " scans\n";
  }
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string group;
  std::size_t train_size = 0;
  std::string profile = "desk";
  bool datagen_inline = false;
  std::string data_dir;
  std::optional<std::size_t> max_epochs, patience;
  bool no_augment = false;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  DatasetConfig dc = profile_data(a.profile);
  ModelConfig mc = profile_model(a.profile, GroupName::kTrivial);
  TrainConfig tc;
  if (!g.config.empty()) apply_config_file(g.config, mc, tc);
  if (!a.group.empty()) mc.group_name = parse_group_name(a.group);
  if (a.max_epochs) tc.max_epochs = *a.max_epochs;
  if (a.patience) tc.patience = *a.patience;
  if (a.no_augment) tc.augment = false;
  tc.seed = resolve_seed(g, tc.seed);

  Datasets ds;
  std::string data_dir = a.data_dir;
  if (data_dir.empty() && !a.datagen_inline && fs::exists(fs::path("octoconv-data") / "dataset.cfg"))
    data_dir = "octoconv-data";
  if (!data_dir.empty()) {
    const fs::path dir(data_dir);
    dc = read_dataset_config(dir / "dataset.cfg");
    auto train_all = read_split(dir / "train");
    if (train_all.size() < a.train_size)
      throw CommandError(kUsageError, "config",
                         "data directory holds " + std::to_string(train_all.size()) + " training samples, " +
                             std::to_string(a.train_size) + " requested");
    train_all.resize(a.train_size);
    ds.train[a.train_size] = std::move(train_all);
    ds.val = read_split(dir / "val");
    ds.test = read_split(dir / "test");
  } else if (a.datagen_inline) {
    dc.train_sizes = {a.train_size};
    ds = build_datasets(tc.seed, dc);
  } else {
    throw CommandError(kUsageError, "usage", "no dataset: pass --data-dir DIR or --datagen-inline, or run datagen first");
  }
  mc.input_shape = {1, dc.patch_shape[0], dc.patch_shape[1], dc.patch_shape[2]};
  mc.validate();
  tc.validate();

  const fs::path dir = output_dir(g, "octoconv-run");
  const Format fmt = g.fmt();
  if (fmt == Format::kCsv) out << "epoch,train_loss,val_loss\n";
  auto on_epoch = [&](const EpochRecord& e) {
    if (fmt == Format::kText)
      out << "epoch " << e.epoch << "  train_loss " << fixed(e.train_loss, 8) << "  val_loss " << fixed(e.val_loss, 8)
          << '\n';
    else if (fmt == Format::kCsv)
      out << e.epoch << ',' << fixed(e.train_loss, 8) << ',' << fixed(e.val_loss, 8) << '\n';
    else
      out << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}}.dump() << '\n';
    out.flush();
  };

  Model model(mc);
  const RunResult r =
      run_experiment(mc, tc, ds.train.at(a.train_size), ds, dc, AugmentPolicy::standard(), on_epoch, &model);

  {
    auto f = open_output(dir / "checkpoint.bin", true);
    save_checkpoint(f, model);
  }
  {
    auto f = open_output(dir / "loss.csv");
    write_report_csv(f, r.report);
  }
  {
    auto f = open_output(dir / "predictions.csv");
    write_candidates_csv(f, r.candidates);
  }
  write_reference(dir / "reference.csv", ds.test, dc);

  if (fmt == Format::kText) {
    out << "group " << to_string(mc.group_name) << "  train_size " << a.train_size << "  parameters "
        << model.parameter_count() << '\n'
        << "best epoch " << r.report.best_epoch << "  best val_loss " << fixed(r.report.best_val_loss, 8) << '\n'
        << "test overall_score " << fixed(r.froc.overall_score) << '\n'
        << "wrote " << (dir / "checkpoint.bin").string() << ", loss.csv, predictions.csv, reference.csv\n";
  } else if (fmt == Format::kJsonLines) {
    out << json{{"group", to_string(mc.group_name)},
                {"train_size", a.train_size},
                {"parameters", model.parameter_count()},
                {"best_epoch", r.report.best_epoch},
                {"best_val_loss", r.report.best_val_loss},
                {"overall_score", r.froc.overall_score}}
               .dump()
        << '\n';
  }
  return kOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string candidates, reference;
  std::vector<std::size_t> topn;
};

std::vector<CandidateRecord> read_candidates_allow_empty(const fs::path& path) {
  std::error_code ec;
  if (fs::exists(path, ec) && fs::file_size(path, ec) == 0) return {};
  return read_candidates_csv(path);
}

void cmd_evaluate(const Globals& g, const EvaluateArgs& a, std::ostream& out) {
  const auto candidates = read_candidates_allow_empty(a.candidates);
  const ReferenceSet refs = read_reference_csv(a.reference);
  const MatchResult labeled = match_candidates(candidates, refs);
  const FrocResult froc = froc_curve(labeled);
  std::vector<std::pair<std::size_t, std::size_t>> topn;
  for (std::size_t n : a.topn) topn.emplace_back(n, malignancy_topn(labeled, refs, n));

  switch (g.fmt()) {
    case Format::kText:
      write_froc_summary(out, froc);
      for (const auto& [n, k] : topn) out << "malignant_in_top" << n << ": " << k << '\n';
      break;
    case Format::kCsv:
      write_froc_curve_csv(out, froc);
      break;
    case Format::kJsonLines: {
      for (const auto& p : froc.curve)
        out << json{{"threshold", p.threshold}, {"fp_per_scan", p.fp_per_scan}, {"sensitivity", p.sensitivity}}.dump()
            << '\n';
      json s{{"n_scans", froc.n_scans},
             {"n_relevant", froc.n_relevant},
             {"sensitivities", froc.sensitivities},
             {"overall_score", froc.overall_score}};
      for (const auto& [n, k] : topn) s["malignant_in_top" + std::to_string(n)] = k;
      out << s.dump() << '\n';
      break;
    }
  }
  if (!g.output_dir.empty()) {
    const fs::path dir = output_dir(g, ".");
    auto curve = open_output(dir / "froc_curve.csv");
    write_froc_curve_csv(curve, froc);
    auto summary = open_output(dir / "froc_summary.txt");
    write_froc_summary(summary, froc);
    for (const auto& [n, k] : topn) summary << "malignant_in_top" << n << ": " << k << '\n';
  }
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> groups{"O"};
  std::size_t batch = 8;
  std::size_t repeats = 5;
};

void cmd_bench(const Globals& g, const BenchArgs& a, std::ostream& out) {
  const Format fmt = g.fmt();
  if (fmt == Format::kCsv) out << "group,layer,input_shape,gconv_ms,expanded_ms,ratio\n";
  for (const auto& name : a.groups) {
    const BenchResult r = bench_desk_layers(parse_group_name(name), a.batch, a.repeats, resolve_seed(g, 0));
    const std::string gname(to_string(r.group));
    if (fmt == Format::kText) {
      out << "group " << gname << "  batch " << a.batch << "  repeats " << a.repeats << '\n'
          << "  layer  input_shape            gconv_ms  expanded_ms  ratio\n";
      for (const auto& row : r.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-6s %-22s %9.3f %12.3f %6.3f\n", row.layer.c_str(), row.input_shape.c_str(),
                      row.gconv_ms, row.expanded_ms, row.gconv_ms / row.expanded_ms);
        out << buf;
      }
      char buf[160];
      std::snprintf(buf, sizeof(buf), "  total  %-22s %9.3f %12.3f %6.3f\n", "", r.gconv_total_ms, r.expanded_total_ms,
                    r.ratio());
      out << buf;
    } else if (fmt == Format::kCsv) {
      for (const auto& row : r.rows)
        out << gname << ',' << row.layer << ',' << row.input_shape << ',' << fixed(row.gconv_ms, 3) << ','
            << fixed(row.expanded_ms, 3) << ',' << fixed(row.gconv_ms / row.expanded_ms, 4) << '\n';
      out << gname << ",total,," << fixed(r.gconv_total_ms, 3) << ',' << fixed(r.expanded_total_ms, 3) << ','
          << fixed(r.ratio(), 4) << '\n';
    } else {
      for (const auto& row : r.rows)
        out << json{{"group", gname},
                    {"layer", row.layer},
                    {"input_shape", row.input_shape},
                    {"gconv_ms", row.gconv_ms},
                    {"expanded_ms", row.expanded_ms}}
                   .dump()
            << '\n';
      out << json{{"group", gname}, {"gconv_total_ms", r.gconv_total_ms}, {"expanded_total_ms", r.expanded_total_ms},
                  {"ratio", r.ratio()}}
                 .dump()
          << '\n';
    }
  }
}

}  // namespace

BenchResult bench_desk_layers(GroupName group_name, std::size_t batch, std::size_t repeats, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const ModelConfig mc = ModelConfig::desk(group_name);
  const SymmetryGroup group = build_group(group_name);
  const PermutationRep rho = derive_rho(group);
  const auto widths = mc.widths();
  Rng rng(derive_seed(seed, 0xbe4c));

  BenchResult result;
  result.group = group_name;
  std::array<std::size_t, 3> spatial{mc.input_shape[1], mc.input_shape[2], mc.input_shape[3]};
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const bool first = l == 0;
    GConvLayer layer(group, rho, first ? mc.input_shape[0] : widths[l - 1], widths[l], mc.kernel, first);
    for (float& v : layer.filters.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor x({batch, layer.in_channels(), spatial[0], spatial[1], spatial[2]});
    for (float& v : x.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const Tensor expanded = expand_filters(layer.plan(), layer.filters);

    std::vector<double> tg, te;
    for (std::size_t r = 0; r <= repeats; ++r) {
      const auto t0 = clock::now();
      const Tensor a = gconv_forward(layer, x);
      const auto t1 = clock::now();
      const Tensor b = conv3d_forward(x, expanded, layer.conv_spec());
      const auto t2 = clock::now();
      if (r == 0) continue;  // warm-up
      tg.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      te.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
    BenchRow row{"conv" + std::to_string(l + 1), shape_string(x.shape()), median(tg), median(te)};
    result.gconv_total_ms += row.gconv_ms;
    result.expanded_total_ms += row.expanded_ms;
    result.rows.push_back(row);

    if (std::find(mc.pool_after.begin(), mc.pool_after.end(), l + 1) != mc.pool_after.end())
      for (auto& s : spatial) s = (s + 1) / 2;
  }
  return result;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group-equivariant 3D convolutions: inspection, checks, data, training and scoring.", "octoconv"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (overrides OCTOCONV_SEED and the config file)");
  app.add_option("--config", g.config, "Key-value config file with ModelConfig/TrainConfig fields");
  app.add_option("--output-dir", g.output_dir, "Directory for written artifacts");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"text", "csv", "json-lines"}));
  app.add_option("--threads", g.threads, "Worker thread cap (overrides OCTOCONV_THREADS)")->check(CLI::PositiveNumber);

  auto* groups = app.add_subcommand("groups", "Group tables");
  groups->require_subcommand(1);
  auto* inspect = groups->add_subcommand("inspect", "Print elements, Cayley table and rho");
  std::string group_name;
  bool voxel_action = false;
  inspect->add_option("name", group_name, "Z3 | D4 | D4h | O | Oh")->required();
  inspect->add_flag("--voxel-action", voxel_action, "Also print 3x3x3 voxel permutations");

  auto* check = app.add_subcommand("check-equivariance", "Verify gconv stacks against every group element");
  EquivarianceArgs eq;
  check->add_option("--group", eq.group)->required();
  check->add_option("--depth", eq.depth, "Stacked gconv layers")->check(CLI::PositiveNumber);
  check->add_option("--trials", eq.trials, "Random trials")->check(CLI::PositiveNumber);
  check->add_option("--tolerance", eq.tolerance, "Max abs error for float inputs");
  check->add_flag("--corrupt-rho", eq.corrupt)->group("");

  auto* datagen = app.add_subcommand("datagen", "Write a synthetic dataset");
  DatagenArgs dg;
  datagen->add_option("--profile", dg.profile)->check(CLI::IsMember({"desk", "paper-shape"}));
  datagen->add_option("--train-size", dg.train_sizes, "Training set sizes (nested)");

  auto* train_cmd = app.add_subcommand("train", "Train one model and score it on the test split");
  TrainArgs ta;
  train_cmd->add_option("--group", ta.group, "Overrides group_name from the config");
  train_cmd->add_option("--train-size", ta.train_size)->required()->check(CLI::PositiveNumber);
  train_cmd->add_option("--profile", ta.profile)->check(CLI::IsMember({"desk", "paper-shape"}));
  train_cmd->add_flag("--datagen-inline", ta.datagen_inline, "Generate the dataset in memory");
  train_cmd->add_option("--data-dir", ta.data_dir, "Dataset written by datagen (default ./octoconv-data if present)");
  train_cmd->add_option("--max-epochs", ta.max_epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--patience", ta.patience)->check(CLI::PositiveNumber);
  train_cmd->add_flag("--no-augment", ta.no_augment);

  auto* evaluate = app.add_subcommand("evaluate", "FROC scoring of a candidate list");
  EvaluateArgs ev;
  evaluate->add_option("candidates", ev.candidates)->required();
  evaluate->add_option("reference", ev.reference)->required();
  evaluate->add_option("--topn", ev.topn, "Malignant findings among the n best true positives");

  auto* bench = app.add_subcommand("bench", "Time gconv against an expanded plain conv");
  BenchArgs ba;
  bench->add_option("--group", ba.groups);
  bench->add_option("--batch", ba.batch)->check(CLI::PositiveNumber);
  bench->add_option("--repeats", ba.repeats)->check(CLI::PositiveNumber);

  for (auto* sub : {groups, inspect, check, datagen, train_cmd, evaluate, bench}) sub->fallthrough();

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "octoconv: error[usage]: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    apply_threads(g);
    if (*inspect) {
      cmd_groups_inspect(g, group_name, voxel_action, out);
    } else if (*check) {
      return cmd_check_equivariance(g, eq, out, err);
    } else if (*datagen) {
      cmd_datagen(g, dg, out);
    } else if (*train_cmd) {
      return cmd_train(g, ta, out);
    } else if (*evaluate) {
      cmd_evaluate(g, ev, out);
    } else if (*bench) {
      cmd_bench(g, ba, out);
    }
  } catch (const CommandError& e) {
    err << "octoconv: error[" << e.kind << "]: " << e.what() << '\n';
    return e.code;
  } catch (const NonFiniteLossError& e) {
    err << "octoconv: error[nonfinite]: " << e.what() << '\n';
    return kNonFiniteLoss;
  } catch (const ParseError& e) {
    err << "octoconv: error[parse]: " << e.what() << '\n';
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "octoconv: error[io]: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "octoconv: error[config]: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "octoconv: error[io]: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

}  // namespace octoconv::cli
