// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one pass/fail line per criterion. `octoconv_acceptance 3 9`
// runs only criteria 3 and 9. `--expect-fail N` marks criterion N as a known
// failure: the exit status is 0 only if exactly the expected criteria fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradient_checks.hpp"
#include "octoconv/equivariance.hpp"
#include "octoconv/experiment.hpp"
#include "octoconv/froc.hpp"
#include "octoconv/model.hpp"
#include "octoconv_cli/cli.hpp"
#include "test_support.hpp"

namespace octoconv {
namespace {

namespace fs = std::filesystem;
using testing::GroupFixture;

const GroupName kAll[] = {GroupName::kTrivial, GroupName::kD4, GroupName::kD4h, GroupName::kO, GroupName::kOh};
const GroupName kGGroups[] = {GroupName::kD4, GroupName::kD4h, GroupName::kO, GroupName::kOh};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome group_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  std::map<GroupName, std::size_t> want{{GroupName::kTrivial, 1}, {GroupName::kD4, 8}, {GroupName::kD4h, 16},
                                        {GroupName::kO, 24}, {GroupName::kOh, 48}};
  for (GroupName name : kAll) {
    const SymmetryGroup g = build_group(name);
    const std::size_t n = g.order();
    bool ok = n == want[name] && g.element(0) == GroupElement::identity();
    ok = ok && std::set<GroupElement>(g.elements().begin(), g.elements().end()).size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) {
      ok = g.cayley(0, i) == i && g.cayley(i, 0) == i && g.cayley(i, g.inverse(i)) == 0 &&
           g.cayley(g.inverse(i), i) == 0;
      for (std::size_t j = 0; ok && j < n; ++j) {
        const auto product = g.index_of(g.element(i) * g.element(j));
        ok = product && *product == g.cayley(i, j);
        for (std::size_t k = 0; ok && k < n; ++k) ok = g.cayley(g.cayley(i, j), k) == g.cayley(i, g.cayley(j, k));
      }
    }
    if (!ok) {
      out.pass = false;
      out.detail += std::string(to_string(name)) + " axioms/order failed; ";
    }
  }
  const auto brute = testing::all_signed_permutations();
  const SymmetryGroup oh = build_group(GroupName::kOh);
  const bool same = brute.size() == 48 && std::set<GroupElement>(brute.begin(), brute.end()) ==
                                              std::set<GroupElement>(oh.elements().begin(), oh.elements().end());
  if (!same) {
    out.pass = false;
    out.detail += "Oh differs from the 48 signed permutations; ";
  }
  const double secs = seconds_since(t0);
  if (secs >= 1.0) out.pass = false;
  out.detail += "orders 1/8/16/24/48, " + fmt("%.3f s", secs);
  return out;
}

Outcome homomorphism() {
  Outcome out;
  std::size_t pairs = 0;
  for (GroupName name : kGGroups) {
    const SymmetryGroup g = build_group(name);
    const PermutationRep rho = derive_rho(g);
    for (std::size_t i = 0; i < g.order(); ++i)
      for (std::size_t j = 0; j < g.order(); ++j, ++pairs)
        if (rho.perms[g.cayley(i, j)] != compose(rho.perms[i], rho.perms[j])) {
          out.pass = false;
          out.detail = std::string(to_string(name)) + " fails at pair (" + std::to_string(i) + ", " +
                       std::to_string(j) + "); ";
        }
  }
  out.detail += std::to_string(pairs) + " pairs checked";
  return out;
}

Outcome equivariance() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  double worst_float = 0.0, worst_int = 0.0;
  for (GroupName name : kAll) {
    GroupFixture g(name);
    for (std::size_t depth : {1u, 3u})
      for (std::uint64_t trial = 0; trial < 2; ++trial) {
        Rng rng(100 * depth + trial);
        const auto ints = testing::make_gconv_stack(g, depth, true, rng);
        const Tensor xi = testing::random_int_tensor({1, 1, 7, 7, 7}, rng, -3, 3);
        const double ei = testing::worst_equivariance_error(g, ints, xi);
        const auto floats = testing::make_gconv_stack(g, depth, false, rng);
        const Tensor xf = testing::random_tensor({1, 1, 7, 7, 7}, rng);
        const double ef = testing::worst_equivariance_error(g, floats, xf);
        worst_int = std::max(worst_int, ei);
        worst_float = std::max(worst_float, ef);
        if (ei != 0.0 || ef > 1e-4) {
          out.pass = false;
          out.detail += std::string(to_string(name)) + " depth " + std::to_string(depth) + " failed; ";
        }
      }
  }
  const double secs = seconds_since(t0);
  if (secs >= 60.0) out.pass = false;
  out.detail += "integer " + fmt("%.1g", worst_int) + ", float " + fmt("%.2e", worst_float) + ", " +
                fmt("%.1f s", secs);
  return out;
}

Outcome model_invariance() {
  Outcome out;
  double worst = 0.0;
  for (GroupName name : kGGroups) {
    ModelConfig cfg = ModelConfig::desk(name);
    cfg.input_shape = {1, 8, 8, 8};
    Model m = build_model(cfg, 5);
    Rng rng(6);
    testing::randomize_norms(m, rng);
    const SymmetryGroup& g = m.group();
    const Tensor x = testing::random_tensor({2, 1, 8, 8, 8}, rng);
    const Tensor base = m.forward(x, Mode::kEval);
    double w = 0.0;
    for (std::size_t h = 0; h < g.order(); ++h)
      w = std::max(w, double(max_abs_diff(m.forward(testing::naive_rotate_volume(g.element(h), x), Mode::kEval), base)));
    w = std::max(w, check_model_invariance(m, 2, 7).worst);
    worst = std::max(worst, w);
    if (w > 1e-4) {
      out.pass = false;
      out.detail += std::string(to_string(name)) + " " + fmt("%.2e", w) + "; ";
    }
  }
  out.detail += "worst |logits(hx) - logits(x)| " + fmt("%.2e", worst);
  return out;
}

Outcome gradients() {
  Outcome out;
  std::string worst_name;
  double worst = 0.0;
  for (const auto& check : testing::layer_gradient_checks()) {
    double w = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) w = std::max(w, check.run(seed));
    if (w > 1e-3) {
      out.pass = false;
      out.detail += check.name + " " + fmt("%.2e", w) + "; ";
    }
    if (w >= worst) {
      worst = w;
      worst_name = check.name;
    }
  }
  out.detail += std::to_string(testing::layer_gradient_checks().size()) + " layers x 20 seeds, worst " + worst_name +
                " " + fmt("%.2e", worst);
  return out;
}

Outcome baseline_reduction() {
  Outcome out;
  Rng rng(1);
  Model m = build_model(ModelConfig::desk(GroupName::kTrivial), 3);
  testing::randomize_norms(m, rng);
  std::size_t exact = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = testing::random_tensor({1, 1, 6, 24, 24}, rng);
    exact += m.forward(x, Mode::kEval) == testing::plain_cnn(m, x);
  }
  out.pass = exact == 10;
  out.detail = std::to_string(exact) + "/10 inputs bit-exact";
  return out;
}

Outcome parameter_parity() {
  Outcome out;
  const ModelConfig base = ModelConfig::desk(GroupName::kTrivial);
  const std::size_t p0 = count_parameters(base);
  if (p0 != testing::hand_count(base.widths(), 1, 9) || Model(base).parameter_count() != p0) {
    out.pass = false;
    out.detail += "baseline count disagrees with hand count; ";
  }
  out.detail += "Z3 " + std::to_string(p0);
  for (GroupName name : kGGroups) {
    const ModelConfig cfg = ModelConfig::desk(name);
    const std::size_t p = count_parameters(cfg);
    const double ratio = double(p) / double(p0);
    if (p != testing::hand_count(cfg.widths(), expected_order(name), 9) || std::abs(ratio - 1.0) > 0.15)
      out.pass = false;
    out.detail += ", " + std::string(to_string(name)) + " " + std::to_string(p) + " (" + fmt("%.3f", ratio) + ")";
  }
  return out;
}

Outcome compute_parity() {
  Outcome out;
  for (GroupName name : kGGroups) {
    const auto r = cli::bench_desk_layers(name, 30, 5, 0);
    const double ratio = r.ratio();
    if (ratio < 0.9 || ratio > 1.3) out.pass = false;
    out.detail += std::string(to_string(name)) + " " + fmt("%.3f", ratio) + (name == GroupName::kOh ? "" : ", ");
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome froc_scorer() {
  Outcome out;
  const fs::path golden = fs::path(OCTOCONV_TEST_DATA) / "froc_golden";
  const ReferenceSet ref = read_reference_csv(golden / "reference.csv");
  const auto cands = read_candidates_csv(golden / "candidates.csv");
  const FrocResult r = froc_curve(match_candidates(cands, ref));
  std::ostringstream curve, summary;
  write_froc_curve_csv(curve, r);
  write_froc_summary(summary, r);
  const bool golden_ok = r.overall_score == 4.75 / 7.0 && curve.str() == slurp(golden / "curve.csv") &&
                         summary.str() == slurp(golden / "summary.txt") &&
                         testing::brute_force_froc_score(cands, ref) == 4.75 / 7.0;
  if (!golden_ok) {
    out.pass = false;
    out.detail += "golden score " + fmt("%.17g", r.overall_score) + " != 4.75/7; ";
  }
  std::size_t invariant = 0, oracle = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto f = testing::random_froc_fixture(seed);
    const double score = froc_curve(match_candidates(f.cands, f.ref)).overall_score;
    oracle += std::abs(score - testing::brute_force_froc_score(f.cands, f.ref)) <= 1e-12;
    for (auto& c : f.cands) c.probability = 0.05 + 0.9 * std::pow(c.probability, 3.0);
    invariant += froc_curve(match_candidates(f.cands, f.ref)).overall_score == score;
  }
  if (invariant != 100 || oracle != 100) out.pass = false;
  out.detail += "golden " + fmt("%.6f", r.overall_score) + ", monotone-invariant " + std::to_string(invariant) +
                "/100, brute-force agreement " + std::to_string(oracle) + "/100";
  return out;
}

// Criterion 10 runs: data and weights both seeded from `seed`, as
// `octoconv train --seed` does.
struct TrendRun {
  double froc = 0.0;
  TrainReport report;
};

struct TrendHarness {
  DatasetConfig dc = DatasetConfig::desk();
  std::map<std::uint64_t, Datasets> data;
  std::map<std::tuple<GroupName, std::size_t, std::uint64_t>, TrendRun> runs;

  static std::size_t max_epochs(std::size_t size) { return size <= 30 ? 50 : 15; }

  const TrendRun& run(GroupName g, std::size_t size, std::uint64_t seed) {
    const auto key = std::make_tuple(g, size, seed);
    if (auto it = runs.find(key); it != runs.end()) return it->second;
    if (!data.count(seed)) data.emplace(seed, build_datasets(seed, dc));
    const Datasets& ds = data.at(seed);
    TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = max_epochs(size);
    tc.patience = 10;
    const RunResult r = run_experiment(ModelConfig::desk(g), tc, ds.train.at(size), ds, dc);
    std::printf("    %-3s n=%-3zu seed %llu: %zu epochs, best epoch %zu, best val %.4f, FROC %.4f\n",
                std::string(to_string(g)).c_str(), size, static_cast<unsigned long long>(seed),
                r.report.epochs.size(), r.report.best_epoch, r.report.best_val_loss, r.froc.overall_score);
    std::fflush(stdout);
    return runs.emplace(key, TrendRun{r.froc.overall_score, r.report}).first->second;
  }
};

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

Outcome data_efficiency() {
  const std::clock_t c0 = std::clock();
  Outcome out;
  TrendHarness h;
  std::vector<std::string> notes;
  for (std::size_t size : {30u, 300u}) {
    const TrendRun& base = h.run(GroupName::kTrivial, size, 0);
    for (GroupName g : kGGroups) {
      const TrendRun& r = h.run(g, size, 0);
      const std::string tag = std::string(to_string(g)) + "@" + std::to_string(size);
      bool a = r.froc >= base.froc;
      if (!a) {
        const double gm = median3(r.froc, h.run(g, size, 1).froc, h.run(g, size, 2).froc);
        const double bm = median3(base.froc, h.run(GroupName::kTrivial, size, 1).froc,
                                  h.run(GroupName::kTrivial, size, 2).froc);
        a = gm >= bm;
        notes.push_back(tag + " (a) 3-seed median " + fmt("%.3f", gm) + " vs " + fmt("%.3f", bm) + (a ? " ok" : " FAIL"));
      }
      const auto reach = r.report.epochs_to_reach(base.report.best_val_loss);
      const bool b = reach && *reach < base.report.best_epoch;
      if (!b)
        notes.push_back(tag + " (b) reaches baseline best val " + fmt("%.4f", base.report.best_val_loss) +
                        (reach ? " at epoch " + std::to_string(*reach) : std::string(" never")) +
                        ", baseline at epoch " + std::to_string(base.report.best_epoch) + " FAIL");
      out.pass = out.pass && a && b;
    }
  }
  const double cpu = double(std::clock() - c0) / CLOCKS_PER_SEC;
  if (cpu > 1800.0) {
    out.pass = false;
    notes.push_back("over the 30 min budget");
  }
  for (const auto& n : notes) out.detail += n + "; ";
  out.detail += fmt("%.0f s CPU", cpu);
  return out;
}

Outcome malignancy() {
  Outcome out;
  const auto f = testing::malignancy_fixture();
  const MatchResult m = match_candidates(f.cands, f.ref);
  const std::size_t top5 = malignancy_topn(m, f.ref, 5), top10 = malignancy_topn(m, f.ref, 10);
  out.pass = top5 == 2 && top10 == 3;
  out.detail = "top-5 " + std::to_string(top5) + " (want 2), top-10 " + std::to_string(top10) + " (want 3)";
  return out;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "group correctness", group_correctness},
    {2, "homomorphism", homomorphism},
    {3, "gconv equivariance", equivariance},
    {4, "model invariance", model_invariance},
    {5, "gradient correctness", gradients},
    {6, "baseline reduction", baseline_reduction},
    {7, "parameter parity", parameter_parity},
    {8, "compute parity", compute_parity},
    {9, "FROC scorer", froc_scorer},
    {10, "data-efficiency trend", data_efficiency},
    {11, "malignancy top-n", malignancy},
};

}  // namespace
}  // namespace octoconv

int main(int argc, char** argv) {
  std::set<int> only, expected, failed;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--expect-fail" && i + 1 < argc)
      expected.insert(std::atoi(argv[++i]));
    else
      only.insert(std::atoi(argv[i]));
  }
  for (const auto& c : octoconv::kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    octoconv::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(c.id);
    std::printf("criterion %2d %s  %-22s %s  [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                octoconv::seconds_since(t0));
    std::fflush(stdout);
  }
  for (int id : expected)
    if ((only.empty() || only.count(id)) && !failed.count(id))
      std::printf("criterion %2d was expected to fail and passed\n", id);
  for (int id : failed)
    if (expected.count(id)) std::printf("criterion %2d failed as expected\n", id);
  std::set<int> expected_run;
  for (int id : expected)
    if (only.empty() || only.count(id)) expected_run.insert(id);
  return failed == expected_run ? 0 : 1;
}
