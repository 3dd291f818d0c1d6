// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "qcuts3d/eigensolver.hpp"
#include "qcuts3d/gft.hpp"
#include "qcuts3d/metrics.hpp"
#include "qcuts3d/phantom.hpp"
#include "qcuts3d/qcuts.hpp"
#include "qcuts3d/segmentation.hpp"
#include "support.hpp"

using namespace qcuts3d;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double abs_cosine(const std::vector<double>& a, const Eigen::VectorXd& b) {
  Eigen::Map<const Eigen::VectorXd> x(a.data(), static_cast<Eigen::Index>(a.size()));
  return std::abs(x.dot(b)) / (x.norm() * b.norm());
}

double rayleigh(const SupervoxelGraph& g, const std::vector<double>& z, std::vector<double>& hz) {
  apply_hamiltonian(g, z, hz);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    num += z[i] * hz[i];
    den += z[i] * z[i];
  }
  return num / den;
}

// ---------------------------------------------------------------------------

Outcome eigensolver_oracle() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> size(2, 64);
  double worst_value = 0.0, worst_cos = 1.0, solver_time = 0.0;
  std::size_t redraws = 0, failures = 0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = qcuts3d::testing::conditioned_seeded_graph(size(rng), rng, 1e6, &redraws);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(qcuts3d::testing::dense_hamiltonian(g));
    const auto ts = Clock::now();
    const auto pair = smallest_eigenpair(hamiltonian_operator(g), g.size());
    solver_time += seconds_since(ts);
    const double lambda = ref.eigenvalues()(0);
    const double rel = std::abs(pair.value - lambda) / lambda;
    const double cosine = abs_cosine(pair.vector, ref.eigenvectors().col(0));
    worst_value = std::max(worst_value, rel);
    worst_cos = std::min(worst_cos, cosine);
    failures += !(rel <= 1e-9 && cosine >= 1.0 - 1e-8);
  }
  const double total = seconds_since(t0);
  return {failures == 0 && total < 10.0,
          fmt("200 graphs, max rel eigenvalue err %.2e, min |cos| 1-%.2e, %.2f s total (solver %.2f s), "
              "%zu redraws with cond > 1e6",
              worst_value, 1.0 - worst_cos, total, solver_time, redraws)};
}

Outcome fast_operator() {
  std::mt19937_64 rng(1002);
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (std::size_t n : {2u, 10u, 100u, 1000u, 2500u, 5000u}) {
    for (int variant = 0; variant < 2; ++variant) {
      auto means = qcuts3d::testing::random_means(n, rng);
      // variant 1 has many exact ties, as 8-bit data does
      if (variant == 1)
        for (auto& s : means) s = std::round(s * 63.0) / 63.0;
      auto g = build_graph(means, kDefaultSigma);
      std::vector<std::uint32_t> seeds;
      for (std::uint32_t i = 0; i < n; i += 7) seeds.push_back(i);
      g.set_seeds(seeds, unary_potentials(g, seeds, default_phi_seed(g)));
      std::vector<double> z(n);
      for (auto& v : z) v = gauss(rng);
      const auto fast = apply_hamiltonian(g, z, OperatorPath::fast);
      const auto dense = apply_hamiltonian(g, z, OperatorPath::dense);
      double diff = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        diff = std::max(diff, std::abs(fast[i] - dense[i]));
        scale = std::max(scale, std::abs(dense[i]));
      }
      worst = std::max(worst, diff / scale);
    }
  }
  const std::size_t n = 8000;
  auto g = build_graph(qcuts3d::testing::random_means(n, rng), kDefaultSigma);
  std::vector<std::uint32_t> seeds{0, 100, 200};
  g.set_seeds(seeds, unary_potentials(g, seeds, default_phi_seed(g)));
  std::vector<double> z(n, 1.0), out(n);
  for (auto& v : z) v = gauss(rng);
  apply_hamiltonian(g, z, out);  // warm-up
  const int reps = 200;
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    apply_hamiltonian(g, z, out);
    z[r % n] += out[0] * 1e-30;  // keep the loop honest
  }
  const double ms = 1e3 * seconds_since(t0) / reps;
  return {worst <= 1e-10 && ms < 5.0,
          fmt("max rel diff fast vs dense %.2e (n <= 5000), n=8000 matvec %.3f ms", worst, ms)};
}

Outcome rayleigh_minimality() {
  std::mt19937_64 rng(1003);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<std::size_t> size(5, 400);
  std::size_t violations = 0, probes = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (int graph = 0; graph < 20; ++graph) {
    const auto g = qcuts3d::testing::random_seeded_graph(size(rng), rng);
    const std::size_t n = g.size();
    const auto pair = smallest_eigenpair(hamiltonian_operator(g), n);
    std::vector<double> z(n), hz(n);
    for (int k = 0; k < 10000; ++k) {
      // half isotropic probes, half perturbations of the converged vector
      const double spread = k % 2 ? 0.0 : std::pow(10.0, -1.0 - (k % 6));
      for (std::size_t i = 0; i < n; ++i) z[i] = spread > 0.0 ? pair.vector[i] + spread * gauss(rng) : gauss(rng);
      const double rq = rayleigh(g, z, hz);
      ++probes;
      // rounding slack of the quotient itself
      if (pair.value > rq * (1.0 + 1e-12)) ++violations;
      tightest = std::min(tightest, (rq - pair.value) / rq);
    }
  }
  return {violations == 0, fmt("%zu probes on 20 graphs, %zu violations, closest probe (rq-lambda)/rq = %.2e",
                               probes, violations, tightest)};
}

Outcome slic_invariants() {
  const std::size_t n = 64;
  const Dims d{n, n, n};
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<std::pair<std::string, Volume>> volumes;
  for (int k = 0; k < 10; ++k) {
    Volume v(d);
    for (float& x : v.values()) x = u(rng);
    volumes.emplace_back("uniform noise " + std::to_string(k), std::move(v));
  }
  for (int k = 0; k < 6; ++k) {
    PhantomSpec s;
    s.seed = 100 + static_cast<std::uint64_t>(k);
    s.noise_sigma = 0.02 * k;
    s.blur_sigma = 0.5 * (k % 3);
    volumes.emplace_back("phantom " + std::to_string(k), generate_phantom(s).volume);
  }
  for (int k = 0; k < 4; ++k) {
    // ramps, stripes and a checkerboard
    Volume v(d);
    for (std::size_t z = 0; z < n; ++z)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
          float val = 0.0f;
          if (k == 0) val = static_cast<float>(x) / (n - 1);
          if (k == 1) val = static_cast<float>(x + y + z) / (3 * (n - 1));
          if (k == 2) val = (z / 5) % 2 ? 0.8f : 0.2f;
          if (k == 3) val = ((x / 7 + y / 7 + z / 7) % 2) ? 0.7f : 0.3f;
          v.at(x, y, z) = val;
        }
    volumes.emplace_back("structured " + std::to_string(k), std::move(v));
  }

  std::size_t failures = 0;
  double worst_dev = 0.0;
  std::string first_failure;
  for (const auto& [name, v] : volumes) {
    for (std::size_t target : kDefaultScales) {
      SlicOptions o;
      o.target_count = target;
      const auto m = slic3d(v, o);
      std::size_t covered = 0;
      for (auto s : m.sizes()) covered += s;
      const double dev = std::abs(static_cast<double>(m.count()) - static_cast<double>(target)) / target;
      worst_dev = std::max(worst_dev, dev);
      const bool ok = covered == v.size() && m.assignment().size() == v.size() &&
                      qcuts3d::testing::all_six_connected(m) && dev <= 0.25;
      if (!ok && first_failure.empty()) first_failure = name + " @" + std::to_string(target);
      failures += !ok;
    }
  }

  // two-region purity: a sphere and a slab at 0.6 on a 0.3 background
  Volume two(d, 0.3f);
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double r = std::hypot(x - 24.0, y - 30.0, z - 34.0);
        if (r < 15.0 || x + z > 100) two.at(x, y, z) = 0.6f;
      }
  double worst_purity = 1.0;
  for (std::size_t target : kDefaultScales) {
    SlicOptions o;
    o.target_count = target;
    const auto m = slic3d(two, o);
    std::vector<std::size_t> bright(m.count(), 0);
    for (std::size_t i = 0; i < two.size(); ++i) bright[m[i]] += two[i] > 0.45f;
    std::size_t pure = 0;
    for (std::size_t k = 0; k < m.count(); ++k) pure += bright[k] == 0 || bright[k] == m.sizes()[k];
    worst_purity = std::min(worst_purity, static_cast<double>(pure) / static_cast<double>(m.count()));
  }
  std::string detail = fmt("%zu volumes x 4 targets, %zu failing, worst |K'-K|/K %.3f, worst purity %.4f",
                           volumes.size(), failures, worst_dev, worst_purity);
  if (!first_failure.empty()) detail += ", first failure " + first_failure;
  return {failures == 0 && worst_purity >= 0.95, detail};
}

double mann_whitney(const SaliencyField& score, const SegmentationMask& truth) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth[j]) continue;
      pairs += 1.0;
      wins += score[i] > score[j] ? 1.0 : score[i] == score[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

Outcome metric_correctness() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.emplace_back(name);
  };
  const Dims d8{8, 1, 1};
  auto mask = [&](std::initializer_list<int> solid) {
    SegmentationMask m(d8);
    for (int i : solid) m[static_cast<std::size_t>(i)] = 1;
    return m;
  };
  const auto a = mask({0, 1, 2, 3});
  check(jaccard(a, a) == 1.0, "jaccard identical");
  check(jaccard(a, mask({4, 5})) == 0.0, "jaccard disjoint");
  check(std::abs(jaccard(a, mask({2, 3, 4, 5})) - 1.0 / 3.0) < 1e-15, "jaccard 1/3");
  check(misclassification_error(a, a) == 0.0, "me identical");
  check(misclassification_error(a, mask({4, 5, 6, 7})) == 1.0, "me complementary");
  check(misclassification_error(a, mask({0, 1, 2})) == 0.125, "me one of eight");
  const auto truth = mask({1, 3, 4});
  SaliencyField perfect(d8), wrong(d8), flat(d8, 0.5f);
  for (std::size_t i = 0; i < 8; ++i) {
    perfect[i] = truth[i];
    wrong[i] = 1.0f - truth[i];
  }
  const auto pts = roc_curve(perfect, truth);
  check(std::any_of(pts.begin(), pts.end(), [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; }),
        "roc through (0,1)");
  check(auroc(pts) == 1.0, "auroc perfect");
  check(auroc(roc_curve(wrong, truth)) == 0.0, "auroc inverted");
  check(auroc(roc_curve(flat, truth)) == 0.5, "auroc constant");
  check(auroc({{0.0, 0.0}, {0.5, 0.5}, {1.0, 1.0}}) == 0.5, "auroc diagonal");
  const auto r = evaluate(truth, perfect, truth);
  check(r.iou == 1.0 && r.me == 0.0 && r.auroc == 1.0, "evaluate perfect");

  // Continuous scores are compared on a 4096-level grid; the default 256-level
  // grid is reported alongside but cannot promise 1e-3 on small instances,
  // where a single solid/pore pair sharing a bin already moves the area by
  // 0.5 / (P N). Scores on the 8-bit grid must match exactly at the default.
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<std::size_t> size(2, 500);
  double worst = 0.0, worst_default = 0.0, worst_quantized = 0.0;
  std::size_t over_default = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = size(rng);
    SegmentationMask t(Dims{n, 1, 1});
    SaliencyField f(t.dims()), q(t.dims());
    // informative scores: solid shifted up
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = i < 2 ? static_cast<std::uint8_t>(i) : static_cast<std::uint8_t>(rng() % 2);
      f[i] = std::clamp(u(rng) * 0.8f + (t[i] ? 0.2f : 0.0f), 0.0f, 1.0f);
      q[i] = std::round(f[i] * 255.0f) / 255.0f;
    }
    const double oracle = mann_whitney(f, t);
    worst = std::max(worst, std::abs(auroc(roc_curve(f, t, 4096)) - oracle));
    const double err_default = std::abs(auroc(roc_curve(f, t)) - oracle);
    worst_default = std::max(worst_default, err_default);
    over_default += err_default > 1e-3;
    worst_quantized = std::max(worst_quantized, std::abs(auroc(roc_curve(q, t)) - mann_whitney(q, t)));
  }
  check(worst_quantized <= 1e-12, "pairwise oracle, 8-bit scores");
  check(worst <= 1e-3, "pairwise oracle, continuous scores");
  std::string detail = fmt("%zu failing checks; max |auroc - pairwise oracle| over 50 instances: continuous "
                           "scores %.2e at 4096 levels (%.2e at 256 levels, %zu above 1e-3), 8-bit scores %.1e",
                           failed.size(), worst, worst_default, over_default, worst_quantized);
  for (const auto& f : failed) detail += ", failed: " + f;
  return {failed.empty(), detail};
}

PhantomSpec sphere_pack_96(double noise, double blur) {
  PhantomSpec s;
  s.size = 96;
  s.grain_count = 300;
  s.r_min = 5;
  s.r_max = 9;
  s.pore_phases = {kGas};
  s.noise_sigma = noise;
  s.blur_sigma = blur;
  s.seed = 7;
  return s;
}

double runtime_96 = -1.0;

Outcome phantom_quality() {
  const Phantom clean = generate_phantom(sphere_pack_96(0.0, 0.0));
  auto t0 = Clock::now();
  const auto r = segment_volume(clean.volume);
  runtime_96 = seconds_since(t0);
  const auto m = evaluate(r.mask, r.field, binarize_ground_truth(clean.labels, kSolid));
  const Phantom noisy = generate_phantom(sphere_pack_96(0.05, 1.0));
  const auto rn = segment_volume(noisy.volume);
  const auto mn = evaluate(rn.mask, rn.field, binarize_ground_truth(noisy.labels, kSolid));
  return {m.iou >= 0.90 && m.me <= 0.05 && m.auroc >= 0.97 && mn.iou >= 0.75,
          fmt("noiseless IoU %.4f ME %.4f AUROC %.4f; noisy IoU %.4f ME %.4f AUROC %.4f", m.iou, m.me, m.auroc,
              mn.iou, mn.me, mn.auroc)};
}

Outcome runtime() {
  PhantomSpec s;
  s.size = 256;
  s.grain_count = 5760;
  s.r_min = 5;
  s.r_max = 9;
  s.pore_phases = {kGas};
  s.noise_sigma = 0.05;
  s.blur_sigma = 1.0;
  s.seed = 11;
  const Phantom p = generate_phantom(s);
  PipelineConfig c;
  c.threads = 0;  // auto
  const auto t0 = Clock::now();
  const auto r = segment_volume(p.volume, c);
  const double big = seconds_since(t0);
  if (runtime_96 < 0.0) {
    const auto t1 = Clock::now();
    segment_volume(generate_phantom(sphere_pack_96(0.0, 0.0)).volume);
    runtime_96 = seconds_since(t1);
  }
  const double iou = jaccard(r.mask, binarize_ground_truth(p.labels, kSolid));
  return {big <= 600.0 && runtime_96 <= 60.0,
          fmt("256^3 x 4 scales %.1f s (IoU %.3f), 96^3 %.1f s, %u hardware threads", big, iou, runtime_96,
              std::thread::hardware_concurrency())};
}

Outcome gft_properties() {
  std::mt19937_64 rng(1008);
  double worst_ortho = 0.0, worst_full = 0.0;
  std::size_t monotone_breaks = 0;
  std::vector<double> fractions;
  for (int k = 1; k <= 100; ++k) fractions.push_back(k / 100.0);
  for (std::size_t n : {10u, 60u, 250u, 600u}) {
    const auto g = build_graph(qcuts3d::testing::random_means(n, rng), kDefaultSigma);
    const auto b = laplacian_spectrum(g, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double dot = 0.0;
        const auto ui = b.vector(i), uj = b.vector(j);
        for (std::size_t t = 0; t < n; ++t) dot += ui[t] * uj[t];
        worst_ortho = std::max(worst_ortho, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    for (int s = 0; s < 5; ++s) {
      std::vector<double> x(n);
      for (auto& v : x) v = s % 2 ? static_cast<double>(rng() % 2) : std::uniform_real_distribution<double>()(rng);
      const auto curve = reconstruction_curve(x, b, fractions);
      for (std::size_t i = 1; i < curve.size(); ++i) monotone_breaks += curve[i].mse > curve[i - 1].mse;
      worst_full = std::max(worst_full, curve.back().mse);
    }
  }
  // and on a real phantom through the per-phase path
  PhantomSpec s;
  s.size = 48;
  s.grain_count = 40;
  s.noise_sigma = 0.05;
  s.blur_sigma = 1.0;
  const Phantom p = generate_phantom(s);
  SlicOptions o;
  o.target_count = 1000;
  const auto map = slic3d(p.volume, o);
  for (const auto& c : reconstruction_curves(p.labels, p.volume, map, fractions)) {
    for (std::size_t i = 1; i < c.points.size(); ++i) monotone_breaks += c.points[i].mse > c.points[i - 1].mse;
    worst_full = std::max(worst_full, c.points.back().mse);
  }
  return {worst_ortho <= 1e-8 && monotone_breaks == 0 && worst_full <= 1e-10,
          fmt("orthonormality err %.2e, %zu monotonicity breaks, max MSE at fraction 1 %.2e", worst_ortho,
              monotone_breaks, worst_full)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Timing fields are wall-clock measurements, not results.
void drop_timings(nlohmann::json& j) {
  if (j.is_object()) {
    for (const char* key : {"seconds", "runtime_seconds"}) j.erase(key);
    for (auto& [k, v] : j.items()) drop_timings(v);
  } else if (j.is_array()) {
    for (auto& v : j) drop_timings(v);
  }
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qcuts3d");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
  qcuts3d::testing::TempDir dir;
  const std::string ph = (dir / "ph").string();
  if (cli({"phantom", "-o", ph, "--size", "64", "--noise", "0.05", "--blur", "1.0", "--seed", "5", "--phases",
           "gas"}) != 0) {
    return {false, "phantom generation failed"};
  }
  std::vector<std::string> mismatched;
  const std::vector<std::pair<std::string, std::string>> runs{{"a", "1"}, {"b", "1"}, {"c", "4"}};
  for (const auto& [name, threads] : runs) {
    if (cli({"segment", ph + ".volume.raw", "-o", (dir / name).string(), "--threads", threads}) != 0 ||
        cli({"evaluate", "--mask", (dir / (name + ".mask.raw")).string(), "--field",
             (dir / (name + ".field.raw")).string(), "--truth", ph + ".labels.raw", "--json",
             (dir / (name + ".report.json")).string(), "--id", "run"}) != 0) {
      return {false, "pipeline run " + name + " failed"};
    }
  }
  for (const char* other : {"b", "c"}) {
    for (const char* suffix : {".mask.raw", ".field.raw", ".mask.json", ".field.json"}) {
      if (slurp(dir / (std::string("a") + suffix)) != slurp(dir / (other + std::string(suffix)))) {
        mismatched.push_back(other + std::string(suffix));
      }
    }
    for (const char* suffix : {".diagnostics.json", ".report.json"}) {
      auto ja = nlohmann::json::parse(slurp(dir / (std::string("a") + suffix)));
      auto jb = nlohmann::json::parse(slurp(dir / (other + std::string(suffix))));
      drop_timings(ja);
      drop_timings(jb);
      // thread count is an input, not an output
      for (auto* j : {&ja, &jb}) {
        if (j->contains("config")) (*j)["config"].erase("threads");
        j->erase("threads_used");
      }
      if (ja != jb) mismatched.push_back(other + std::string(suffix));
    }
  }
  std::string detail = "3 CLI runs (threads 1, 1, 4) on a 64^3 noisy phantom: masks, fields, diagnostics and "
                       "reports compared";
  if (mismatched.empty()) {
    detail += ", all identical";
  } else {
    for (const auto& m : mismatched) detail += ", differs: " + m;
  }
  return {mismatched.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"eigensolver matches dense oracle", eigensolver_oracle},
      {"matrix-free operator", fast_operator},
      {"Rayleigh minimality", rayleigh_minimality},
      {"SLIC invariants", slic_invariants},
      {"metric correctness", metric_correctness},
      {"phantom segmentation quality", phantom_quality},
      {"runtime", runtime},
      {"graph Fourier properties", gft_properties},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << fmt(" [%.1f s]", seconds_since(t0)) << std::endl;
  }
  std::cout << (failed ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED") << " (" << criteria.size() - failed << "/"
            << criteria.size() << ")" << std::endl;
  return failed ? 1 : 0;
}
