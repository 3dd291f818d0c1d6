#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qcuts3d/gft.hpp"
#include "qcuts3d/metrics.hpp"
#include "qcuts3d/parallel.hpp"
#include "qcuts3d/phantom.hpp"
#include "qcuts3d/segmentation.hpp"
#include "qcuts3d/supervoxel.hpp"
#include "qcuts3d/volume.hpp"

namespace qcuts3d::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kThreadsEnv = "QCUTS3D_THREADS";

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return kArgument;
    case ErrorKind::format: return kFormat;
    case ErrorKind::data: return kData;
    case ErrorKind::convergence: return kConvergence;
    case ErrorKind::io: return kIo;
    case ErrorKind::placement: return kPlacement;
    case ErrorKind::configuration: return kConfiguration;
  }
  return kInternal;
}

// "auto" or 0 -> all hardware threads
unsigned parse_threads(const std::string& text, const char* source) {
  if (text == "auto") return 0;
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used == text.size() && v >= 0) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  throw ArgumentError(std::string(source) + ": thread count must be a non-negative integer or 'auto', got '" +
                      text + "'");
}

KernelVariant parse_kernel(const std::string& text) {
  if (text == "absolute") return KernelVariant::absolute;
  if (text == "squared") return KernelVariant::squared;
  throw ArgumentError("kernel must be 'absolute' or 'squared', got '" + text + "'");
}

const char* kernel_name(KernelVariant k) { return k == KernelVariant::absolute ? "absolute" : "squared"; }

Axis parse_axis_name(const std::string& text) {
  if (text.size() != 1) throw ArgumentError("axis must be x, y or z, got '" + text + "'");
  return parse_axis(text[0]);
}

char axis_name(Axis a) { return "xyz"[static_cast<int>(a)]; }

void validate_config(const PipelineConfig& c) {
  if (c.scales.empty()) throw ArgumentError("at least one scale is required");
  for (auto s : c.scales) {
    if (s < 1) throw ArgumentError("scales must be >= 1");
  }
  if (!(c.sigma > 0.0)) throw ArgumentError("sigma must be > 0");
  if (!(c.percentile_low >= 0.0 && c.percentile_low < c.percentile_high && c.percentile_high <= 100.0)) {
    throw ArgumentError("percentiles must satisfy 0 <= low < high <= 100");
  }
  if (!(c.phi_seed.multiplier > 0.0)) throw ArgumentError("phi multiplier must be > 0");
  if (c.phi_seed.value && !(*c.phi_seed.value > 0.0)) throw ArgumentError("phi seed must be > 0");
  if (c.slic_iterations < 1) throw ArgumentError("slic iterations must be >= 1");
  if (!(c.eigen.tolerance > 0.0)) throw ArgumentError("eigen tolerance must be > 0");
}

// Reads a JSON run configuration on top of the defaults.
PipelineConfig read_config(const fs::path& path, bool& threads_set) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  PipelineConfig c;
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (key == "scales") {
        c.scales = v.get<std::vector<std::size_t>>();
      } else if (key == "sigma") {
        c.sigma = v.get<double>();
      } else if (key == "kernel") {
        c.kernel = parse_kernel(v.get<std::string>());
      } else if (key == "phi_seed") {
        if (v.is_number()) {
          c.phi_seed.value = v.get<double>();
        } else {
          if (v.contains("multiplier")) c.phi_seed.multiplier = v["multiplier"].get<double>();
          if (v.contains("value")) c.phi_seed.value = v["value"].get<double>();
        }
      } else if (key == "axis") {
        c.axis = parse_axis_name(v.get<std::string>());
      } else if (key == "percentiles") {
        const auto p = v.get<std::vector<double>>();
        if (p.size() != 2) throw ConfigurationError("percentiles must be [low, high]");
        c.percentile_low = p[0];
        c.percentile_high = p[1];
      } else if (key == "threads") {
        threads_set = true;
        c.threads = v.is_string() ? parse_threads(v.get<std::string>(), "config") : v.get<unsigned>();
      } else if (key == "slic_iterations") {
        c.slic_iterations = v.get<int>();
      } else if (key == "tolerance") {
        c.eigen.tolerance = v.get<double>();
      } else {
        throw ConfigurationError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigurationError("bad config " + path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigurationError(std::string("bad config: ") + e.what());
  }
  return c;
}

json config_json(const PipelineConfig& c) {
  json phi;
  if (c.phi_seed.value) {
    phi["value"] = *c.phi_seed.value;
  } else {
    phi["multiplier"] = c.phi_seed.multiplier;
  }
  return {{"scales", c.scales},
          {"sigma", c.sigma},
          {"kernel", kernel_name(c.kernel)},
          {"phi_seed", phi},
          {"axis", std::string(1, axis_name(c.axis))},
          {"percentiles", {c.percentile_low, c.percentile_high}},
          {"slic_iterations", c.slic_iterations},
          {"tolerance", c.eigen.tolerance},
          {"threads", c.threads}};
}

json diagnostics_json(const ScaleDiagnostics& d) {
  return {{"target", d.target},         {"supervoxels", d.supervoxels}, {"slic_iterations", d.slic_iterations},
          {"seeds", d.seeds},           {"phi_seed", d.phi_seed},       {"eigenvalue", d.eigenvalue},
          {"residual", d.residual},     {"applications", d.applications},
          {"solid_fraction", d.solid_fraction},
          {"degenerate", d.degenerate}, {"seconds", d.seconds}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path with_suffix(const std::string& prefix, const char* suffix) { return fs::path(prefix + suffix); }

// Pipeline flags shared by `segment` and `gft-curve`.
struct PipelineFlags {
  std::string config;
  std::vector<std::size_t> scales;
  std::optional<double> sigma;
  std::string kernel;
  std::optional<double> phi_multiplier;
  std::optional<double> phi_seed;
  std::string axis;
  std::vector<double> percentiles;
  std::string threads;
  std::optional<int> slic_iterations;
  std::optional<double> tolerance;

  void add(CLI::App& app, bool with_scales) {
    app.add_option("--config", config, "JSON run configuration; flags override it");
    if (with_scales) {
      app.add_option("--scales", scales, "Supervoxel counts, e.g. 2000,4000")->delimiter(',');
    }
    app.add_option("--sigma", sigma, "Edge kernel bandwidth");
    app.add_option("--kernel", kernel, "absolute | squared");
    app.add_option("--phi-multiplier", phi_multiplier, "Seed potential as a multiple of the max degree");
    app.add_option("--phi-seed", phi_seed, "Explicit seed potential");
    app.add_option("--axis", axis, "Longitudinal axis for seed slices (x, y or z)");
    app.add_option("--percentiles", percentiles, "Contrast stretch percentiles LOW,HIGH")->delimiter(',');
    app.add_option("--threads", threads, "Worker count or 'auto'");
    app.add_option("--slic-iterations", slic_iterations, "SLIC iteration cap");
    app.add_option("--tolerance", tolerance, "Eigensolver relative residual tolerance");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    bool threads_set = false;
    if (!config.empty()) {
      c = read_config(config, threads_set);
    }
    if (!threads_set) {
      c.threads = 1;
      if (const char* env = std::getenv(kThreadsEnv); env && *env) c.threads = parse_threads(env, kThreadsEnv);
    }
    if (!scales.empty()) c.scales = scales;
    if (sigma) c.sigma = *sigma;
    if (!kernel.empty()) c.kernel = parse_kernel(kernel);
    if (phi_multiplier) {
      c.phi_seed.multiplier = *phi_multiplier;
      c.phi_seed.value.reset();
    }
    if (phi_seed) c.phi_seed.value = *phi_seed;
    if (!axis.empty()) c.axis = parse_axis_name(axis);
    if (!percentiles.empty()) {
      if (percentiles.size() != 2) throw ArgumentError("--percentiles takes LOW,HIGH");
      c.percentile_low = percentiles[0];
      c.percentile_high = percentiles[1];
    }
    if (!threads.empty()) c.threads = parse_threads(threads, "--threads");
    if (slic_iterations) c.slic_iterations = *slic_iterations;
    if (tolerance) c.eigen.tolerance = *tolerance;
    validate_config(c);
    return c;
  }
};

int cmd_segment(const std::string& input, const std::string& prefix, const PipelineFlags& flags,
                std::ostream& out, std::ostream& err) {
  const PipelineConfig config = flags.resolve();
  const Volume volume = load_volume(input);
  const SegmentationResult result = segment_volume(volume, config);
  if (result.contrast_warning) err << "warning: contrast percentiles coincide; volume left unstretched\n";

  json diag;
  diag["input"] = input;
  diag["dims"] = {volume.dims().nx, volume.dims().ny, volume.dims().nz};
  diag["config"] = config_json(config);
  diag["threads_used"] = resolve_threads(config.threads);
  diag["contrast_warning"] = result.contrast_warning;
  diag["solid_fraction"] = result.mask.solid_fraction();
  auto scales = json::array();
  for (const auto& s : result.scales) scales.push_back(diagnostics_json(s));
  diag["scales"] = std::move(scales);
  diag["seconds"] = result.seconds;

  save_mask(result.mask, with_suffix(prefix, ".mask.raw"));
  save_field(result.field, with_suffix(prefix, ".field.raw"));
  write_text(with_suffix(prefix, ".diagnostics.json"), diag.dump(2) + "\n");
  char line[160];
  std::snprintf(line, sizeof line, "segmented %s with %zu scale(s) in %.3f s, solid fraction %.4f\n",
                to_string(volume.dims()).c_str(), config.scales.size(), result.seconds,
                result.mask.solid_fraction());
  out << line;
  return kOk;
}

struct EvalInputs {
  SegmentationMask mask;
  SaliencyField field;
  SegmentationMask truth;
};

EvalInputs load_eval(const fs::path& mask, const fs::path& field, const fs::path& truth, int solid_code) {
  EvalInputs in{load_mask(mask), load_field(field), binarize_ground_truth(load_labels(truth), solid_code)};
  if (!(in.mask.dims() == in.truth.dims()) || !(in.field.dims() == in.truth.dims())) {
    throw ArgumentError("mask " + to_string(in.mask.dims()) + ", field " + to_string(in.field.dims()) +
                        " and truth " + to_string(in.truth.dims()) + " differ in dims");
  }
  return in;
}

// Scale count and runtime recorded by `segment`, when present.
std::pair<std::size_t, double> read_run_info(const fs::path& diagnostics) {
  std::ifstream in(diagnostics);
  if (!in) return {0, 0.0};
  try {
    json j;
    in >> j;
    return {j.value("scales", json::array()).size(), j.value("seconds", 0.0)};
  } catch (const json::exception& e) {
    throw FormatError("malformed diagnostics " + diagnostics.string() + ": " + e.what());
  }
}

int cmd_evaluate_batch(const fs::path& dir, const fs::path& truth_dir, int solid_code, std::size_t thresholds,
                       const std::string& csv_path, std::ostream& out) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> ids;
  const std::string suffix = ".mask.raw";
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  if (ids.empty()) throw ArgumentError("no *.mask.raw files in " + dir.string());
  std::sort(ids.begin(), ids.end());

  std::ostringstream csv;
  csv << kReportCsvHeader << '\n';
  double sum_iou = 0.0, sum_auroc = 0.0, sum_me = 0.0, sum_time = 0.0, sum_scales = 0.0;
  for (const auto& id : ids) {
    const auto in = load_eval(dir / (id + ".mask.raw"), dir / (id + ".field.raw"),
                              truth_dir / (id + ".labels.raw"), solid_code);
    const MetricsReport r = evaluate(in.mask, in.field, in.truth, thresholds);
    const auto [scales, seconds] = read_run_info(dir / (id + ".diagnostics.json"));
    csv << report_csv_row(r, id, scales, seconds) << '\n';
    sum_iou += r.iou;
    sum_auroc += r.auroc;
    sum_me += r.me;
    sum_time += seconds;
    sum_scales += static_cast<double>(scales);
  }
  const double n = static_cast<double>(ids.size());
  MetricsReport mean;
  mean.iou = sum_iou / n;
  mean.auroc = sum_auroc / n;
  mean.me = sum_me / n;
  csv << report_csv_row(mean, "mean", static_cast<std::size_t>(std::lround(sum_scales / n)), sum_time / n) << '\n';
  if (csv_path.empty()) {
    out << csv.str();
  } else {
    write_text(csv_path, csv.str());
  }
  return kOk;
}

std::vector<std::uint8_t> parse_phases(const std::string& text) {
  static const std::map<std::string, std::uint8_t> names{{"gas", kGas}, {"pore", kGas}, {"water", kWater}, {"oil", kOil}};
  std::vector<std::uint8_t> phases;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto it = names.find(item);
    if (it == names.end()) throw ArgumentError("unknown pore phase '" + item + "' (use gas, water, oil)");
    phases.push_back(it->second);
  }
  return phases;
}

int cmd_info(const std::vector<std::string>& paths, std::ostream& out) {
  for (const auto& p : paths) {
    const RawHeader h = read_sidecar(sidecar_path(p));
    json j;
    j["path"] = p;
    j["dims"] = {h.dims.nx, h.dims.ny, h.dims.nz};
    j["dtype"] = to_string(h.dtype);
    j["kind"] = h.kind;
    if (h.kind == "labels") {
      const LabelVolume labels = load_labels(p);
      std::map<int, std::size_t> counts;
      for (auto v : labels.values()) ++counts[v];
      json phases = json::object();
      for (const auto& [code, name] : labels.codebook()) {
        phases[name] = {{"code", code}, {"fraction", static_cast<double>(counts[code]) / static_cast<double>(labels.size())}};
      }
      j["phases"] = phases;
    } else if (h.kind == "mask") {
      j["solid_fraction"] = load_mask(p).solid_fraction();
    } else if (h.kind == "supervoxels") {
      // ids only; nothing further to summarize
    } else {
      const Volume v = h.kind == "field" ? Volume(h.dims, load_field(p).data()) : load_volume(p, h);
      const auto [lo, hi] = std::minmax_element(v.values().begin(), v.values().end());
      double sum = 0.0;
      for (float x : v.values()) sum += x;
      j["min"] = *lo;
      j["max"] = *hi;
      j["mean"] = sum / static_cast<double>(v.size());
    }
    out << j.dump(2) << '\n';
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised solid/pore segmentation of 3D micro-CT volumes", "qcuts3d"};
  app.require_subcommand(1);

  // segment
  auto* seg = app.add_subcommand("segment", "Segment a volume into solid and pore");
  std::string seg_input, seg_output;
  PipelineFlags seg_flags;
  seg->add_option("--input,input", seg_input, "Input volume (.raw with .json sidecar)")->required();
  seg->add_option("--output,-o", seg_output, "Output prefix for .mask.raw, .field.raw, .diagnostics.json")->required();
  seg_flags.add(*seg, true);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a segmentation against ground-truth labels");
  std::string ev_mask, ev_field, ev_truth, ev_batch, ev_truth_dir, ev_json, ev_csv, ev_id, ev_format = "json";
  int ev_solid = kSolid;
  std::size_t ev_thresholds = kDefaultRocThresholds;
  ev->add_option("--mask", ev_mask, "Predicted mask");
  ev->add_option("--field", ev_field, "Saliency field used for the ROC curve");
  ev->add_option("--truth", ev_truth, "Ground-truth label volume");
  ev->add_option("--batch", ev_batch, "Directory of <id>.mask.raw / <id>.field.raw / <id>.labels.raw");
  ev->add_option("--truth-dir", ev_truth_dir, "Where batch mode finds <id>.labels.raw (default: --batch)");
  ev->add_option("--solid-code", ev_solid, "Label code of the solid phase");
  ev->add_option("--thresholds", ev_thresholds, "ROC threshold levels");
  ev->add_option("--json", ev_json, "Write the full report as JSON");
  ev->add_option("--csv", ev_csv, "Write the CSV row(s)");
  ev->add_option("--id", ev_id, "Volume id for the CSV row");
  ev->add_option("--format", ev_format, "stdout format: json | csv")->check(CLI::IsMember({"json", "csv"}));

  // phantom
  auto* ph = app.add_subcommand("phantom", "Generate a synthetic sphere-pack volume with labels");
  PhantomSpec spec;
  std::string ph_output = "phantom", ph_phases = "gas,water,oil", ph_dtype = "f32";
  ph->add_option("--output,-o", ph_output, "Output prefix for .volume.raw and .labels.raw");
  ph->add_option("--size", spec.size, "Cube edge in voxels");
  ph->add_option("--grains", spec.grain_count, "Number of spherical grains");
  ph->add_option("--rmin", spec.r_min, "Smallest grain radius (voxels)");
  ph->add_option("--rmax", spec.r_max, "Largest grain radius (voxels)");
  ph->add_option("--noise", spec.noise_sigma, "Gaussian noise std (intensity units)");
  ph->add_option("--blur", spec.blur_sigma, "Gaussian blur std (voxels)");
  ph->add_option("--seed", spec.seed, "RNG seed");
  ph->add_option("--max-overlap", spec.max_overlap, "Allowed fractional overlap of grain radii");
  ph->add_flag("--contain", spec.contain_grains, "Keep grains inside the cube");
  ph->add_option("--phases", ph_phases, "Pore phases sharing the void: gas,water,oil");
  ph->add_option("--seeds-per-phase", spec.seeds_per_phase, "Region-growth seeds per pore phase");
  ph->add_option("--dtype", ph_dtype, "Volume element type")->check(CLI::IsMember({"u8", "u16", "f32"}));

  // gft-curve
  auto* gc = app.add_subcommand("gft-curve", "Laplacian-basis reconstruction error of each phase");
  std::string gc_volume, gc_labels, gc_output;
  std::size_t gc_scale = kDefaultScales.front();
  std::vector<double> gc_fractions = kDefaultSpectrumFractions;
  std::optional<int> gc_phase;
  PipelineFlags gc_flags;
  gc->add_option("--volume", gc_volume, "Input volume")->required();
  gc->add_option("--labels", gc_labels, "Ground-truth label volume")->required();
  gc->add_option("--scale", gc_scale, "Supervoxel count");
  gc->add_option("--fractions", gc_fractions, "Spectrum fractions in (0,1]")->delimiter(',');
  gc->add_option("--phase", gc_phase, "Only this phase code");
  gc->add_option("--output,-o", gc_output, "CSV path (default: stdout)");
  gc_flags.add(*gc, false);

  // info
  auto* in = app.add_subcommand("info", "Describe raw files from their sidecars");
  std::vector<std::string> info_paths;
  in->add_option("paths", info_paths, "Raw files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kArgument;
  }

  try {
    if (seg->parsed()) return cmd_segment(seg_input, seg_output, seg_flags, out, err);

    if (ev->parsed()) {
      if (!ev_batch.empty()) {
        return cmd_evaluate_batch(ev_batch, ev_truth_dir.empty() ? ev_batch : ev_truth_dir, ev_solid,
                                  ev_thresholds, ev_csv, out);
      }
      if (ev_mask.empty() || ev_field.empty() || ev_truth.empty()) {
        throw ArgumentError("evaluate needs --mask, --field and --truth, or --batch");
      }
      const auto inputs = load_eval(ev_mask, ev_field, ev_truth, ev_solid);
      const MetricsReport r = evaluate(inputs.mask, inputs.field, inputs.truth, ev_thresholds);
      const std::string id = ev_id.empty() ? fs::path(ev_mask).stem().stem().string() : ev_id;
      const auto [scales, seconds] = read_run_info(fs::path(ev_mask).replace_extension().replace_extension(".diagnostics.json"));
      const std::string row = std::string(kReportCsvHeader) + "\n" + report_csv_row(r, id, scales, seconds) + "\n";
      const std::string report = report_json(r, id, scales, seconds) + "\n";
      if (!ev_json.empty()) write_text(ev_json, report);
      if (!ev_csv.empty()) write_text(ev_csv, row);
      out << (ev_format == "csv" ? row : report);
      return kOk;
    }

    if (ph->parsed()) {
      spec.pore_phases = parse_phases(ph_phases);
      const Phantom p = generate_phantom(spec);
      save_volume(p.volume, ph_output + ".volume.raw", parse_element_type(ph_dtype));
      save_labels(p.labels, ph_output + ".labels.raw");
      out << "wrote " << ph_output << ".volume.raw and " << ph_output << ".labels.raw (" << p.grains.size()
          << " grains, solid fraction "
          << static_cast<double>(std::count(p.labels.values().begin(), p.labels.values().end(), kSolid)) /
                 static_cast<double>(p.labels.size())
          << ")\n";
      return kOk;
    }

    if (gc->parsed()) {
      const PipelineConfig config = gc_flags.resolve();
      const Volume volume = load_volume(gc_volume);
      const LabelVolume labels = load_labels(gc_labels);
      if (!(volume.dims() == labels.dims())) {
        throw ArgumentError("volume " + to_string(volume.dims()) + " and labels " + to_string(labels.dims()) +
                            " differ in dims");
      }
      const ContrastResult adjusted = contrast_adjust(volume, config.percentile_low, config.percentile_high);
      SlicOptions slic;
      slic.target_count = gc_scale;
      slic.max_iterations = config.slic_iterations;
      slic.threads = resolve_threads(config.threads);
      const SupervoxelMap map = slic3d(adjusted.volume, slic);
      std::vector<PhaseCurve> curves =
          reconstruction_curves(labels, adjusted.volume, map, gc_fractions, config.sigma, config.kernel);
      if (gc_phase) {
        std::erase_if(curves, [&](const PhaseCurve& c) { return c.code != *gc_phase; });
        if (curves.empty()) throw ArgumentError("phase " + std::to_string(*gc_phase) + " is absent from the labels");
      }
      const std::string csv = curves_csv(curves);
      if (gc_output.empty()) {
        out << csv;
      } else {
        write_text(gc_output, csv);
      }
      return kOk;
    }

    if (in->parsed()) return cmd_info(info_paths, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
      err << "best residual: " << ce->best_residual() << '\n';
    }
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kArgument;
}

}  // namespace qcuts3d::cli
