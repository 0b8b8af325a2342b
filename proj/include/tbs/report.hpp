#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tbs/composite.hpp"
#include "tbs/fitting.hpp"
#include "tbs/synthetic.hpp"
#include "tbs/vtk_export.hpp"

namespace tbs {

struct PipelineConfig {
  // input: either a synthetic model name or a mesh file
  std::string model = "cube";
  int resolution = 7;
  unsigned seed = 0; // reserved for synthetic variants; the builtin models are deterministic
  std::string input_path;
  MeshFormat format = MeshFormat::medit_mesh;
  std::string uvw_sidecar; // optional precomputed parameterization

  GridDims dims;      // default 10 x 10 x 10 x 10 per block
  Degrees degrees;    // default cubic everywhere
  StageWeights weights;

  // termination thresholds; stage defaults follow the reference values
  double eps_curves = 1e-4;
  double eps_surfaces = 1e-5;
  double eps_solids = 1e-6;
  double eps_smooth = 1e-5;
  int n_tau = 20;
  double delta_d = 0.3;
  int max_iters_curves = 500;
  int max_iters_surfaces = 300;
  int max_iters_solids = 300;
  int max_iters_smooth = 150;

  int jacobian_samples = 21;
  std::string out_dir = "tbs_out";

  void validate() const {
    weights.validate();
    for (double e : {eps_curves, eps_surfaces, eps_solids, eps_smooth})
      if (!(e > 0.0))
        throw Error("config: termination thresholds must be positive");
    if (n_tau < 1 || delta_d <= 0.0 || delta_d >= 1.0)
      throw Error("config: invalid tau grid or descent-angle threshold");
    if (jacobian_samples < 2)
      throw Error("config: jacobian_samples must be at least 2");
    auto check = [](int count, int degree) {
      if (count < degree + 1)
        throw Error("config: control counts must be at least degree+1");
    };
    check(dims.m, degrees.du);
    check(dims.n, degrees.dv);
    check(dims.k, degrees.dw);
    check(dims.l, degrees.dr);
    if (resolution < 3)
      throw Error("config: resolution must be at least 3");
  }

  GfdOptions stage_options(int stage) const {
    GfdOptions o;
    o.n_tau = n_tau;
    o.delta_d = delta_d;
    switch (stage) {
    case 0: o.eps_e = eps_curves; o.max_iters = max_iters_curves; break;
    case 1: o.eps_e = eps_surfaces; o.max_iters = max_iters_surfaces; break;
    case 2: o.eps_e = eps_solids; o.max_iters = max_iters_solids; break;
    default: o.eps_e = eps_smooth; o.max_iters = max_iters_smooth; break;
    }
    return o;
  }
};

// key = value config files; '#' starts a comment
inline PipelineConfig parse_config_file(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open config: " + path);
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos)
      line = line.substr(0, hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      continue;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    std::istringstream vs(value);
    auto bad = [&] {
      throw Error("config: bad value for '" + key + "' at line " + std::to_string(lineno));
    };
    if (key == "model") cfg.model = value;
    else if (key == "resolution") { if (!(vs >> cfg.resolution)) bad(); }
    else if (key == "seed") { if (!(vs >> cfg.seed)) bad(); }
    else if (key == "input") cfg.input_path = value;
    else if (key == "format") {
      if (value == "medit") cfg.format = MeshFormat::medit_mesh;
      else if (value == "tetgen") cfg.format = MeshFormat::tetgen_pair;
      else if (value == "vtk") cfg.format = MeshFormat::vtk_legacy;
      else bad();
    }
    else if (key == "uvw") cfg.uvw_sidecar = value;
    else if (key == "dims") { if (!(vs >> cfg.dims.m >> cfg.dims.n >> cfg.dims.k >> cfg.dims.l)) bad(); }
    else if (key == "degrees") { if (!(vs >> cfg.degrees.du >> cfg.degrees.dv >> cfg.degrees.dw >> cfg.degrees.dr)) bad(); }
    else if (key == "lambda_c") { if (!(vs >> cfg.weights.lambda_c)) bad(); }
    else if (key == "lambda_s") { if (!(vs >> cfg.weights.lambda_s)) bad(); }
    else if (key == "mu_s") { if (!(vs >> cfg.weights.mu_s)) bad(); }
    else if (key == "lambda_h") { if (!(vs >> cfg.weights.lambda_h)) bad(); }
    else if (key == "mu_h") { if (!(vs >> cfg.weights.mu_h)) bad(); }
    else if (key == "lambda_f") { if (!(vs >> cfg.weights.lambda_f)) bad(); }
    else if (key == "eps_curves") { if (!(vs >> cfg.eps_curves)) bad(); }
    else if (key == "eps_surfaces") { if (!(vs >> cfg.eps_surfaces)) bad(); }
    else if (key == "eps_solids") { if (!(vs >> cfg.eps_solids)) bad(); }
    else if (key == "eps_smooth") { if (!(vs >> cfg.eps_smooth)) bad(); }
    else if (key == "n_tau") { if (!(vs >> cfg.n_tau)) bad(); }
    else if (key == "delta_d") { if (!(vs >> cfg.delta_d)) bad(); }
    else if (key == "max_iters_curves") { if (!(vs >> cfg.max_iters_curves)) bad(); }
    else if (key == "max_iters_surfaces") { if (!(vs >> cfg.max_iters_surfaces)) bad(); }
    else if (key == "max_iters_solids") { if (!(vs >> cfg.max_iters_solids)) bad(); }
    else if (key == "max_iters_smooth") { if (!(vs >> cfg.max_iters_smooth)) bad(); }
    else if (key == "jacobian_samples") { if (!(vs >> cfg.jacobian_samples)) bad(); }
    else if (key == "out_dir") cfg.out_dir = value;
    else throw Error("config: unknown key '" + key + "' at line " + std::to_string(lineno));
  }
  return cfg;
}

struct FitReport {
  std::string model;
  double fitting_error = 0.0;
  double min_scaled_jacobian = 0.0;
  double avg_scaled_jacobian = 0.0;
  double ratio_low = 0.0;
  std::array<double, 20> histogram{};
  double bbox_diagonal = 0.0;
  std::array<int, 7> subvol_vertices{};
  std::array<double, 4> stage_seconds{}; // curve, surface, solids, quality
  int degenerate_samples = 0;
};

// fitting error over all sub-volume vertices:
//   sqrt( sum_l  sum_i |H_l(u_i,v_i,w_i) - V_i|^2 / N_l ) / L
inline double compute_fitting_error(const TbsComposite &comp,
                                    const std::array<SubVolume, 7> &subvols, double bbox_diag) {
  double acc = 0.0;
  for (int s = 0; s < 7; ++s) {
    const SubVolume &sub = subvols[size_t(s)];
    if (sub.local_params.empty())
      throw Error("fitting error: empty sub-volume");
    BsplineSolid b = comp.materialize(SubId(s));
    double sum = 0.0;
    for (size_t v = 0; v < sub.local_params.size(); ++v) {
      const Vec3 &lp = sub.local_params[v];
      sum += norm2(b.eval(lp.x, lp.y, lp.z) - sub.mesh.vertices[v]);
    }
    acc += sum / double(sub.local_params.size());
  }
  return std::sqrt(acc) / bbox_diag;
}

// aggregated Jacobian statistics over the seven blocks (volume-weighted)
inline void compute_jacobian_stats(const TbsComposite &comp, int samples, FitReport &report) {
  double vol_total = 0.0, avg_acc = 0.0, low_acc = 0.0;
  std::array<double, 20> hist{};
  report.min_scaled_jacobian = std::numeric_limits<double>::infinity();
  report.degenerate_samples = 0;
  for (int s = 0; s < 7; ++s) {
    JacobianScan scan = dense_jacobian_scan(comp.materialize(SubId(s)), samples);
    report.degenerate_samples += scan.degenerate_samples;
    report.min_scaled_jacobian = std::min(report.min_scaled_jacobian, scan.min_scaled);
    vol_total += scan.volume;
    avg_acc += scan.avg_scaled * scan.volume;
    low_acc += scan.ratio_low * scan.volume;
    for (size_t b = 0; b < hist.size(); ++b)
      hist[b] += scan.histogram[b] * scan.volume;
  }
  if (vol_total > 0.0) {
    report.avg_scaled_jacobian = avg_acc / vol_total;
    report.ratio_low = low_acc / vol_total;
    for (size_t b = 0; b < hist.size(); ++b)
      report.histogram[b] = hist[b] / vol_total;
  }
}

inline double bbox_diagonal(const TetMesh &m) {
  Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
  for (const Vec3 &p : m.vertices)
    for (int c = 0; c < 3; ++c) {
      lo[c] = std::min(lo[c], p[c]);
      hi[c] = std::max(hi[c], p[c]);
    }
  return norm(hi - lo);
}

struct PipelineResult {
  FitReport report;
  TetMesh mesh;
  ParamVolume pv;
  std::array<SubVolume, 7> subvols;
  TbsComposite composite;
  std::array<StageResult, 4> stages;
  std::vector<InterfaceDeficit> deficits;
};

namespace detail {

inline void write_report_text(const FitReport &r, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  char buf[256];
  f << "model: " << r.model << "\n";
  std::snprintf(buf, sizeof buf, "fitting_error: %.12g\n", r.fitting_error);
  f << buf;
  std::snprintf(buf, sizeof buf, "min_scaled_jacobian: %.12g\n", r.min_scaled_jacobian);
  f << buf;
  std::snprintf(buf, sizeof buf, "avg_scaled_jacobian: %.12g\n", r.avg_scaled_jacobian);
  f << buf;
  std::snprintf(buf, sizeof buf, "ratio_scaled_jacobian_0_to_0.2: %.12g\n", r.ratio_low);
  f << buf;
  std::snprintf(buf, sizeof buf, "bbox_diagonal: %.12g\n", r.bbox_diagonal);
  f << buf;
  f << "degenerate_samples: " << r.degenerate_samples << "\n";
  f << "subvolume_vertices:";
  for (int n : r.subvol_vertices)
    f << " " << n;
  f << "\n";
  f << "scaled_jacobian_histogram:";
  for (double h : r.histogram) {
    std::snprintf(buf, sizeof buf, " %.12g", h);
    f << buf;
  }
  f << "\n";
}

inline void write_report_json(const FitReport &r, const std::string &path) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["fitting_error"] = r.fitting_error;
  j["min_scaled_jacobian"] = r.min_scaled_jacobian;
  j["avg_scaled_jacobian"] = r.avg_scaled_jacobian;
  j["ratio_low"] = r.ratio_low;
  j["bbox_diagonal"] = r.bbox_diagonal;
  j["degenerate_samples"] = r.degenerate_samples;
  j["subvolume_vertices"] = r.subvol_vertices;
  j["scaled_jacobian_histogram"] = r.histogram;
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  f << j.dump(2) << "\n";
}

inline void write_timings(const FitReport &r, const std::string &path) {
  std::ofstream f(path);
  char buf[160];
  std::snprintf(buf, sizeof buf, "curve %.3f\nsurface %.3f\ntbs %.3f\nquality %.3f\n",
                r.stage_seconds[0], r.stage_seconds[1], r.stage_seconds[2], r.stage_seconds[3]);
  f << buf;
}

inline void write_traces(const StageResult &stage, const std::string &dir) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < stage.traces.size(); ++i)
    export_trace(stage.traces[i], dir + "/" + stage.object_names[i] + ".txt");
}

} // namespace detail

inline TetMesh obtain_input_mesh(const PipelineConfig &cfg) {
  if (!cfg.input_path.empty())
    return load_tet_mesh(cfg.input_path, cfg.format);
  return make_synthetic_model(synthetic_model_from_name(cfg.model), cfg.resolution);
}

// mesh -> param -> partition -> init -> curves -> surfaces -> solids ->
// smoothness, with checkpoints, traces and the final report written under
// cfg.out_dir. Any stage failure aborts with the stage name and witness.
inline PipelineResult run_pipeline(const PipelineConfig &cfg, bool write_artifacts = true) {
  cfg.validate();
  PipelineResult res;
  res.report.model = cfg.input_path.empty() ? cfg.model : cfg.input_path;

  res.mesh = obtain_input_mesh(cfg);
  PatchTopology topo = extract_patch_topology(res.mesh);
  res.pv = cfg.uvw_sidecar.empty()
               ? parameterize_volume(res.mesh, topo)
               : parameterize_from_sidecar(res.mesh, topo, cfg.uvw_sidecar);
  PartitionResult part = partition(res.pv);
  res.subvols = std::move(part.subvols);
  res.composite = build_initial_composite(res.pv, res.subvols, cfg.dims, cfg.degrees);

  const std::string &dir = cfg.out_dir;
  if (write_artifacts) {
    std::filesystem::create_directories(dir);
    std::filesystem::create_directories(dir + "/subvols");
    save_tet_mesh(res.mesh, dir + "/mesh.mesh", MeshFormat::medit_mesh);
    save_uvw(res.pv.params, dir + "/params.uvw");
    for (int s = 0; s < 7; ++s)
      save_subvolume(res.subvols[size_t(s)], dir + "/subvols/" + sub_name(SubId(s)),
                     MeshFormat::medit_mesh);
    save_composite(res.composite, dir + "/composite_init");
  }

  using clock = std::chrono::steady_clock;
  auto timed = [&](int stage, auto &&fn) {
    auto t0 = clock::now();
    res.stages[size_t(stage)] = fn();
    res.report.stage_seconds[size_t(stage)] =
        std::chrono::duration<double>(clock::now() - t0).count();
  };
  timed(0, [&] {
    return fit_boundary_curves(res.composite, res.subvols, cfg.weights, cfg.stage_options(0));
  });
  if (write_artifacts)
    save_composite(res.composite, dir + "/composite_curves");
  timed(1, [&] {
    return fit_boundary_surfaces(res.composite, res.subvols, cfg.weights, cfg.stage_options(1));
  });
  if (write_artifacts)
    save_composite(res.composite, dir + "/composite_surfaces");
  timed(2, [&] {
    return fit_solids(res.composite, res.subvols, cfg.weights, cfg.stage_options(2));
  });
  if (write_artifacts)
    save_composite(res.composite, dir + "/composite_solids");
  timed(3, [&] {
    return improve_smoothness_fairness(res.composite, cfg.weights, cfg.stage_options(3));
  });
  if (write_artifacts)
    save_composite(res.composite, dir + "/composite_smooth");

  // hard validity gate before any report is emitted
  for (int s = 0; s < 7; ++s) {
    auto [ok, w] = check_solid_validity(res.composite.materialize(SubId(s)));
    if (!ok)
      throw Error(std::string("pipeline gate: block ") + sub_name(SubId(s)) +
                  " failed the validity check at sub-grid (" + std::to_string(w.I) + "," +
                  std::to_string(w.J) + "," + std::to_string(w.K) + ")");
  }

  res.report.bbox_diagonal = bbox_diagonal(res.mesh);
  res.report.fitting_error =
      compute_fitting_error(res.composite, res.subvols, res.report.bbox_diagonal);
  compute_jacobian_stats(res.composite, cfg.jacobian_samples, res.report);
  for (int s = 0; s < 7; ++s)
    res.report.subvol_vertices[size_t(s)] = int(res.subvols[size_t(s)].mesh.vertices.size());
  res.deficits = g1_deficit(res.composite);

  if (write_artifacts) {
    detail::write_report_text(res.report, dir + "/report.txt");
    detail::write_report_json(res.report, dir + "/report.json");
    detail::write_timings(res.report, dir + "/timings.txt");
    static const char *stage_names[4] = {"curves", "surfaces", "solids", "smooth"};
    for (int st = 0; st < 4; ++st)
      detail::write_traces(res.stages[size_t(st)], dir + "/traces/" + stage_names[st]);
  }
  return res;
}

} // namespace tbs
