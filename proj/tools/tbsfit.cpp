// Pipeline driver: tet mesh in, seven valid trivariate B-spline blocks out.

#include <CLI11.hpp>

#include <iostream>

#include "tbs/report.hpp"

using namespace tbs;

namespace {

MeshFormat parse_format(const std::string &name) {
  if (name == "medit")
    return MeshFormat::medit_mesh;
  if (name == "tetgen")
    return MeshFormat::tetgen_pair;
  if (name == "vtk")
    return MeshFormat::vtk_legacy;
  throw Error("unknown mesh format: " + name + " (expected medit|tetgen|vtk)");
}

struct WorkDir {
  std::string dir;
  std::string mesh_path() const { return dir + "/mesh.mesh"; }
  std::string uvw_path() const { return dir + "/params.uvw"; }
  std::string subvol_base(SubId s) const { return dir + "/subvols/" + sub_name(s); }
  std::string composite_dir(const std::string &stage) const { return dir + "/composite_" + stage; }

  TetMesh load_mesh() const { return load_tet_mesh(mesh_path(), MeshFormat::medit_mesh); }

  ParamVolume load_pv() const {
    TetMesh m = load_mesh();
    PatchTopology topo = extract_patch_topology(m);
    return parameterize_from_sidecar(m, topo, uvw_path());
  }

  std::array<SubVolume, 7> load_subvols() const {
    std::array<SubVolume, 7> out;
    for (int s = 0; s < 7; ++s)
      out[size_t(s)] = load_subvolume(SubId(s), subvol_base(SubId(s)), MeshFormat::medit_mesh);
    return out;
  }
};

void add_config_options(CLI::App *cmd, PipelineConfig &cfg, std::string &config_path) {
  cmd->add_option("--config", config_path, "key = value configuration file");
  cmd->add_option("--model", cfg.model, "synthetic model: cube|twisted_bar|bent_L|sphereish");
  cmd->add_option("--resolution", cfg.resolution, "synthetic lattice cells per edge");
  cmd->add_option("--input", cfg.input_path, "input mesh instead of a synthetic model");
  cmd->add_option("--uvw", cfg.uvw_sidecar, "precomputed per-vertex parameters");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--dims", [&cfg](const std::vector<std::string> &vals) {
    if (vals.size() != 4)
      return false;
    cfg.dims = {std::stoi(vals[0]), std::stoi(vals[1]), std::stoi(vals[2]), std::stoi(vals[3])};
    return true;
  }, "control counts m n k l")->expected(4);
  cmd->add_option("--degrees", [&cfg](const std::vector<std::string> &vals) {
    if (vals.size() != 4)
      return false;
    cfg.degrees = {std::stoi(vals[0]), std::stoi(vals[1]), std::stoi(vals[2]),
                   std::stoi(vals[3])};
    return true;
  }, "degrees du dv dw dr")->expected(4);
}

PipelineConfig resolve_config(const std::string &config_path, const PipelineConfig &overrides,
                              const CLI::App *cmd) {
  if (config_path.empty())
    return overrides;
  PipelineConfig cfg = parse_config_file(config_path);
  // CLI flags win over the file
  if (cmd->count("--model")) cfg.model = overrides.model;
  if (cmd->count("--resolution")) cfg.resolution = overrides.resolution;
  if (cmd->count("--input")) cfg.input_path = overrides.input_path;
  if (cmd->count("--uvw")) cfg.uvw_sidecar = overrides.uvw_sidecar;
  if (cmd->count("--out")) cfg.out_dir = overrides.out_dir;
  if (cmd->count("--dims")) cfg.dims = overrides.dims;
  if (cmd->count("--degrees")) cfg.degrees = overrides.degrees;
  return cfg;
}

int run_stage(const WorkDir &work, const PipelineConfig &cfg, const std::string &stage) {
  auto subvols = work.load_subvols();
  static const std::map<std::string, std::pair<std::string, int>> chain = {
      {"fit-curves", {"init", 0}},
      {"fit-surfaces", {"curves", 1}},
      {"fit-solids", {"surfaces", 2}},
      {"smooth", {"solids", 3}},
  };
  auto [prev, stage_idx] = chain.at(stage);
  TbsComposite comp = load_composite(work.composite_dir(prev));
  if (comp.stage_completed != stage_idx)
    throw Error("checkpoint " + work.composite_dir(prev) + " is at stage " +
                std::to_string(comp.stage_completed) + ", expected " +
                std::to_string(stage_idx));
  StageResult result;
  static const char *names[4] = {"curves", "surfaces", "solids", "smooth"};
  switch (stage_idx) {
  case 0:
    result = fit_boundary_curves(comp, subvols, cfg.weights, cfg.stage_options(0));
    break;
  case 1:
    result = fit_boundary_surfaces(comp, subvols, cfg.weights, cfg.stage_options(1));
    break;
  case 2:
    result = fit_solids(comp, subvols, cfg.weights, cfg.stage_options(2));
    break;
  default:
    result = improve_smoothness_fairness(comp, cfg.weights, cfg.stage_options(3));
    break;
  }
  save_composite(comp, work.composite_dir(names[stage_idx]));
  detail::write_traces(result, work.dir + "/traces/" + names[stage_idx]);
  int iters = 0;
  for (const GfdTrace &t : result.traces)
    iters += int(t.records.size());
  std::cout << stage << ": " << result.traces.size() << " problems, " << iters
            << " iterations -> " << work.composite_dir(names[stage_idx]) << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"seven-block trivariate B-spline fitting with a positive-Jacobian guarantee"};
  app.require_subcommand(1);

  auto *synth = app.add_subcommand("synth", "write a synthetic labeled tet mesh");
  std::string synth_model = "cube", synth_out = "mesh.mesh", synth_format = "medit";
  int synth_res = 7;
  synth->add_option("--model", synth_model, "cube|twisted_bar|bent_L|sphereish");
  synth->add_option("--resolution", synth_res, "lattice cells per edge");
  synth->add_option("--out", synth_out, "output mesh path");
  synth->add_option("--format", synth_format, "medit|tetgen|vtk");

  auto *ingest = app.add_subcommand("ingest", "load, validate and canonicalize a mesh");
  std::string in_path, in_format = "medit", work_dir = "tbs_work";
  ingest->add_option("--input", in_path, "input mesh path (tetgen: base name)")->required();
  ingest->add_option("--format", in_format, "medit|tetgen|vtk");
  ingest->add_option("--work", work_dir, "work directory");

  auto *param = app.add_subcommand("param", "harmonic parameterization into the unit cube");
  std::string param_uvw;
  param->add_option("--work", work_dir, "work directory");
  param->add_option("--uvw", param_uvw, "adopt precomputed parameters instead of solving");

  auto *part = app.add_subcommand("partition", "pillow partition into seven sub-volumes");
  part->add_option("--work", work_dir, "work directory");

  auto *init = app.add_subcommand("init", "initial TBS control grids");
  PipelineConfig init_cfg;
  std::string init_config;
  init->add_option("--work", work_dir, "work directory");
  add_config_options(init, init_cfg, init_config);

  std::map<std::string, CLI::App *> stage_cmds;
  std::string stage_config;
  for (const char *name : {"fit-curves", "fit-surfaces", "fit-solids", "smooth"}) {
    auto *cmd = app.add_subcommand(name, std::string("pipeline stage: ") + name);
    cmd->add_option("--work", work_dir, "work directory");
    cmd->add_option("--config", stage_config, "key = value configuration file");
    stage_cmds[name] = cmd;
  }

  auto *report = app.add_subcommand("report", "metrics of the final composite");
  report->add_option("--work", work_dir, "work directory");

  auto *exp = app.add_subcommand("export", "VTK exports of the fitted blocks");
  std::string exp_jacobian, exp_isocurves, exp_block = "C", exp_stage = "smooth";
  int exp_samples = 21;
  exp->add_option("--work", work_dir, "work directory");
  exp->add_option("--stage", exp_stage, "composite checkpoint: init|curves|surfaces|solids|smooth");
  exp->add_option("--jacobian", exp_jacobian, "scaled-jacobian field output path");
  exp->add_option("--block", exp_block, "block for --jacobian: C|U|D|L|R|F|B");
  exp->add_option("--samples", exp_samples, "samples per axis");
  exp->add_option("--isocurves", exp_isocurves, "iso-parametric curve polylines output path");

  auto *run = app.add_subcommand("run", "full pipeline");
  PipelineConfig run_cfg;
  std::string run_config;
  add_config_options(run, run_cfg, run_config);

  CLI11_PARSE(app, argc, argv);

  try {
    WorkDir work{work_dir};
    if (synth->parsed()) {
      TetMesh m = make_synthetic_model(synthetic_model_from_name(synth_model), synth_res);
      save_tet_mesh(m, synth_out, parse_format(synth_format));
      std::cout << "wrote " << synth_out << " (" << m.num_vertices() << " vertices, "
                << m.num_tets() << " tets)\n";
    } else if (ingest->parsed()) {
      TetMesh m = load_tet_mesh(in_path, parse_format(in_format));
      PatchTopology topo = extract_patch_topology(m);
      std::filesystem::create_directories(work.dir);
      save_tet_mesh(m, work.mesh_path(), MeshFormat::medit_mesh);
      std::cout << "ingested " << m.num_vertices() << " vertices, " << m.num_tets()
                << " tets, " << m.boundary_tris.size() << " boundary triangles, "
                << topo.boundary_polylines.size() << " patch polylines -> " << work.mesh_path()
                << "\n";
    } else if (param->parsed()) {
      TetMesh m = work.load_mesh();
      PatchTopology topo = extract_patch_topology(m);
      ParamVolume pv = param_uvw.empty() ? parameterize_volume(m, topo)
                                         : parameterize_from_sidecar(m, topo, param_uvw);
      save_uvw(pv.params, work.uvw_path());
      std::cout << "parameterized " << m.num_vertices() << " vertices; positive orientation "
                << positive_orientation_ratio(pv) * 100.0 << "% -> " << work.uvw_path() << "\n";
    } else if (part->parsed()) {
      ParamVolume pv = work.load_pv();
      PartitionResult pr = partition(pv);
      std::filesystem::create_directories(work.dir + "/subvols");
      for (int s = 0; s < 7; ++s) {
        save_subvolume(pr.subvols[size_t(s)], work.subvol_base(SubId(s)),
                       MeshFormat::medit_mesh);
        std::cout << sub_name(SubId(s)) << ": " << pr.subvols[size_t(s)].mesh.num_tets()
                  << " tets\n";
      }
      if (pr.degenerate_discarded > 0)
        std::cout << "warning: discarded " << pr.degenerate_discarded
                  << " degenerate clipped tets\n";
    } else if (init->parsed()) {
      PipelineConfig cfg = resolve_config(init_config, init_cfg, init);
      cfg.validate();
      ParamVolume pv = work.load_pv();
      auto subvols = work.load_subvols();
      TbsComposite comp = build_initial_composite(pv, subvols, cfg.dims, cfg.degrees);
      save_composite(comp, work.composite_dir("init"));
      std::cout << "initial composite: " << comp.pool.size() << " control points -> "
                << work.composite_dir("init") << "\n";
    } else if (report->parsed()) {
      TbsComposite comp = load_composite(work.composite_dir("smooth"));
      auto subvols = work.load_subvols();
      TetMesh m = work.load_mesh();
      FitReport rep;
      rep.model = work.mesh_path();
      rep.bbox_diagonal = bbox_diagonal(m);
      rep.fitting_error = compute_fitting_error(comp, subvols, rep.bbox_diagonal);
      compute_jacobian_stats(comp, 21, rep);
      for (int s = 0; s < 7; ++s)
        rep.subvol_vertices[size_t(s)] = int(subvols[size_t(s)].mesh.vertices.size());
      detail::write_report_text(rep, work.dir + "/report.txt");
      detail::write_report_json(rep, work.dir + "/report.json");
      std::cout << "fitting_error " << rep.fitting_error << ", min scaled jacobian "
                << rep.min_scaled_jacobian << ", avg " << rep.avg_scaled_jacobian
                << ", ratio(0,0.2] " << rep.ratio_low << "\n";
    } else if (exp->parsed()) {
      TbsComposite comp = load_composite(work.composite_dir(exp_stage));
      if (!exp_jacobian.empty()) {
        SubId block = SubId::C;
        for (int s = 0; s < 7; ++s)
          if (exp_block == sub_name(SubId(s)))
            block = SubId(s);
        export_jacobian_field_vtk(comp.materialize(block), exp_samples, exp_jacobian);
        std::cout << "wrote " << exp_jacobian << "\n";
      }
      if (!exp_isocurves.empty()) {
        export_isocurves_vtk(comp, 5, exp_samples, exp_isocurves);
        std::cout << "wrote " << exp_isocurves << "\n";
      }
    } else if (run->parsed()) {
      PipelineConfig cfg = resolve_config(run_config, run_cfg, run);
      PipelineResult res = run_pipeline(cfg);
      std::cout << "model " << res.report.model << "\n"
                << "fitting_error " << res.report.fitting_error << "\n"
                << "min scaled jacobian " << res.report.min_scaled_jacobian << "\n"
                << "avg scaled jacobian " << res.report.avg_scaled_jacobian << "\n"
                << "ratio(0,0.2] " << res.report.ratio_low << "\n"
                << "report -> " << cfg.out_dir << "/report.txt\n";
    } else {
      for (const auto &[name, cmd] : stage_cmds)
        if (cmd->parsed()) {
          PipelineConfig cfg =
              stage_config.empty() ? PipelineConfig{} : parse_config_file(stage_config);
          cfg.validate();
          return run_stage(work, cfg, name);
        }
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
