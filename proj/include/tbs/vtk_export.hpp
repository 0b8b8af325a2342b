#pragma once

#include <cstdio>
#include <fstream>

#include "tbs/composite.hpp"
#include "tbs/spline.hpp"

namespace tbs {

// Scaled-Jacobian field on a uniform parameter lattice as a VTK legacy
// structured grid, for external visualization.
inline void export_jacobian_field_vtk(const BsplineSolid &s, int samples,
                                      const std::string &path) {
  if (samples < 2)
    throw Error("jacobian field export: need at least 2 samples per axis");
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  const int n = samples;
  f << "# vtk DataFile Version 3.0\nscaled jacobian field\nASCII\nDATASET STRUCTURED_GRID\n";
  f << "DIMENSIONS " << n << " " << n << " " << n << "\n";
  f << "POINTS " << n * n * n << " double\n";
  char buf[96];
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        Vec3 p = s.eval(double(i) / (n - 1), double(j) / (n - 1), double(k) / (n - 1));
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
        f << buf;
      }
  f << "POINT_DATA " << n * n * n << "\nSCALARS scaled_jacobian double 1\nLOOKUP_TABLE default\n";
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        auto sj = s.scaled_jacobian(double(i) / (n - 1), double(j) / (n - 1),
                                    double(k) / (n - 1));
        std::snprintf(buf, sizeof buf, "%.17g\n", sj ? *sj : -2.0);
        f << buf;
      }
}

// Iso-parametric curves of every block as VTK polylines (cut-away style
// inspection of the composite).
inline void export_isocurves_vtk(const TbsComposite &comp, int curves_per_axis, int samples,
                                 const std::string &path) {
  if (curves_per_axis < 2 || samples < 2)
    throw Error("isocurve export: need at least 2 curves and samples");
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  std::vector<Vec3> points;
  std::vector<std::vector<int>> lines;
  for (int s = 0; s < 7; ++s) {
    BsplineSolid b = comp.materialize(SubId(s));
    for (int axis = 0; axis < 3; ++axis)
      for (int a = 0; a < curves_per_axis; ++a)
        for (int c = 0; c < curves_per_axis; ++c) {
          double pa = double(a) / (curves_per_axis - 1);
          double pc = double(c) / (curves_per_axis - 1);
          std::vector<int> line;
          for (int t = 0; t < samples; ++t) {
            double pt = double(t) / (samples - 1);
            Vec3 uvw;
            uvw[axis] = pt;
            uvw[(axis + 1) % 3] = pa;
            uvw[(axis + 2) % 3] = pc;
            line.push_back(int(points.size()));
            points.push_back(b.eval(uvw.x, uvw.y, uvw.z));
          }
          lines.push_back(std::move(line));
        }
  }
  f << "# vtk DataFile Version 3.0\niso-parametric curves\nASCII\nDATASET POLYDATA\n";
  f << "POINTS " << points.size() << " double\n";
  char buf[96];
  for (const Vec3 &p : points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    f << buf;
  }
  size_t total = 0;
  for (const auto &l : lines)
    total += l.size() + 1;
  f << "LINES " << lines.size() << " " << total << "\n";
  for (const auto &l : lines) {
    f << l.size();
    for (int idx : l)
      f << " " << idx;
    f << "\n";
  }
}

} // namespace tbs
