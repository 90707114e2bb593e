// Directional-quantile solver demo.
//
// Loads a small planar point cloud from CSV and solves for the geometric
// median (u = 0) plus a ring of directional quantiles, printing the solver
// diagnostics for each.  Compare with `qoe solve` in the CLI, which exposes
// the same solver as JSON.
//
// usage: demo_solver [points.csv] [ux uy]

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <string>

#include <qoe/dataset_io.hpp>
#include <qoe/geometry.hpp>

namespace {

const char* status_name(qoe::GeoStatus s) {
  switch (s) {
    case qoe::GeoStatus::Interior: return "interior";
    case qoe::GeoStatus::Anchored: return "anchored";
    case qoe::GeoStatus::CollinearFallback: return "collinear-fallback";
  }
  return "?";
}

void solve_and_print(const qoe::PointSet& cloud, const qoe::Vec& u) {
  const auto res = qoe::geometric_quantile(cloud, u);
  std::cout << "  u = (" << u(0) << ", " << u(1) << ")"
            << "  ->  y = (" << res.point(0) << ", " << res.point(1) << ")"
            << "   [" << status_name(res.status)
            << ", residual " << res.residual
            << ", " << res.iterations << " iterations]\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::string path = "demo/pts.csv";
  if (argc > 1) path = argv[1];

  qoe::PointSet cloud;
  try {
    cloud = qoe::read_points_csv(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "usage: demo_solver [points.csv] [ux uy]\n";
    return 2;
  }
  if (cloud.points.empty() || cloud.points.front().size() != 2) {
    std::cerr << "error: expected a two-column point cloud\n";
    return 2;
  }

  std::cout << "loaded " << cloud.points.size() << " points from " << path << "\n\n";

  if (argc > 3) {
    // Single user-supplied direction.
    qoe::Vec u(2);
    u << std::atof(argv[2]), std::atof(argv[3]);
    solve_and_print(cloud, u);
    return 0;
  }

  std::cout << "geometric median:\n";
  solve_and_print(cloud, qoe::Vec::Zero(2));

  std::cout << "\ndirectional quantiles (||u|| = 0.5):\n";
  const double r = 0.5;
  for (int a = 0; a < 8; ++a) {
    const double ang = a * 0.25 * std::numbers::pi;
    qoe::Vec u(2);
    u << r * std::cos(ang), r * std::sin(ang);
    solve_and_print(cloud, u);
  }

  std::cout << "\ncoordinatewise (L1) median for comparison:\n";
  const auto l1 = qoe::l1_geometric_quantile(cloud, qoe::Vec::Zero(2));
  const bool any_flat =
      std::any_of(l1.nonunique.begin(), l1.nonunique.end(), [](auto f) { return f != 0; });
  std::cout << "  y = (" << l1.point(0) << ", " << l1.point(1) << ")"
            << (any_flat ? "   [midpoint of a flat stretch]" : "") << "\n";
  return 0;
}
