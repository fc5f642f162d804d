#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gefm/meshgraph/graph.hpp"

using namespace gefm::mesh;

namespace {

std::size_t count(const MeshGraph& g, const std::string& name) { return g.edge_set(name).edges.size(); }

std::vector<std::size_t> in_degrees(const EdgeList& edges, std::size_t n) {
  std::vector<std::size_t> deg(n, 0);
  for (const auto& e : edges) ++deg[e.second];
  return deg;
}

std::vector<std::size_t> out_degrees(const EdgeList& edges, std::size_t n) {
  std::vector<std::size_t> deg(n, 0);
  for (const auto& e : edges) ++deg[e.first];
  return deg;
}

}  // namespace

TEST(Icosphere, VertexAndEdgeCountsFollowTheSplittingFormula) {
  const auto levels = build_icosphere_levels(4);
  ASSERT_EQ(levels.size(), 5u);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const std::size_t p = std::size_t{1} << (2 * k);
    EXPECT_EQ(levels[k].size(), 10 * p + 2);
    EXPECT_EQ(levels[k].edges.size(), 60 * p);
    EXPECT_EQ(levels[k].faces.size(), 20 * p);
    for (const auto& v : levels[k].pos) EXPECT_NEAR(norm(v), 1.0, 1e-14);
  }
  EXPECT_EQ(levels[0].size(), 12u);
  EXPECT_EQ(levels[0].edges.size(), 60u);
  EXPECT_EQ(levels[4].size(), 2562u);
  EXPECT_EQ(levels[4].edges.size(), 15360u);
}

TEST(Icosphere, LevelsAreNestedAsPrefixes) {
  const auto levels = build_icosphere_levels(3);
  for (std::size_t k = 1; k < levels.size(); ++k) {
    const auto map = nesting_map(levels[k - 1], levels[k]);
    for (std::uint32_t i = 0; i < map.size(); ++i) EXPECT_EQ(map[i], i);
  }
}

TEST(Icosphere, EveryVertexOfTheBaseHasFiveNeighbours) {
  const auto base = build_icosphere_levels(0)[0];
  const auto deg = in_degrees(base.edges, base.size());
  for (auto d : deg) EXPECT_EQ(d, 5u);
}

TEST(Multiscale, SingleLevelIsUnchanged) {
  const auto levels = build_icosphere_levels(1);
  const auto merged = merge_multiscale({levels[1]});
  EXPECT_EQ(merged.edges, levels[1].edges);
  EXPECT_EQ(merged.size(), levels[1].size());
}

TEST(Multiscale, GlobalMergeMatchesReferenceCount) {
  const auto merged = merge_multiscale(build_icosphere_levels(4));
  EXPECT_EQ(merged.size(), 2562u);
  EXPECT_EQ(merged.edges.size(), 20460u);
}

TEST(Multiscale, RejectsLevelsThatAreNotNested) {
  auto levels = build_icosphere_levels(1);
  for (auto& p : levels[0].pos) p = normalized(p + Vec3{0.01, 0.0, 0.0});
  EXPECT_THROW(merge_multiscale(levels), std::invalid_argument);
}

TEST(GlobalGraph, ReferenceStatisticsAreReproduced) {
  const auto grid = GridSpec::latlon_with_poles(121, 240);
  ASSERT_EQ(grid.size(), 29040u);
  const auto g = build_global_graph(Kind::hierarchical, grid, {});
  EXPECT_TRUE(validate(g).empty());
  EXPECT_EQ(g.level_size(1), 2562u);
  EXPECT_EQ(g.level_size(2), 642u);
  EXPECT_EQ(g.level_size(3), 162u);
  EXPECT_EQ(g.level_size(4), 42u);
  EXPECT_EQ(count(g, "M2M(1)"), 15360u);
  EXPECT_EQ(count(g, "M2M(2)"), 3840u);
  EXPECT_EQ(count(g, "M2M(3)"), 960u);
  EXPECT_EQ(count(g, "M2M(4)"), 240u);
  EXPECT_EQ(count(g, "Up(1->2)"), 4482u);
  EXPECT_EQ(count(g, "Up(2->3)"), 1122u);
  EXPECT_EQ(count(g, "Up(3->4)"), 282u);
  EXPECT_EQ(count(g, "G2M"), 46158u);
  EXPECT_EQ(count(g, "M2G"), 87120u);
  const auto stats = graph_stats(g);
  EXPECT_EQ(stats.mesh_nodes, 3408u);
  EXPECT_EQ(stats.mesh_edges, 32172u);

  for (int l = 1; l <= 3; ++l) {
    const auto deg = out_degrees(g.edge_set(up_name(l)).edges, g.level_size(l));
    EXPECT_EQ(*std::min_element(deg.begin(), deg.end()), 1u);
    EXPECT_EQ(*std::max_element(deg.begin(), deg.end()), 2u);
  }
  for (auto d : in_degrees(g.edge_set(kM2G).edges, grid.size())) ASSERT_EQ(d, 3u);
  for (auto d : out_degrees(g.edge_set(kG2M).edges, grid.size())) ASSERT_GE(d, 1u);

  const auto ms = build_global_graph(Kind::multiscale, grid, {});
  EXPECT_TRUE(validate(ms).empty());
  EXPECT_EQ(ms.level_size(1), 2562u);
  EXPECT_EQ(count(ms, "M2M(1)"), 20460u);
  EXPECT_EQ(count(ms, "G2M"), 46158u);
  EXPECT_EQ(count(ms, "M2G"), 87120u);
}

TEST(GlobalGraph, DownIsTheExactReversalOfUp) {
  const auto g = build_global_graph(Kind::hierarchical, GridSpec::latlon_cell_centred(12, 24),
                                    {.refinements = 3, .hierarchy_levels = 3});
  for (int l = 1; l < 3; ++l) {
    const auto& up = g.edge_set(up_name(l)).edges;
    const auto& down = g.edge_set(down_name(l + 1)).edges;
    ASSERT_EQ(up.size(), down.size());
    std::set<Edge> flipped;
    for (const auto& [s, r] : up) flipped.emplace(r, s);
    EXPECT_EQ(flipped, std::set<Edge>(down.begin(), down.end()));
  }
}

TEST(GlobalGraph, ToyGridConnectsEveryGridNode) {
  const auto grid = GridSpec::latlon_cell_centred(12, 24);
  for (auto kind : {Kind::hierarchical, Kind::multiscale}) {
    const auto g = build_global_graph(kind, grid, {.refinements = 1, .hierarchy_levels = 2});
    EXPECT_TRUE(validate(g).empty());
    for (auto d : out_degrees(g.edge_set(kG2M).edges, grid.size())) EXPECT_GE(d, 1u);
    for (auto d : in_degrees(g.edge_set(kM2G).edges, grid.size())) EXPECT_EQ(d, 3u);
  }
}

TEST(GridToMesh, GridNodeOnAMeshNodeReachesIt) {
  const auto levels = build_icosphere_levels(2);
  const auto& mesh = levels.back();
  const std::vector<Vec3> grid{mesh.pos[17], mesh.pos[100]};
  const auto edges = connect_grid_to_mesh(grid, mesh, 0.6 * mesh.max_edge_length());
  EXPECT_TRUE(std::count(edges.begin(), edges.end(), Edge{0, 17}) == 1);
  EXPECT_TRUE(std::count(edges.begin(), edges.end(), Edge{1, 100}) == 1);
}

TEST(GridToMesh, IsolatedGridNodeIsAnError) {
  const auto mesh = build_icosphere_levels(0)[0];
  const std::vector<Vec3> grid{normalized(mesh.pos[0] + mesh.pos[1] + mesh.pos[2])};
  EXPECT_THROW(connect_grid_to_mesh(grid, mesh, 1e-3), std::runtime_error);
}

TEST(MeshToGrid, ContainingTriangleHoldsThePoint) {
  const auto levels = build_icosphere_levels(2);
  const auto grid = grid_positions(GridSpec::latlon_cell_centred(9, 17));
  const auto edges = connect_mesh_to_grid_containing(levels, grid);
  std::map<std::uint32_t, std::vector<std::uint32_t>> corners;
  for (const auto& [m, g] : edges) corners[g].push_back(m);
  ASSERT_EQ(corners.size(), grid.size());
  const auto& fine = levels.back();
  for (const auto& [g, c] : corners) {
    ASSERT_EQ(c.size(), 3u);
    // The containing face is a face of the mesh, and the point lies inside it:
    // its projection onto the plane of the face has non-negative barycentric
    // coordinates.
    const Vec3 a = fine.pos[c[0]], b = fine.pos[c[1]], d = fine.pos[c[2]];
    const Vec3 n = cross(b - a, d - a);
    const Vec3 p = (dot(a, n) / dot(grid[g], n)) * grid[g];
    const double area = norm(n);
    const double u = dot(cross(b - p, d - p), n) / (area * area);
    const double v = dot(cross(d - p, a - p), n) / (area * area);
    const double w = 1.0 - u - v;
    EXPECT_GE(u, -1e-9);
    EXPECT_GE(v, -1e-9);
    EXPECT_GE(w, -1e-9);
  }
}

TEST(LamLevels, ThreeByThreeHasFortyEdges) {
  const auto levels = build_lam_levels(3, 3, 1, {0, 3, 0, 3});
  ASSERT_EQ(levels.size(), 1u);
  EXPECT_EQ(levels[0].size(), 9u);
  EXPECT_EQ(levels[0].edges.size(), 40u);
}

TEST(LamLevels, ReferenceLatticeCounts) {
  const auto levels = build_lam_levels(81, 81, 4, {0, 267, 0, 237});
  ASSERT_EQ(levels.size(), 4u);
  EXPECT_EQ(levels[3].size(), 6561u);
  EXPECT_EQ(levels[2].size(), 729u);
  EXPECT_EQ(levels[1].size(), 81u);
  EXPECT_EQ(levels[0].size(), 9u);
  EXPECT_EQ(levels[3].edges.size(), 51520u);
  EXPECT_EQ(levels[2].edges.size(), 5512u);
  EXPECT_EQ(levels[1].edges.size(), 544u);
  EXPECT_EQ(levels[0].edges.size(), 40u);
  EXPECT_EQ(merge_multiscale(levels).edges.size(), 57616u);
}

TEST(LamLevels, InteriorNodesHaveEightInNeighbours) {
  const auto level = build_lam_levels(9, 6, 1, {0, 1, 0, 1})[0];
  const auto deg = in_degrees(level.edges, level.size());
  for (std::size_t r = 1; r + 1 < level.ny; ++r)
    for (std::size_t c = 1; c + 1 < level.nx; ++c) EXPECT_EQ(deg[r * level.nx + c], 8u);
}

TEST(LamLevels, CoarseNodesSitAtBlockCentres) {
  const auto levels = build_lam_levels(9, 9, 2, {0, 9, 0, 9});
  const auto map = nesting_map(levels[0], levels[1]);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(map[r * 3 + c], (3 * r + 1) * 9 + 3 * c + 1);
}

TEST(LamLevels, IncompatibleDimensionsAreRejected) {
  EXPECT_THROW(build_lam_levels(10, 9, 2, {0, 1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(build_lam_levels(3, 3, 3, {0, 1, 0, 1}), std::invalid_argument);
}

TEST(LamGraph, ReferenceStatisticsAreReproduced) {
  const auto grid = GridSpec::planar(238, 268);
  ASSERT_EQ(grid.size(), 63784u);
  const auto g = build_lam_graph(Kind::hierarchical, grid, {});
  EXPECT_TRUE(validate(g).empty());
  EXPECT_EQ(g.level_size(1), 6561u);
  EXPECT_EQ(g.level_size(2), 729u);
  EXPECT_EQ(g.level_size(3), 81u);
  EXPECT_EQ(count(g, "M2M(1)"), 51520u);
  EXPECT_EQ(count(g, "M2M(2)"), 5512u);
  EXPECT_EQ(count(g, "M2M(3)"), 544u);
  EXPECT_EQ(count(g, "Up(1->2)"), 6561u);
  EXPECT_EQ(count(g, "Up(2->3)"), 729u);
  EXPECT_EQ(count(g, "G2M"), 100656u);
  EXPECT_EQ(count(g, "M2G"), 255136u);
  const auto stats = graph_stats(g);
  EXPECT_EQ(stats.mesh_nodes, 7371u);
  EXPECT_EQ(stats.mesh_edges, 72156u);
  for (int l = 1; l <= 2; ++l) {
    for (auto d : out_degrees(g.edge_set(up_name(l)).edges, g.level_size(l))) ASSERT_EQ(d, 1u);
    for (auto d : in_degrees(g.edge_set(up_name(l)).edges, g.level_size(l + 1))) ASSERT_EQ(d, 9u);
  }
  for (auto d : in_degrees(g.edge_set(kM2G).edges, grid.size())) ASSERT_EQ(d, 4u);

  const auto ms = build_lam_graph(Kind::multiscale, grid, {});
  EXPECT_EQ(ms.level_size(1), 6561u);
  EXPECT_EQ(count(ms, "M2M(1)"), 57616u);
}

TEST(LamGraph, ToyGridNeedsPaddingToCoverCorners) {
  const auto grid = GridSpec::planar(45, 45);
  EXPECT_THROW(build_lam_graph(Kind::hierarchical, grid, {}), std::runtime_error);
  for (auto kind : {Kind::hierarchical, Kind::multiscale}) {
    const auto g = build_lam_graph(kind, grid, {.hierarchy_levels = 3, .multiscale_levels = 3, .extent_padding = 0.5});
    EXPECT_TRUE(validate(g).empty());
    EXPECT_EQ(g.level_size(1), 27u * 27u);
    for (auto d : out_degrees(g.edge_set(kG2M).edges, grid.size())) EXPECT_GE(d, 1u);
  }
}

TEST(LamGraph, SingleNodeCoarsestLevel) {
  const auto g = build_lam_graph(Kind::hierarchical, GridSpec::planar(6, 6),
                                 {.mesh_nx = 3, .mesh_ny = 3, .hierarchy_levels = 2, .extent_padding = 0.5});
  EXPECT_TRUE(validate(g).empty());
  EXPECT_EQ(g.level_size(1), 9u);
  EXPECT_EQ(g.level_size(2), 1u);
  EXPECT_EQ(count(g, "M2M(2)"), 0u);
  EXPECT_EQ(count(g, up_name(1)), 9u);
}

TEST(PointIndex, WideQueryOnFineCellsFindsEveryPoint) {
  const std::vector<Vec3> pts{{0, 0, 0}, {5, 5, 0}, {-3, 2, 0}};
  const PointIndex index(pts, 1e-12);
  EXPECT_EQ(index.within({0, 0, 0}, 10.0), (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(index.within({5, 5, 0}, 1.0), (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(index.nearest({4, 4, 0}, 1), (std::vector<std::uint32_t>{1}));
}

TEST(LamGraph, GridNodeAtMeshNodeHasItAsNearestSender) {
  const auto mesh = build_lam_levels(3, 3, 1, {0, 3, 0, 3})[0];
  const std::vector<Vec3> grid{mesh.pos[4], mesh.pos[0]};
  const auto edges = connect_mesh_to_grid_nearest(mesh, grid, 1);
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(edges[0], (Edge{0, 1}));
  EXPECT_EQ(edges[1], (Edge{4, 0}));
}

TEST(StaticFeatures, OriginNodeAndNormalization) {
  auto g = build_global_graph(Kind::hierarchical, GridSpec::latlon_with_poles(5, 4),
                              {.refinements = 2, .hierarchy_levels = 2});
  // grid node (row 2, col 0) is at lat 0, lon 0
  const auto& f = g.features.node[0];
  const std::size_t id = 2 * 4;
  EXPECT_NEAR(f[3 * id + 0], 1.0, 1e-15);
  EXPECT_NEAR(f[3 * id + 1], 0.0, 1e-15);
  EXPECT_NEAR(f[3 * id + 2], 1.0, 1e-15);

  double longest = 0.0;
  for (std::size_t s = 0; s < g.edge_sets.size(); ++s) {
    const auto& es = g.edge_sets[s];
    if (es.sender_level == 0 || es.receiver_level == 0) continue;
    for (std::size_t i = 0; i < es.edges.size(); ++i) longest = std::max(longest, g.features.edge[s][4 * i]);
  }
  EXPECT_EQ(longest, 1.0);
}

TEST(StaticFeatures, ReversedEdgeNegatesDisplacement) {
  const auto g = build_lam_graph(Kind::hierarchical, GridSpec::planar(45, 45), {.hierarchy_levels = 2, .extent_padding = 0.5});
  const auto& up = g.edge_set(up_name(1));
  const auto& down = g.edge_set(down_name(2));
  const auto& fu = g.features.edge[g.edge_set_index(up_name(1))];
  const auto& fd = g.features.edge[g.edge_set_index(down_name(2))];
  std::map<Edge, std::size_t> where;
  for (std::size_t i = 0; i < down.edges.size(); ++i) where[down.edges[i]] = i;
  for (std::size_t i = 0; i < up.edges.size(); ++i) {
    const auto j = where.at({up.edges[i].second, up.edges[i].first});
    EXPECT_EQ(fu[3 * i], fd[3 * j]);
    EXPECT_EQ(fu[3 * i + 1], -fd[3 * j + 1]);
    EXPECT_EQ(fu[3 * i + 2], -fd[3 * j + 2]);
  }
}

TEST(StaticFeatures, PlanarNodeFeaturesAreScaledCoordinates) {
  const auto g = build_lam_graph(Kind::hierarchical, GridSpec::planar(10, 19), {.hierarchy_levels = 2, .extent_padding = 0.5});
  double max_abs = 0.0;
  for (const auto& lvl : g.features.node)
    for (double v : lvl) max_abs = std::max(max_abs, std::fabs(v));
  EXPECT_EQ(max_abs, 1.0);
  EXPECT_EQ(g.features.node[0][2 * 18], 1.0);  // grid node (0, 18) has x = 18, the largest coordinate
}

TEST(GraphStats, EmptyGridOnlyGraphHasNoMeshNodes) {
  MeshGraph g;
  g.level_sizes = {0};
  g.positions = {{}};
  const auto s = graph_stats(g);
  EXPECT_EQ(s.mesh_nodes, 0u);
  EXPECT_EQ(s.mesh_edges, 0u);
}

TEST(GraphIo, RoundTripIsIdentity) {
  for (auto kind : {Kind::hierarchical, Kind::multiscale}) {
    const auto g = build_global_graph(kind, GridSpec::latlon_cell_centred(12, 24),
                                      {.refinements = 2, .hierarchy_levels = 2});
    const auto text = to_json(g);
    const auto back = from_json(text);
    EXPECT_EQ(to_json(back), text);
    EXPECT_EQ(graph_hash(back), graph_hash(g));
    for (std::size_t l = 0; l < g.positions.size(); ++l) {
      for (std::size_t i = 0; i < g.positions[l].size(); ++i) {
        EXPECT_EQ(back.positions[l][i].x, g.positions[l][i].x);
        EXPECT_EQ(back.positions[l][i].z, g.positions[l][i].z);
      }
    }
    EXPECT_EQ(back.features.edge, g.features.edge);
  }
  const auto lam = build_lam_graph(Kind::hierarchical, GridSpec::planar(45, 45), {.hierarchy_levels = 2, .extent_padding = 0.5});
  EXPECT_EQ(to_json(from_json(to_json(lam))), to_json(lam));
}

TEST(GraphIo, HashSeesEdgeChanges) {
  auto g = build_lam_graph(Kind::hierarchical, GridSpec::planar(45, 45), {.hierarchy_levels = 2, .extent_padding = 0.5});
  const auto h = graph_hash(g);
  g.edge_sets[0].edges.pop_back();
  EXPECT_NE(graph_hash(g), h);
}

TEST(GraphIo, CorruptDownSetIsRejected) {
  auto g = build_lam_graph(Kind::hierarchical, GridSpec::planar(45, 45), {.hierarchy_levels = 2, .extent_padding = 0.5});
  auto& down = g.edge_sets[g.edge_set_index(down_name(2))];
  down.edges.erase(down.edges.begin());
  EXPECT_FALSE(validate(g).empty());
  EXPECT_THROW(from_json(to_json(g)), std::invalid_argument);
}
