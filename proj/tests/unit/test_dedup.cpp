#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "mwand/dedup.hpp"
#include "mwand/random.hpp"
#include "mwand/synth.hpp"

using namespace mwand;

namespace {

std::vector<std::vector<PartId>> expected_groups(const std::vector<int>& base_of_part) {
    std::map<int, std::vector<PartId>> by_base;
    for (std::size_t p = 0; p < base_of_part.size(); ++p) by_base[base_of_part[p]].push_back(static_cast<PartId>(p));
    std::vector<std::vector<PartId>> out;
    for (auto& [b, members] : by_base) out.push_back(members);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<PartId>> member_sets(const DuplicateGroups& g) {
    std::vector<std::vector<PartId>> out;
    for (const auto& grp : g.groups) out.push_back(grp.members);
    std::sort(out.begin(), out.end());
    return out;
}

Mesh single_part(const Shape& s) {
    MeshBuilder b;
    b.add(s.vertices, s.faces, "m");
    return b.take();
}

}  // namespace

TEST(RadialHistogram, SphereSurfaceMassInLastBin) {
    // Every vertex of a regular octahedron is equidistant from the centroid.
    Shape octa;
    octa.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    octa.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    const Mesh m = single_part(octa);
    const auto parts = segment(m);
    const auto d = radial_histogram(parts[0], m);
    ASSERT_EQ(d.histogram.size(), 64u);
    EXPECT_DOUBLE_EQ(d.histogram.back(), 1.0);
    EXPECT_DOUBLE_EQ(std::accumulate(d.histogram.begin(), d.histogram.end() - 1, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(d.max_radial_extent, 1.0);
    EXPECT_EQ(d.vertex_count, 6u);
}

TEST(RadialHistogram, SumsToOne) {
    const Mesh m = sphere_mesh(1.0, 7, 9);
    const auto parts = segment(m);
    const auto d = radial_histogram(parts[0], m);
    EXPECT_NEAR(std::accumulate(d.histogram.begin(), d.histogram.end(), 0.0), 1.0, 1e-12);
    for (double b : d.histogram) EXPECT_GE(b, 0.0);
}

TEST(RadialHistogram, BinOracle) {
    // Vertices at known normalized radii land in floor(r * 64) with the last bin right-inclusive.
    Rng rng(5);
    Shape s = uv_sphere_shape(1.0, 5, 7);
    for (auto& v : s.vertices) v = v * rng.uniform(0.2, 1.0);
    const Mesh m = single_part(s);
    const auto parts = segment(m);
    const auto d = radial_histogram(parts[0], m, 64);
    const auto vids = part_vertex_indices(m, parts[0]);
    Vec3 c;
    for (auto v : vids) c += m.vertices[v];
    c = c / static_cast<double>(vids.size());
    double ext = 0.0;
    for (auto v : vids) ext = std::max(ext, norm(m.vertices[v] - c));
    std::vector<double> expect(64, 0.0);
    for (auto v : vids) {
        const int bin = std::min(63, static_cast<int>(std::floor(norm(m.vertices[v] - c) / ext * 64)));
        expect[static_cast<std::size_t>(bin)] += 1.0 / static_cast<double>(vids.size());
    }
    for (int b = 0; b < 64; ++b) EXPECT_NEAR(d.histogram[static_cast<std::size_t>(b)], expect[static_cast<std::size_t>(b)], 1e-12);
}

TEST(RadialHistogram, IsometryAndScale) {
    Rng rng(9);
    const Shape base = uv_sphere_shape(1.0, 6, 8);
    Shape noisy = base;
    for (auto& v : noisy.vertices) v = v + Vec3{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    const Mesh m0 = single_part(noisy);
    const auto d0 = radial_histogram(segment(m0)[0], m0);
    for (int t = 0; t < 10; ++t) {
        const auto xf = axis_angle({rng.normal(), rng.normal(), rng.normal()}, rng.uniform(0, 6.28),
                                   {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)});
        const Mesh m1 = single_part(noisy.transformed(xf));
        const auto d1 = radial_histogram(segment(m1)[0], m1);
        for (std::size_t b = 0; b < 64; ++b) EXPECT_NEAR(d1.histogram[b], d0.histogram[b], 1e-9);
        EXPECT_NEAR(d1.max_radial_extent, d0.max_radial_extent, 1e-9);
    }
    Shape scaled = noisy;
    for (auto& v : scaled.vertices) v = v * 2.0;
    const Mesh m2 = single_part(scaled);
    const auto d2 = radial_histogram(segment(m2)[0], m2);
    EXPECT_EQ(d2.histogram, d0.histogram);
    EXPECT_NEAR(d2.max_radial_extent, 2.0 * d0.max_radial_extent, 1e-12);
}

TEST(RadialHistogram, ZeroExtentIsAllZero) {
    Mesh m;
    m.vertices = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
    m.faces = {{0, 1, 2}};
    m.face_material = {0};
    Part p;
    p.part_id = 0;
    p.face_ids = {0};
    const auto d = radial_histogram(p, m);
    for (double b : d.histogram) EXPECT_EQ(b, 0.0);
    EXPECT_EQ(d.max_radial_extent, 0.0);
}

TEST(IsDuplicate, Checks) {
    Descriptor a;
    a.histogram.assign(64, 0.0);
    a.histogram[10] = 1.0;
    a.vertex_count = 100;
    a.max_radial_extent = 1.0;
    EXPECT_TRUE(is_duplicate(a, a));

    Descriptor b = a;
    b.max_radial_extent = 2.0;
    EXPECT_FALSE(is_duplicate(a, b));

    b = a;
    b.vertex_count = 106;
    EXPECT_NEAR(relative_difference(100, 106), 6.0 / 106.0, 1e-15);
    EXPECT_FALSE(is_duplicate(a, b));
    b.vertex_count = 104;
    EXPECT_TRUE(is_duplicate(a, b));

    b = a;
    b.histogram[10] = 0.996;
    b.histogram[11] = 0.004;
    EXPECT_TRUE(is_duplicate(a, b));  // l1 = 0.008
    b.histogram[10] = 0.99;
    b.histogram[11] = 0.01;
    EXPECT_FALSE(is_duplicate(a, b));  // l1 = 0.02

    Descriptor z = a;
    z.max_radial_extent = 0.0;
    Descriptor z2 = z;
    EXPECT_TRUE(is_duplicate(z, z2));
    EXPECT_EQ(relative_difference(0.0, 0.0), 0.0);
}

TEST(GroupDuplicates, RecoversCopyGroups) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<int> copies(20);
        for (int b = 0; b < 20; ++b) copies[static_cast<std::size_t>(b)] = 1 + (b + static_cast<int>(seed)) % 5;
        const auto fx = dedup_fixture(seed, copies);
        const auto parts = segment(fx.mesh);
        ASSERT_EQ(parts.size(), fx.base_of_part.size());
        const auto groups = group_duplicates(parts, fx.mesh);
        EXPECT_EQ(member_sets(groups), expected_groups(fx.base_of_part));
        const std::size_t total = std::accumulate(copies.begin(), copies.end(), std::size_t{0});
        EXPECT_EQ(total - groups.groups.size(), total - 20);
    }
}

TEST(GroupDuplicates, PartitionAndLowestExemplar) {
    const std::vector<int> copies{3, 1, 4, 1, 5};
    const auto fx = dedup_fixture(7, copies);
    const auto parts = segment(fx.mesh);
    const auto g = group_duplicates(parts, fx.mesh);
    std::vector<int> seen(parts.size(), 0);
    for (std::size_t gi = 0; gi < g.groups.size(); ++gi) {
        const auto& grp = g.groups[gi];
        EXPECT_EQ(grp.exemplar, grp.members.front());
        for (auto p : grp.members) {
            ++seen[static_cast<std::size_t>(p)];
            EXPECT_EQ(g.group_index(p), gi);
        }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    EXPECT_EQ(group_duplicates(parts, fx.mesh), g);
}

TEST(GroupDuplicates, AllDistinct) {
    const std::vector<int> copies(6, 1);
    const auto fx = dedup_fixture(2, copies);
    const auto parts = segment(fx.mesh);
    const auto g = group_duplicates(parts, fx.mesh);
    ASSERT_EQ(g.groups.size(), parts.size());
    for (const auto& grp : g.groups) EXPECT_EQ(grp.members, std::vector<PartId>{grp.exemplar});
}

TEST(GroupDuplicates, IdenticalCuboidsInDifferentRolesMerge) {
    // Same cuboid used as a stair step and as a fence slat: geometry alone cannot tell them apart.
    MeshBuilder b;
    const Shape cuboid = box_shape(0.4, 0.1, 0.02);
    for (int i = 0; i < 3; ++i) {
        const Shape step = cuboid.transformed(axis_angle({0, 0, 1}, 0.0, {0, 0.25 * i, 0.2 * i}));
        b.add(step.vertices, step.faces, "stone");
    }
    for (int i = 0; i < 3; ++i) {
        const Shape slat = cuboid.transformed(axis_angle({0, 1, 0}, 1.5707963267948966, {3 + 0.3 * i, 0, 0.5}));
        b.add(slat.vertices, slat.faces, "wood");
    }
    const Mesh m = b.take();
    const auto g = group_duplicates(segment(m), m);
    ASSERT_EQ(g.groups.size(), 1u);
    EXPECT_EQ(g.groups[0].members.size(), 6u);
}

TEST(GroupDuplicates, ConservativeWhenExemplarsDiffer) {
    // A group never absorbs a part that fails the check against its exemplar.
    const std::vector<int> copies{2, 2, 2};
    const auto fx = dedup_fixture(13, copies);
    const auto parts = segment(fx.mesh);
    const auto g = group_duplicates(parts, fx.mesh);
    for (const auto& grp : g.groups) {
        const auto de = radial_histogram(parts[static_cast<std::size_t>(grp.exemplar)], fx.mesh);
        for (auto p : grp.members) EXPECT_TRUE(is_duplicate(de, radial_histogram(parts[static_cast<std::size_t>(p)], fx.mesh)));
        for (const auto& other : g.groups) {
            if (&other == &grp) continue;
            EXPECT_FALSE(is_duplicate(de, radial_histogram(parts[static_cast<std::size_t>(other.exemplar)], fx.mesh)));
        }
    }
}

TEST(RandomExemplars, SeededMemberPick) {
    const std::vector<int> copies{5, 5, 5, 5};
    const auto fx = dedup_fixture(1, copies);
    const auto parts = segment(fx.mesh);
    const auto g = group_duplicates(parts, fx.mesh);
    const auto r1 = choose_random_exemplars(g, 42);
    const auto r2 = choose_random_exemplars(g, 42);
    EXPECT_EQ(r1, r2);
    bool any_changed = false;
    for (std::size_t i = 0; i < g.groups.size(); ++i) {
        EXPECT_EQ(r1.groups[i].members, g.groups[i].members);
        const auto& m = r1.groups[i].members;
        EXPECT_NE(std::find(m.begin(), m.end(), r1.groups[i].exemplar), m.end());
        any_changed |= r1.groups[i].exemplar != g.groups[i].exemplar;
    }
    EXPECT_TRUE(any_changed);
}

TEST(GroupsJson, RoundTrip) {
    const std::vector<int> copies{2, 3};
    const auto fx = dedup_fixture(4, copies);
    const auto parts = segment(fx.mesh);
    const auto g = group_duplicates(parts, fx.mesh);
    EXPECT_EQ(groups_from_json(groups_to_json(g), parts.size()), g);
    EXPECT_EQ(singleton_groups(3).groups.size(), 3u);
}
