#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "error.hpp"
#include "map_builder.hpp"

using namespace semloc;

namespace {

/// Exhaustive between-class-variance maximizer, smallest-t tie-break.
/// Fresh summation per candidate, exact integer accumulators.
int brute_force_otsu(const Histogram256& hist) {
    long double best = -1.0L;
    int best_t = 0;
    for (int t = 0; t < 255; ++t) {
        std::uint64_t w0 = 0, s0 = 0, w1 = 0, s1 = 0;
        for (int b = 0; b <= t; ++b) {
            w0 += hist[b];
            s0 += static_cast<std::uint64_t>(b) * hist[b];
        }
        for (int b = t + 1; b < 256; ++b) {
            w1 += hist[b];
            s1 += static_cast<std::uint64_t>(b) * hist[b];
        }
        if (w0 == 0 || w1 == 0) continue;
        const __int128 a = static_cast<__int128>(s0) * w1 - static_cast<__int128>(s1) * w0;
        const long double score = static_cast<long double>(a) * static_cast<long double>(a) /
                                  (static_cast<long double>(w0) * static_cast<long double>(w1));
        if (score > best) {
            best = score;
            best_t = t;
        }
    }
    return best_t;
}

/// O(n^2) union-find over the full distance matrix.
std::vector<std::vector<int>> brute_force_clusters(const std::vector<Eigen::Vector3d>& pts,
                                                   double link) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((pts[i] - pts[j]).norm() <= link) parent[find(i)] = find(j);
        }
    }
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        out.push_back(members);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

LabeledPoint ground(double x, double y, double z, double intensity) {
    return {Eigen::Vector3d(x, y, z), intensity, PointLabel::ground};
}

}  // namespace

TEST_CASE("bev projection") {
    SUBCASE("single point occupies one cell with its intensity") {
        LabeledCloud cloud;
        cloud.points.push_back(ground(1.23, 4.56, 0.0, 77.0));
        const BevGrid grid = project_to_bev(cloud, 0.1);
        REQUIRE(grid.cells.size() == 1);
        CHECK(grid.cells[0].intensity == doctest::Approx(77.0));
        CHECK(grid.cells[0].sources == std::vector<int>{0});
    }

    SUBCASE("two points in the same 10 cm cell average to 150") {
        LabeledCloud cloud;
        cloud.points.push_back(ground(0.51, 0.52, 0.0, 100.0));
        cloud.points.push_back(ground(0.54, 0.58, 0.1, 200.0));
        const BevGrid grid = project_to_bev(cloud, 0.1);
        REQUIRE(grid.cells.size() == 1);
        CHECK(grid.cells[0].intensity == doctest::Approx(150.0));
    }

    SUBCASE("uniform one-point-per-cell grid occupies one cell each") {
        LabeledCloud cloud;
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 15; ++j) {
                cloud.points.push_back(ground(0.05 + 0.1 * i, 0.05 + 0.1 * j, 0.0, 90.0));
            }
        }
        const BevGrid grid = project_to_bev(cloud, 0.1);
        CHECK(grid.cells.size() == cloud.points.size());
    }

    SUBCASE("no ground points") {
        LabeledCloud cloud;
        cloud.points.push_back({Eigen::Vector3d::Zero(), 10.0, PointLabel::pole});
        CHECK_THROWS_AS((void)project_to_bev(cloud, 0.1), Error);
    }
}

TEST_CASE("otsu threshold") {
    SUBCASE("two-spike histogram resolves to the lower spike") {
        Histogram256 h{};
        h[10] = 500;
        h[200] = 500;
        CHECK(otsu_threshold(h) == 10);
        CHECK(brute_force_otsu(h) == 10);
    }

    SUBCASE("single occupied bin is degenerate") {
        Histogram256 h{};
        h[42] = 1000;
        CHECK_THROWS_AS((void)otsu_threshold(h), Error);
    }

    SUBCASE("matches exhaustive search on 1000 random histograms") {
        std::mt19937_64 rng(17);
        std::uniform_int_distribution<int> bins(2, 256);
        std::uniform_int_distribution<int> bin_pick(0, 255);
        std::uniform_int_distribution<std::uint64_t> count(1, 10000);
        for (int trial = 0; trial < 1000; ++trial) {
            Histogram256 h{};
            const int k = bins(rng);
            for (int i = 0; i < k; ++i) h[bin_pick(rng)] += count(rng);
            int nonzero = 0;
            for (auto c : h) nonzero += c > 0;
            if (nonzero < 2) continue;
            CHECK(otsu_threshold(h) == brute_force_otsu(h));
        }
    }
}

TEST_CASE("lane point extraction") {
    LabeledCloud cloud;
    // Dark asphalt plus two cell-aligned bright stripes (20 cm wide).
    // Points sit at cell interiors so stripe membership is exact.
    std::vector<bool> is_stripe;
    std::mt19937_64 rng(19);
    std::normal_distribution<double> bright(220.0, 5.0);
    std::normal_distribution<double> dark(50.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        for (int j = 0; j < 80; ++j) {
            const double x = 0.025 + 0.05 * i;
            const double y = 0.025 + 0.05 * j;
            const bool stripe = (y >= 1.0 && y < 1.2) || (y >= 3.0 && y < 3.2);
            const double inten = std::clamp(stripe ? bright(rng) : dark(rng), 0.0, 255.0);
            cloud.points.push_back(ground(x, y, 0.0, inten));
            is_stripe.push_back(stripe);
        }
    }
    const BevGrid grid = project_to_bev(cloud, 0.1);

    SUBCASE("threshold 255 keeps nothing; threshold below the minimum keeps everything") {
        CHECK(extract_lane_points(cloud, grid, 255.0).empty());
        CHECK(extract_lane_points(cloud, grid, -1.0).size() == cloud.points.size());
    }

    SUBCASE("otsu separation recovers the stripes") {
        const int t = otsu_threshold(intensity_histogram(grid));
        const auto lanes = extract_lane_points(cloud, grid, t);

        std::size_t true_positive = 0;
        for (const auto& lp : lanes) {
            // Provenance: every emitted position exists in the input cloud.
            bool found = false;
            for (std::size_t i = 0; i < cloud.points.size(); ++i) {
                if (cloud.points[i].position == lp.position) {
                    found = true;
                    true_positive += is_stripe[i];
                    break;
                }
            }
            CHECK(found);
        }
        const std::size_t stripe_total = std::count(is_stripe.begin(), is_stripe.end(), true);
        const double recall = double(true_positive) / double(stripe_total);
        const double precision = double(true_positive) / double(lanes.size());
        CHECK(recall >= 0.99);
        CHECK(precision >= 0.99);
    }
}

TEST_CASE("euclidean clustering") {
    SUBCASE("two distant points split") {
        const std::vector<Eigen::Vector3d> pts{{0, 0, 0}, {10, 0, 0}};
        const auto c = cluster_euclidean(pts, 0.5);
        CHECK(c.size() == 2);
    }

    SUBCASE("a chain links transitively") {
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 20; ++i) pts.push_back({0.3 * i, 0.0, 0.0});
        const auto c = cluster_euclidean(pts, 0.5);
        REQUIRE(c.size() == 1);
        CHECK(c[0].size() == 20);
    }

    SUBCASE("random blobs match the distance-matrix oracle") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> center(-10.0, 10.0);
        std::normal_distribution<double> spread(0.0, 0.2);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<Eigen::Vector3d> pts;
            for (int b = 0; b < 6; ++b) {
                const Eigen::Vector3d c(center(rng), center(rng), center(rng));
                for (int i = 0; i < 25; ++i) {
                    pts.push_back(c + Eigen::Vector3d(spread(rng), spread(rng), spread(rng)));
                }
            }
            CHECK(cluster_euclidean(pts, 0.5) == brute_force_clusters(pts, 0.5));
        }
    }

    SUBCASE("membership is permutation invariant") {
        std::mt19937_64 rng(29);
        std::normal_distribution<double> g(0.0, 2.0);
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 60; ++i) pts.push_back({g(rng), g(rng), g(rng)});
        const auto base = cluster_euclidean(pts, 0.8);

        std::vector<int> perm(pts.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Eigen::Vector3d> shuffled;
        for (int idx : perm) shuffled.push_back(pts[idx]);
        auto shuffled_clusters = cluster_euclidean(shuffled, 0.8);
        // Map back to original indices and compare as sets of sets.
        std::vector<std::vector<int>> mapped;
        for (auto& cl : shuffled_clusters) {
            std::vector<int> m;
            for (int idx : cl) m.push_back(perm[idx]);
            std::sort(m.begin(), m.end());
            mapped.push_back(m);
        }
        std::sort(mapped.begin(), mapped.end());
        std::vector<std::vector<int>> expect = base;
        std::sort(expect.begin(), expect.end());
        CHECK(mapped == expect);
    }
}

TEST_CASE("pole extraction") {
    MapBuilderParams params;

    SUBCASE("perfect vertical segment") {
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 50; ++i) pts.push_back({2.0, 3.0, 4.0 * i / 49.0});
        const PoleExtraction ext = extract_pole(pts, params);
        REQUIRE(ext.pole.has_value());
        CHECK(ext.pole->x == doctest::Approx(2.0));
        CHECK(ext.pole->y == doctest::Approx(3.0));
        CHECK(ext.pole->z_low == doctest::Approx(0.0));
        CHECK(ext.pole->z_high == doctest::Approx(4.0));
    }

    SUBCASE("horizontal row is rejected as tilted") {
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 50; ++i) pts.push_back({0.1 * i, 0.0, 1.0});
        const PoleExtraction ext = extract_pole(pts, params);
        CHECK(!ext.pole.has_value());
        CHECK(ext.rejection == PoleRejection::tilted);
    }

    SUBCASE("too few points") {
        std::vector<Eigen::Vector3d> pts(5, Eigen::Vector3d(0, 0, 1));
        CHECK(extract_pole(pts, params).rejection == PoleRejection::too_few_points);
    }

    SUBCASE("short stub is rejected") {
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 20; ++i) pts.push_back({0.0, 0.0, 0.02 * i});
        CHECK(extract_pole(pts, params).rejection == PoleRejection::too_short);
    }

    SUBCASE("outlier-contaminated pole recovers endpoints within 5 cm") {
        std::mt19937_64 rng(31);
        std::normal_distribution<double> jitter(0.0, 0.01);
        std::uniform_real_distribution<double> junk(-2.0, 2.0);
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 45; ++i) {
            pts.push_back({1.0 + jitter(rng), -2.0 + jitter(rng), 3.5 * i / 44.0});
        }
        for (int i = 0; i < 5; ++i) {
            pts.push_back({1.0 + junk(rng), -2.0 + junk(rng), junk(rng) + 1.5});
        }
        const PoleExtraction ext = extract_pole(pts, params);
        REQUIRE(ext.pole.has_value());
        CHECK(std::abs(ext.pole->z_low - 0.0) < 0.05);
        CHECK(std::abs(ext.pole->z_high - 3.5) < 0.05);
        CHECK(std::abs(ext.pole->x - 1.0) < 0.05);
        CHECK(std::abs(ext.pole->y - (-2.0)) < 0.05);
    }
}

TEST_CASE("full map build") {
    SUBCASE("empty cloud gives an empty map") {
        const SemanticMap m = build_semantic_map(LabeledCloud{}, MapBuilderParams{});
        CHECK(m.lane_points().empty());
        CHECK(m.poles().empty());
    }

    SUBCASE("pole-only cloud keeps the lane set empty") {
        LabeledCloud cloud;
        for (int i = 0; i < 40; ++i) {
            cloud.points.push_back({Eigen::Vector3d(5.0, 1.0, 0.1 * i), 120.0, PointLabel::pole});
        }
        MapBuildStats stats;
        const SemanticMap m = build_semantic_map(cloud, MapBuilderParams{}, &stats);
        CHECK(m.lane_points().empty());
        REQUIRE(m.poles().size() == 1);
        CHECK(stats.poles_accepted == 1);
        CHECK(m.poles()[0].z_high == doctest::Approx(3.9));
    }

    SUBCASE("deterministic for a fixed seed") {
        std::mt19937_64 rng(37);
        std::uniform_real_distribution<double> u(-20.0, 20.0);
        std::normal_distribution<double> inten(120.0, 40.0);
        LabeledCloud cloud;
        for (int i = 0; i < 3000; ++i) {
            cloud.points.push_back({Eigen::Vector3d(u(rng), u(rng), 0.0),
                                    std::clamp(inten(rng), 0.0, 255.0), PointLabel::ground});
        }
        for (int p = 0; p < 5; ++p) {
            const double px = u(rng), py = u(rng);
            for (int i = 0; i < 30; ++i) {
                cloud.points.push_back(
                    {Eigen::Vector3d(px, py, 0.12 * i), 100.0, PointLabel::pole});
            }
        }
        const SemanticMap a = build_semantic_map(cloud, MapBuilderParams{});
        const SemanticMap b = build_semantic_map(cloud, MapBuilderParams{});
        std::ostringstream sa, sb;
        map_save(a, sa);
        map_save(b, sb);
        CHECK(sa.str() == sb.str());
        CHECK(a.poles().size() == 5);
    }
}

TEST_CASE("cloud file round trip and errors") {
    LabeledCloud cloud;
    cloud.points.push_back(ground(1.0, 2.0, 3.0, 128.5));
    cloud.points.push_back({Eigen::Vector3d(-4.0, 0.25, 1.0), 33.0, PointLabel::pole});
    cloud.points.push_back({Eigen::Vector3d(9.0, 9.0, 9.0), 0.0, PointLabel::other});

    std::ostringstream os;
    cloud_save(cloud, os);
    std::istringstream is(os.str());
    const LabeledCloud back = cloud_load(is);
    REQUIRE(back.points.size() == 3);
    CHECK(back.points[0].label == PointLabel::ground);
    CHECK(back.points[1].label == PointLabel::pole);
    CHECK(back.points[2].label == PointLabel::other);
    CHECK(back.points[0].intensity == doctest::Approx(128.5));

    {
        std::istringstream bad("CLOUD 7\n");
        CHECK_THROWS_AS((void)cloud_load(bad), Error);
    }
    {
        std::istringstream bad("CLOUD 1\n1 2 3 400 G\n");
        CHECK_THROWS_AS((void)cloud_load(bad), Error);  // intensity out of range
    }
    {
        std::istringstream bad("CLOUD 1\n1 2 3 100 X\n");
        try {
            (void)cloud_load(bad);
            FAIL("expected format error");
        } catch (const Error& e) {
            CHECK(e.line() == 2);
        }
    }
}
