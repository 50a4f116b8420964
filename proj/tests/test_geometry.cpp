#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "error.hpp"
#include "geometry.hpp"
#include "support/oracles.hpp"

using namespace semloc;

TEST_CASE("pose compose: identity and inverse cases") {
    std::mt19937_64 rng(7);
    const Pose p = oracle::random_pose(rng);

    const Pose ip = Pose::identity() * p;
    CHECK(oracle::pose_diff(ip, oracle::to_matrix(p)) < 1e-12);

    const Pose should_be_identity = p * inverse(p);
    CHECK(should_be_identity.translation.norm() < 1e-9);
    CHECK(should_be_identity.rotation.angularDistance(Eigen::Quaterniond::Identity()) < 1e-9);
}

TEST_CASE("pose compose matches 4x4 matrix product oracle") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const Pose a = oracle::random_pose(rng);
        const Pose b = oracle::random_pose(rng);
        const Eigen::Matrix4d expect = oracle::to_matrix(a) * oracle::to_matrix(b);
        CHECK(oracle::pose_diff(a * b, expect) < 1e-9);
    }
}

TEST_CASE("pose inverse") {
    CHECK(oracle::pose_diff(inverse(Pose::identity()), Eigen::Matrix4d::Identity()) < 1e-15);

    Pose t;
    t.translation = Eigen::Vector3d(1, 2, 3);
    const Pose it = inverse(t);
    CHECK(it.translation.isApprox(Eigen::Vector3d(-1, -2, -3), 1e-15));

    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
        const Pose p = oracle::random_pose(rng);
        const Eigen::Matrix4d expect = oracle::to_matrix(p).inverse();
        CHECK(oracle::pose_diff(inverse(p), expect) < 1e-9);
    }
}

TEST_CASE("pose composition is associative") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 100; ++i) {
        const Pose a = oracle::random_pose(rng);
        const Pose b = oracle::random_pose(rng);
        const Pose c = oracle::random_pose(rng);
        const Eigen::Matrix4d lhs = oracle::to_matrix((a * b) * c);
        const Eigen::Matrix4d rhs = oracle::to_matrix(a * (b * c));
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("point to 3d line distance") {
    Line3D z_axis;
    z_axis.point = Eigen::Vector3d::Zero();
    z_axis.direction = Eigen::Vector3d::UnitZ();

    CHECK(point_line_distance(Eigen::Vector3d(0, 0, 4.2), z_axis) == doctest::Approx(0.0));
    CHECK(point_line_distance(Eigen::Vector3d(0, 1, 0), z_axis) == doctest::Approx(1.0));

    std::mt19937_64 rng(19);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int i = 0; i < 5; ++i) {
        Line3D line;
        line.point = Eigen::Vector3d(g(rng), g(rng), g(rng));
        line.direction = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
        const Eigen::Vector3d p(g(rng), g(rng), g(rng));
        const double fast = point_line_distance(p, line);
        const double slow = oracle::sampled_line_distance(p, line);
        CHECK(std::abs(fast - slow) < 1e-4);  // sampling grid limits the oracle
    }
}

TEST_CASE("point to image line distance") {
    ImageLine vertical;  // u = 0
    vertical.a = 1.0;
    vertical.b = 0.0;
    vertical.c = 0.0;
    CHECK(point_line_distance(PixelPoint{0.0, 33.0}, vertical) == doctest::Approx(0.0));
    CHECK(point_line_distance(PixelPoint{5.0, 9.0}, vertical) == doctest::Approx(5.0));

    // Matches the 3d formula restricted to the plane.
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 50.0);
    for (int i = 0; i < 50; ++i) {
        const double th = g(rng);
        ImageLine l;
        l.a = std::cos(th);
        l.b = std::sin(th);
        l.c = g(rng);
        const PixelPoint p{g(rng), g(rng)};

        Line3D embedded;  // the same line in the z=0 plane
        embedded.point = Eigen::Vector3d(-l.a * l.c, -l.b * l.c, 0.0);
        embedded.direction = Eigen::Vector3d(-l.b, l.a, 0.0);
        const double d3 = point_line_distance(Eigen::Vector3d(p.u, p.v, 0.0), embedded);
        CHECK(point_line_distance(p, l) == doctest::Approx(d3).epsilon(1e-12));
    }
}

TEST_CASE("image line fit: exact cases") {
    // Collinear points on v = 2u.
    std::vector<PixelPoint> pts;
    for (int i = 0; i < 7; ++i) pts.push_back({double(i), 2.0 * i});
    const ImageLine l = fit_image_line(pts);
    CHECK(l.a * l.a + l.b * l.b == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& p : pts) CHECK(point_line_distance(p, l) < 1e-9);

    const std::vector<PixelPoint> two{{1.0, 1.0}, {4.0, 5.0}};
    const ImageLine l2 = fit_image_line(two);
    CHECK(point_line_distance(two[0], l2) < 1e-9);
    CHECK(point_line_distance(two[1], l2) < 1e-9);
}

TEST_CASE("image line fit beats 0.1 degree grid search on noisy pole pixels") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> noise(0.0, 1.5);
    // Near-vertical pole: u barely changes with v, the regression-unfriendly case.
    std::vector<PixelPoint> pts;
    for (int i = 0; i < 40; ++i) {
        const double v = 100.0 + 8.0 * i;
        const double u = 512.0 + 0.02 * v + noise(rng);
        pts.push_back({u, v});
    }
    const ImageLine fit = fit_image_line(pts);
    const double fit_cost = oracle::line_fit_cost(pts, fit);
    const double grid_cost = oracle::grid_search_line_cost(pts);
    CHECK(fit_cost <= grid_cost + 1e-9);
}

TEST_CASE("image line fit is rotation invariant up to sign") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 20.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<PixelPoint> pts;
        for (int i = 0; i < 15; ++i) pts.push_back({g(rng), g(rng)});
        const double th = g(rng) / 10.0;
        const double c = std::cos(th), s = std::sin(th);
        std::vector<PixelPoint> rotated;
        for (const auto& p : pts) rotated.push_back({c * p.u - s * p.v, s * p.u + c * p.v});

        const ImageLine base = fit_image_line(pts);
        const ImageLine rot = fit_image_line(rotated);
        // Rotate the fitted normal forward and compare to the rotated fit.
        const double ra = c * base.a - s * base.b;
        const double rb = s * base.a + c * base.b;
        const double sign = (ra * rot.a + rb * rot.b) >= 0 ? 1.0 : -1.0;
        CHECK(std::abs(ra - sign * rot.a) < 1e-9);
        CHECK(std::abs(rb - sign * rot.b) < 1e-9);
        CHECK(std::abs(base.c - sign * rot.c) < 1e-7);
    }
}

TEST_CASE("image line fit rejects coincident input") {
    const std::vector<PixelPoint> same{{3.0, 4.0}, {3.0, 4.0}, {3.0, 4.0}};
    CHECK_THROWS_AS((void)fit_image_line(same), Error);
    const std::vector<PixelPoint> single{{3.0, 4.0}};
    CHECK_THROWS_AS((void)fit_image_line(single), Error);
}

TEST_CASE("3d line fit: exact and noisy") {
    Line3D truth;
    truth.point = Eigen::Vector3d(1, 2, 0.5);
    truth.direction = Eigen::Vector3d(2, 1, 0.3).normalized();

    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(truth.point + 0.25 * i * truth.direction);
    const Line3D fit = fit_line_3d(pts);
    for (const auto& p : pts) CHECK(point_line_distance(p, fit) < 1e-9);

    const std::vector<Eigen::Vector3d> two{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 1)};
    const Line3D l2 = fit_line_3d(two);
    CHECK(point_line_distance(two[0], l2) < 1e-12);
    CHECK(point_line_distance(two[1], l2) < 1e-12);

    // sigma = 1 cm noise over a 1 m extent: direction within 1 degree.
    std::mt19937_64 rng(37);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<Eigen::Vector3d> noisy;
    for (int i = 0; i <= 100; ++i) {
        Eigen::Vector3d p = truth.point + 0.01 * i * truth.direction;
        p += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
        noisy.push_back(p);
    }
    const Line3D nfit = fit_line_3d(noisy);
    const double cosang = std::abs(nfit.direction.dot(truth.direction));
    CHECK(std::acos(std::min(1.0, cosang)) < 1.0 * M_PI / 180.0);

    const std::vector<Eigen::Vector3d> coincident(4, Eigen::Vector3d(1, 1, 1));
    CHECK_THROWS_AS((void)fit_line_3d(coincident), Error);
}

TEST_CASE("ransac 3d line") {
    // All collinear: every point is an inlier.
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(Eigen::Vector3d(0.0, 0.0, 0.1 * i));
    const RansacLine all = ransac_line_3d(pts, 100, 0.1, 42);
    CHECK(all.inliers.size() == pts.size());

    // 90% on a vertical line, 10% uniform outliers with known membership.
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    std::normal_distribution<double> jitter(0.0, 0.01);
    std::vector<Eigen::Vector3d> mixed;
    std::vector<int> true_inliers;
    for (int i = 0; i < 90; ++i) {
        true_inliers.push_back(static_cast<int>(mixed.size()));
        mixed.push_back(Eigen::Vector3d(2.0 + jitter(rng), 3.0 + jitter(rng), 0.05 * i));
    }
    for (int i = 0; i < 10; ++i) {
        mixed.push_back(Eigen::Vector3d(2.0 + uni(rng), 3.0 + uni(rng), uni(rng)));
    }
    const RansacLine r = ransac_line_3d(mixed, 100, 0.1, 7);
    int recovered = 0;
    for (int idx : true_inliers) {
        if (std::find(r.inliers.begin(), r.inliers.end(), idx) != r.inliers.end()) ++recovered;
    }
    CHECK(recovered >= 86);  // >= 95% of the 90 true inliers
    for (int idx : r.inliers) {
        // No outlier beyond the threshold sneaks in.
        CHECK(point_line_distance(mixed[idx], r.line) <= 0.1 + 1e-12);
    }

    // Determinism, including the single-iteration edge.
    const RansacLine a = ransac_line_3d(mixed, 1, 0.1, 5);
    const RansacLine b = ransac_line_3d(mixed, 1, 0.1, 5);
    CHECK(a.inliers == b.inliers);
    CHECK(a.line.point == b.line.point);
    CHECK(a.line.direction == b.line.direction);
}

TEST_CASE("se3 retraction round trip") {
    std::mt19937_64 rng(47);
    std::normal_distribution<double> g(0.0, 0.3);
    for (int i = 0; i < 50; ++i) {
        const Pose p = oracle::random_pose(rng);
        Eigen::Matrix<double, 6, 1> delta;
        for (int k = 0; k < 6; ++k) delta[k] = g(rng);
        const Pose q = retract(p, delta);
        // retract(p, 0) == p and the step actually moves the pose
        const Pose same = retract(p, Eigen::Matrix<double, 6, 1>::Zero());
        CHECK(oracle::pose_diff(same, oracle::to_matrix(p)) < 1e-12);
        CHECK((oracle::to_matrix(q) - oracle::to_matrix(p)).cwiseAbs().maxCoeff() > 0.0);
        // Exp is a homomorphism on a single axis: Exp(d)*Exp(d) == Exp(2d) for pure rotation
        Eigen::Matrix<double, 6, 1> rot_only = Eigen::Matrix<double, 6, 1>::Zero();
        rot_only.head<3>() = delta.head<3>();
        const Pose twice = exp_se3(rot_only) * exp_se3(rot_only);
        const Pose doubled = exp_se3(2 * rot_only);
        CHECK(oracle::pose_diff(twice, oracle::to_matrix(doubled)) < 1e-9);
    }
}
