#include <cmath>
#include <random>

#include "doctest.h"
#include "surrocal/geometry.h"

using namespace surrocal;

TEST_CASE("affine rank of marginal polytopes") {
    // Multiclass vertices e_y lie on the hyperplane sum = 1.
    const auto mc = polytope_of(build_task("multiclass", {{"k", 5}}));
    CHECK(mc.dim_ambient == 5);
    CHECK(mc.dim_affine == 4);
    CHECK_FALSE(mc.full_dimensional());
    // {+1,-1}^k spans R^k.
    CHECK(polytope_of(build_task("multilabel", {{"k", 4}})).full_dimensional());
    // Cumulative ordinal codes are k affinely independent points in R^(k-1).
    CHECK(polytope_of(build_task("ordinal", {{"k", 6}})).full_dimensional());
    // Birkhoff polytope for m = 3 has dimension (m-1)^2 = 4.
    const auto bk = polytope_of(build_task("matching", {{"m", 3}}));
    CHECK(bk.dim_ambient == 9);
    CHECK(bk.dim_affine == 4);
    CHECK(bk.vertices.size() == 6);
}

TEST_CASE("affine rank of hand-built point sets") {
    std::vector<Vec> pts = {Vec::Zero(3), Vec::Unit(3, 0), Vec::Unit(3, 1), Vec::Unit(3, 0) + Vec::Unit(3, 1)};
    CHECK(affine_rank(pts) == 2);
    pts.push_back(Vec::Unit(3, 2));
    CHECK(affine_rank(pts) == 3);
    CHECK(affine_rank({Vec::Ones(2), Vec::Ones(2)}) == 0);
}

TEST_CASE("lp_maximize on small programs with known optima") {
    // max x + y s.t. x + 2y <= 4, 3x + y <= 6: optimum at (8/5, 6/5), value 14/5.
    Mat A(2, 2);
    A << 1, 2, 3, 1;
    Vec b(2);
    b << 4, 6;
    const LpResult r = lp_maximize(Vec::Ones(2), A, b, Mat(0, 2), Vec(0));
    REQUIRE(r.feasible);
    CHECK(r.bounded);
    CHECK(r.value == doctest::Approx(2.8).epsilon(1e-12));
    CHECK(r.x(0) == doctest::Approx(1.6));

    // Equality x + y = 1 with x <= 0.25: max x = 0.25.
    Mat Aeq(1, 2);
    Aeq << 1, 1;
    Mat Aub(1, 2);
    Aub << 1, 0;
    Vec c(2);
    c << 1, 0;
    const LpResult s = lp_maximize(c, Aub, Vec::Constant(1, 0.25), Aeq, Vec::Ones(1));
    CHECK(s.feasible);
    CHECK(s.value == doctest::Approx(0.25));

    // Infeasible: x + y = 1 and x + y <= 0.5.
    Mat Aub2(1, 2);
    Aub2 << 1, 1;
    CHECK_FALSE(lp_maximize(c, Aub2, Vec::Constant(1, 0.5), Aeq, Vec::Ones(1)).feasible);

    // Unbounded: max x with no constraints binding x.
    Mat Aub3(1, 2);
    Aub3 << 0, 1;
    CHECK_FALSE(lp_maximize(c, Aub3, Vec::Ones(1), Mat(0, 2), Vec(0)).bounded);
}

TEST_CASE("calibration set membership matches excess risk (property)") {
    std::mt19937_64 g(5);
    std::exponential_distribution<double> e(1.0);
    std::uniform_real_distribution<double> un(0.0, 0.6);
    for (const char* kind : {"multiclass", "ordinal", "multilabel"}) {
        const Task t = build_task(kind, {{"k", 3}});
        for (int i = 0; i < 300; ++i) {
            Vec q(static_cast<Eigen::Index>(t.Y.size()));
            for (auto& x : q) x = e(g);
            q /= q.sum();
            const double eps = un(g);
            for (std::size_t z = 0; z < t.Z.size(); ++z) {
                const bool in = in_calibration_set(t, moment(t, q), z, eps);
                const double ex = excess_bayes_risk(t, z, q);
                if (std::abs(ex - eps) > 1e-9) CHECK(in == (ex <= eps));
            }
        }
    }
}

TEST_CASE("adjacency restricted to the marginal polytope") {
    // Ordinal absolute loss: every pair of cells meets where the median
    // interval covers both, e.g. q = (1/2, 0, 0, 1/2) ties all four outputs.
    const Task t = build_task("ordinal", {{"k", 4}});
    CHECK(cells_adjacent(t, 0, 1));
    CHECK(cells_adjacent(t, 0, 3));
    CHECK(cell_gap(t, 0, 3) == doctest::Approx(0.0).epsilon(1e-12));
    // Every pair of multiclass cells meets at the uniform distribution.
    const Task mc = build_task("multiclass", {{"k", 4}});
    CHECK(adjacent_pairs(mc).size() == 6);

    // Two labels, three outputs with losses (0,1), (0.4,0.4), (1,0): the
    // hedge output separates the extremes, whose tie at q = (1/2,1/2) costs 0.5.
    Task h = build_task("multiclass", {{"k", 2}});
    h.Z = make_space(SpaceKind::Multiclass, 3);
    Vec a(2), b(2), c(2);
    a << 0.0, 1.0;
    b << 0.4, 0.4;
    c << 1.0, 0.0;
    h.psi = {a, b, c};
    h.c = 0.0;
    CHECK(cells_adjacent(h, 0, 1));
    CHECK(cells_adjacent(h, 1, 2));
    CHECK_FALSE(cells_adjacent(h, 0, 2));
    // Closest point of cell 0 to the 0/2 tie line q0 = q1 is q = (0.6, 0.4):
    // gap |0.6 - 0.4| / sqrt(2).
    CHECK(cell_gap(h, 0, 2) == doctest::Approx(0.2 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("calibration set distance on Hamming k=2") {
    // ||psi(z) - psi(z')|| is 1/2 for neighbours and 1/sqrt(2) for antipodes.
    // Antipodal cells meet at the origin, so the closest tie hyperplane is
    // theirs, at eps / (1/sqrt(2)).
    const Task t = build_task("multilabel", {{"k", 2}});
    for (double eps : {0.05, 0.1, 0.3})
        for (std::size_t z = 0; z < 4; ++z) CHECK(calibration_set_distance(t, z, eps) == doctest::Approx(std::sqrt(2.0) * eps));
}
