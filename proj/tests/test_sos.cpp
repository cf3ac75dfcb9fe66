#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "hjbsos/sos.hpp"

using namespace hjbsos;
using namespace hjbsos::sos;

namespace {

SemialgebraicDomain interval_domain(double lo, double hi) {
    const Polynomial x = Polynomial::variable(1, 0);
    SemialgebraicDomain d;
    d.nvars = 1;
    d.inequalities = {x - Polynomial::constant(1, lo), Polynomial::constant(1, hi) - x};
    d.boundary = {x - Polynomial::constant(1, lo), x - Polynomial::constant(1, hi)};
    d.box = {{lo, hi}};
    return d;
}

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd G = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
    return G * G.transpose();
}

}  // namespace

TEST_CASE("gram parameterization block shapes") {
    SosProgram prog(1);
    auto [p2, id2] = gram_parameterize(prog, 2);
    CHECK(prog.gram_block(id2).basis.size() == 2);  // (1, x)

    auto [p0, id0] = gram_parameterize(prog, 0);
    CHECK(prog.gram_block(id0).basis.size() == 1);

    SosProgram prog2(2);
    auto [p4, id4] = gram_parameterize(prog2, 4);
    CHECK(prog2.gram_block(id4).basis.size() == 6);

    CHECK_THROWS_AS(gram_parameterize(prog, 3), std::invalid_argument);
}

TEST_CASE("gram expansion p = z'Qz") {
    SosProgram prog(1);
    auto [p, id] = gram_parameterize(prog, 2);
    Eigen::MatrixXd Q(2, 2);
    Q << 3.0, -1.0, -1.0, 2.0;
    const Polynomial expanded = prog.gram_polynomial(id, Q);
    CHECK(expanded.near_equal(Polynomial::parse("3 - 2*x1 + 2*x1^2", 1), 1e-12));
}

TEST_CASE("degree-4 membership gives 15 coefficient matching rows in 2 vars") {
    SosProgram prog(2);
    const Polynomial p = Polynomial::parse("(x1^2 + x2^2 + 1)^2", 2);
    prog.add_sos_constraint(ParamPolynomial::from_fixed(p), "quartic");
    const auto compiled = prog.compile();
    CHECK(compiled.groups.at(0).rows.size() == 15);
    CHECK(compiled.problem.block_dims == std::vector<int>{6});
}

TEST_CASE("domain operator structure") {
    SosProgram prog(1);
    SemialgebraicDomain d;
    d.nvars = 1;
    d.inequalities = {Polynomial::parse("1 - x1^2", 1)};
    d.box = {{-1.0, 1.0}};
    const auto dop = domain_operator(prog, d, 0);
    REQUIRE(dop.grams.size() == 2);
    CHECK(prog.gram_block(dop.grams[0].first).basis.size() == 1);
    CHECK(prog.gram_block(dop.grams[1].first).basis.size() == 1);
    CHECK(dop.grams[0].second.near_equal(Polynomial::constant(1, 1.0), 0.0));
    CHECK(dop.grams[1].second.near_equal(Polynomial::parse("1 - x1^2", 1), 0.0));

    SosProgram prog2(1);
    const auto dop2 = domain_operator(prog2, interval_domain(-1.0, 1.0), 2);
    CHECK(dop2.grams.size() == 4);  // nu in {0,1}^2

    // The worked interval example: multipliers against 1+x, 1-x and their
    // product all appear.
    bool has_prod = false;
    for (const auto& [id, w] : dop2.grams)
        if (w.near_equal(Polynomial::parse("(x1 + 1)*(1 - x1)", 1), 1e-12)) has_prod = true;
    CHECK(has_prod);
}

TEST_CASE("domain operator with per-term degree caps") {
    SosProgram prog(1);
    const auto d = interval_domain(-1.0, 1.0);
    const auto dop = domain_operator_capped(prog, d, 4);
    // deg(g) = 1 for both generators, deg(g1*g2) = 2: multipliers 4, 2, 2, 2.
    REQUIRE(dop.grams.size() == 4);
    CHECK(prog.gram_block(dop.grams[0].first).basis.size() == 3);  // degree 4 -> z up to x^2
    CHECK(prog.gram_block(dop.grams[1].first).basis.size() == 2);
    CHECK(prog.gram_block(dop.grams[2].first).basis.size() == 2);
    CHECK(prog.gram_block(dop.grams[3].first).basis.size() == 2);
}

TEST_CASE("preordering membership: any PSD assignment is nonnegative on the domain") {
    SosProgram prog(1);
    const auto d = interval_domain(-1.0, 1.0);
    const auto dop = domain_operator(prog, d, 2);
    std::mt19937_64 rng(5);
    std::vector<Eigen::MatrixXd> gram_vals;
    for (int g = 0; g < prog.num_gram_blocks(); ++g)
        gram_vals.push_back(random_psd(rng, static_cast<int>(prog.gram_block(g).basis.size())));
    const Polynomial value = prog.instantiate(dop, std::vector<double>{}, gram_vals);
    const auto points = sample_domain(d, 1000, 42);
    REQUIRE(points.size() == 1000);
    for (const auto& x : points) CHECK(value.evaluate(x) >= -1e-8);
}

TEST_CASE("boundary operator structure") {
    SosProgram prog(1);
    SemialgebraicDomain d;
    d.nvars = 1;
    d.inequalities = {Polynomial::parse("1 - x1", 1)};
    d.boundary = {Polynomial::parse("x1 - 1", 1)};
    d.box = {{-1.0, 1.0}};

    ParamPolynomial c = ParamPolynomial::from_fixed(Polynomial::constant(1, 3.5));
    const auto elems = boundary_operator(prog, c, d, 0);
    REQUIRE(elems.size() == 1);
    CHECK(elems[0].fixed.near_equal(Polynomial::constant(1, 3.5), 0.0));
    REQUIRE(elems[0].linear.size() == 1);
    CHECK(elems[0].linear[0].second.near_equal(Polynomial::parse("1 - x1", 1), 1e-12));

    SemialgebraicDomain d3 = d;
    d3.boundary = {Polynomial::parse("x1", 1), Polynomial::parse("x1 - 1", 1),
                   Polynomial::parse("x1 + 1", 1)};
    const auto elems3 = boundary_operator(prog, c, d3, 2);
    CHECK(elems3.size() == 3);

    SemialgebraicDomain no_boundary = d;
    no_boundary.boundary.clear();
    CHECK_THROWS_AS(boundary_operator(prog, c, no_boundary, 0), std::invalid_argument);
}

TEST_CASE("check_sos recovers the perfect square") {
    const auto res = check_sos(Polynomial::parse("x1^2 + 2*x1 + 1", 1));
    REQUIRE(res.is_sos);
    Polynomial sum(1);
    for (const auto& f : res.decomposition) sum += f * f;
    CHECK(sum.near_equal(Polynomial::parse("x1^2 + 2*x1 + 1", 1), 1e-6));
    // The Gram matrix is fully pinned: Q = [[1, 1], [1, 1]], a single square.
    CHECK(res.decomposition.size() == 1);
}

TEST_CASE("check_sos rejects -x^2") {
    const auto res = check_sos(Polynomial::parse("-x1^2", 1));
    CHECK_FALSE(res.is_sos);
    CHECK(res.solver_status == sdp::SdpStatus::Infeasible);
}

TEST_CASE("Motzkin polynomial is nonnegative but not SOS") {
    const Polynomial motzkin =
        Polynomial::parse("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2);
    const auto res = check_sos(motzkin);
    CHECK_FALSE(res.is_sos);
    CHECK(res.solver_status == sdp::SdpStatus::Infeasible);
}

TEST_CASE("check_sos on a dense SOS quartic") {
    const Polynomial p = Polynomial::parse("2*x1^4 + 2*x1^3*x2 - x1^2*x2^2 + 5*x2^4", 2);
    const auto res = check_sos(p);
    REQUIRE(res.is_sos);
    CHECK(res.decomposition.size() >= 2);
    Polynomial sum(2);
    for (const auto& f : res.decomposition) sum += f * f;
    CHECK(sum.near_equal(p, 1e-6));
}

TEST_CASE("check_sos rejects odd degree") {
    CHECK_THROWS_AS(check_sos(Polynomial::parse("x1", 1)), std::invalid_argument);
}

TEST_CASE("certified polynomials are nonnegative on sampled points") {
    const Polynomial p = Polynomial::parse("(x1 - 0.3)^2 + 0.001", 1);
    const auto res = check_sos(p);
    REQUIRE(res.is_sos);
    Polynomial sum(1);
    for (const auto& f : res.decomposition) sum += f * f;
    SemialgebraicDomain d = interval_domain(-1.0, 1.0);
    for (const auto& x : sample_domain(d, 1000, 7)) CHECK(sum.evaluate(x) >= -1e-6);
}

TEST_CASE("compile/decompile round trip preserves constraint data") {
    SosProgram prog(1);
    ParamPolynomial expr(1);
    expr.fixed = Polynomial::parse("2*x1^2 - 0.5*x1 + 1", 1);
    const int a = prog.new_free("a");
    const int b = prog.new_free("b");
    expr.add_linear(a, Polynomial::parse("x1^2 - 1", 1));
    expr.add_linear(b, Polynomial::parse("3*x1", 1));
    const auto dop = domain_operator(prog, interval_domain(-1.0, 1.0), 0);
    expr -= dop;
    const std::size_t idx = prog.add_sos_constraint(expr, "test");
    const auto compiled = prog.compile();

    const auto back = prog.decompile_constraint(compiled, idx);
    CHECK(back.fixed.near_equal(expr.fixed, 0.0));
    REQUIRE(back.linear.size() == expr.linear.size());
    for (std::size_t i = 0; i < back.linear.size(); ++i) {
        CHECK(back.linear[i].first == expr.linear[i].first);
        CHECK(back.linear[i].second.near_equal(expr.linear[i].second, 0.0));
    }
    CHECK(back.grams.size() == expr.grams.size());

    // Constraint count is preserved through compilation.
    CHECK(compiled.groups.size() == prog.sos_constraints().size());
}

TEST_CASE("sos feasibility over a domain via multipliers") {
    // Certify 2 + x >= 0 on [-1, 1] (true, not globally SOS-trivial at the
    // stated degree): 2 + x - D(Omega, S) in S[x].
    SosProgram prog(1);
    ParamPolynomial expr = ParamPolynomial::from_fixed(Polynomial::parse("2 + x1", 1));
    expr -= domain_operator(prog, interval_domain(-1.0, 1.0), 0);
    prog.add_sos_constraint(expr, "pos");
    const auto compiled = prog.compile();
    const auto sol = sdp::solve(compiled.problem);
    CHECK(sol.status == sdp::SdpStatus::Optimal);
}

TEST_CASE("program dump mentions constraints and multipliers") {
    SosProgram prog(1);
    auto expr = ParamPolynomial::from_fixed(Polynomial::parse("1 + x1^2", 1));
    expr -= domain_operator(prog, interval_domain(-1.0, 1.0), 0);
    prog.add_sos_constraint(expr, "demo");
    const std::string text = prog.dump();
    CHECK(text.find("demo") != std::string::npos);
    CHECK(text.find("gram") != std::string::npos);
}
