#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "hjbsos/poly.hpp"

using hjbsos::gradient;
using hjbsos::hessian;
using hjbsos::Monomial;
using hjbsos::monomial_basis;
using hjbsos::Polynomial;
using hjbsos::PolyMatrix;

namespace {

Polynomial random_poly(std::mt19937_64& rng, int nvars, int max_degree, int nterms) {
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_int_distribution<int> deg(0, max_degree);
    Polynomial p(nvars);
    for (int t = 0; t < nterms; ++t) {
        std::vector<int> exps(static_cast<std::size_t>(nvars), 0);
        int remaining = deg(rng);
        for (int v = 0; v < nvars && remaining > 0; ++v) {
            std::uniform_int_distribution<int> pick(0, remaining);
            const int e = pick(rng);
            exps[static_cast<std::size_t>(v)] = e;
            remaining -= e;
        }
        p.add_term(Monomial(std::move(exps)), coeff(rng));
    }
    return p;
}

std::vector<double> random_point(std::mt19937_64& rng, int nvars) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(nvars));
    for (auto& v : x) v = u(rng);
    return x;
}

}  // namespace

TEST_CASE("monomial ordering is graded lexicographic") {
    const auto basis = monomial_basis(2, 2);
    REQUIRE(basis.size() == 6);
    CHECK(basis[0].exponents() == std::vector<int>{0, 0});
    CHECK(basis[1].exponents() == std::vector<int>{1, 0});
    CHECK(basis[2].exponents() == std::vector<int>{0, 1});
    CHECK(basis[3].exponents() == std::vector<int>{2, 0});
    CHECK(basis[4].exponents() == std::vector<int>{1, 1});
    CHECK(basis[5].exponents() == std::vector<int>{0, 2});
}

TEST_CASE("addition cancels and keeps canonical form") {
    const Polynomial a = Polynomial::parse("x1^2 + 1", 1);
    const Polynomial b = Polynomial::parse("-x1^2 + x1", 1);
    const Polynomial sum = a + b;
    CHECK(sum.near_equal(Polynomial::parse("x1 + 1", 1), 0.0));
    CHECK(sum.term_count() == 2);

    const Polynomial zero(1);
    CHECK((a + zero).near_equal(a, 0.0));

    std::mt19937_64 rng(7);
    const Polynomial c = Polynomial::parse("2*x1 + 3", 1) + Polynomial::parse("5*x1 - 3", 1);
    CHECK(c.near_equal(Polynomial::parse("7*x1", 1), 1e-12));
    for (int i = 0; i < 5; ++i) {
        const auto x = random_point(rng, 1);
        CHECK(c.evaluate(x) == doctest::Approx(7.0 * x[0]).epsilon(1e-12));
    }
}

TEST_CASE("multiplication distributes and respects degree") {
    const Polynomial p = Polynomial::parse("x1 + 1", 1) * Polynomial::parse("x1 - 1", 1);
    CHECK(p.near_equal(Polynomial::parse("x1^2 - 1", 1), 1e-14));

    const Polynomial q = Polynomial::parse("3*x1^4 - 2*x1 + 0.5", 1);
    CHECK((q * Polynomial::constant(1, 1.0)).near_equal(q, 0.0));

    const Polynomial xy = Polynomial::parse("(x1 + x2)^2", 2);
    CHECK(xy.near_equal(Polynomial::parse("x1^2 + 2*x1*x2 + x2^2", 2), 1e-14));
    CHECK(xy.degree() == 2);

    CHECK_THROWS(Polynomial::parse("x1", 1) * Polynomial::parse("x1", 2));
}

TEST_CASE("differentiation") {
    CHECK(Polynomial::parse("x1^3", 1).differentiate(0).near_equal(
        Polynomial::parse("3*x1^2", 1), 0.0));
    CHECK(Polynomial::parse("x2^2", 2).differentiate(0).is_zero());
    CHECK(Polynomial::parse("x1^2*x2 + x2^2", 2).differentiate(1).near_equal(
        Polynomial::parse("x1^2 + 2*x2", 2), 0.0));
    CHECK_THROWS(Polynomial::parse("x1", 1).differentiate(1));
}

TEST_CASE("gradient and hessian") {
    const Polynomial p = Polynomial::parse("x1^2 + x2^2", 2);
    const PolyMatrix h = hessian(p);
    CHECK(h.at(0, 0).near_equal(Polynomial::constant(2, 2.0), 0.0));
    CHECK(h.at(1, 1).near_equal(Polynomial::constant(2, 2.0), 0.0));
    CHECK(h.at(0, 1).is_zero());

    const PolyMatrix g = gradient(Polynomial::constant(2, 4.2));
    CHECK(g.at(0, 0).is_zero());
    CHECK(g.at(1, 0).is_zero());

    const PolyMatrix h2 = hessian(Polynomial::parse("x1^2*x2", 2));
    CHECK(h2.at(0, 0).near_equal(Polynomial::parse("2*x2", 2), 0.0));
    CHECK(h2.at(0, 1).near_equal(Polynomial::parse("2*x1", 2), 0.0));
    CHECK(h2.at(1, 0).near_equal(h2.at(0, 1), 0.0));
    CHECK(h2.at(1, 1).is_zero());
}

TEST_CASE("evaluation") {
    const std::vector<double> one{1.0};
    CHECK(Polynomial::parse("x1^2 - 1", 1).evaluate(one) == doctest::Approx(0.0));

    const Polynomial p = Polynomial::parse("4*x1^3 - 2*x1 + 7.5", 1);
    const std::vector<double> zero{0.0};
    CHECK(p.evaluate(zero) == doctest::Approx(7.5));

    // -x^3 + 5x^2 + 3x at x = -0.5: 0.125 + 1.25 - 1.5
    const Polynomial f = Polynomial::parse("-x1^3 + 5*x1^2 + 3*x1", 1);
    const std::vector<double> pt{-0.5};
    CHECK(f.evaluate(pt) == doctest::Approx(-0.125).epsilon(1e-12));

    CHECK_THROWS(p.evaluate(std::vector<double>{1.0, 2.0}));
}

TEST_CASE("dense coefficient extraction") {
    const Polynomial p = Polynomial::parse("x1^2 - 1", 1);
    const auto coeffs = p.coefficients_in_basis(2);
    CHECK(coeffs == std::vector<double>{-1.0, 0.0, 1.0});

    const Polynomial zero(2);
    const auto zc = zero.coefficients_in_basis(3);
    CHECK(zc.size() == monomial_basis(2, 3).size());
    for (double c : zc) CHECK(c == 0.0);

    std::mt19937_64 rng(3);
    const Polynomial q = random_poly(rng, 2, 4, 8);
    const auto qc = q.coefficients_in_basis(4);
    const Polynomial back = Polynomial::from_basis_coefficients(2, 4, qc);
    CHECK(back.near_equal(q, 0.0));

    CHECK_THROWS(Polynomial::parse("x1^3", 1).coefficients_in_basis(2));
}

TEST_CASE("ring axioms on random polynomials") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        const int nvars = 1 + trial % 3;
        const Polynomial p = random_poly(rng, nvars, 3, 6);
        const Polynomial q = random_poly(rng, nvars, 3, 6);
        const Polynomial r = random_poly(rng, nvars, 3, 6);
        const Polynomial lhs = (p + q) * r;
        const Polynomial rhs = p * r + q * r;
        for (int i = 0; i < 20; ++i) {
            const auto x = random_point(rng, nvars);
            const double a = lhs.evaluate(x);
            const double b = rhs.evaluate(x);
            CHECK(std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("product rule holds as exact coefficient identity") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 6; ++trial) {
        const int nvars = 1 + trial % 2;
        const Polynomial p = random_poly(rng, nvars, 4, 6);
        const Polynomial q = random_poly(rng, nvars, 4, 6);
        for (int v = 0; v < nvars; ++v) {
            const Polynomial lhs = (p * q).differentiate(v);
            const Polynomial rhs = p * q.differentiate(v) + q * p.differentiate(v);
            CHECK(lhs.near_equal(rhs, 1e-12));
        }
    }
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(17);
    const double step = 1e-5;
    for (int nvars = 1; nvars <= 3; ++nvars) {
        const Polynomial p = random_poly(rng, nvars, 8, 10);
        const PolyMatrix g = gradient(p);
        for (int rep = 0; rep < 10; ++rep) {
            auto x = random_point(rng, nvars);
            for (int v = 0; v < nvars; ++v) {
                auto xp = x;
                auto xm = x;
                xp[static_cast<std::size_t>(v)] += step;
                xm[static_cast<std::size_t>(v)] -= step;
                const double fd = (p.evaluate(xp) - p.evaluate(xm)) / (2.0 * step);
                CHECK(std::abs(g.at(v, 0).evaluate(x) - fd) <= 1e-6);
            }
        }
    }
}

TEST_CASE("text round trip is exact") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const int nvars = 1 + trial % 3;
        const Polynomial p = random_poly(rng, nvars, 5, 7);
        const Polynomial back = Polynomial::parse(p.to_string(), nvars);
        REQUIRE(back.term_count() == p.term_count());
        for (const auto& [m, c] : p.terms()) CHECK(back.coefficient(m) == c);
    }
    CHECK(Polynomial(2).to_string() == "0");
    CHECK(Polynomial::parse("0", 2).is_zero());
}

TEST_CASE("parser accepts custom variable names and reports errors") {
    const Polynomial f = Polynomial::parse("-x^3 + 5*x^2 + 3*x", std::vector<std::string>{"x"});
    CHECK(f.near_equal(Polynomial::parse("-x1^3 + 5*x1^2 + 3*x1", 1), 0.0));

    CHECK_THROWS_AS(Polynomial::parse("x + y", std::vector<std::string>{"x"}),
                    std::invalid_argument);
    CHECK_THROWS(Polynomial::parse("1 +", 1));
    CHECK_THROWS(Polynomial::parse("(1 + x1", 1));
}

TEST_CASE("poly matrix products") {
    PolyMatrix a(1, 2, 2);
    a.at(0, 0) = Polynomial::parse("x1", 2);
    a.at(0, 1) = Polynomial::parse("x2", 2);
    const PolyMatrix ata = a.transpose() * a;
    CHECK(ata.rows() == 2);
    CHECK(ata.at(0, 1).near_equal(Polynomial::parse("x1*x2", 2), 0.0));
    CHECK(ata.trace().near_equal(Polynomial::parse("x1^2 + x2^2", 2), 0.0));
}
