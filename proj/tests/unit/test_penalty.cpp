#include <doctest.h>

#include "ncvine/penalty.hpp"

#include <random>

using namespace ncvine;

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace

TEST_CASE("difference matrices") {
    const Eigen::MatrixXd L = difference_matrix(5, 1);
    REQUIRE(L.rows() == 4);
    Eigen::RowVectorXd first(5);
    first << 1, -1, 0, 0, 0;
    CHECK(L.row(0) == first);
    Eigen::RowVectorXd second(5);
    second << 0, 1, -1, 0, 0;
    CHECK(L.row(1) == second);

    for (int K = 2; K <= 9; ++K)
        CHECK((difference_matrix(K, 1) * Eigen::VectorXd::Ones(K)).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd L2 = difference_matrix(7, 2);
    CHECK(L2 == difference_matrix(6, 1) * difference_matrix(7, 1));
    CHECK_THROWS(difference_matrix(3, 3));
    CHECK_THROWS(difference_matrix(3, 0));
}

TEST_CASE("density weights") {
    const Eigen::VectorXd w1 = density_weights(1);
    CHECK(w1[0] == doctest::Approx(0.25));
    CHECK(w1[1] == doctest::Approx(0.5));
    CHECK(w1[2] == doctest::Approx(0.25));
    const Eigen::VectorXd w2 = density_weights(2);
    const double expected[] = {0.125, 0.25, 0.25, 0.25, 0.125};
    for (int k = 0; k < 5; ++k)
        CHECK(w2[k] == doctest::Approx(expected[k]));
    for (int d = 1; d <= 5; ++d)
        CHECK(density_weights(d).sum() == doctest::Approx(1.0));
}

TEST_CASE("univariate penalty annihilates the constant density") {
    for (int d = 1; d <= 4; ++d) {
        // constant density one has density-basis coefficients w_k
        const Eigen::VectorXd w = density_weights(d);
        CHECK((univariate_penalty(d, 1) * w).cwiseAbs().maxCoeff() < 1e-12);
    }
    const SparseBasisSpec spec{2, 4, 2};
    const auto& idx = sparse_index(spec);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(idx.size());
    for (int c = 0; c < idx.size(); ++c)
        if (idx.multi[c][0] < 2 && idx.multi[c][1] < 2)
            b[c] = 0.25;
    const PenaltyMatrix P = assemble_penalty(spec, 1, 1.0);
    CHECK(std::abs(b.dot(P.matrix() * b)) < 1e-12);
    CHECK(P.eigen->null_dim == 1);
}

TEST_CASE("univariate penalty rank") {
    for (int d = 1; d <= 4; ++d)
        for (int r = 1; r <= 2; ++r) {
            const Eigen::MatrixXd P = univariate_penalty(d, r);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(P);
            lu.setThreshold(1e-12);
            CHECK(lu.rank() == (1 << d) + 1 - r);
        }
}

TEST_CASE("assembled penalty is symmetric PSD and linear in lambda") {
    for (const SparseBasisSpec spec : {SparseBasisSpec{2, 4, 2}, SparseBasisSpec{2, 2, 2},
                                       SparseBasisSpec{2, 6, 3}, SparseBasisSpec{3, 6, 2},
                                       SparseBasisSpec{2, 4, 3}}) {
        const PenaltyMatrix P = assemble_penalty(spec, 1, 1.7);
        const Eigen::MatrixXd M = P.matrix();
        CHECK(M.rows() == sparse_basis_size(spec));
        CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        const Eigen::MatrixXd M2 = assemble_penalty(spec, 1, 3.4).matrix();
        CHECK((M2 - 2.0 * M).cwiseAbs().maxCoeff() < 1e-14);

        std::mt19937_64 rng(5);
        std::normal_distribution<double> g;
        for (int t = 0; t < 20; ++t) {
            Eigen::VectorXd b(M.rows());
            for (auto& x : b)
                x = g(rng);
            CHECK(b.dot(M * b) >= -1e-12);
        }
        CHECK(P.eigen->null_dim + P.eigen->values.size() == M.rows());
        CHECK(P.eigen->values.minCoeff() > 0.0);
    }
}

TEST_CASE("full penalty equals the dense Kronecker penalty conjugated by the hierarchical transform") {
    const SparseBasisSpec spec{2, 4, 2};
    const auto [A, e] = hierarchical_transform(2);
    // knot values of the density are b_k / w_k
    const Eigen::VectorXd w = density_weights(2).cwiseInverse();
    const Eigen::MatrixXd W2 = w.cwiseAbs2().asDiagonal();
    const Eigen::MatrixXd L = difference_matrix(5, 1);
    const Eigen::MatrixXd P = w.asDiagonal() * L.transpose() * L * w.asDiagonal();
    const Eigen::MatrixXd dense = kron(W2, P) + kron(P, W2);
    const Eigen::MatrixXd T = kron(A.matrix, A.matrix);
    const Eigen::MatrixXd expected = T.transpose() * dense * T;
    const Eigen::MatrixXd got = assemble_penalty(spec, 1, 1.0).matrix();
    CHECK((expected - got).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("restriction consistency across sparsity levels") {
    const SparseBasisSpec full{2, 6, 3};
    const SparseBasisSpec sparse{2, 4, 3};
    const auto& fi = sparse_index(full);
    const auto& si = sparse_index(sparse);
    const Eigen::MatrixXd Pf = assemble_penalty(full, 1, 1.0).matrix();
    const Eigen::MatrixXd Ps = assemble_penalty(sparse, 1, 1.0).matrix();
    std::vector<int> map;
    for (int pos : si.positions) {
        auto it = std::find(fi.positions.begin(), fi.positions.end(), pos);
        REQUIRE(it != fi.positions.end());
        map.push_back(static_cast<int>(it - fi.positions.begin()));
    }
    double diff = 0.0;
    for (std::size_t a = 0; a < map.size(); ++a)
        for (std::size_t b = 0; b < map.size(); ++b)
            diff = std::max(diff, std::abs(Ps(a, b) - Pf(map[a], map[b])));
    CHECK(diff < 1e-15);
}
