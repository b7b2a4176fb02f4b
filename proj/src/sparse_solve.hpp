#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace rbpsc::detail {

/// Solves the sparse system built from triplets and returns x with the
/// sup-norm residual of A x = b.
inline std::vector<double> sparse_solve(std::size_t n, const std::vector<Eigen::Triplet<double>>& triplets,
                                 const std::vector<double>& rhs, double& residual) {
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("sparse factorization failed");
    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd x = lu.solve(b);
    residual = (a * x - b).cwiseAbs().maxCoeff();
    return {x.data(), x.data() + x.size()};
}

} // namespace rbpsc::detail
