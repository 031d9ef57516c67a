#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dpc/fock.hpp"

namespace dpc {

inline const std::string kPlus = "+";
inline const std::string kMinus = "-";

/// Labeled set of measurement operators on a truncated Fock space.
/// `complete` is false for blocks cut out of a larger POVM, where the
/// elements are positive but need not resolve the identity.
struct PovmSet {
    long dim = 0;
    std::vector<std::string> labels;
    std::vector<CMatrix> elements;
    bool complete = true;

    std::size_t size() const { return elements.size(); }

    std::size_t index_of(const std::string& label) const {
        const auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) throw InvalidInput("povm has no element labeled '" + label + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }

    const CMatrix& at(const std::string& label) const { return elements[index_of(label)]; }

    CMatrix sum() const {
        CMatrix s = CMatrix::Zero(dim, dim);
        for (const auto& e : elements) s += e;
        return s;
    }
};

struct PovmDiagnostics {
    double max_hermitian_defect = 0.0;  // max |A - A^dag| over elements
    double min_eigenvalue = 0.0;        // smallest over elements
    double completeness_defect = 0.0;   // || sum - I ||_F
};

inline PovmDiagnostics diagnose(const PovmSet& povm) {
    PovmDiagnostics d;
    d.min_eigenvalue = 1.0;
    for (const auto& e : povm.elements) {
        d.max_hermitian_defect = std::max(d.max_hermitian_defect, detail::max_abs(e - e.adjoint()));
        Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(e), Eigen::EigenvaluesOnly);
        d.min_eigenvalue = std::min(d.min_eigenvalue, solver.eigenvalues()(0));
    }
    d.completeness_defect = (povm.sum() - CMatrix::Identity(povm.dim, povm.dim)).norm();
    return d;
}

/// Throws InvalidInput when shapes disagree. Numerical constraints are
/// reported by diagnose().
inline void check_shape(const PovmSet& povm) {
    if (povm.dim < 1) throw InvalidInput("povm dimension must be >= 1");
    if (povm.labels.size() != povm.elements.size()) throw InvalidInput("povm labels/elements count mismatch");
    for (const auto& e : povm.elements) {
        if (e.rows() != povm.dim || e.cols() != povm.dim) throw InvalidInput("povm element has wrong shape");
    }
}

inline PovmSet binary_povm(CMatrix plus, long dim) {
    PovmSet p;
    p.dim = dim;
    p.labels = {kPlus, kMinus};
    CMatrix minus = CMatrix::Identity(dim, dim) - plus;
    p.elements = {std::move(plus), std::move(minus)};
    return p;
}

}  // namespace dpc
